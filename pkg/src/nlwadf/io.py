"""Reading and writing grayscale images: PGM (P2/P5) and a MetaImage subset.

MetaImage support covers 2D/3D scalar images with ``NDims``, ``DimSize``,
``ElementType`` (MET_UCHAR, MET_SHORT, MET_USHORT, MET_FLOAT, MET_DOUBLE),
optional ``ElementSpacing`` and ``ElementDataFile`` (``LOCAL`` or a sibling
raw file). Payloads are little-endian; big-endian and compressed payloads
are rejected.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .volume import Volume

__all__ = [
    "ELEMENT_TYPES",
    "VolumeFileHeader",
    "VolumeFormatError",
    "read_header",
    "read_volume",
    "write_volume",
]

logger = logging.getLogger(__name__)

ELEMENT_TYPES = {
    "uint8": ("MET_UCHAR", np.dtype("<u1")),
    "int16": ("MET_SHORT", np.dtype("<i2")),
    "uint16": ("MET_USHORT", np.dtype("<u2")),
    "float32": ("MET_FLOAT", np.dtype("<f4")),
    "float64": ("MET_DOUBLE", np.dtype("<f8")),
}
_MET_TO_TYPE = {met: name for name, (met, _) in ELEMENT_TYPES.items()}
_FORMATS = ("pgm-p2", "pgm-p5", "metaimage")
_WHITESPACE = b" \t\n\r\v\f"


class VolumeFormatError(ValueError):
    """Malformed or unsupported image file. ``offset`` is the byte position, if known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True)
class VolumeFileHeader:
    format: str
    dims: tuple[int, ...]
    element_type: str
    spacing: tuple[float, ...]
    data_offset: int
    data_file: Path | None = None
    maxval: int | None = None

    @property
    def payload_bytes(self) -> int:
        if self.format == "pgm-p2":
            return 0
        return math.prod(self.dims) * ELEMENT_TYPES[self.element_type][1].itemsize


# --- PGM -------------------------------------------------------------------

def _pgm_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c == b"#":
            end = buf.find(b"\n", pos)
            pos = n if end < 0 else end + 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and buf[pos:pos + 1] not in _WHITESPACE and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise VolumeFormatError("unexpected end of PGM header", start)
    return buf[start:pos], pos


def _pgm_int(buf: bytes, pos: int, what: str) -> tuple[int, int]:
    start = pos
    tok, pos = _pgm_token(buf, pos)
    if not tok.isdigit() or len(tok) > 18:
        raise VolumeFormatError(f"PGM {what} is not a reasonable integer: {tok[:20]!r}", start)
    return int(tok), pos


def _parse_pgm(buf: bytes) -> tuple[VolumeFileHeader, np.ndarray]:
    magic = buf[:2]
    if magic not in (b"P2", b"P5"):
        raise VolumeFormatError(f"not a PGM file (magic {magic!r})", 0)
    fmt = "pgm-p2" if magic == b"P2" else "pgm-p5"
    pos = 2
    if pos >= len(buf) or (buf[pos:pos + 1] not in _WHITESPACE and buf[pos:pos + 1] != b"#"):
        raise VolumeFormatError("PGM magic must be followed by whitespace", pos)
    width, pos = _pgm_int(buf, pos, "width")
    height, pos = _pgm_int(buf, pos, "height")
    maxval, pos = _pgm_int(buf, pos, "maxval")
    if width == 0 or height == 0:
        raise VolumeFormatError(f"PGM dimensions must be positive, got {width}x{height}", pos)
    if not 0 < maxval <= 65535:
        raise VolumeFormatError(f"PGM maxval must lie in 1..65535, got {maxval}", pos)
    npix = width * height
    etype = "uint8" if maxval < 256 else "uint16"

    if fmt == "pgm-p5":
        if pos >= len(buf) or buf[pos:pos + 1] not in _WHITESPACE:
            raise VolumeFormatError("PGM raster must follow a single whitespace byte", pos)
        pos += 1
        dtype = np.dtype(">u1") if maxval < 256 else np.dtype(">u2")
        expected = npix * dtype.itemsize
        available = len(buf) - pos
        if available < expected:
            raise VolumeFormatError(
                f"truncated PGM payload: expected {expected} bytes, got {available}", pos)
        raw = np.frombuffer(buf, dtype=dtype, count=npix, offset=pos)
    else:
        # every ASCII sample takes at least one byte
        if npix > len(buf) - pos:
            raise VolumeFormatError(
                f"truncated PGM payload: {npix} samples cannot fit in {len(buf) - pos} bytes", pos)
        body = buf[pos:]
        if b"#" in body:
            raise VolumeFormatError("comments inside the PGM raster are not supported", pos)
        tokens = body.split()
        if len(tokens) < npix:
            raise VolumeFormatError(
                f"truncated PGM payload: expected {npix} samples, got {len(tokens)}", pos)
        tokens = tokens[:npix]
        if not all(t.isdigit() and len(t) <= 18 for t in tokens):
            raise VolumeFormatError("PGM raster contains a non-integer sample", pos)
        raw = np.array([int(t) for t in tokens], dtype=np.int64)
    if raw.size and int(raw.max()) > maxval:
        raise VolumeFormatError(f"PGM sample {int(raw.max())} exceeds maxval {maxval}", pos)
    header = VolumeFileHeader(fmt, (width, height), etype, (1.0, 1.0), pos, None, maxval)
    return header, raw.astype(np.float64).reshape(height, width)


# --- MetaImage -------------------------------------------------------------

def _parse_meta_header(buf: bytes) -> tuple[dict[str, str], int]:
    fields: dict[str, str] = {}
    pos = 0
    n = len(buf)
    while pos < n:
        end = buf.find(b"\n", pos)
        line_end = n if end < 0 else end
        next_pos = n if end < 0 else end + 1
        raw = buf[pos:line_end].rstrip(b"\r")
        try:
            line = raw.decode("ascii")
        except UnicodeDecodeError:
            raise VolumeFormatError("MetaImage header is not ASCII", pos) from None
        if line.strip():
            if "=" not in line:
                raise VolumeFormatError(f"MetaImage header line lacks '=': {line[:40]!r}", pos)
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise VolumeFormatError("MetaImage header line has an empty key", pos)
            fields[key] = value
            if key == "ElementDataFile":
                return fields, next_pos
        pos = next_pos
    raise VolumeFormatError("MetaImage header has no ElementDataFile entry", n)


def _ints(value: str, key: str) -> list[int]:
    try:
        return [int(v) for v in value.split()]
    except ValueError:
        raise VolumeFormatError(f"MetaImage {key} must be integers, got {value[:40]!r}") from None


def _floats(value: str, key: str) -> list[float]:
    try:
        out = [float(v) for v in value.split()]
    except ValueError:
        raise VolumeFormatError(f"MetaImage {key} must be numbers, got {value[:40]!r}") from None
    if not all(math.isfinite(v) and v > 0 for v in out):
        raise VolumeFormatError(f"MetaImage {key} must be positive and finite, got {value[:40]!r}")
    return out


def _is_true(value: str) -> bool:
    return value.strip().lower() in ("true", "1", "yes")


def _meta_header(buf: bytes, path: Path) -> VolumeFileHeader:
    fields, offset = _parse_meta_header(buf)
    for key in ("NDims", "DimSize", "ElementType"):
        if key not in fields:
            raise VolumeFormatError(f"MetaImage header is missing {key}")
    ndims = _ints(fields["NDims"], "NDims")
    if len(ndims) != 1 or ndims[0] not in (2, 3):
        raise VolumeFormatError(f"MetaImage NDims must be 2 or 3, got {fields['NDims'][:20]!r}")
    ndim = ndims[0]
    dims = _ints(fields["DimSize"], "DimSize")
    if len(dims) != ndim or any(d <= 0 for d in dims):
        raise VolumeFormatError(f"MetaImage DimSize must list {ndim} positive sizes")
    met = fields["ElementType"]
    if met not in _MET_TO_TYPE:
        raise VolumeFormatError(f"unsupported MetaImage ElementType {met[:20]!r}")
    for key in ("BinaryDataByteOrderMSB", "ElementByteOrderMSB", "ByteOrderMSB"):
        if key in fields and _is_true(fields[key]):
            raise VolumeFormatError(f"big-endian payloads are not supported ({key} = True)")
    if "CompressedData" in fields and _is_true(fields["CompressedData"]):
        raise VolumeFormatError("compressed MetaImage payloads are not supported")
    if "BinaryData" in fields and not _is_true(fields["BinaryData"]):
        raise VolumeFormatError("ASCII MetaImage payloads are not supported")
    if fields.get("ElementNumberOfChannels", "1").strip() != "1":
        raise VolumeFormatError("multi-channel MetaImage files are not supported")
    if fields.get("HeaderSize", "0").strip() != "0":
        raise VolumeFormatError("MetaImage HeaderSize is not supported")
    spacing = tuple(_floats(fields["ElementSpacing"], "ElementSpacing")) \
        if "ElementSpacing" in fields else (1.0,) * ndim
    if len(spacing) != ndim:
        raise VolumeFormatError(f"MetaImage ElementSpacing must list {ndim} values")
    data_ref = fields["ElementDataFile"]
    data_file = None
    if data_ref != "LOCAL":
        if (not data_ref or data_ref.upper().startswith("LIST") or "%" in data_ref
                or "\x00" in data_ref):
            raise VolumeFormatError(f"unsupported ElementDataFile {data_ref[:40]!r}")
        data_file = path.parent / data_ref
        offset = 0
    return VolumeFileHeader("metaimage", tuple(dims), _MET_TO_TYPE[met], spacing, offset, data_file)


def _parse_meta(buf: bytes, path: Path) -> tuple[VolumeFileHeader, np.ndarray]:
    header = _meta_header(buf, path)
    if header.data_file is None:
        payload = buf
    else:
        try:
            payload = header.data_file.read_bytes()
        except (OSError, ValueError) as exc:
            raise VolumeFormatError(f"cannot read MetaImage data file {header.data_file}: {exc}") from None
    dtype = ELEMENT_TYPES[header.element_type][1]
    expected = header.payload_bytes
    available = len(payload) - header.data_offset
    if available != expected:
        kind = "truncated" if available < expected else "oversized"
        raise VolumeFormatError(
            f"{kind} MetaImage payload: expected {expected} bytes, got {available}",
            header.data_offset)
    data = np.frombuffer(payload, dtype=dtype, offset=header.data_offset,
                         count=math.prod(header.dims))
    return header, data.astype(np.float64).reshape(tuple(reversed(header.dims)))


# --- public API ------------------------------------------------------------

def _parse(buf: bytes, path: Path) -> tuple[VolumeFileHeader, np.ndarray]:
    if buf[:2] in (b"P2", b"P5"):
        return _parse_pgm(buf)
    return _parse_meta(buf, path)


def read_header(path) -> VolumeFileHeader:
    path = Path(path)
    buf = path.read_bytes()
    if buf[:2] in (b"P2", b"P5"):
        return _parse_pgm(buf)[0]
    return _meta_header(buf, path)


def read_volume(path) -> Volume:
    """Read a PGM or MetaImage file into a float64 ``Volume``.

    Raises ``FileNotFoundError`` for a missing file and ``VolumeFormatError``
    for anything malformed or unsupported.
    """
    path = Path(path)
    buf = path.read_bytes()
    header, data = _parse(buf, path)
    if not np.all(np.isfinite(data)):
        raise VolumeFormatError(f"{path} contains NaN or infinite samples")
    return Volume(data, header.spacing)


def _infer_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        return "pgm-p5"
    if suffix in (".mha", ".mhd"):
        return "metaimage"
    raise ValueError(f"cannot infer image format from suffix {suffix!r}; pass format=")


def _quantize(data: np.ndarray, element_type: str) -> tuple[np.ndarray, int]:
    dtype = ELEMENT_TYPES[element_type][1]
    if dtype.kind == "f":
        return data.astype(dtype), 0
    info = np.iinfo(dtype)
    rounded = np.rint(data)
    clamped = int(np.count_nonzero((rounded < info.min) | (rounded > info.max)))
    return np.clip(rounded, info.min, info.max).astype(dtype), clamped


def _default_type(fmt: str, data: np.ndarray) -> str:
    if fmt == "metaimage":
        return "float64"
    return "uint8" if np.rint(data).max() <= 255 else "uint16"


def write_volume(volume, path, format: str | None = None, element_type: str | None = None) -> int:
    """Write ``volume`` and return how many samples were clamped to the type range.

    Integer element types round half to even before clamping. ``format`` is
    inferred from the suffix when omitted (``.pgm`` gives binary P5; ``.mha``
    embeds the payload, ``.mhd`` writes a sibling ``.raw``). The default
    element type is float64 for MetaImage and uint8/uint16 for PGM.
    """
    path = Path(path)
    if isinstance(volume, Volume):
        data, spacing = volume.data, volume.spacing
    else:
        data = np.asarray(volume, dtype=np.float64)
        spacing = (1.0,) * data.ndim
    if data.ndim not in (2, 3):
        raise ValueError(f"expected a 2D or 3D volume, got shape {data.shape}")
    fmt = format or _infer_format(path)
    if fmt not in _FORMATS:
        raise ValueError(f"format must be one of {_FORMATS}, got {fmt!r}")
    etype = element_type or _default_type(fmt, data)
    if etype not in ELEMENT_TYPES:
        raise ValueError(f"element type must be one of {tuple(ELEMENT_TYPES)}, got {etype!r}")

    if fmt.startswith("pgm"):
        if data.ndim != 2:
            raise ValueError("PGM holds 2D images only; use MetaImage for 3D volumes")
        if etype not in ("uint8", "uint16"):
            raise ValueError(f"PGM stores uint8 or uint16 samples, not {etype}")
    values, clamped = _quantize(data, etype)
    if clamped:
        logger.warning("%d samples clamped to the %s range while writing %s", clamped, etype, path)

    if fmt == "pgm-p5":
        maxval = 255 if etype == "uint8" else 65535
        header = f"P5\n{data.shape[1]} {data.shape[0]}\n{maxval}\n".encode("ascii")
        path.write_bytes(header + values.astype(">u1" if etype == "uint8" else ">u2").tobytes())
    elif fmt == "pgm-p2":
        maxval = 255 if etype == "uint8" else 65535
        lines = [f"P2\n{data.shape[1]} {data.shape[0]}\n{maxval}"]
        for row in values:
            lines.append(" ".join(str(int(v)) for v in row))
        path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")
    else:
        dims = " ".join(str(d) for d in reversed(data.shape))
        spacing_txt = " ".join(repr(float(s)) for s in spacing)
        payload = values.astype(ELEMENT_TYPES[etype][1]).tobytes()
        if path.suffix.lower() == ".mhd":
            raw_path = path.with_suffix(".raw")
            data_ref = raw_path.name
        else:
            raw_path, data_ref = None, "LOCAL"
        header = (
            "ObjectType = Image\n"
            f"NDims = {data.ndim}\n"
            "BinaryData = True\n"
            "BinaryDataByteOrderMSB = False\n"
            "CompressedData = False\n"
            f"DimSize = {dims}\n"
            f"ElementSpacing = {spacing_txt}\n"
            f"ElementType = {ELEMENT_TYPES[etype][0]}\n"
            f"ElementDataFile = {data_ref}\n"
        ).encode("ascii")
        if raw_path is None:
            path.write_bytes(header + payload)
        else:
            raw_path.write_bytes(payload)
            path.write_bytes(header)
    return clamped
