"""Pure-numpy kernels.

Same contracts as the numba kernels. Every function works on 3D float64
arrays of shape ``(nz, ny, nx)``; 2D images arrive as ``(1, ny, nx)``.
Offsets are ``(K, 3)`` int64 arrays in ``(dz, dy, dx)`` order.
"""

import math

import numpy as np

NAME = "numpy"

_SQRT5 = math.sqrt(5.0)
_NO_INDEX = np.iinfo(np.int64).max


def _shifted(img, off, periodic):
    """Return ``(values, mask)`` with ``values[x] = img[x + off]``.

    ``mask`` is None under periodic wrap (every neighbor exists).
    """
    if periodic:
        return np.roll(img, shift=tuple(-int(o) for o in off), axis=(0, 1, 2)), None
    vals = np.zeros_like(img)
    mask = np.zeros(img.shape, dtype=bool)
    if any(abs(int(o)) >= n for o, n in zip(off, img.shape)):
        return vals, mask
    dst = tuple(slice(max(0, -int(o)), n - max(0, int(o))) for o, n in zip(off, img.shape))
    src = tuple(slice(max(0, int(o)), n + min(0, int(o))) for o, n in zip(off, img.shape))
    vals[dst] = img[src]
    mask[dst] = True
    return vals, mask


def _tukey(diff, lim):
    u = diff / lim
    g = (1.0 - u * u) ** 2
    return np.where(np.abs(diff) <= lim, g, 0.0)


def diffuse(img, offsets, weights, gamma, periodic, links, link_weight):
    lim = _SQRT5 * gamma
    acc = np.zeros_like(img)
    cnt = np.zeros(img.shape, dtype=np.int64)
    for k in range(offsets.shape[0]):
        vals, mask = _shifted(img, offsets[k], periodic)
        diff = vals - img
        term = _tukey(diff, lim) * diff * weights[k]
        if mask is None:
            acc += term
            cnt += 1
        else:
            acc += np.where(mask, term, 0.0)
            cnt += mask
    if links.shape[1]:
        flat = img.ravel()
        acc_f = acc.ravel()
        cnt_f = cnt.ravel()
        for j in range(links.shape[1]):
            q = links[:, j]
            valid = q >= 0
            diff = flat[np.where(valid, q, 0)] - flat
            term = _tukey(diff, lim) * diff * link_weight
            acc_f += np.where(valid, term, 0.0)
            cnt_f += valid
    out = img.copy()
    nz = cnt > 0
    out[nz] = img[nz] + acc[nz] / cnt[nz]
    return out


def gradient_sum(img, offsets, periodic):
    total = np.zeros_like(img)
    for k in range(offsets.shape[0]):
        vals, mask = _shifted(img, offsets[k], periodic)
        diff = img - vals
        total += diff if mask is None else np.where(mask, diff, 0.0)
    return total


def median(img, offsets, periodic):
    stack = np.empty((offsets.shape[0] + 1,) + img.shape)
    stack[0] = img
    for k in range(offsets.shape[0]):
        vals, mask = _shifted(img, offsets[k], periodic)
        stack[k + 1] = vals if mask is None else np.where(mask, vals, np.nan)
    return np.nanmedian(stack, axis=0)


def _less(a_ssd, a_d, a_q, b_ssd, b_d, b_q):
    return (a_ssd < b_ssd) | (
        (a_ssd == b_ssd) & ((a_d < b_d) | ((a_d == b_d) & (a_q < b_q)))
    )


def build_links(guide, cand_offsets, cand_dist, patch_offsets, num_patches, periodic):
    shape = guide.shape
    n = guide.size
    flat_idx = np.arange(n, dtype=np.int64).reshape(shape)

    best_ssd = np.full((num_patches, n), np.inf)
    best_d = np.full((num_patches, n), np.inf)
    best_q = np.full((num_patches, n), _NO_INDEX, dtype=np.int64)

    patch_views = [_shifted(guide, o, periodic) for o in patch_offsets]
    for c in range(cand_offsets.shape[0]):
        coff = cand_offsets[c]
        q_idx, q_mask = _shifted(flat_idx, coff, periodic)
        acc = np.zeros(shape)
        cnt = np.zeros(shape, dtype=np.int64)
        for m, o in enumerate(patch_offsets):
            a_vals, a_mask = patch_views[m]
            b_vals, b_mask = _shifted(guide, coff + o, periodic)
            diff = a_vals - b_vals
            sq = diff * diff
            if a_mask is None:
                acc += sq
                cnt += 1
            else:
                joint = a_mask & b_mask
                acc += np.where(joint, sq, 0.0)
                cnt += joint
        valid = (cnt > 0) if q_mask is None else (q_mask & (cnt > 0))
        valid &= q_idx != flat_idx
        ssd = np.where(valid, acc / np.maximum(cnt, 1), np.inf).ravel()
        dist = np.where(valid, cand_dist[c], np.inf).ravel()
        qq = np.where(valid, q_idx, _NO_INDEX).ravel()
        # bubble the candidate down the sorted top-P list
        for j in range(num_patches):
            better = _less(ssd, dist, qq, best_ssd[j], best_d[j], best_q[j])
            old = best_ssd[j].copy(), best_d[j].copy(), best_q[j].copy()
            best_ssd[j] = np.where(better, ssd, old[0])
            best_d[j] = np.where(better, dist, old[1])
            best_q[j] = np.where(better, qq, old[2])
            ssd = np.where(better, old[0], ssd)
            dist = np.where(better, old[1], dist)
            qq = np.where(better, old[2], qq)

    links = best_q.T.copy()
    links[links == _NO_INDEX] = -1
    return links
