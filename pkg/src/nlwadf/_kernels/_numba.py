"""numba-compiled kernels. See ``_numpy`` for the array conventions."""

import math

import numpy as np
from numba import njit

NAME = "numba"

_SQRT5 = math.sqrt(5.0)
_NO_INDEX = np.iinfo(np.int64).max


@njit(cache=True, nogil=True)
def _tukey(diff, lim):
    if abs(diff) <= lim:
        u = diff / lim
        v = 1.0 - u * u
        return v * v
    return 0.0


@njit(cache=True, nogil=True)
def _wrap(i, n):
    i = i % n
    if i < 0:
        i += n
    return i


@njit(cache=True, nogil=True)
def diffuse(img, offsets, weights, gamma, periodic, links, link_weight):
    nz, ny, nx = img.shape
    flat = img.ravel()
    out = np.empty_like(img)
    lim = _SQRT5 * gamma
    n_off = offsets.shape[0]
    n_links = links.shape[1]
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                s = img[z, y, x]
                acc = 0.0
                cnt = 0
                for k in range(n_off):
                    zz = z + offsets[k, 0]
                    yy = y + offsets[k, 1]
                    xx = x + offsets[k, 2]
                    if periodic:
                        zz = _wrap(zz, nz)
                        yy = _wrap(yy, ny)
                        xx = _wrap(xx, nx)
                    elif zz < 0 or zz >= nz or yy < 0 or yy >= ny or xx < 0 or xx >= nx:
                        continue
                    diff = img[zz, yy, xx] - s
                    acc += _tukey(diff, lim) * diff * weights[k]
                    cnt += 1
                if n_links > 0:
                    i = (z * ny + y) * nx + x
                    for j in range(n_links):
                        q = links[i, j]
                        if q < 0:
                            continue
                        diff = flat[q] - s
                        acc += _tukey(diff, lim) * diff * link_weight
                        cnt += 1
                if cnt > 0:
                    out[z, y, x] = s + acc / cnt
                else:
                    out[z, y, x] = s
    return out


@njit(cache=True, nogil=True)
def gradient_sum(img, offsets, periodic):
    nz, ny, nx = img.shape
    out = np.zeros_like(img)
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                s = img[z, y, x]
                total = 0.0
                for k in range(offsets.shape[0]):
                    zz = z + offsets[k, 0]
                    yy = y + offsets[k, 1]
                    xx = x + offsets[k, 2]
                    if periodic:
                        zz = _wrap(zz, nz)
                        yy = _wrap(yy, ny)
                        xx = _wrap(xx, nx)
                    elif zz < 0 or zz >= nz or yy < 0 or yy >= ny or xx < 0 or xx >= nx:
                        continue
                    total += s - img[zz, yy, xx]
                out[z, y, x] = total
    return out


@njit(cache=True, nogil=True)
def median(img, offsets, periodic):
    nz, ny, nx = img.shape
    out = np.empty_like(img)
    buf = np.empty(offsets.shape[0] + 1)
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                buf[0] = img[z, y, x]
                m = 1
                for k in range(offsets.shape[0]):
                    zz = z + offsets[k, 0]
                    yy = y + offsets[k, 1]
                    xx = x + offsets[k, 2]
                    if periodic:
                        zz = _wrap(zz, nz)
                        yy = _wrap(yy, ny)
                        xx = _wrap(xx, nx)
                    elif zz < 0 or zz >= nz or yy < 0 or yy >= ny or xx < 0 or xx >= nx:
                        continue
                    buf[m] = img[zz, yy, xx]
                    m += 1
                vals = np.sort(buf[:m])
                h = m // 2
                if m % 2 == 1:
                    out[z, y, x] = vals[h]
                else:
                    out[z, y, x] = (vals[h - 1] + vals[h]) / 2.0
    return out


@njit(cache=True, nogil=True)
def _less(a_ssd, a_d, a_q, b_ssd, b_d, b_q):
    if a_ssd != b_ssd:
        return a_ssd < b_ssd
    if a_d != b_d:
        return a_d < b_d
    return a_q < b_q


@njit(cache=True, nogil=True)
def build_links(guide, cand_offsets, cand_dist, patch_offsets, num_patches, periodic):
    nz, ny, nx = guide.shape
    flat = guide.ravel()
    n = flat.size
    links = np.full((n, num_patches), -1, dtype=np.int64)
    best_ssd = np.empty(num_patches)
    best_d = np.empty(num_patches)
    best_q = np.empty(num_patches, dtype=np.int64)
    n_patch = patch_offsets.shape[0]
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                si = (z * ny + y) * nx + x
                best_ssd[:] = np.inf
                best_d[:] = np.inf
                best_q[:] = _NO_INDEX
                for c in range(cand_offsets.shape[0]):
                    qz = z + cand_offsets[c, 0]
                    qy = y + cand_offsets[c, 1]
                    qx = x + cand_offsets[c, 2]
                    if periodic:
                        qz = _wrap(qz, nz)
                        qy = _wrap(qy, ny)
                        qx = _wrap(qx, nx)
                    elif qz < 0 or qz >= nz or qy < 0 or qy >= ny or qx < 0 or qx >= nx:
                        continue
                    qi = (qz * ny + qy) * nx + qx
                    if qi == si:
                        continue
                    acc = 0.0
                    cnt = 0
                    for m in range(n_patch):
                        az = z + patch_offsets[m, 0]
                        ay = y + patch_offsets[m, 1]
                        ax = x + patch_offsets[m, 2]
                        bz = qz + patch_offsets[m, 0]
                        by = qy + patch_offsets[m, 1]
                        bx = qx + patch_offsets[m, 2]
                        if periodic:
                            az = _wrap(az, nz)
                            ay = _wrap(ay, ny)
                            ax = _wrap(ax, nx)
                            bz = _wrap(bz, nz)
                            by = _wrap(by, ny)
                            bx = _wrap(bx, nx)
                        elif (az < 0 or az >= nz or ay < 0 or ay >= ny or ax < 0 or ax >= nx
                              or bz < 0 or bz >= nz or by < 0 or by >= ny or bx < 0 or bx >= nx):
                            continue
                        diff = guide[az, ay, ax] - guide[bz, by, bx]
                        acc += diff * diff
                        cnt += 1
                    if cnt == 0:
                        continue
                    ssd = acc / cnt
                    d = cand_dist[c]
                    q = qi
                    for j in range(num_patches):
                        if _less(ssd, d, q, best_ssd[j], best_d[j], best_q[j]):
                            ssd, best_ssd[j] = best_ssd[j], ssd
                            d, best_d[j] = best_d[j], d
                            q, best_q[j] = best_q[j], q
                for j in range(num_patches):
                    if best_q[j] != _NO_INDEX:
                        links[si, j] = best_q[j]
    return links
