"""Numba-jitted kernel backend.

Explicit loops with float64 accumulators and a fixed summation order, so
repeated runs are bit-identical. Kernels release the GIL, which lets the
batch level run images on separate threads.
"""

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True, fastmath=False)


@njit(**_JIT)
def conv2d_forward(x, w, b):
    cin, h, wd = x.shape
    cout = w.shape[0]

    xp = np.zeros((cin, h + 2, wd + 2), dtype=np.float64)
    for ci in range(cin):
        for y in range(h):
            for xx in range(wd):
                xp[ci, y + 1, xx + 1] = x[ci, y, xx]

    acc = np.empty((cout, h, wd), dtype=np.float64)
    out = np.empty((cout, h, wd), dtype=np.float32)
    for co in range(cout):
        for y in range(h):
            for xx in range(wd):
                acc[co, y, xx] = b[co]
        for ci in range(cin):
            for ky in range(3):
                for kx in range(3):
                    wv = w[co, ci, ky, kx]
                    for y in range(h):
                        for xx in range(wd):
                            acc[co, y, xx] += wv * xp[ci, y + ky, xx + kx]
        for y in range(h):
            for xx in range(wd):
                out[co, y, xx] = acc[co, y, xx]
    return out


@njit(**_JIT)
def conv2d_backward(x, w, gy):
    cin, h, wd = x.shape
    cout = w.shape[0]

    xp = np.zeros((cin, h + 2, wd + 2), dtype=np.float64)
    for ci in range(cin):
        for y in range(h):
            for xx in range(wd):
                xp[ci, y + 1, xx + 1] = x[ci, y, xx]

    gb = np.zeros(cout, dtype=np.float64)
    gw = np.zeros(w.shape, dtype=np.float64)
    gxp = np.zeros((cin, h + 2, wd + 2), dtype=np.float64)

    for co in range(cout):
        for y in range(h):
            for xx in range(wd):
                gb[co] += gy[co, y, xx]
        for ci in range(cin):
            for ky in range(3):
                for kx in range(3):
                    acc = 0.0
                    for y in range(h):
                        for xx in range(wd):
                            acc += gy[co, y, xx] * xp[ci, y + ky, xx + kx]
                    gw[co, ci, ky, kx] = acc
        for ci in range(cin):
            for ky in range(3):
                for kx in range(3):
                    wv = w[co, ci, ky, kx]
                    for y in range(h):
                        for xx in range(wd):
                            gxp[ci, y + ky, xx + kx] += wv * gy[co, y, xx]

    gx = np.empty((cin, h, wd), dtype=np.float32)
    for ci in range(cin):
        for y in range(h):
            for xx in range(wd):
                gx[ci, y, xx] = gxp[ci, y + 1, xx + 1]
    return gw.astype(np.float32), gb.astype(np.float32), gx


@njit(**_JIT)
def maxpool2_forward(x):
    c, h, w = x.shape
    ho, wo = h // 2, w // 2
    y = np.empty((c, ho, wo), dtype=np.float32)
    idx = np.empty((c, ho, wo), dtype=np.int64)
    for ci in range(c):
        for i in range(ho):
            for j in range(wo):
                by, bx = 2 * i, 2 * j
                best = x[ci, by, bx]
                bi = by * w + bx
                for dy in range(2):
                    for dx in range(2):
                        v = x[ci, by + dy, bx + dx]
                        if v > best:
                            best = v
                            bi = (by + dy) * w + (bx + dx)
                y[ci, i, j] = best
                idx[ci, i, j] = bi
    return y, idx


@njit(**_JIT)
def maxpool2_backward(idx, gy, h, w):
    c, ho, wo = gy.shape
    gx = np.zeros((c, h * w), dtype=np.float32)
    for ci in range(c):
        for i in range(ho):
            for j in range(wo):
                gx[ci, idx[ci, i, j]] += gy[ci, i, j]
    return gx.reshape(c, h, w)
