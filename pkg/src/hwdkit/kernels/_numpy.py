"""Pure-numpy kernel backend.

Convolutions go through im2col + float64 matmul; pooling uses stride tricks.
All kernels accumulate in float64 and round the result to float32 once.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _im2col3(x):
    # x: [Cin, H, W] -> [Cin*9, H*W], zero padding 1, stride 1
    cin, h, w = x.shape
    xp = np.zeros((cin, h + 2, w + 2), dtype=np.float64)
    xp[:, 1 : h + 1, 1 : w + 1] = x
    win = sliding_window_view(xp, (3, 3), axis=(1, 2))  # [Cin, H, W, 3, 3]
    return win.transpose(0, 3, 4, 1, 2).reshape(cin * 9, h * w)


def conv2d_forward(x, w, b):
    cout = w.shape[0]
    _, h, wd = x.shape
    cols = _im2col3(x)
    wm = w.reshape(cout, -1).astype(np.float64)
    y = wm @ cols + b.astype(np.float64)[:, None]
    return y.reshape(cout, h, wd).astype(np.float32)


def conv2d_backward(x, w, gy):
    cout, cin = w.shape[0], w.shape[1]
    _, h, wd = x.shape
    gyf = gy.reshape(cout, -1).astype(np.float64)
    cols = _im2col3(x)

    gb = gyf.sum(axis=1)
    gw = (gyf @ cols.T).reshape(w.shape)

    wm = w.reshape(cout, -1).astype(np.float64)
    gcols = (wm.T @ gyf).reshape(cin, 3, 3, h, wd)
    gxp = np.zeros((cin, h + 2, wd + 2), dtype=np.float64)
    for ky in range(3):
        for kx in range(3):
            gxp[:, ky : ky + h, kx : kx + wd] += gcols[:, ky, kx]
    gx = gxp[:, 1 : h + 1, 1 : wd + 1]

    return gw.astype(np.float32), gb.astype(np.float32), gx.astype(np.float32)


def maxpool2_forward(x):
    c, h, w = x.shape
    ho, wo = h // 2, w // 2
    win = x[:, : ho * 2, : wo * 2].reshape(c, ho, 2, wo, 2)
    win = win.transpose(0, 1, 3, 2, 4).reshape(c, ho, wo, 4)
    a = win.argmax(axis=3)
    y = np.take_along_axis(win, a[..., None], axis=3)[..., 0]

    jj, ii = np.meshgrid(np.arange(wo), np.arange(ho))
    dy, dx = a // 2, a % 2
    idx = (2 * ii[None] + dy) * w + (2 * jj[None] + dx)
    return y.astype(np.float32, copy=False), idx.astype(np.int64)


def maxpool2_backward(idx, gy, h, w):
    c = gy.shape[0]
    gx = np.zeros((c, h * w), dtype=np.float64)
    for ci in range(c):
        np.add.at(gx[ci], idx[ci].ravel(), gy[ci].ravel().astype(np.float64))
    return gx.reshape(c, h, w).astype(np.float32)
