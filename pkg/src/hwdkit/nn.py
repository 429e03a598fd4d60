"""Deterministic layer ops: forward/backward for the five layer types the
backbones use, an SGD+momentum step, and a finite-difference gradient checker.

Tensors are plain float32 numpy arrays, channels-first. Accumulations happen
in float64 inside the kernels and are rounded to float32 once per op.
"""

import numpy as np

from . import kernels
from .errors import ContractViolation, NumericalError


def _as_f32(a, name):
    a = np.ascontiguousarray(a, dtype=np.float32)
    if not np.all(np.isfinite(a)):
        raise ContractViolation(f"{name} contains non-finite values")
    return a


# ---------------------------------------------------------------- conv 3x3


def conv2d_forward(x, w, b):
    """3x3 cross-correlation, padding 1, stride 1. x: [Cin,H,W] -> [Cout,H,W]."""
    x, w, b = _as_f32(x, "input"), _as_f32(w, "weights"), _as_f32(b, "bias")
    if x.ndim != 3 or w.ndim != 4 or w.shape[2:] != (3, 3):
        raise ContractViolation(f"bad conv shapes: input {x.shape}, weights {w.shape}")
    if w.shape[1] != x.shape[0]:
        raise ContractViolation(
            f"input has {x.shape[0]} channels but weights expect {w.shape[1]}"
        )
    if b.shape != (w.shape[0],):
        raise ContractViolation(f"bias shape {b.shape} != ({w.shape[0]},)")
    return kernels.conv2d_forward(x, w, b)


def conv2d_backward(x, w, gy):
    """Gradients of conv2d_forward; returns (grad_w, grad_b, grad_x)."""
    x, w, gy = _as_f32(x, "input"), _as_f32(w, "weights"), _as_f32(gy, "upstream")
    if gy.shape != (w.shape[0],) + x.shape[1:]:
        raise ContractViolation(
            f"upstream shape {gy.shape} != {(w.shape[0],) + x.shape[1:]}"
        )
    return kernels.conv2d_backward(x, w, gy)


# ---------------------------------------------------------------- pool 2x2


def maxpool2_forward(x):
    """2x2 max pool, stride 2; trailing odd row/column dropped.

    Returns (pooled, argmax_indices); indices are flat positions into H*W.
    """
    x = _as_f32(x, "input")
    if x.ndim != 3 or x.shape[1] < 2 or x.shape[2] < 2:
        raise ContractViolation(f"maxpool2 needs [C,H>=2,W>=2], got {x.shape}")
    return kernels.maxpool2_forward(x)


def maxpool2_backward(idx, gy, h, w):
    gy = _as_f32(gy, "upstream")
    if idx.shape != gy.shape:
        raise ContractViolation(f"indices shape {idx.shape} != upstream {gy.shape}")
    return kernels.maxpool2_backward(np.ascontiguousarray(idx, np.int64), gy, h, w)


# ---------------------------------------------------------------- relu


def relu_forward(x):
    return np.maximum(x, np.float32(0.0))


def relu_backward(x, gy):
    return np.where(x > 0, gy, np.float32(0.0))


# ---------------------------------------------------------------- linear


def linear_forward(x, w, b):
    """x: [In] vector, w: [Out,In], b: [Out] -> [Out]."""
    x, w, b = _as_f32(x, "input"), _as_f32(w, "weights"), _as_f32(b, "bias")
    if x.shape != (w.shape[1],):
        raise ContractViolation(f"linear input {x.shape} != ({w.shape[1]},)")
    y = w.astype(np.float64) @ x.astype(np.float64) + b.astype(np.float64)
    return y.astype(np.float32)


def linear_backward(x, w, gy):
    x, w, gy = _as_f32(x, "input"), _as_f32(w, "weights"), _as_f32(gy, "upstream")
    if gy.shape != (w.shape[0],):
        raise ContractViolation(f"upstream {gy.shape} != ({w.shape[0]},)")
    gyd = gy.astype(np.float64)
    gw = np.outer(gyd, x.astype(np.float64)).astype(np.float32)
    gb = gy.copy()
    gx = (w.astype(np.float64).T @ gyd).astype(np.float32)
    return gw, gb, gx


# ---------------------------------------------------------------- global avg pool


def global_avg_pool_forward(x):
    """[C,H,W] -> [C] spatial mean."""
    x = _as_f32(x, "input")
    if x.ndim != 3:
        raise ContractViolation(f"expected [C,H,W], got {x.shape}")
    return x.astype(np.float64).mean(axis=(1, 2)).astype(np.float32)


def global_avg_pool_backward(gy, h, w):
    gy = _as_f32(gy, "upstream")
    g = gy.astype(np.float64) / (h * w)
    return np.broadcast_to(g[:, None, None], (gy.shape[0], h, w)).astype(np.float32)


# ---------------------------------------------------------------- softmax xent


def softmax_xent(logits, label):
    """Cross-entropy with max-subtracted softmax; returns (loss, logit_grad)."""
    logits = _as_f32(logits, "logits")
    k = logits.shape[0]
    if not (0 <= label < k):
        raise ContractViolation(f"label {label} out of range for {k} classes")
    z = logits.astype(np.float64)
    z = z - z.max()
    e = np.exp(z)
    p = e / e.sum()
    loss = float(-np.log(p[label]))
    g = p.copy()
    g[label] -= 1.0
    return loss, g.astype(np.float32)


# ---------------------------------------------------------------- optimizer


def sgd_step(params, grads, lr, momentum, velocity=None):
    """v <- momentum*v + g; p <- p - lr*v. Updates in place, returns velocity."""
    if lr <= 0:
        raise ContractViolation(f"lr must be positive, got {lr}")
    if not (0 <= momentum < 1):
        raise ContractViolation(f"momentum must be in [0,1), got {momentum}")
    if len(params) != len(grads):
        raise ContractViolation("params and grads length mismatch")
    if velocity is None:
        velocity = [np.zeros_like(p) for p in params]
    for p, g, v in zip(params, grads, velocity):
        if p.shape != g.shape:
            raise ContractViolation(f"param {p.shape} vs grad {g.shape}")
        v *= np.float32(momentum)
        v += g
        p -= np.float32(lr) * v
    return velocity


# ---------------------------------------------------------------- grad check


def gradient_check(loss_fn, params, analytic_grads, eps=1e-3, max_coords=25, seed=0):
    """Central finite differences against analytic gradients.

    loss_fn() recomputes the scalar loss from the current (mutable) params.
    For blocks bigger than max_coords, a seeded sample of coordinates is
    probed. Per-entry errors are normalized by the block's gradient scale
    (float32 forwards put an absolute noise floor on the difference quotient,
    so tiny entries cannot be compared entrywise). Returns
    {name: max relative error}.
    """
    rng = np.random.default_rng(seed)
    report = {}
    for name, p in params.items():
        g = analytic_grads[name]
        scale = max(float(np.abs(g).max()), 1e-8)
        flat = p.reshape(-1)
        n = flat.shape[0]
        coords = np.arange(n) if n <= max_coords else rng.choice(n, max_coords, False)
        worst = 0.0
        for c in coords:
            orig = flat[c]
            flat[c] = orig + eps
            lp = loss_fn()
            flat[c] = orig - eps
            lm = loss_fn()
            flat[c] = orig
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise NumericalError(f"non-finite loss while probing {name}")
            fd = (lp - lm) / (2.0 * eps)
            an = float(g.reshape(-1)[c])
            worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), scale))
        report[name] = worst
    return report
