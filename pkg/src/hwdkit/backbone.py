"""Concrete network architectures and their forward/backward entry points.

Two backbones are defined: a VGG16-style feature extractor tapped at 512
channels (height 32 collapses to 1 after five 2x pools) and a small trainable
classifier ("tinynet") with a 128-dim feature tap. Images are processed one
at a time at their native width; no padding, no batching.
"""

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ContractViolation

INPUT_HEIGHT = 32


@dataclass(frozen=True)
class ArchitectureSpec:
    """Ordered conv-block layout plus optional classifier head."""

    name: str
    blocks: tuple  # tuple of tuples of conv output channels
    feature_dim: int
    num_classes: int | None = None
    in_channels: int = 1

    @property
    def pool_count(self):
        return len(self.blocks)

    @property
    def min_width(self):
        return 2 ** self.pool_count

    def param_shapes(self):
        """Ordered {name: shape} for every parameter, head included if present."""
        shapes = {}
        cin = self.in_channels
        for bi, block in enumerate(self.blocks):
            for ci, cout in enumerate(block):
                shapes[f"block{bi}.conv{ci}.weight"] = (cout, cin, 3, 3)
                shapes[f"block{bi}.conv{ci}.bias"] = (cout,)
                cin = cout
        if self.num_classes is not None:
            shapes["head.weight"] = (self.num_classes, self.feature_dim)
            shapes["head.bias"] = (self.num_classes,)
        return shapes


def vgg16_32_spec(num_classes=None):
    """VGG16 conv stack, feature tap at 512 channels after the fifth pool."""
    return ArchitectureSpec(
        name="vgg16_32",
        blocks=((64, 64), (128, 128), (256, 256, 256), (512, 512, 512), (512, 512, 512)),
        feature_dim=512,
        num_classes=num_classes,
    )


def tinynet_spec(num_classes=None):
    """Five single-conv blocks, feature tap at 128 channels; minutes-fast to train."""
    if num_classes is not None and num_classes < 2:
        raise ContractViolation(f"num_classes must be >= 2, got {num_classes}")
    return ArchitectureSpec(
        name="tinynet",
        blocks=((16,), (32,), (64,), (128,), (128,)),
        feature_dim=128,
        num_classes=num_classes,
    )


_SPECS = {"vgg16_32": vgg16_32_spec, "tinynet": tinynet_spec}


def spec_by_name(name, num_classes=None):
    if name not in _SPECS:
        raise ContractViolation(f"unknown backbone {name!r}, expected one of {sorted(_SPECS)}")
    return _SPECS[name](num_classes)


def init_params(spec, seed):
    """He-uniform init for weights, zero biases. Deterministic from seed."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in spec.param_shapes().items():
        if name.endswith(".bias"):
            params[name] = np.zeros(shape, dtype=np.float32)
        else:
            fan_in = int(np.prod(shape[1:]))
            limit = np.sqrt(6.0 / fan_in)
            params[name] = rng.uniform(-limit, limit, size=shape).astype(np.float32)
    return params


def _check_input(spec, x):
    x = np.ascontiguousarray(x, dtype=np.float32)
    if x.ndim != 3 or x.shape[0] != spec.in_channels or x.shape[1] != INPUT_HEIGHT:
        raise ContractViolation(
            f"expected image tensor [1,{INPUT_HEIGHT},W], got {x.shape}"
        )
    if x.shape[2] < spec.min_width:
        raise ContractViolation(
            f"image width {x.shape[2]} below minimum {spec.min_width} "
            f"for backbone {spec.name} ({spec.pool_count} pools)"
        )
    return x


def forward_feature_map(spec, params, x, _cache=None):
    """Run the conv stack; returns the [D, 1, W'] feature tap activations."""
    x = _check_input(spec, x)
    h = x
    for bi, block in enumerate(spec.blocks):
        for ci in range(len(block)):
            pre = h
            h = nn.conv2d_forward(h, params[f"block{bi}.conv{ci}.weight"],
                                  params[f"block{bi}.conv{ci}.bias"])
            if _cache is not None:
                _cache.append(("conv", bi, ci, pre, h))
            r = nn.relu_forward(h)
            if _cache is not None:
                _cache.append(("relu", bi, ci, h, r))
            h = r
        h, idx = nn.maxpool2_forward(h)
        if _cache is not None:
            _cache.append(("pool", bi, idx, h.shape))
    return h


def forward_pooled(spec, params, x):
    """Global average over the feature-tap columns: one D-vector per image."""
    fmap = forward_feature_map(spec, params, x)
    return nn.global_avg_pool_forward(fmap)


def forward_logits(spec, params, x, _cache=None):
    if spec.num_classes is None:
        raise ContractViolation(f"backbone {spec.name} has no classifier head")
    fmap = forward_feature_map(spec, params, x, _cache=_cache)
    pooled = nn.global_avg_pool_forward(fmap)
    if _cache is not None:
        _cache.append(("gap", fmap.shape, pooled))
    return nn.linear_forward(pooled, params["head.weight"], params["head.bias"])


def loss_and_grads(spec, params, x, label):
    """Forward + full backward for one image; returns (loss, {name: grad})."""
    cache = []
    logits = forward_logits(spec, params, x, _cache=cache)
    loss, glogits = nn.softmax_xent(logits, label)

    grads = {}
    _, fmap_shape, pooled = cache[-1]
    gw, gb, g = nn.linear_backward(pooled, params["head.weight"], glogits)
    grads["head.weight"] = gw
    grads["head.bias"] = gb
    g = nn.global_avg_pool_backward(g, fmap_shape[1], fmap_shape[2])

    for entry in reversed(cache[:-1]):
        if entry[0] == "pool":
            _, bi, idx, _ = entry
            # pre-pool spatial size comes from the relu output just before
            prev = _prev_relu_shape(cache, entry)
            g = nn.maxpool2_backward(idx, g, prev[1], prev[2])
        elif entry[0] == "relu":
            _, bi, ci, pre, _ = entry
            g = nn.relu_backward(pre, g)
        elif entry[0] == "conv":
            _, bi, ci, pre, _ = entry
            gw, gb, g = nn.conv2d_backward(
                pre, params[f"block{bi}.conv{ci}.weight"], g
            )
            grads[f"block{bi}.conv{ci}.weight"] = gw
            grads[f"block{bi}.conv{ci}.bias"] = gb
    return loss, grads


def _prev_relu_shape(cache, pool_entry):
    i = cache.index(pool_entry)
    kind, _, _, _, r = cache[i - 1]
    assert kind == "relu"
    return r.shape
