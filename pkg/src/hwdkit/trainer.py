"""Style-classification training of a backbone over a corpus manifest.

Images run through the network one by one at native width (gradient
accumulation instead of padded batches). Deterministic: same config + seed
gives identical history and weight bytes.
"""

import copy
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import backbone as bb
from . import nn
from .corpus import load_manifest
from .errors import ContractViolation, TrainingDiverged
from .imaging import Portion, decode, prepare
from .weights import save_weights


@dataclass
class TrainConfig:
    manifest_path: str
    out_path: str
    spec_name: str = "tinynet"
    epochs: int = 10
    batch_size: int = 16
    lr: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise ContractViolation(f"epochs must be >= 1, got {self.epochs}")
        if self.lr < 0:
            raise ContractViolation(f"lr must be >= 0, got {self.lr}")
        if self.batch_size < 1:
            raise ContractViolation(f"batch_size must be >= 1, got {self.batch_size}")


def _load_prepared(manifest, root=None):
    """Decode + prepare every manifest entry once, into memory."""
    root = Path(root) if root is not None else manifest.root
    labels = manifest.labels()
    label_idx = {lb: i for i, lb in enumerate(labels)}
    tensors, targets, splits = [], [], []
    for e in manifest.entries:
        img = decode(root / e.path, writer_id=e.label)
        tensors.append(prepare(img, Portion.WHOLE).tensor)
        targets.append(label_idx[e.label])
        splits.append(e.split)
    return tensors, np.array(targets), splits, labels


def train(config):
    """Train per config; saves best-val-accuracy weights, returns (params, history)."""
    manifest = load_manifest(config.manifest_path)
    tensors, targets, splits, labels = _load_prepared(manifest)
    if len(labels) < 2:
        raise ContractViolation(f"need >= 2 classes to train, got {len(labels)}")

    train_idx = [i for i, s in enumerate(splits) if s == "train"]
    val_idx = [i for i, s in enumerate(splits) if s == "val"]
    if not val_idx:
        # no recorded split: hold out the last tenth, per class
        by_class = {}
        for i in train_idx:
            by_class.setdefault(targets[i], []).append(i)
        train_idx, val_idx = [], []
        for cls in sorted(by_class):
            idxs = by_class[cls]
            k = max(1, int(round(0.1 * len(idxs))))
            train_idx += idxs[:-k]
            val_idx += idxs[-k:]

    spec = bb.spec_by_name(config.spec_name, num_classes=len(labels))
    params = bb.init_params(spec, config.seed)
    names = list(spec.param_shapes())
    velocity = None

    history = []
    best = (-1.0, None)
    for epoch in range(config.epochs):
        rng = np.random.default_rng([config.seed, epoch])
        order = [train_idx[i] for i in rng.permutation(len(train_idx))]
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            loss_sum, grad_sum = _batch_grads(spec, params, tensors, targets, batch,
                                              config.threads)
            if not np.isfinite(loss_sum):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, step {start // config.batch_size}"
                )
            losses.append(loss_sum / len(batch))
            if config.lr > 0:
                grads = [grad_sum[n] / np.float32(len(batch)) for n in names]
                velocity = nn.sgd_step([params[n] for n in names], grads,
                                       config.lr, config.momentum, velocity)
        acc = _accuracy(spec, params, tensors, targets, val_idx, config.threads)
        history.append({"epoch": epoch, "train_loss": float(np.mean(losses)),
                        "val_accuracy": acc})
        if acc > best[0]:
            best = (acc, copy.deepcopy(params))

    best_params = best[1]
    save_weights(spec, best_params, config.out_path)
    hist_path = Path(config.out_path).with_suffix(".history.json")
    hist_path.write_text(json.dumps(history, indent=2) + "\n")
    return best_params, history


def _batch_grads(spec, params, tensors, targets, batch, threads):
    def one(i):
        return bb.loss_and_grads(spec, params, tensors[i], int(targets[i]))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, batch))
    else:
        results = [one(i) for i in batch]

    loss_sum = 0.0
    grad_sum = None
    for loss, grads in results:  # fixed batch order keeps summation deterministic
        loss_sum += loss
        if grad_sum is None:
            grad_sum = {k: v.copy() for k, v in grads.items()}
        else:
            for k in grad_sum:
                grad_sum[k] += grads[k]
    return loss_sum, grad_sum


def _accuracy(spec, params, tensors, targets, idx, threads=1):
    if not idx:
        raise ContractViolation("empty evaluation set")

    def one(i):
        logits = bb.forward_logits(spec, params, tensors[i])
        return int(np.argmax(logits)) == int(targets[i])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hits = list(pool.map(one, idx))
    else:
        hits = [one(i) for i in idx]
    return float(np.mean(hits))


def evaluate(spec, params, manifest_path, threads=1):
    """Top-1 accuracy of saved weights over every entry of a manifest."""
    manifest = load_manifest(manifest_path)
    if not manifest.entries:
        raise ContractViolation(f"{manifest_path}: empty manifest")
    tensors, targets, _, labels = _load_prepared(manifest)
    if spec.num_classes is None or len(labels) > spec.num_classes:
        raise ContractViolation(
            f"manifest has {len(labels)} classes but head covers {spec.num_classes}"
        )
    return _accuracy(spec, params, tensors, targets, list(range(len(tensors))), threads)
