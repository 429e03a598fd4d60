"""Style-verification and stability harness.

Protocols: per-writer half/half splits scored as genuine (same writer) and
impostor (different writer) pairs, histogram overlap and equal error rate
over the two score distributions, sample-size stability sweeps with
nearest-rank percentile bands, alteration sensitivity sweeps, and a timing
split between representation and distance computation.

All scorers are distances: lower means "same author".
"""

import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation
from .metrics import (
    gaussian_fit,
    frechet_distance,
    hamming_hwd,
    hwd_writer,
    kid,
    mahalanobis_hwd,
    writer_mean,
)


@dataclass
class SplitPlan:
    """Per-writer partition into reference and candidate halves."""

    writers: dict  # writer_id -> (ref indices, cand indices) into that writer's list
    seed: int
    warnings: list = field(default_factory=list)


@dataclass
class PairDistributions:
    genuine: np.ndarray
    impostor: np.ndarray


def build_split(items_by_writer, seed):
    """Deterministic half/half split; ref gets the extra item on odd counts.

    items_by_writer maps writer id to a list (images, paths, bags...); only
    the lengths matter here. Writers with < 2 items are excluded with a
    warning.
    """
    writers = {}
    warnings = []
    for k, wid in enumerate(sorted(items_by_writer)):
        n = len(items_by_writer[wid])
        if n < 2:
            warnings.append(f"writer {wid!r} has {n} image(s), excluded from split")
            continue
        rng = np.random.default_rng([int(seed), k])
        perm = rng.permutation(n)
        half = (n + 1) // 2
        writers[wid] = (sorted(perm[:half].tolist()), sorted(perm[half:].tolist()))
    if not writers:
        raise ContractViolation("no writer has enough images to split")
    return SplitPlan(writers=writers, seed=int(seed), warnings=warnings)


# ---------------------------------------------------------------- scorers


def make_scorer(kind, reference_bags=None):
    """Build a distance over two feature-bag lists (ref side, cand side).

    hamming and mahalanobis need global reference context: pass the full
    reference-side bags so the binarization center / covariance source is
    fixed once.
    """
    kind = kind.lower()
    if kind in ("euclidean", "hwd"):
        return lambda ref, cand: hwd_writer(writer_mean(ref), writer_mean(cand))
    if kind == "frechet":
        def fd(ref, cand):
            a = gaussian_fit(np.concatenate([b.vectors for b in ref]))
            b = gaussian_fit(np.concatenate([c.vectors for c in cand]))
            return frechet_distance(a, b)
        return fd
    if kind == "kid":
        def kd(ref, cand):
            rv = np.concatenate([b.vectors for b in ref])
            gv = np.concatenate([c.vectors for c in cand])
            m = min(rv.shape[0], gv.shape[0], 100)
            return kid(rv, gv, subset_size=m, num_subsets=10, seed=0)
        return kd
    if kind == "mahalanobis":
        def md(ref, cand):
            rv = np.concatenate([b.vectors for b in ref])
            return mahalanobis_hwd(writer_mean(ref), gaussian_fit(rv), writer_mean(cand))
        return md
    if kind == "hamming":
        if reference_bags is None:
            raise ContractViolation("hamming scorer needs reference_bags for its center")
        center = writer_mean(reference_bags).mean
        return lambda ref, cand: hamming_hwd(writer_mean(ref), writer_mean(cand), center)
    raise ContractViolation(f"unknown distance kind {kind!r}")


def pair_scores(ref_bags_by_writer, cand_bags_by_writer, score_fn,
                impostor_pairs_per_writer=10, seed=0):
    """Genuine scores per writer plus sampled impostor pairs."""
    writers = sorted(ref_bags_by_writer)
    if len(writers) < 2:
        raise ContractViolation("need >= 2 writers for impostor pairs")
    genuine = [score_fn(ref_bags_by_writer[w], cand_bags_by_writer[w]) for w in writers]
    impostor = []
    for k, w in enumerate(writers):
        others = [o for o in writers if o != w]
        rng = np.random.default_rng([int(seed), k])
        take = min(impostor_pairs_per_writer, len(others))
        picks = rng.choice(len(others), size=take, replace=False)
        for p in sorted(picks.tolist()):
            impostor.append(score_fn(ref_bags_by_writer[w], cand_bags_by_writer[others[p]]))
    return PairDistributions(np.asarray(genuine, float), np.asarray(impostor, float))


# ---------------------------------------------------------------- overlap / eer


def overlap_coefficient(dist, bins=50):
    """Sum over bins of min(p, q) for shared-range equal-width histograms."""
    if bins < 2:
        raise ContractViolation(f"bins must be >= 2, got {bins}")
    g, imp = dist.genuine, dist.impostor
    if g.size == 0 or imp.size == 0:
        raise ContractViolation("both distributions must be nonempty")
    lo = min(g.min(), imp.min())
    hi = max(g.max(), imp.max())
    if hi == lo:
        return 1.0  # both distributions are the same constant
    edges = np.linspace(lo, hi, bins + 1)
    p, _ = np.histogram(g, bins=edges)
    q, _ = np.histogram(imp, bins=edges)
    return float(np.minimum(p / g.size, q / imp.size).sum())


def eer(dist):
    """Threshold-sweep equal error rate; genuine scores are lower-is-better.

    FAR(t) = fraction of impostors < t, FRR(t) = fraction of genuine >= t;
    reports (FAR+FRR)/2 at the threshold minimizing |FAR-FRR|, ties broken
    toward the smaller threshold.
    """
    g = np.sort(dist.genuine)
    imp = np.sort(dist.impostor)
    if g.size == 0 or imp.size == 0:
        raise ContractViolation("both distributions must be nonempty")
    thr = np.unique(np.concatenate([g, imp]))
    far = np.searchsorted(imp, thr, side="left") / imp.size
    frr = 1.0 - np.searchsorted(g, thr, side="left") / g.size
    i = int(np.argmin(np.abs(far - frr)))  # argmin takes the first (smallest) threshold
    return float((far[i] + frr[i]) / 2.0)


# ---------------------------------------------------------------- sweeps


def nearest_rank(values, pct):
    v = np.sort(np.asarray(values, float))
    k = max(int(np.ceil(pct / 100.0 * v.size)), 1)
    return float(v[k - 1])


def stability_sweep(reference_bags, candidate_sets, sizes, runs, score_fn, seed=0):
    """Score seeded subsamples of each candidate set against the full reference.

    Returns (rows, warnings); one row per (candidate, size) with mean and
    nearest-rank 25th/75th percentiles over `runs` subsamples.
    """
    if runs < 2:
        raise ContractViolation(f"runs must be >= 2, got {runs}")
    rows = []
    warnings = []
    for name in sorted(candidate_sets):
        bags = candidate_sets[name]
        for size in sizes:
            if size > len(bags):
                warnings.append(f"{name}: size {size} exceeds set size {len(bags)}, skipped")
                continue
            vals = []
            for r in range(runs):
                rng = np.random.default_rng(
                    [int(seed), zlib.crc32(name.encode("utf-8")), size, r]
                )
                pick = rng.choice(len(bags), size=size, replace=False)
                subset = [bags[i] for i in sorted(pick.tolist())]
                vals.append(score_fn(reference_bags, subset))
            rows.append({
                "name": name,
                "size": int(size),
                "mean": float(np.mean(vals)),
                "p25": nearest_rank(vals, 25),
                "p75": nearest_rank(vals, 75),
            })
    return rows, warnings


def alteration_sweep(images, alteration, levels, score_fns, extract):
    """Score altered image sets against the unaltered set at each level.

    alteration: 'shear' (levels are shear factors) or 'erode'/'dilate'
    (levels are iteration counts). score_fns: {name: scorer}; extract maps an
    image list to feature bags.
    """
    from . import imaging

    alteration = alteration.lower()
    if 0 not in levels and 0.0 not in levels:
        raise ContractViolation("levels must include 0 (the identity alteration)")
    alter = {
        "shear": lambda im, lv: imaging.shear(im, float(lv)),
        "erode": lambda im, lv: imaging.erode(im, int(lv)),
        "dilate": lambda im, lv: imaging.dilate(im, int(lv)),
    }.get(alteration)
    if alter is None:
        raise ContractViolation(f"unknown alteration {alteration!r}")

    ref_bags = extract(images)
    rows = []
    for lv in levels:
        altered = [alter(im, lv) for im in images]
        bags = extract(altered)
        rows.append({"level": float(lv),
                     **{name: fn(ref_bags, bags) for name, fn in sorted(score_fns.items())}})
    return rows


def timing_report(images, extract_fns, score_fns, min_images=100):
    """Wall-clock split between representation and distance per score function.

    extract_fns: {score name: image list -> bags}; the two halves of the
    image list play real vs generated.
    """
    if len(images) < min_images:
        raise ContractViolation(f"need >= {min_images} images for stable timing")
    half = len(images) // 2
    report = {}
    for name in sorted(score_fns):
        t0 = time.perf_counter()
        ref = extract_fns[name](images[:half])
        cand = extract_fns[name](images[half:])
        t1 = time.perf_counter()
        score_fns[name](ref, cand)
        t2 = time.perf_counter()
        report[name] = {
            "representation_seconds": t1 - t0,
            "distance_seconds": t2 - t1,
        }
    return report


# ---------------------------------------------------------------- csv


def rows_to_csv(rows, columns):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)
