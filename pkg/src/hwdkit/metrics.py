"""Distances over backbone features: the handwriting distance (count-weighted
mean features + Euclidean), the Frechet/Gaussian score, kernel MMD (KID), and
the Mahalanobis/Hamming ablation variants.

All reductions accumulate in float64; per-writer work merges in writer-id
order so results do not depend on thread count.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import backbone as bb
from .errors import ContractViolation, NumericalError
from .imaging import Portion, prepare


@dataclass
class FeatureBag:
    """Ordered feature vectors ([W_i, D]) extracted from one image."""

    image_id: str
    vectors: np.ndarray


@dataclass
class WriterMean:
    writer_id: str
    mean: np.ndarray  # float64 [D]
    total_vectors: int
    image_count: int


@dataclass
class GaussianStats:
    mean: np.ndarray  # float64 [D]
    cov: np.ndarray  # float64 [D, D], symmetric
    sample_count: int


@dataclass
class ScoreReport:
    score_kind: str
    per_writer: dict
    aggregate: float
    config: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_json(self, **extra):
        doc = {
            "score_kind": self.score_kind,
            "per_writer": self.per_writer,
            "aggregate": self.aggregate,
            "warnings": self.warnings,
            **self.config,
            **extra,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


# ---------------------------------------------------------------- extraction


def extract_bags(images, spec, params, portion=Portion.WHOLE, threads=None):
    """Feature bags for a list of TextImages.

    Whole portion: the feature-map columns of the full-width image (W_i
    vectors). Beginning portion: one globally pooled vector of the 32x32
    begin-crop, the FID-style representation. Images that cannot be
    represented are skipped with a warning record, never silently.
    """
    if not images:
        raise ContractViolation("extract_bags needs at least one image")
    portion = Portion(portion)

    def one(item):
        i, img = item
        prepared = prepare(img, portion)
        x = prepared.tensor
        if x.shape[2] < spec.min_width:
            return i, None, (
                f"{img.source or img.writer_id}: width {x.shape[2]} below "
                f"backbone minimum {spec.min_width}, skipped"
            )
        if portion is Portion.BEGINNING:
            vec = bb.forward_pooled(spec, params, x)
            vectors = vec[None, :]
        else:
            fmap = bb.forward_feature_map(spec, params, x)
            vectors = np.ascontiguousarray(fmap[:, 0, :].T)
        return i, FeatureBag(image_id=img.source or f"image{i}", vectors=vectors), None

    items = list(enumerate(images))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(it) for it in items]

    results.sort(key=lambda r: r[0])
    bags = [bag for _, bag, _ in results if bag is not None]
    warnings = [w for _, _, w in results if w is not None]
    return bags, warnings


def writer_mean(bags, writer_id="?"):
    """Vector-count-weighted mean: images with more columns weigh more."""
    if not bags:
        raise ContractViolation("writer_mean needs at least one bag")
    total = np.zeros(bags[0].vectors.shape[1], dtype=np.float64)
    count = 0
    for bag in bags:
        total += bag.vectors.astype(np.float64).sum(axis=0)
        count += bag.vectors.shape[0]
    return WriterMean(writer_id=writer_id, mean=total / count,
                      total_vectors=count, image_count=len(bags))


# ---------------------------------------------------------------- hwd


def hwd_writer(real, gen):
    """Euclidean distance between the two writer means."""
    if real.mean.shape != gen.mean.shape:
        raise ContractViolation(
            f"feature dim mismatch: {real.mean.shape} vs {gen.mean.shape}"
        )
    return float(np.linalg.norm(real.mean - gen.mean))


def hwd_dataset(pairs, config=None):
    """Unweighted mean of per-writer distances."""
    if not pairs:
        raise ContractViolation("hwd_dataset needs at least one writer pair")
    per_writer = {}
    for real, gen in pairs:
        if real.writer_id != gen.writer_id:
            raise ContractViolation(
                f"writer mismatch in pair: {real.writer_id!r} vs {gen.writer_id!r}"
            )
        per_writer[real.writer_id] = hwd_writer(real, gen)
    # fixed merge order by writer id for determinism
    agg = float(sum(per_writer[k] for k in sorted(per_writer)) / len(per_writer))
    return ScoreReport("HWD", per_writer, agg, config or {})


# ---------------------------------------------------------------- gaussian / frechet


def gaussian_fit(vectors):
    """Sample mean + unbiased covariance (1/(n-1)), symmetrized."""
    v = np.asarray(vectors, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] < 2:
        raise ContractViolation(f"gaussian_fit needs >= 2 vectors, got shape {v.shape}")
    mu = v.mean(axis=0)
    d = v - mu
    cov = d.T @ d / (v.shape[0] - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianStats(mean=mu, cov=cov, sample_count=v.shape[0])


def frechet_distance(a, b, eps=1e-9):
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)).

    The square-root trace is the sum of sqrt of the eigenvalues of the
    (slightly shrunk) covariance product; negative eigenvalues from numerical
    noise are clamped to zero, and the result is clamped at zero.
    """
    if a.mean.shape != b.mean.shape:
        raise ContractViolation("frechet_distance dimension mismatch")
    d = a.mean.shape[0]
    sa = a.cov + eps * np.eye(d)
    sb = b.cov + eps * np.eye(d)
    try:
        lam = np.linalg.eigvals(sa @ sb)
    except np.linalg.LinAlgError as e:
        raise NumericalError(
            f"eigen solver failed on covariance product "
            f"(D={d}, tr_a={np.trace(sa):.3g}, tr_b={np.trace(sb):.3g}): {e}"
        ) from e
    sqrt_tr = np.sqrt(np.maximum(lam.real, 0.0)).sum()
    diff = a.mean - b.mean
    fd = float(diff @ diff + np.trace(sa) + np.trace(sb) - 2.0 * sqrt_tr)
    return max(fd, 0.0)


# ---------------------------------------------------------------- kid


def _poly_kernel(x, y):
    d = x.shape[1]
    return (x @ y.T / d + 1.0) ** 3


def mmd2_unbiased(x, y):
    """Unbiased MMD^2 with the cubic polynomial kernel.

    Equal-size sides use the fully paired U-statistic (cross-term diagonal
    excluded too), which is exactly zero on identical sets.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    m, n = x.shape[0], y.shape[0]
    if m < 2 or n < 2:
        raise ContractViolation("mmd2 needs >= 2 vectors per side")
    kxx = _poly_kernel(x, x)
    kyy = _poly_kernel(y, y)
    kxy = _poly_kernel(x, y)
    sum_xx = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    sum_yy = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    if m == n:
        sum_xy = (kxy.sum() - np.trace(kxy)) / (m * (m - 1))
    else:
        sum_xy = kxy.sum() / (m * n)
    return float(sum_xx + sum_yy - 2.0 * sum_xy)


def kid(real_vectors, gen_vectors, subset_size=100, num_subsets=10, seed=0):
    """Average unbiased MMD^2 over seeded subsamples of both sides."""
    real = np.asarray(real_vectors, dtype=np.float64)
    gen = np.asarray(gen_vectors, dtype=np.float64)
    if subset_size < 2:
        raise ContractViolation(f"subset_size must be >= 2, got {subset_size}")
    if real.shape[0] < subset_size or gen.shape[0] < subset_size:
        raise ContractViolation(
            f"both sets must have >= subset_size={subset_size} vectors "
            f"(have {real.shape[0]} and {gen.shape[0]})"
        )
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(num_subsets):
        ri = rng.choice(real.shape[0], subset_size, replace=False)
        gi = rng.choice(gen.shape[0], subset_size, replace=False)
        vals.append(mmd2_unbiased(real[ri], gen[gi]))
    return float(np.mean(vals))


# ---------------------------------------------------------------- ablation distances


def mahalanobis_hwd(real_mean, real_stats, gen_mean, eps=None):
    """sqrt((Ya-Yb)^T (Sigma + eps I)^-1 (Ya-Yb)), Sigma fit on real vectors."""
    if real_mean.mean.shape != gen_mean.mean.shape:
        raise ContractViolation("mahalanobis dimension mismatch")
    d = real_mean.mean.shape[0]
    if eps is None:
        eps = 1e-6 * float(np.mean(np.diag(real_stats.cov)))
        eps = max(eps, 1e-12)
    diff = real_mean.mean - gen_mean.mean
    try:
        sol = np.linalg.solve(real_stats.cov + eps * np.eye(d), diff)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"covariance singular beyond shrinkage eps={eps:g}: {e}") from e
    val = float(diff @ sol)
    if val < 0 and val > -1e-9:
        val = 0.0
    if val < 0:
        raise NumericalError(f"negative mahalanobis quadratic form {val:g}")
    return float(np.sqrt(val))


def hamming_hwd(real_mean, gen_mean, reference_center):
    """Fraction of feature dims whose sign around the reference center differs."""
    a, b = real_mean.mean, gen_mean.mean
    c = np.asarray(reference_center, dtype=np.float64)
    if a.shape != b.shape or a.shape != c.shape:
        raise ContractViolation("hamming dimension mismatch")
    return float(np.mean(np.sign(a - c) != np.sign(b - c)))
