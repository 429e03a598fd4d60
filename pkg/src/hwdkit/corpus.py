"""Synthetic labeled text-image corpus generation.

Words are rendered in per-style "handwriting" (seeded quadratic strokes with
style-specific thickness, slant, curvature, and glyph jitter) on a paper-like
background, then randomly distorted. Everything is a pure function of the
master seed, so regeneration is byte-identical and generation may be
parallelized per entry.

The tab-separated manifest written here is also the ingestion format for real
datasets (writer id in the label column).
"""

import importlib.resources
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ContractViolation, GenerationError
from .imaging import TextImage, shear, write_pgm

MANIFEST_HEADER = "#hwdkit-manifest v1"


# ---------------------------------------------------------------- glyph skeletons


def _line(a, b):
    return (a, ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2), b)


def _circle(cx, cy, r):
    # four quadratic arcs, control points at the bounding-box corners
    e, s, w_, n = (cx + r, cy), (cx, cy + r), (cx - r, cy), (cx, cy - r)
    return [
        (e, (cx + r, cy + r), s),
        (s, (cx - r, cy + r), w_),
        (w_, (cx - r, cy - r), n),
        (n, (cx + r, cy - r), e),
    ]


# Quadratic strokes (p0, ctrl, p1) in a unit box, y down, baseline ~0.8.
_GLYPHS = {
    "a": _circle(0.32, 0.6, 0.22) + [_line((0.54, 0.4), (0.54, 0.8))],
    "b": [_line((0.16, 0.1), (0.16, 0.8))] + _circle(0.38, 0.6, 0.22),
    "c": [((0.55, 0.44), (0.1, 0.34), (0.1, 0.6)), ((0.1, 0.6), (0.1, 0.86), (0.55, 0.76))],
    "d": _circle(0.34, 0.6, 0.22) + [_line((0.56, 0.1), (0.56, 0.8))],
    "e": _circle(0.34, 0.6, 0.22) + [_line((0.12, 0.6), (0.56, 0.6))],
    "f": [((0.52, 0.14), (0.3, 0.08), (0.3, 0.8)), _line((0.12, 0.44), (0.5, 0.44))],
    "g": _circle(0.34, 0.56, 0.2) + [((0.54, 0.4), (0.6, 1.02), (0.14, 0.98))],
    "h": [_line((0.16, 0.1), (0.16, 0.8)), ((0.16, 0.56), (0.44, 0.34), (0.54, 0.8))],
    "i": [_line((0.3, 0.44), (0.3, 0.8)), _line((0.3, 0.26), (0.3, 0.32))],
    "j": [((0.42, 0.44), (0.44, 1.0), (0.12, 0.94)), _line((0.42, 0.26), (0.42, 0.32))],
    "k": [_line((0.16, 0.1), (0.16, 0.8)), _line((0.5, 0.42), (0.16, 0.62)),
          _line((0.16, 0.62), (0.54, 0.8))],
    "l": [_line((0.3, 0.1), (0.3, 0.8))],
    "m": [_line((0.1, 0.42), (0.1, 0.8)), ((0.1, 0.56), (0.24, 0.34), (0.34, 0.8)),
          ((0.34, 0.56), (0.48, 0.34), (0.6, 0.8))],
    "n": [_line((0.16, 0.42), (0.16, 0.8)), ((0.16, 0.56), (0.42, 0.34), (0.52, 0.8))],
    "o": _circle(0.34, 0.6, 0.22),
    "p": [_line((0.16, 0.42), (0.16, 1.0))] + _circle(0.38, 0.6, 0.21),
    "q": _circle(0.34, 0.6, 0.21) + [_line((0.55, 0.42), (0.55, 1.0))],
    "r": [_line((0.16, 0.42), (0.16, 0.8)), ((0.16, 0.6), (0.34, 0.34), (0.54, 0.46))],
    "s": [((0.54, 0.46), (0.18, 0.36), (0.32, 0.6)), ((0.32, 0.6), (0.5, 0.84), (0.12, 0.76))],
    "t": [_line((0.32, 0.16), (0.36, 0.8)), _line((0.14, 0.42), (0.54, 0.42))],
    "u": [((0.14, 0.42), (0.12, 0.82), (0.42, 0.78)), _line((0.54, 0.42), (0.54, 0.8))],
    "v": [_line((0.12, 0.42), (0.33, 0.8)), _line((0.33, 0.8), (0.54, 0.42))],
    "w": [_line((0.08, 0.42), (0.22, 0.8)), _line((0.22, 0.8), (0.34, 0.52)),
          _line((0.34, 0.52), (0.46, 0.8)), _line((0.46, 0.8), (0.6, 0.42))],
    "x": [_line((0.12, 0.42), (0.55, 0.8)), _line((0.55, 0.42), (0.12, 0.8))],
    "y": [_line((0.12, 0.42), (0.36, 0.8)), ((0.58, 0.42), (0.4, 1.02), (0.12, 0.98))],
    "z": [_line((0.12, 0.42), (0.54, 0.42)), _line((0.54, 0.42), (0.12, 0.8)),
          _line((0.12, 0.8), (0.54, 0.8))],
}


# ---------------------------------------------------------------- styles


@dataclass(frozen=True)
class StyleClass:
    """One synthetic 'handwriting'. Procedural styles are pure functions of seed."""

    id: int
    seed: int
    kind: str = "procedural"  # or "vectorfont"
    font_path: str | None = None
    thickness: float = 1.8
    slant: float = 0.0
    curvature: float = 1.0
    jitter: float = 0.03

    def glyph(self, ch):
        """Style-specific stroke set for one letter (deterministic)."""
        base = _GLYPHS[ch]
        rng = np.random.default_rng([self.seed, ord(ch)])
        strokes = []
        for p0, c, p1 in base:
            d = rng.uniform(-0.06, 0.06, size=6)
            p0 = (p0[0] + d[0], p0[1] + d[1])
            p1 = (p1[0] + d[2], p1[1] + d[3])
            mid = ((p0[0] + p1[0]) / 2, (p0[1] + p1[1]) / 2)
            # curvature scales how far the control point bows from the chord
            c = (
                mid[0] + (c[0] + d[4] - mid[0]) * self.curvature,
                mid[1] + (c[1] + d[5] - mid[1]) * self.curvature,
            )
            strokes.append((p0, c, p1))
        return strokes


def make_style(style_id, master_seed):
    rng = np.random.default_rng([int(master_seed), int(style_id)])
    return StyleClass(
        id=int(style_id),
        seed=int(rng.integers(0, 2**63 - 1)),
        thickness=float(rng.uniform(1.0, 3.0)),
        slant=float(rng.uniform(-0.35, 0.35)),
        curvature=float(rng.uniform(0.6, 1.4)),
        jitter=float(rng.uniform(0.01, 0.05)),
    )


# ---------------------------------------------------------------- rendering


def _quad_points(p0, c, p1, n):
    t = np.linspace(0.0, 1.0, n)[:, None]
    p0, c, p1 = (np.asarray(p, dtype=np.float64) for p in (p0, c, p1))
    return (1 - t) ** 2 * p0 + 2 * t * (1 - t) * c + t**2 * p1


def _stamp(mask, pts, radius):
    """Draw soft disks of the given radius at each (x, y) sample point."""
    h, w = mask.shape
    ix = np.clip(np.round(pts[:, 0]).astype(int), 0, w - 1)
    iy = np.clip(np.round(pts[:, 1]).astype(int), 0, h - 1)
    fx = pts[:, 0] - ix
    fy = pts[:, 1] - iy
    r = int(np.ceil(radius + 0.5))
    for dy in range(-r, r + 1):
        yy = iy + dy
        ok_y = (yy >= 0) & (yy < h)
        for dx in range(-r, r + 1):
            xx = ix + dx
            ok = ok_y & (xx >= 0) & (xx < w)
            if not ok.any():
                continue
            dist = np.hypot(dy - fy[ok], dx - fx[ok])
            cov = np.clip(radius + 0.5 - dist, 0.0, 1.0)
            np.maximum.at(mask, (yy[ok], xx[ok]), cov)


def _render_procedural(text, style, rng):
    height = int(rng.integers(40, 97))
    glyph_h = 0.92 * height
    char_w = 0.62 * height
    margin = 0.25 * height
    width = int(np.ceil(2 * margin + len(text) * char_w))

    mask = np.zeros((height, width), dtype=np.float64)
    radius = style.thickness * height / 44.0
    x_pos = margin
    for ch in text:
        dx_j = rng.uniform(-style.jitter, style.jitter) * char_w
        dy_j = rng.uniform(-style.jitter, style.jitter) * glyph_h
        for p0, c, p1 in style.glyph(ch):
            pts = _quad_points(p0, c, p1, 48)
            gx = pts[:, 0] * char_w
            gy = pts[:, 1] * glyph_h
            gx = gx + style.slant * (0.8 * glyph_h - gy)  # slant about the baseline
            _stamp(mask, np.stack([gx + x_pos + dx_j, gy + dy_j], axis=1), radius)
        x_pos += char_w * (1.0 + rng.uniform(-style.jitter, style.jitter))

    # paper-like background: mild multiplicative gradient plus gaussian noise
    yy = np.linspace(0, 1, height)[:, None]
    xx = np.linspace(0, 1, width)[None, :]
    g1, g2 = rng.uniform(-0.04, 0.04, size=2)
    paper = 238.0 * (1.0 + g1 * (yy - 0.5) + g2 * (xx - 0.5))
    paper = paper + rng.normal(0.0, 3.0, size=paper.shape)

    ink = 35.0 + rng.uniform(0.0, 20.0)
    out = paper * (1.0 - mask) + ink * mask
    return np.rint(out).clip(0, 255).astype(np.uint8)


def _render_font(text, style, rng):
    from PIL import Image, ImageDraw, ImageFont

    height = int(rng.integers(40, 97))
    try:
        font = ImageFont.truetype(style.font_path, int(height * 0.7))
    except OSError as e:
        raise GenerationError(f"cannot load font {style.font_path!r}: {e}") from e
    bbox = font.getbbox(text)
    width = max(bbox[2] + 10, 8)
    img = Image.new("L", (width, height), 240)
    ImageDraw.Draw(img).text((5, int(height * 0.1)), text, font=font, fill=40)
    px = np.asarray(img, dtype=np.float64)
    px = px + rng.normal(0.0, 3.0, size=px.shape)
    return np.rint(px).clip(0, 255).astype(np.uint8)


def render_word(text, style, rng):
    """Render one word in the given style; identical (text, style, rng state)
    give identical pixels."""
    if not text:
        raise ContractViolation("text must be nonempty")
    if style.kind == "procedural":
        text = text.lower()
        bad = [ch for ch in text if ch not in _GLYPHS]
        if bad:
            raise ContractViolation(f"procedural styles render ASCII letters only, got {bad!r}")
        pixels = _render_procedural(text, style, rng)
    elif style.kind == "vectorfont":
        pixels = _render_font(text, style, rng)
    else:
        raise ContractViolation(f"unknown style kind {style.kind!r}")
    return TextImage(pixels=pixels, writer_id=str(style.id), source=f"style:{style.id}")


def distort(image, rng, strength=1.0):
    """Random rotation/shear/brightness-contrast/noise; strength 0 is identity."""
    angle = float(rng.uniform(-3.0, 3.0)) * strength
    s = float(rng.uniform(-0.2, 0.2)) * strength
    bright = float(rng.uniform(-0.15, 0.15)) * strength
    contrast = 1.0 + float(rng.uniform(-0.15, 0.15)) * strength
    sigma = float(rng.uniform(0.0, 4.0)) * strength

    px = image.pixels.astype(np.float64)
    if angle != 0.0:
        px = ndimage.rotate(px, angle, reshape=False, order=1, mode="constant", cval=255.0)
    out = TextImage(np.rint(px).clip(0, 255).astype(np.uint8), image.writer_id, image.source)
    if s != 0.0:
        out = shear(out, s)
    px = out.pixels.astype(np.float64)
    if contrast != 1.0 or bright != 0.0:
        px = (px - 128.0) * contrast + 128.0 + bright * 128.0
    if sigma > 0.0:
        px = px + rng.normal(0.0, sigma, size=px.shape)
    return TextImage(np.rint(px).clip(0, 255).astype(np.uint8), image.writer_id, image.source)


# ---------------------------------------------------------------- manifests


@dataclass
class ManifestEntry:
    path: str
    label: str
    text: str
    split: str = "train"  # "train" or "val"


@dataclass
class CorpusManifest:
    root: Path
    seed: int
    entries: list

    def by_label(self):
        groups = {}
        for e in self.entries:
            groups.setdefault(e.label, []).append(e)
        return groups

    def labels(self):
        return sorted(self.by_label())


def write_manifest(manifest, path):
    lines = [f"{MANIFEST_HEADER} seed={manifest.seed}"]
    for split in ("train", "val"):
        if split == "val":
            lines.append("#split=val")
        for e in manifest.entries:
            if e.split == split:
                lines.append(f"{e.path}\t{e.label}\t{e.text}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_manifest(path):
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith(MANIFEST_HEADER):
        raise ContractViolation(f"{path}: missing manifest header line")
    seed = 0
    for field in lines[0].split():
        if field.startswith("seed="):
            seed = int(field[5:])
    entries = []
    split = "train"
    for ln in lines[1:]:
        if not ln.strip():
            continue
        if ln.startswith("#"):
            if ln.strip() == "#split=val":
                split = "val"
            continue
        parts = ln.split("\t")
        if len(parts) != 3:
            raise ContractViolation(f"{path}: bad manifest record {ln!r}")
        entries.append(ManifestEntry(parts[0], parts[1], parts[2], split))
    return CorpusManifest(root=path.parent, seed=seed, entries=entries)


def default_word_list():
    data = importlib.resources.files("hwdkit.data").joinpath("words.txt").read_text()
    return data.split()


def generate_corpus(num_styles, words_per_style, seed, out_dir, word_list=None,
                    val_fraction=0.1, distort_strength=1.0, style_id_offset=0):
    """Render a balanced corpus and write images + manifest under out_dir.

    Returns the CorpusManifest. Fully deterministic in (arguments, seed).
    """
    if num_styles < 2:
        raise ContractViolation(f"num_styles must be >= 2, got {num_styles}")
    if words_per_style < 1:
        raise ContractViolation(f"words_per_style must be >= 1, got {words_per_style}")
    if word_list is None:
        word_list = default_word_list()

    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise GenerationError(f"cannot create {out_dir}: {e}") from e

    n_val = int(round(words_per_style * val_fraction))
    entries = []
    for s in range(num_styles):
        sid = s + style_id_offset
        style = make_style(sid, seed)
        label = f"style{sid:03d}"
        (out_dir / label).mkdir(exist_ok=True)
        for i in range(words_per_style):
            word = word_list[i % len(word_list)]
            rng = np.random.default_rng([int(seed), sid, i])
            img = render_word(word, style, rng)
            img = distort(img, rng, strength=distort_strength)
            rel = f"{label}/im{i:05d}.pgm"
            write_pgm(img.pixels, out_dir / rel)
            split = "val" if i >= words_per_style - n_val else "train"
            entries.append(ManifestEntry(rel, label, word, split))

    manifest = CorpusManifest(root=out_dir, seed=int(seed), entries=entries)
    write_manifest(manifest, out_dir / "manifest.tsv")
    return manifest
