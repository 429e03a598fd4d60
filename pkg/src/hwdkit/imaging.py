"""Image ingestion and preprocessing.

Grayscale text images come in as 8-bit PGM (P5) or PNG. Preparation resizes
to height 32 with bilinear interpolation, optionally begin-crops to a 32x32
square, and normalizes pixels to [-1, 1]. The three visual alterations used
by the sensitivity sweeps (shear, erode, dilate) also live here; ink is
assumed dark on a light background.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import ContractViolation, DecodeError

TARGET_HEIGHT = 32
WHITE = 255


class Portion(Enum):
    WHOLE = "whole"
    BEGINNING = "begin"


@dataclass
class TextImage:
    pixels: np.ndarray  # uint8, H x W
    writer_id: str
    source: str = ""

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise ContractViolation(f"pixels must be a nonempty HxW grid, got {self.pixels.shape}")
        if not self.writer_id:
            raise ContractViolation("writer_id must be nonempty")


@dataclass
class PreparedImage:
    tensor: np.ndarray  # float32, [1, 32, W]
    portion: Portion


# ---------------------------------------------------------------- decode / io


def read_pgm(path):
    """Parse a binary (P5) PGM with maxval 255."""
    with open(path, "rb") as f:
        data = f.read()
    pos = 0

    def token():
        nonlocal pos
        while pos < len(data):
            if data[pos : pos + 1].isspace():
                pos += 1
            elif data[pos : pos + 1] == b"#":  # comment to end of line
                while pos < len(data) and data[pos : pos + 1] != b"\n":
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DecodeError(f"{path}: truncated header at byte {start}")
        return data[start:pos]

    magic = token()
    if magic != b"P5":
        raise DecodeError(f"{path}: not a P5 PGM (magic {magic!r} at byte 0)")
    try:
        w, h, maxval = int(token()), int(token()), int(token())
    except ValueError as e:
        raise DecodeError(f"{path}: malformed header near byte {pos}: {e}") from e
    if maxval != 255:
        raise DecodeError(f"{path}: unsupported maxval {maxval}, only 8-bit supported")
    pos += 1  # single whitespace after maxval
    if len(data) - pos < w * h:
        raise DecodeError(f"{path}: pixel data truncated at byte {len(data)}")
    return np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)


def write_pgm(pixels, path):
    pixels = np.asarray(pixels, dtype=np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())


def _decode_png(path):
    try:
        img = Image.open(path)
        img.load()
    except (UnidentifiedImageError, OSError) as e:
        raise DecodeError(f"{path}: {e}") from e
    if img.mode in ("L", "1"):
        return np.asarray(img.convert("L"), dtype=np.uint8)
    if img.mode in ("I", "I;16", "F"):
        raise DecodeError(f"{path}: unsupported bit depth (mode {img.mode})")
    rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
    gray = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.rint(gray).clip(0, 255).astype(np.uint8)


def decode(path, writer_id="unknown", invert_ink=False):
    """Read a PGM or PNG file into a TextImage; RGB goes through 601 luma."""
    path = str(path)
    with open(path, "rb") as f:
        head = f.read(2)
    if head == b"P5":
        pixels = read_pgm(path)
    else:
        pixels = _decode_png(path)
    if invert_ink:
        pixels = (255 - pixels.astype(np.int16)).astype(np.uint8)
    return TextImage(pixels=pixels, writer_id=writer_id, source=path)


# ---------------------------------------------------------------- resize / prepare


def bilinear_resize(pixels, out_h, out_w):
    """Bilinear resample (pixel-center convention). Returns float64."""
    src = np.asarray(pixels, dtype=np.float64)
    h, w = src.shape
    ys = (np.arange(out_h) + 0.5) * h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * w / out_w - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    fx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    tl = src[np.ix_(y0, x0)]
    tr = src[np.ix_(y0, x1)]
    bl = src[np.ix_(y1, x0)]
    br = src[np.ix_(y1, x1)]
    top = tl * (1 - fx) + tr * fx
    bot = bl * (1 - fx) + br * fx
    return top * (1 - fy) + bot * fy


def prepare(image, portion=Portion.WHOLE):
    """Height-32 aspect-preserving resize, optional begin-crop, [-1,1] mapping."""
    portion = Portion(portion)
    h, w = image.pixels.shape
    out_w = max(int(round(w * TARGET_HEIGHT / h)), 1)
    resized = bilinear_resize(image.pixels, TARGET_HEIGHT, out_w)
    if out_w < TARGET_HEIGHT:
        pad = np.full((TARGET_HEIGHT, TARGET_HEIGHT - out_w), float(WHITE))
        resized = np.concatenate([resized, pad], axis=1)
    if portion is Portion.BEGINNING:
        resized = resized[:, :TARGET_HEIGHT]
    tensor = ((resized / 255.0 - 0.5) / 0.5).astype(np.float32)[None, :, :]
    return PreparedImage(tensor=tensor, portion=portion)


# ---------------------------------------------------------------- alterations


def shear(image, s):
    """Horizontal shear x' = x + s*(H-1-y); vacated pixels are white."""
    if abs(s) > 1.5:
        raise ContractViolation(f"|shear| must be <= 1.5, got {s}")
    src = image.pixels.astype(np.float64)
    h, w = src.shape
    grow = int(np.ceil(abs(s) * (h - 1)))
    out_w = w + grow
    offset = grow if s < 0 else 0

    yy = np.arange(h)[:, None]
    xx = np.arange(out_w)[None, :]
    sx = xx - offset - s * (h - 1 - yy)  # source column, fractional

    x0 = np.floor(sx).astype(int)
    fx = sx - x0
    x1 = x0 + 1
    inside0 = (x0 >= 0) & (x0 < w)
    inside1 = (x1 >= 0) & (x1 < w)
    v0 = np.where(inside0, src[yy, np.clip(x0, 0, w - 1)], float(WHITE))
    v1 = np.where(inside1, src[yy, np.clip(x1, 0, w - 1)], float(WHITE))
    out = v0 * (1 - fx) + v1 * fx
    return TextImage(
        pixels=np.rint(out).clip(0, 255).astype(np.uint8),
        writer_id=image.writer_id,
        source=image.source,
    )


def erode(image, iterations):
    """Thin strokes: 3x3 grayscale max filter (ink is dark), iterated."""
    return _morph(image, iterations, ndimage.maximum_filter, cval=0)


def dilate(image, iterations):
    """Thicken strokes: 3x3 grayscale min filter, iterated."""
    return _morph(image, iterations, ndimage.minimum_filter, cval=WHITE)


def _morph(image, iterations, filt, cval):
    if not (0 <= iterations <= 8):
        raise ContractViolation(f"iterations must be in [0,8], got {iterations}")
    px = image.pixels
    for _ in range(iterations):
        px = filt(px, size=3, mode="constant", cval=cval)
    return TextImage(pixels=px, writer_id=image.writer_id, source=image.source)
