"""PPM decoding, thumbnail resizing, min-max normalisation and channel histograms."""
import math
import os
import re
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParseError, ShapeError


@dataclass(frozen=True, eq=False)
class Image:
    """8-bit RGB raster; ``pixels`` has shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ShapeError(f"image pixels must have shape (H>=1, W>=1, 3), got {p.shape}")
        if p.dtype != np.uint8:
            if np.any((p < 0) | (p > 255)) or np.any(p != np.round(p)):
                raise DataError("image samples must be integers in [0, 255]")
            p = p.astype(np.uint8)
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "pixels", p)

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    def __eq__(self, other):
        return isinstance(other, Image) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True, eq=False)
class NormalizedImage:
    """Real-valued RGB raster produced by :func:`minmax_normalize`."""

    pixels: np.ndarray
    new_min: float = 0.0
    new_max: float = 1.0

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]


@dataclass(frozen=True)
class ChannelHistogram:
    counts: np.ndarray  # (3, 256)
    total: int


_HEADER_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def decode_ppm(data):
    """Decode a binary P6 PPM with maxval 255."""
    data = bytes(data)
    if data[:2] != b"P6":
        raise ParseError(f"unsupported format magic {data[:2]!r}, expected b'P6'", 0)
    pos = 2
    fields = []
    for what in ("width", "height", "maxval"):
        m = _HEADER_TOKEN.match(data, pos)
        if m is None:
            raise ParseError(f"truncated header, missing {what}", pos)
        token = m.group(1)
        if not token.isdigit():
            raise ParseError(f"invalid {what} {token!r}", m.start(1))
        fields.append(int(token))
        pos = m.end(1)
    width, height, maxval = fields
    if maxval != 255:
        raise ParseError(f"maxval {maxval} not supported, expected 255", pos)
    if width < 1 or height < 1:
        raise ParseError(f"invalid dimensions {width}x{height}", pos)
    if pos >= len(data) or data[pos:pos + 1] not in (b" ", b"\t", b"\n", b"\r"):
        raise ParseError("expected single whitespace after maxval", pos)
    pos += 1
    need = width * height * 3
    if len(data) - pos < need:
        raise ParseError(f"truncated payload: need {need} bytes, have {len(data) - pos}", len(data))
    pixels = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    return Image(pixels.reshape(height, width, 3))


def encode_ppm(img):
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def read_ppm(path):
    with open(path, "rb") as fh:
        return decode_ppm(fh.read())


def aspect_ratio(img):
    return img.height / img.width


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def _lerp_rows(pixels, x, y):
    # pixels (H, W, C); x, y broadcastable real source coordinates
    h, w = pixels.shape[:2]
    x0f = np.floor(x)
    y0f = np.floor(y)
    fx = (x - x0f)[..., None]
    fy = (y - y0f)[..., None]
    x0 = np.clip(x0f.astype(np.int64), 0, w - 1)
    x1 = np.clip(x0f.astype(np.int64) + 1, 0, w - 1)
    y0 = np.clip(y0f.astype(np.int64), 0, h - 1)
    y1 = np.clip(y0f.astype(np.int64) + 1, 0, h - 1)
    p = pixels.astype(np.float64)
    top = p[y0, x0] * (1.0 - fx) + p[y0, x1] * fx
    bottom = p[y1, x0] * (1.0 - fx) + p[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def bilinear_sample(img, x, y):
    """Per-channel bilinear value at real source coordinate (x, y); out-of-range coordinates clamp."""
    return _lerp_rows(img.pixels, np.float64(x), np.float64(y))


def source_coordinates(out_size, in_size):
    """Half-pixel-centre mapping of output indices onto the source axis."""
    scale = out_size / in_size
    return (np.arange(out_size) + 0.5) / scale - 0.5


def thumbnail_resize(img, target_width=64):
    """Shrink to ``target_width`` keeping the aspect ratio; never upscales."""
    if target_width < 1:
        raise ValueError(f"target_width must be >= 1, got {target_width}")
    if target_width >= img.width:
        return img
    new_h = max(1, _round_half_up(target_width * aspect_ratio(img)))
    xs = source_coordinates(target_width, img.width)
    ys = source_coordinates(new_h, img.height)
    values = _lerp_rows(img.pixels, xs[None, :], ys[:, None])
    return Image(np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8))


def minmax_normalize(img, new_min=0.0, new_max=1.0, per_channel=False):
    """Affine rescale of samples onto [new_min, new_max] using the image's extremes.

    Extremes are pooled over all channels unless ``per_channel``. A constant
    image (or channel) maps to ``new_min``.
    """
    if not new_max > new_min:
        raise ValueError(f"new_max ({new_max}) must exceed new_min ({new_min})")
    p = np.asarray(img.pixels, dtype=np.float64)
    axes = (0, 1) if per_channel else None
    lo = p.min(axis=axes, keepdims=per_channel)
    hi = p.max(axis=axes, keepdims=per_channel)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    out = (p - lo) / safe * (new_max - new_min) + new_min
    out = np.clip(out, new_min, new_max)
    out = np.where(p == hi, new_max, out)
    out = np.where(span > 0, out, new_min)
    return NormalizedImage(out, float(new_min), float(new_max))


def channel_histogram(img):
    """256-bin histogram per RGB channel. Real images in [0, 1] bin by floor(v * 256)."""
    p = np.asarray(img.pixels)
    if isinstance(img, NormalizedImage) or p.dtype.kind == "f":
        bins = np.clip(np.floor(p * 256.0), 0, 255).astype(np.int64)
    else:
        bins = p.astype(np.int64)
    counts = np.stack([np.bincount(bins[..., c].ravel(), minlength=256) for c in range(3)])
    return ChannelHistogram(counts, int(p.shape[0] * p.shape[1]))


def list_dataset(root):
    """Return ``(paths, labels, class_names)`` for a ``<root>/<class>/*.ppm`` tree.

    Classes are the sorted directory names; files within a class are sorted too.
    """
    if not os.path.isdir(root):
        raise DataError(f"dataset root {root!r} is not a directory")
    class_names = sorted(d for d in os.listdir(root) if os.path.isdir(os.path.join(root, d)))
    if not class_names:
        raise DataError(f"no class directories under {root!r}")
    paths, labels = [], []
    for k, name in enumerate(class_names):
        cdir = os.path.join(root, name)
        files = sorted(f for f in os.listdir(cdir) if f.lower().endswith(".ppm"))
        if not files:
            raise DataError(f"class directory {cdir!r} contains no .ppm files")
        paths.extend(os.path.join(cdir, f) for f in files)
        labels.extend([k] * len(files))
    return paths, labels, class_names


def load_dataset(root):
    paths, labels, class_names = list_dataset(root)
    images = []
    for path in paths:
        try:
            images.append(read_ppm(path))
        except ParseError as exc:
            raise DataError(f"cannot decode {path}: {exc}") from exc
    return images, labels, class_names
