"""Procedural leaf-like dataset: one stripe texture and lesion hue per class, noisy per image."""
import colorsys
import math
import os

import numpy as np

from .errors import DataError
from .formats import atomic_write
from .preprocess import Image, encode_ppm
from .rng import substream


def class_name(k):
    return f"class_{k:02d}"


def synth_image(k, num_classes, size, rng):
    """One image of class ``k`` drawn from generator ``rng``."""
    yy, xx = np.mgrid[0:size, 0:size] / size
    theta = math.pi * k / num_classes + 0.15 * (rng.uniform() - 0.5)
    freq = 3.0 + 2.5 * k + 0.5 * (rng.uniform() - 0.5)
    phase = 2.0 * math.pi * rng.uniform()
    stripes = np.sin(2.0 * math.pi * freq * (xx * math.cos(theta) + yy * math.sin(theta)) + phase)

    leaf = np.array([60.0, 150.0, 60.0])
    img = leaf + 45.0 * stripes[..., None] * np.array([0.6, 1.0, 0.4])

    lesion = np.array(colorsys.hsv_to_rgb(k / num_classes, 0.85, 0.95)) * 255.0
    for _ in range(3 + rng.below(4)):
        cx, cy = rng.uniform(), rng.uniform()
        radius = 0.05 + 0.07 * rng.uniform()
        blob = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * radius**2))[..., None]
        img = img * (1.0 - blob) + lesion * blob

    noise = rng.uniform_array((size, size, 3)) + rng.uniform_array((size, size, 3)) - 1.0
    img = img + 24.0 * noise
    return Image(np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8))


def write_synthetic_dataset(out_dir, classes=4, per_class=64, size=128, seed=0):
    """Write ``<out_dir>/class_KK/img_IIII.ppm`` and return the list of paths."""
    if min(classes, per_class, size) < 1:
        raise DataError("classes, per_class and size must all be >= 1")
    paths = []
    try:
        for k in range(classes):
            cdir = os.path.join(out_dir, class_name(k))
            os.makedirs(cdir, exist_ok=True)
            for i in range(per_class):
                rng = substream(seed, "synth", k, i)
                path = os.path.join(cdir, f"img_{i:04d}.ppm")
                atomic_write(path, encode_ppm(synth_image(k, classes, size, rng)))
                paths.append(path)
    except OSError as exc:
        raise DataError(f"cannot write synthetic dataset to {out_dir!r}: {exc}") from exc
    return paths
