"""Synthetic training corpus and dataset handling.

The generator mixes smooth gradients, periodic textures, hard-edged shapes
and noise patches so latents see flat regions, edges and texture in one image.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from ..imageio import list_images, read_image, to_float, write_image, to_uint8


def _gradient(rng, h, w):
    yy, xx = np.mgrid[0:h, 0:w] / max(h, w)
    angle = rng.uniform(0, 2 * np.pi)
    t = np.cos(angle) * xx + np.sin(angle) * yy
    t = (t - t.min()) / max(t.max() - t.min(), 1e-9)
    a, b = rng.random(3), rng.random(3)
    return a[:, None, None] * (1 - t) + b[:, None, None] * t


def _texture(rng, h, w):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    freq = rng.uniform(0.08, 0.6)
    angle = rng.uniform(0, np.pi)
    phase = rng.uniform(0, 2 * np.pi)
    wave = np.sin(freq * (np.cos(angle) * xx + np.sin(angle) * yy) + phase)
    if rng.random() < 0.5:
        wave = np.sign(wave)  # stripes / checker-like edges
    base, amp = rng.random(3), rng.uniform(0.1, 0.5)
    return np.clip(base[:, None, None] + amp * wave[None] * rng.choice([-1, 1], 3)[:, None, None], 0, 1)


def synthetic_image(rng: np.random.Generator, h: int = 64, w: int = 64) -> np.ndarray:
    """One float image ``(3, h, w)`` in [0, 1]."""
    img = _gradient(rng, h, w)
    for _ in range(rng.integers(1, 4)):
        y0, x0 = rng.integers(0, h // 2), rng.integers(0, w // 2)
        y1 = min(h, y0 + rng.integers(h // 4, h // 2 + 1))
        x1 = min(w, x0 + rng.integers(w // 4, w // 2 + 1))
        if rng.random() < 0.6:
            img[:, y0:y1, x0:x1] = _texture(rng, y1 - y0, x1 - x0)
        else:
            img[:, y0:y1, x0:x1] = rng.random(3)[:, None, None]
    if rng.random() < 0.5:
        y0, x0 = rng.integers(0, h - 8), rng.integers(0, w - 8)
        s = rng.integers(8, h // 2)
        patch = img[:, y0:y0 + s, x0:x0 + s]
        img[:, y0:y0 + s, x0:x0 + s] = np.clip(patch + rng.normal(0, 0.15, patch.shape), 0, 1)
    img = np.clip(img + rng.normal(0, 0.01, img.shape), 0, 1)
    # quantize to 8-bit so the corpus round-trips through image files exactly
    return to_uint8(img).astype(np.float64) / 255.0


def synthetic_corpus(n: int, h: int = 64, w: int = 64, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng([seed, 7])
    return np.stack([synthetic_image(rng, h, w) for _ in range(n)])


@dataclass
class Dataset:
    """Training images (cropped on the fly) and a disjoint validation set, both ``(n, 3, H, W)``."""

    train: np.ndarray
    val: np.ndarray

    def __post_init__(self):
        if len(self.train) == 0:
            raise ConfigurationError("training set is empty")
        if len(self.val) == 0:
            raise ConfigurationError("validation set is empty")
        seen = {img.tobytes() for img in self.train}
        if any(img.tobytes() in seen for img in self.val):
            raise ConfigurationError("validation images overlap the training set")


def synthetic_dataset(n_train: int = 256, n_val: int = 16, size: int = 64, train_size: int = 96,
                      seed: int = 0) -> Dataset:
    """Training images at ``train_size`` (random ``size`` crops are taken) and validation at ``size``."""
    return Dataset(
        train=synthetic_corpus(n_train, train_size, train_size, seed=seed),
        val=synthetic_corpus(n_val, size, size, seed=seed + 1_000_003),
    )


def load_image_dir(directory) -> np.ndarray:
    paths = list_images(directory)
    if not paths:
        raise ConfigurationError(f"no PPM/PGM images in {directory}")
    imgs = [to_float(read_image(p)) for p in paths]
    shapes = {im.shape for im in imgs}
    if len(shapes) != 1:
        # crop to the common minimum extent so the set stacks
        h = min(s[1] for s in shapes)
        w = min(s[2] for s in shapes)
        imgs = [im[:, :h, :w] for im in imgs]
    return np.stack(imgs)


def dataset_from_dir(directory, val_fraction: float = 0.125) -> Dataset:
    """Use ``<dir>/train`` and ``<dir>/val`` if present, else split the sorted file list."""
    d = Path(directory)
    if (d / "train").is_dir() and (d / "val").is_dir():
        return Dataset(load_image_dir(d / "train"), load_image_dir(d / "val"))
    imgs = load_image_dir(d)
    if len(imgs) < 2:
        raise ConfigurationError(f"{directory}: need at least 2 images to split train/validation")
    n_val = max(1, int(round(len(imgs) * val_fraction)))
    return Dataset(imgs[:-n_val], imgs[-n_val:])


def write_synthetic_dir(directory, n: int, size: int = 64, seed: int = 0) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, img in enumerate(synthetic_corpus(n, size, size, seed=seed)):
        p = d / f"synth_{i:03d}.ppm"
        write_image(p, to_uint8(img))
        paths.append(p)
    return paths
