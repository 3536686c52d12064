"""Dataset ingestion, preprocessing, augmentation, batching, synthetic data.

Pipeline output images are always 256x256x3 float32 in [0, 1], channels last.
Class labels follow the fixed directory order: defect, fresh, immature, mature.
"""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, DecodeError, IngestionError, ShapeError
from .network import CLASS_NAMES, NUM_CLASSES, ClassLabel

log = logging.getLogger(__name__)

IMAGE_SIZE = 256
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


class Split(Enum):
    TRAIN = "train"
    VALIDATION = "validation"


@dataclass
class Sample:
    image: np.ndarray  # [256, 256, 3] float32 in [0, 1]
    label: ClassLabel
    source_path: str = ""


@dataclass
class Dataset:
    split: Split
    samples: list[Sample]
    skipped: int = 0  # files dropped because they would not decode

    def __len__(self) -> int:
        return len(self.samples)

    def class_counts(self) -> dict[ClassLabel, int]:
        counts = {label: 0 for label in ClassLabel}
        for s in self.samples:
            counts[s.label] += 1
        return counts


def one_hot(label: ClassLabel | int) -> np.ndarray:
    idx = int(label)
    if not 0 <= idx < NUM_CLASSES:
        raise ValueError(f"label must be 0..{NUM_CLASSES - 1}, got {idx}")
    vec = np.zeros(NUM_CLASSES, dtype=np.float32)
    vec[idx] = 1.0
    return vec


def normalize(pixels: np.ndarray) -> np.ndarray:
    """Map 0..255 pixel values to [0, 1] float32 (divide by 255)."""
    return pixels.astype(np.float32) / np.float32(255.0)


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with corner-aligned sampling: src = dst * (S-1)/(T-1).

    A same-size resize is the exact identity; every output pixel is a convex
    combination of its four source neighbours.
    """
    if img.ndim != 3:
        raise ShapeError(f"expected HxWxC image, got shape {img.shape}")
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"target size must be positive, got {out_h}x{out_w}")
    h, w, _ = img.shape

    def src_coords(t: int, s: int) -> np.ndarray:
        if t == 1 or s == 1:
            return np.zeros(t, dtype=np.float32)
        return (np.arange(t, dtype=np.float32) * np.float32(s - 1)) / np.float32(t - 1)

    ys, xs = src_coords(out_h, h), src_coords(out_w, w)
    y0 = np.minimum(np.floor(ys).astype(np.int64), h - 1)
    x0 = np.minimum(np.floor(xs).astype(np.int64), w - 1)
    y1, x1 = np.minimum(y0 + 1, h - 1), np.minimum(x0 + 1, w - 1)
    fy = (ys - y0.astype(np.float32))[:, None, None]
    fx = (xs - x0.astype(np.float32))[None, :, None]

    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return (top * (1 - fy) + bot * fy).astype(img.dtype)


def decode_and_resize(data: bytes) -> np.ndarray:
    """Decode PNG/JPEG bytes, force RGB, resize to 256x256, normalize to [0, 1]."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            rgb = im.convert("RGB")
            pixels = np.asarray(rgb, dtype=np.float32)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"image bytes could not be decoded: {exc}") from exc
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise DecodeError(f"decoded image has unexpected shape {pixels.shape}")
    resized = bilinear_resize(pixels, IMAGE_SIZE, IMAGE_SIZE)
    return normalize(resized)


@dataclass
class AugmentConfig:
    """Stochastic training-time transforms; draw ranges, not fixed amounts."""

    rotation_deg: float = 20.0
    flip_h: bool = True
    flip_v: bool = True
    brightness_contrast_frac: float = 0.10
    zoom_frac: float = 0.15

    def __post_init__(self) -> None:
        if self.rotation_deg < 0:
            raise ConfigError("rotation_deg must be >= 0")
        if not 0 <= self.brightness_contrast_frac < 1:
            raise ConfigError("brightness_contrast_frac must be in [0, 1)")
        if not 0 <= self.zoom_frac < 1:
            raise ConfigError("zoom_frac must be in [0, 1)")


def _grid(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    ys = np.arange(h, dtype=np.float32)[:, None]
    xs = np.arange(w, dtype=np.float32)[None, :]
    return ys, xs


def rotate_nearest(img: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate about the image centre, nearest-neighbour, edge-replicate fill.

    A rotation of exactly 0 degrees is the identity.
    """
    h, w, _ = img.shape
    theta = np.float32(np.deg2rad(degrees))
    cy, cx = np.float32((h - 1) / 2.0), np.float32((w - 1) / 2.0)
    ys, xs = _grid(h, w)
    dy, dx = ys - cy, xs - cx
    cos, sin = np.cos(theta), np.sin(theta)
    # inverse map: sample the source at the un-rotated location
    sy = cy + dy * cos - dx * sin
    sx = cx + dy * sin + dx * cos
    iy = np.clip(np.rint(sy).astype(np.int64), 0, h - 1)
    ix = np.clip(np.rint(sx).astype(np.int64), 0, w - 1)
    return img[iy, ix]


def zoom_bilinear(img: np.ndarray, factor: float) -> np.ndarray:
    """Zoom about the centre by factor (>1 crops in, <1 pads out via edge clamp)."""
    if factor <= 0:
        raise ConfigError(f"zoom factor must be positive, got {factor}")
    h, w, _ = img.shape
    cy, cx = np.float32((h - 1) / 2.0), np.float32((w - 1) / 2.0)
    ys, xs = _grid(h, w)
    sy = np.clip(cy + (ys - cy) / np.float32(factor), 0, h - 1)
    sx = np.clip(cx + (xs - cx) / np.float32(factor), 0, w - 1)
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    y1, x1 = np.minimum(y0 + 1, h - 1), np.minimum(x0 + 1, w - 1)
    fy, fx = (sy - y0)[..., None], (sx - x0)[..., None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return (top * (1 - fy) + bot * fy).astype(img.dtype)


def brightness_contrast(img: np.ndarray, contrast: float, brightness: float) -> np.ndarray:
    """out = clamp((img - 0.5) * contrast + 0.5 + brightness, 0, 1).

    The identity transform (contrast 1, brightness 0) returns the input
    unchanged rather than routing through the arithmetic, which would cost a
    rounding error for values below 0.25.
    """
    if contrast == 1.0 and brightness == 0.0:
        return img.copy()
    c, b = np.float32(contrast), np.float32(brightness)
    return np.clip((img - np.float32(0.5)) * c + np.float32(0.5) + b, 0.0, 1.0)


def augment(img: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Apply the training transforms in fixed order with fixed draw order.

    Order: rotation, hflip, vflip, brightness/contrast, zoom. All six random
    draws happen every call (even for disabled transforms) so the consumed
    stream does not depend on the config.
    """
    theta = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg)
    do_h = rng.random() < 0.5
    do_v = rng.random() < 0.5
    contrast = rng.uniform(1.0 - cfg.brightness_contrast_frac, 1.0 + cfg.brightness_contrast_frac)
    brightness = rng.uniform(-cfg.brightness_contrast_frac, cfg.brightness_contrast_frac)
    factor = rng.uniform(1.0 - cfg.zoom_frac, 1.0 + cfg.zoom_frac)

    out = rotate_nearest(img, theta)
    if cfg.flip_h and do_h:
        out = out[:, ::-1, :]
    if cfg.flip_v and do_v:
        out = out[::-1, :, :]
    out = brightness_contrast(out, contrast, brightness)
    return zoom_bilinear(out, factor)


def batch_iterator(
    ds: Dataset,
    batch_size: int,
    shuffle_seed: int,
    augment_cfg: AugmentConfig | None = None,
):
    """Yield (images [B, 256, 256, 3], targets [B, 4]) over one shuffled epoch.

    Every sample appears exactly once; the last batch may be short. Train-split
    samples are augmented (with augment_cfg or the defaults); validation
    batches are the stored pixels bit for bit.
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    if not ds.samples:
        raise IngestionError("dataset is empty")
    rng = np.random.default_rng(shuffle_seed)
    order = rng.permutation(len(ds.samples))
    do_augment = ds.split is Split.TRAIN
    cfg = augment_cfg if augment_cfg is not None else AugmentConfig()
    for start in range(0, len(order), batch_size):
        picks = order[start:start + batch_size]
        images = np.empty((len(picks), IMAGE_SIZE, IMAGE_SIZE, 3), dtype=np.float32)
        targets = np.empty((len(picks), NUM_CLASSES), dtype=np.float32)
        for row, idx in enumerate(picks):
            s = ds.samples[idx]
            images[row] = augment(s.image, cfg, rng) if do_augment else s.image
            targets[row] = one_hot(s.label)
        yield images, targets


def _class_dirs(split_dir: Path) -> dict[ClassLabel, Path]:
    by_lower = {p.name.lower(): p for p in split_dir.iterdir() if p.is_dir()}
    missing = [name for name in CLASS_NAMES if name not in by_lower]
    if missing:
        raise IngestionError(f"{split_dir}: missing class directories {missing}")
    return {label: by_lower[CLASS_NAMES[label]] for label in ClassLabel}


def _load_split(root: Path, split: Split) -> Dataset:
    split_dir = root / split.value
    if not split_dir.is_dir():
        raise IngestionError(f"missing split directory {split_dir}")
    samples: list[Sample] = []
    skipped = 0
    for label, class_dir in _class_dirs(split_dir).items():
        files = sorted(
            p for p in class_dir.iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        )
        for path in files:
            try:
                image = decode_and_resize(path.read_bytes())
            except DecodeError as exc:
                log.warning("skipping %s: %s", path, exc)
                skipped += 1
                continue
            samples.append(Sample(image, label, str(path)))
    return Dataset(split, samples, skipped)


def load_dataset(root: str | Path) -> tuple[Dataset, Dataset]:
    """Load <root>/{train,validation}/<class>/*.{png,jpg,jpeg} into memory.

    Class directory names are matched case-insensitively; a missing class or
    split directory is an ingestion error, while individual files that fail to
    decode are skipped with a warning and counted in Dataset.skipped.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestionError(f"dataset root {root} is not a directory")
    return _load_split(root, Split.TRAIN), _load_split(root, Split.VALIDATION)


# Synthetic data: four procedurally generated fruit-like classes that are
# trivially separable by dominant hue, with class-specific stripe texture.
_CLASS_BASE_RGB = {
    ClassLabel.DEFECT: (0.30, 0.05, 0.35),
    ClassLabel.FRESH: (0.95, 0.40, 0.70),
    ClassLabel.IMMATURE: (0.10, 0.80, 0.20),
    ClassLabel.MATURE: (0.90, 0.10, 0.10),
}
_CLASS_STRIPES = {
    ClassLabel.DEFECT: 3.0,
    ClassLabel.FRESH: 6.0,
    ClassLabel.IMMATURE: 10.0,
    ClassLabel.MATURE: 15.0,
}


def _synth_image(label: ClassLabel, rng: np.random.Generator) -> np.ndarray:
    base = np.array(_CLASS_BASE_RGB[label], dtype=np.float32)
    img = np.broadcast_to(base, (IMAGE_SIZE, IMAGE_SIZE, 3)).copy()

    ys, xs = _grid(IMAGE_SIZE, IMAGE_SIZE)
    angle = rng.uniform(0, np.pi)
    phase = rng.uniform(0, 2 * np.pi)
    freq = 2 * np.pi * _CLASS_STRIPES[label] / IMAGE_SIZE
    stripes = np.sin(freq * (np.cos(angle) * ys + np.sin(angle) * xs) + phase)
    img += 0.05 * stripes[..., None].astype(np.float32)

    if label is ClassLabel.DEFECT:
        # dark blotches, the visual cue for the defect grade
        for _ in range(4):
            by, bx = rng.uniform(40, IMAGE_SIZE - 40, 2)
            radius = rng.uniform(18, 42)
            dist2 = (ys - np.float32(by)) ** 2 + (xs - np.float32(bx)) ** 2
            mask = dist2 < radius * radius
            img[mask] *= 0.35

    img += rng.normal(0.0, 0.02, img.shape).astype(np.float32)
    img += np.float32(rng.uniform(-0.03, 0.03))
    np.clip(img, 0.0, 1.0, out=img)
    # snap to the u8 grid so PNG materialization round-trips bit-exactly
    return np.round(img * 255.0).astype(np.float32) / np.float32(255.0)


def synth_dataset(per_class: int, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Generate per_class images per class, split 80/20 into train/validation."""
    if per_class < 1:
        raise ConfigError(f"per_class must be >= 1, got {per_class}")
    rng = np.random.default_rng(seed)
    n_train = max(1, int(per_class * 0.8))
    train: list[Sample] = []
    val: list[Sample] = []
    for label in ClassLabel:
        for i in range(per_class):
            img = _synth_image(label, rng)
            (train if i < n_train else val).append(Sample(img, label))
    return Dataset(Split.TRAIN, train), Dataset(Split.VALIDATION, val)


def write_dataset(train: Dataset, validation: Dataset, root: str | Path) -> int:
    """Materialize datasets as PNGs in the <root>/<split>/<class>/ layout."""
    root = Path(root)
    written = 0
    for ds in (train, validation):
        for label in ClassLabel:
            (root / ds.split.value / CLASS_NAMES[label]).mkdir(parents=True, exist_ok=True)
        counters = {label: 0 for label in ClassLabel}
        for s in ds.samples:
            i = counters[s.label]
            counters[s.label] += 1
            path = root / ds.split.value / CLASS_NAMES[s.label] / f"{CLASS_NAMES[s.label]}_{i:04d}.png"
            u8 = np.round(s.image * 255.0).astype(np.uint8)
            Image.fromarray(u8, mode="RGB").save(path, format="PNG")
            written += 1
    return written
