"""Dataset ingestion.

On-disk layout: ``<root>/images/<stem>.png`` with a matching single-channel
index image ``<root>/labels/<stem>.png``.  Images are read as RGB and scaled
to ``[0, 1]``.  Resizing uses bilinear interpolation for images and nearest
neighbor for labels, so label values are never blended.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..core import IGNORE_INDEX
from ..toymodels import ConflictPairModel, low_margin_scene, synthetic_dataset

log = logging.getLogger(__name__)

CITYSCAPES_SHAPE = (1024, 2048)
CITYSCAPES_RESIZE = (512, 1024)
BUILTIN_DATASETS = ("synthetic", "low-margin", "conflict")


class DatasetError(ValueError):
    """A dataset directory violates the expected layout."""


@dataclass
class Sample:
    name: str
    image: np.ndarray
    labels: np.ndarray


def resolve_resize(shape: tuple[int, int], resize) -> tuple[int, int] | None:
    """Target ``(H, W)`` for an input of ``shape`` or ``None`` to keep it."""
    if resize is None:
        return None
    if resize == "auto":
        return CITYSCAPES_RESIZE if tuple(shape) == CITYSCAPES_SHAPE else None
    return int(resize[0]), int(resize[1])


def _read_pair(img_path: Path, lbl_path: Path, num_classes: int, resize, ignore_index: int) -> Sample:
    with Image.open(img_path) as im:
        rgb = im.convert("RGB")
    with Image.open(lbl_path) as lm:
        if lm.mode not in ("L", "P", "I", "I;16"):
            raise DatasetError(f"{lbl_path}: label image must be single-channel, got mode {lm.mode}")
        lbl = lm.copy()
    if rgb.size != lbl.size:
        raise DatasetError(f"{lbl_path}: size {lbl.size} differs from image size {rgb.size}")
    target = resolve_resize((rgb.size[1], rgb.size[0]), resize)
    if target is not None and target != (rgb.size[1], rgb.size[0]):
        h, w = target
        rgb = rgb.resize((w, h), Image.BILINEAR)
        lbl = lbl.resize((w, h), Image.NEAREST)
    x = np.asarray(rgb, dtype=np.float64) / 255.0
    y = np.asarray(lbl).astype(np.int64)
    bad = (y != ignore_index) & ((y < 0) | (y >= num_classes))
    if bad.any():
        raise DatasetError(f"{lbl_path}: label value {int(y[bad].max())} outside 0..{num_classes - 1}")
    return Sample(img_path.stem, x, y)


def ingest_dataset(root, num_classes: int, resize="auto", ignore_index: int = IGNORE_INDEX) -> list[Sample]:
    """Load every image/label pair under ``root``, sorted by file stem.

    Raises :class:`DatasetError` naming the offending file for unpaired
    files or out-of-range labels.  A directory without images yields an
    empty list and a warning.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"{root}: not a directory")
    images = {p.stem: p for p in sorted((root / "images").glob("*.png"))}
    labels = {p.stem: p for p in sorted((root / "labels").glob("*.png"))}
    for stem in sorted(set(images) ^ set(labels)):
        orphan = images.get(stem) or labels.get(stem)
        raise DatasetError(f"{orphan}: no matching {'label' if stem in images else 'image'} file")
    if not images:
        log.warning("dataset %s contains no images", root)
        return []
    return [_read_pair(images[s], labels[s], num_classes, resize, ignore_index) for s in sorted(images)]


def load_samples(config) -> list[Sample]:
    """Samples for a run: a built-in dataset name or a directory path."""
    name = config.dataset
    if name == "synthetic":
        pairs = synthetic_dataset(
            config.synthetic_images,
            config.synthetic_size,
            config.num_classes,
            noise=config.synthetic_noise,
            contrast=config.synthetic_contrast,
            seed=0,
        )
        return [Sample(f"synthetic_{i:03d}", x, y) for i, (x, y) in enumerate(pairs)]
    if name == "low-margin":
        out = []
        for layout in ("uniform", "quadrants"):
            x, y = low_margin_scene(config.synthetic_size, offset=0.03, layout=layout)
            out.append(Sample(f"low-margin_{layout}", x, y))
        return out
    if name == "conflict":
        x, y, _ = ConflictPairModel().example()
        return [Sample("conflict", x, y)]
    return ingest_dataset(name, config.num_classes, config.resize)


def save_pair(root, stem: str, image: np.ndarray, labels: np.ndarray) -> None:
    """Write one pair in the ingest layout (used to build fixtures)."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "labels").mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.round(np.clip(image, 0, 1) * 255).astype(np.uint8)).save(root / "images" / f"{stem}.png")
    Image.fromarray(np.asarray(labels).astype(np.uint8)).save(root / "labels" / f"{stem}.png")
