"""Synthetic image corpora for experiments and end-to-end tests.

Two generators:

* ``color_corpus``: four classes with disjoint color-texture signatures.
  Each class pairs its own two-tone palette with a class-specific tone mix
  and texture cell size, so classes stay separable through per-image stain
  normalization (which equalizes global channel statistics but preserves
  histogram shape and edge density).

* ``context_corpus``: two classes that single patches cannot separate.
  Both classes tile the image from the same two patch painters in equal
  proportion; they differ only in the spatial arrangement (half-and-half
  vs checkerboard), so any signal must come from multi-patch context.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .color import write_image
from .manifest import ManifestRecord, save_manifest

# (tone a, tone b, tone-a fraction, texture cell size in px): the mix
# fraction and cell size survive per-image stain normalization (which
# equalizes channel means/stds but not histogram shape or edge density),
# so they are what keeps the four classes apart downstream.
_PALETTES = {
    "normal": ((182, 84, 92), (236, 198, 204), 0.10, 8),
    "benign": ((84, 170, 96), (200, 234, 206), 0.32, 16),
    "insitu": ((88, 96, 184), (202, 206, 238), 0.62, 32),
    "invasive": ((188, 178, 80), (238, 232, 198), 0.90, 64),
}


def _two_tone(rng, width, height, color_a, color_b, frac_a, cell, noise=12):
    """Cell-tiled two-tone texture with per-pixel noise, uint8 RGB."""
    gh = -(-height // cell)
    gw = -(-width // cell)
    pick = rng.random((gh, gw)) < frac_a
    mask = np.repeat(np.repeat(pick, cell, axis=0), cell, axis=1)[:height, :width]
    img = np.where(mask[..., None], np.array(color_a), np.array(color_b)).astype(
        np.float64
    )
    img += rng.integers(-noise, noise + 1, size=img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


def class_image(rng, label: str, size=(1024, 768), cell_scale: int = 1) -> np.ndarray:
    """One fresh image of the given class from the four-class family.

    ``cell_scale`` shrinks the texture cells for corpora rendered at less
    than the nominal resolution, keeping several cells per patch.
    """
    base_a, base_b, frac, cell = _PALETTES[label]
    jitter_a = np.clip(np.array(base_a) + rng.integers(-12, 13, 3), 0, 255)
    jitter_b = np.clip(np.array(base_b) + rng.integers(-12, 13, 3), 0, 255)
    frac_i = frac + rng.uniform(-0.02, 0.02)
    cell = max(2, cell // cell_scale)
    return _two_tone(rng, size[0], size[1], jitter_a, jitter_b, frac_i, cell)


def color_corpus(
    out_dir,
    per_class: int,
    size=(1024, 768),
    seed: int = 0,
    prefix: str = "img",
    cell_scale: int = 1,
) -> list[ManifestRecord]:
    """Write a four-class corpus plus manifest.csv; returns the records."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    records = []
    for label in _PALETTES:
        for i in range(per_class):
            img = class_image(rng, label, size, cell_scale)
            image_id = f"{prefix}_{label}_{i:03d}"
            path = out_dir / f"{image_id}.png"
            write_image(img, path)
            records.append(ManifestRecord(image_id, path, label))
    save_manifest(records, out_dir / "manifest.csv")
    return records


def _patch_painter(rng, patch, base, noise=15):
    img = np.full((patch, patch, 3), base, dtype=np.float64)
    img += rng.integers(-noise, noise + 1, size=img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


def context_corpus(
    out_dir,
    per_class: int,
    size=(1024, 768),
    patch: int = 256,
    seed: int = 0,
    prefix: str = "ctx",
) -> list[ManifestRecord]:
    """Write the context-only corpus plus manifest.csv.

    Class ``normal`` images split the patch grid into two solid halves of
    patch types A and B; class ``invasive`` images interleave A and B as a
    checkerboard. Per image, which type goes where is randomized, and the
    grid always holds equally many A and B patches, so the marginal
    distribution of single patches is identical across classes.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    width, height = size
    cols, rows = width // patch, height // patch
    type_a = (188, 92, 104)
    type_b = (92, 112, 188)
    records = []
    for label in ("normal", "invasive"):
        for i in range(per_class):
            flip = bool(rng.integers(0, 2))
            img = np.empty((rows * patch, cols * patch, 3), dtype=np.uint8)
            for r in range(rows):
                for c in range(cols):
                    if label == "normal":
                        is_a = c < cols // 2
                    else:
                        is_a = (r + c) % 2 == 0
                    if flip:
                        is_a = not is_a
                    base = type_a if is_a else type_b
                    tile = _patch_painter(rng, patch, base)
                    img[r * patch : (r + 1) * patch, c * patch : (c + 1) * patch] = tile
            if img.shape[0] != height or img.shape[1] != width:
                canvas = np.zeros((height, width, 3), dtype=np.uint8)
                canvas[: img.shape[0], : img.shape[1]] = img
                img = canvas
            image_id = f"{prefix}_{label}_{i:03d}"
            path = out_dir / f"{image_id}.png"
            write_image(img, path)
            records.append(ManifestRecord(image_id, path, label))
    save_manifest(records, out_dir / "manifest.csv")
    return records
