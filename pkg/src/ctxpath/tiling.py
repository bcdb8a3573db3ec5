"""Patch grids, overlapping context blocks, and dihedral augmentation.

A grid decomposes an image into fixed-size square patches at a given
stride; residual pixels on the right/bottom edge that do not fill a whole
patch are dropped. Context blocks are k-by-k windows of adjacent grid
cells enumerated at grid-stride 1, row-major. The eight dihedral
operations are the lossless symmetries of a raster: four 90-degree
rotations, optionally preceded by a horizontal flip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlockTooLarge, OutOfGrid, PatchTooLarge

DIHEDRAL_IDS = tuple(range(8))


@dataclass(frozen=True)
class PatchGrid:
    """Geometry of a patch tiling: ``rows x cols`` patches of ``patch_size``
    pixels, origins spaced ``stride`` pixels apart."""

    patch_size: int
    stride: int
    rows: int
    cols: int

    @property
    def n_patches(self) -> int:
        return self.rows * self.cols

    def origin(self, row: int, col: int) -> tuple[int, int]:
        """Top-left pixel (x, y) of the patch at grid cell (row, col)."""
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise OutOfGrid(f"({row}, {col}) outside {self.rows}x{self.cols} grid")
        return (col * self.stride, row * self.stride)

    def cells(self):
        """All (row, col) cells in row-major order."""
        return [(r, c) for r in range(self.rows) for c in range(self.cols)]


@dataclass(frozen=True)
class ContextBlock:
    """A k-by-k window of grid cells anchored at its top-left cell."""

    k: int
    anchor: tuple[int, int]

    @property
    def members(self) -> list[tuple[int, int]]:
        """Member cells in row-major order, ``k*k`` of them."""
        r0, c0 = self.anchor
        return [(r0 + i, c0 + j) for i in range(self.k) for j in range(self.k)]


def make_grid(width: int, height: int, patch_size: int, stride: int) -> PatchGrid:
    """Tile a width-by-height image with square patches.

    ``rows = floor((height - patch_size) / stride) + 1`` and likewise for
    columns, so every patch lies fully inside the image and any ragged
    border is dropped.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if patch_size < 1:
        raise ValueError("patch_size must be >= 1")
    if patch_size > width or patch_size > height:
        raise PatchTooLarge(
            f"patch {patch_size} does not fit in a {width}x{height} image"
        )
    rows = (height - patch_size) // stride + 1
    cols = (width - patch_size) // stride + 1
    return PatchGrid(patch_size=patch_size, stride=stride, rows=rows, cols=cols)


def extract_patch(img: np.ndarray, grid: PatchGrid, row: int, col: int) -> np.ndarray:
    """Copy out the pixel rectangle of one grid cell."""
    x, y = grid.origin(row, col)
    p = grid.patch_size
    return np.ascontiguousarray(img[y : y + p, x : x + p])


def enumerate_blocks(grid: PatchGrid, k: int) -> list[ContextBlock]:
    """All k-by-k context blocks at grid-stride 1, row-major by anchor."""
    if k < 1:
        raise ValueError("block size must be >= 1")
    if k > grid.rows or k > grid.cols:
        raise BlockTooLarge(
            f"{k}x{k} block does not fit a {grid.rows}x{grid.cols} grid"
        )
    return [
        ContextBlock(k=k, anchor=(r, c))
        for r in range(grid.rows - k + 1)
        for c in range(grid.cols - k + 1)
    ]


def apply_dihedral(img: np.ndarray, op: int) -> np.ndarray:
    """Apply one of the 8 dihedral symmetries as an exact pixel permutation.

    Ids 0..3 rotate counter-clockwise by 90*id degrees; ids 4..7 first flip
    horizontally (mirror columns) and then rotate by 90*(id-4) degrees.
    """
    if op not in DIHEDRAL_IDS:
        raise ValueError(f"dihedral op must be in 0..7, got {op}")
    out = np.asarray(img)
    if op >= 4:
        out = np.fliplr(out)
    return np.ascontiguousarray(np.rot90(out, k=op % 4))


def compose_dihedral(first: int, second: int) -> int:
    """Id of the single op equivalent to applying ``first`` then ``second``."""
    f1, k1 = first >= 4, first % 4
    f2, k2 = second >= 4, second % 4
    if f2:
        flip = not f1
        k = (k2 - k1) % 4
    else:
        flip = f1
        k = (k1 + k2) % 4
    return k + (4 if flip else 0)


def invert_dihedral(op: int) -> int:
    """The op undoing ``op``: applying both in sequence is the identity."""
    for candidate in DIHEDRAL_IDS:
        if compose_dihedral(op, candidate) == 0:
            return candidate
    raise ValueError(f"dihedral op must be in 0..7, got {op}")
