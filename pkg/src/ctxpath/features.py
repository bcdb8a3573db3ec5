"""Per-patch feature extraction and the CTXF binary feature store.

Two feature sources implement the same contract: the built-in baseline
descriptor computed from pixels, and matrices read from a CTXF file that
some external extractor (typically a CNN exporter) produced. Downstream
code never hard-codes the feature dimension; it always comes from the
data.

Baseline descriptor layout (D = 70, documented in docs/formats.md):
  [0:3]   per-channel mean in l/alpha/beta
  [3:6]   per-channel population std in l/alpha/beta
  [6:22]  16-bin normalized histogram of the l channel
  [22:38] 16-bin normalized histogram of the alpha channel
  [38:54] 16-bin normalized histogram of the beta channel
  [54:70] 16-bin normalized histogram of luminance gradient magnitude
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import color
from .errors import (
    BadMagic,
    CorruptRecord,
    DuplicateKey,
    DimMismatch,
    OutOfGrid,
    UnsupportedVersion,
)
from .tiling import ContextBlock, PatchGrid, extract_patch

BASELINE_DIM = 70
HIST_BINS = 16

# Fixed histogram ranges. The l/alpha/beta bounds cover the whole reachable
# range of the log-compressed space; gradient magnitude of 8-bit luminance
# cannot exceed 255*sqrt(2).
L_RANGE = (-10.4, 0.0)
ALPHA_RANGE = (-5.0, 5.0)
BETA_RANGE = (-4.5, 4.5)
GRAD_RANGE = (0.0, 255.0 * np.sqrt(2.0))

CTXF_MAGIC = b"CTXF"
CTXF_VERSION = 1


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-cell feature vectors for one (image, augmentation) tiling."""

    values: np.ndarray  # (rows, cols, D) float64

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValueError("expected (rows, cols, D) feature values")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class FeatureStoreEntry:
    image_id: str
    augmentation: int
    matrix: FeatureMatrix

    @property
    def key(self) -> tuple[str, int]:
        return (self.image_id, self.augmentation)


def _fixed_histogram(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Normalized histogram over HIST_BINS fixed-width bins; out-of-range
    samples fall into the boundary bins."""
    idx = np.floor((values - lo) / (hi - lo) * HIST_BINS).astype(np.int64)
    idx = np.clip(idx, 0, HIST_BINS - 1)
    counts = np.bincount(idx, minlength=HIST_BINS).astype(np.float64)
    return counts / values.size


def baseline_extract(patch: np.ndarray) -> np.ndarray:
    """Deterministic 70-dim pixel descriptor of an RGB patch.

    See the module docstring for the exact layout. Channel statistics and
    histograms are taken in the log-compressed l/alpha/beta space; the
    gradient histogram uses forward differences of Rec.601 luminance with
    zeros on the last row/column.
    """
    patch = color.validate_rgb(patch)
    lab = color.rgb_to_space(patch, color.LALPHABETA).data
    flat = lab.reshape(-1, 3)
    out = np.empty(BASELINE_DIM)
    out[0:3] = flat.mean(axis=0)
    out[3:6] = flat.std(axis=0)
    for c, (lo, hi) in enumerate((L_RANGE, ALPHA_RANGE, BETA_RANGE)):
        start = 6 + c * HIST_BINS
        out[start : start + HIST_BINS] = _fixed_histogram(flat[:, c], lo, hi)
    luma = (
        0.299 * patch[..., 0].astype(np.float64)
        + 0.587 * patch[..., 1]
        + 0.114 * patch[..., 2]
    )
    gx = np.zeros_like(luma)
    gy = np.zeros_like(luma)
    gx[:, :-1] = luma[:, 1:] - luma[:, :-1]
    gy[:-1, :] = luma[1:, :] - luma[:-1, :]
    mag = np.hypot(gx, gy).reshape(-1)
    out[54:70] = _fixed_histogram(mag, *GRAD_RANGE)
    return out


def baseline_matrix(img: np.ndarray, grid: PatchGrid) -> FeatureMatrix:
    """Baseline descriptor for every cell of a grid over one image."""
    values = np.empty((grid.rows, grid.cols, BASELINE_DIM))
    for r in range(grid.rows):
        for c in range(grid.cols):
            values[r, c] = baseline_extract(extract_patch(img, grid, r, c))
    return FeatureMatrix(values)


def assemble_block_features(fm: FeatureMatrix, block: ContextBlock) -> np.ndarray:
    """Concatenate the block's member vectors in row-major member order.

    The result has dimension k*k*D; member order is part of the contract,
    so permuting members changes the output.
    """
    parts = []
    for r, c in block.members:
        if not (0 <= r < fm.rows and 0 <= c < fm.cols):
            raise OutOfGrid(
                f"block member ({r}, {c}) outside {fm.rows}x{fm.cols} features"
            )
        parts.append(fm.values[r, c])
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# CTXF store
# ---------------------------------------------------------------------------
#
# Little-endian layout (full field list in docs/formats.md):
#   magic "CTXF" | u32 version=1 | u32 D | u32 record_count
#   per record: u16 id_len | id bytes (UTF-8) | u8 augmentation |
#               u16 rows | u16 cols | rows*cols*D float32, row-major

_HEADER = struct.Struct("<4sIII")
_REC_FIXED = struct.Struct("<BHH")


def store_write(path, entries: list[FeatureStoreEntry]) -> None:
    """Write entries to a CTXF file; byte-deterministic for equal input."""
    seen: set[tuple[str, int]] = set()
    dim = entries[0].matrix.dim if entries else 0
    for e in entries:
        if e.matrix.dim != dim:
            raise DimMismatch(
                f"store requires uniform dimension; got {e.matrix.dim} and {dim}"
            )
        if e.key in seen:
            raise DuplicateKey(f"duplicate store key {e.key!r}")
        seen.add(e.key)
    chunks = [_HEADER.pack(CTXF_MAGIC, CTXF_VERSION, dim, len(entries))]
    for e in entries:
        ident = e.image_id.encode("utf-8")
        chunks.append(struct.pack("<H", len(ident)))
        chunks.append(ident)
        chunks.append(_REC_FIXED.pack(e.augmentation, e.matrix.rows, e.matrix.cols))
        chunks.append(e.matrix.values.astype("<f4").tobytes(order="C"))
    Path(path).write_bytes(b"".join(chunks))


def store_read(path) -> list[FeatureStoreEntry]:
    """Parse a CTXF file back into entries (values widened to float64)."""
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != CTXF_MAGIC:
        raise BadMagic(f"{path}: not a CTXF file")
    if len(data) < _HEADER.size:
        raise CorruptRecord(f"{path}: truncated header")
    _, version, dim, count = _HEADER.unpack_from(data, 0)
    if version != CTXF_VERSION:
        raise UnsupportedVersion(f"{path}: version {version} not supported")
    offset = _HEADER.size
    entries: list[FeatureStoreEntry] = []
    seen: set[tuple[str, int]] = set()
    for i in range(count):
        try:
            (id_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            ident = data[offset : offset + id_len]
            if len(ident) != id_len:
                raise struct.error("short id")
            offset += id_len
            aug, rows, cols = _REC_FIXED.unpack_from(data, offset)
            offset += _REC_FIXED.size
            n_values = rows * cols * dim
            payload = data[offset : offset + 4 * n_values]
            if len(payload) != 4 * n_values:
                raise struct.error("short payload")
            offset += 4 * n_values
        except struct.error as exc:
            raise CorruptRecord(f"{path}: record {i} truncated") from exc
        values = (
            np.frombuffer(payload, dtype="<f4")
            .astype(np.float64)
            .reshape(rows, cols, dim)
        )
        entry = FeatureStoreEntry(ident.decode("utf-8"), aug, FeatureMatrix(values))
        if entry.key in seen:
            raise CorruptRecord(f"{path}: duplicate key {entry.key!r}")
        seen.add(entry.key)
        entries.append(entry)
    if offset != len(data):
        raise CorruptRecord(f"{path}: {len(data) - offset} trailing bytes")
    return entries


def store_index(entries: list[FeatureStoreEntry]):
    """Dict view keyed by (image_id, augmentation)."""
    return {e.key: e.matrix for e in entries}
