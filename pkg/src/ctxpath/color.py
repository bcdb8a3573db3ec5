"""Colorspace conversion and Reinhard statistics-matching normalization.

Two decorrelated working spaces are supported:

* ``cielab``: sRGB (D65) is linearized, mapped to XYZ and then to CIE
  L*a*b*. The white point is taken as the row sums of the sRGB matrix so
  that pure white lands exactly on (100, 0, 0).
* ``lalphabeta``: RGB is treated as linear, mapped through a cone-response
  matrix to LMS, log10-compressed, and rotated into the decorrelated
  l/alpha/beta basis. This is the space the original color-transfer method
  operates in.

Normalization matches the per-channel population mean and standard
deviation of a source image to a stored target, channel by channel, in the
chosen space, then converts back to 8-bit RGB with clamping.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DegenerateChannelWarning

CIELAB = "cielab"
LALPHABETA = "lalphabeta"
COLORSPACES = (CIELAB, LALPHABETA)

SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
XYZ_TO_SRGB = np.linalg.inv(SRGB_TO_XYZ)
# White is defined by the matrix itself so (255,255,255) maps to exactly
# (100, 0, 0) and back.
WHITE_XYZ = SRGB_TO_XYZ @ np.ones(3)

RGB_TO_LMS = np.array(
    [
        [0.3811, 0.5783, 0.0402],
        [0.1967, 0.7244, 0.0782],
        [0.0241, 0.1288, 0.8444],
    ]
)
LMS_TO_RGB = np.linalg.inv(RGB_TO_LMS)
_R3, _R6, _R2 = np.sqrt(3.0), np.sqrt(6.0), np.sqrt(2.0)
LMS_TO_LAB = np.array(
    [
        [1.0 / _R3, 1.0 / _R3, 1.0 / _R3],
        [1.0 / _R6, 1.0 / _R6, -2.0 / _R6],
        [1.0 / _R2, -1.0 / _R2, 0.0],
    ]
)
LAB_TO_LMS = np.linalg.inv(LMS_TO_LAB)

# Floor applied to LMS before the log; only exact zeros are affected, and
# they still decode back to 0 after rounding.
LMS_FLOOR = 1e-6
# Log-LMS is clamped here before exponentiation so wild out-of-gamut
# transfers stay finite and end up clipped in RGB.
LOG_LMS_LIMIT = 20.0

DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class ImageF3:
    """Real-valued 3-channel raster tagged with its colorspace."""

    data: np.ndarray  # (H, W, 3) float64
    space: str

    def __post_init__(self):
        if self.space not in COLORSPACES:
            raise ValueError(f"unknown colorspace {self.space!r}")
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ValueError("expected an (H, W, 3) array")


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel population mean and standard deviation in a colorspace."""

    space: str
    mean: np.ndarray  # (3,)
    std: np.ndarray  # (3,)

    def __post_init__(self):
        if self.space not in COLORSPACES:
            raise ValueError(f"unknown colorspace {self.space!r}")
        if np.any(np.asarray(self.std) < 0):
            raise ValueError("standard deviations must be non-negative")


def validate_rgb(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) RGB array")
    if img.dtype != np.uint8:
        raise ValueError("expected 8-bit RGB (dtype uint8)")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    return img


def _srgb_to_linear(v):
    lin = np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)
    return lin


def _linear_to_srgb(lin):
    safe = np.maximum(lin, 0.0)
    return np.where(lin <= 0.0031308, lin * 12.92, 1.055 * safe ** (1.0 / 2.4) - 0.055)


def _lab_f(t):
    d = 6.0 / 29.0
    return np.where(t > d**3, np.cbrt(t), t / (3.0 * d * d) + 4.0 / 29.0)


def _lab_f_inv(f):
    d = 6.0 / 29.0
    return np.where(f > d, f**3, 3.0 * d * d * (f - 4.0 / 29.0))


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def rgb_to_space(img: np.ndarray, space: str) -> ImageF3:
    """Convert an 8-bit RGB image into one of the supported spaces."""
    img = validate_rgb(img)
    v = img.astype(np.float64) / 255.0
    flat = v.reshape(-1, 3)
    if space == CIELAB:
        xyz = _srgb_to_linear(flat) @ SRGB_TO_XYZ.T
        f = _lab_f(xyz / WHITE_XYZ)
        out = np.empty_like(f)
        out[:, 0] = 116.0 * f[:, 1] - 16.0
        out[:, 1] = 500.0 * (f[:, 0] - f[:, 1])
        out[:, 2] = 200.0 * (f[:, 1] - f[:, 2])
    elif space == LALPHABETA:
        lms = np.maximum(flat @ RGB_TO_LMS.T, LMS_FLOOR)
        out = np.log10(lms) @ LMS_TO_LAB.T
    else:
        raise ValueError(f"unknown colorspace {space!r}")
    return ImageF3(out.reshape(img.shape), space)


def space_to_rgb(img: ImageF3) -> np.ndarray:
    """Inverse conversion back to 8-bit RGB.

    Out-of-gamut values are clamped to [0, 255] after rounding
    half-away-from-zero.
    """
    flat = img.data.reshape(-1, 3).astype(np.float64)
    if img.space == CIELAB:
        f = np.empty_like(flat)
        f[:, 1] = (flat[:, 0] + 16.0) / 116.0
        f[:, 0] = f[:, 1] + flat[:, 1] / 500.0
        f[:, 2] = f[:, 1] - flat[:, 2] / 200.0
        xyz = _lab_f_inv(f) * WHITE_XYZ
        v = _linear_to_srgb(xyz @ XYZ_TO_SRGB.T)
    else:
        log_lms = np.clip(flat @ LAB_TO_LMS.T, -LOG_LMS_LIMIT, LOG_LMS_LIMIT)
        v = (10.0**log_lms) @ LMS_TO_RGB.T
    quantized = np.clip(_round_half_away(v * 255.0), 0.0, 255.0)
    return quantized.reshape(img.data.shape).astype(np.uint8)


def compute_stats(img: ImageF3) -> ChannelStats:
    """Per-channel population mean and standard deviation (divide by N)."""
    flat = img.data.reshape(-1, 3)
    if flat.shape[0] == 0:
        raise ValueError("image is empty")
    return ChannelStats(img.space, flat.mean(axis=0), flat.std(axis=0))


def reinhard_normalize(
    src: np.ndarray, target: ChannelStats, space: str
) -> np.ndarray:
    """Match the source image's channel statistics to a target.

    Each channel is shifted and scaled independently in the chosen space:
    ``out = (x - mean_src) * (std_tgt / std_src) + mean_tgt``. A channel
    whose source spread is below ``DEGENERATE_STD`` has no defined scale;
    it is pinned to the target mean and a ``DegenerateChannelWarning`` is
    issued.
    """
    if target.space != space:
        raise ValueError(
            f"target stats are in {target.space!r}, requested space {space!r}"
        )
    f3 = rgb_to_space(src, space)
    stats = compute_stats(f3)
    out = np.empty_like(f3.data)
    for c in range(3):
        if stats.std[c] < DEGENERATE_STD:
            warnings.warn(
                f"channel {c} has no spread (std={stats.std[c]:.3g}); "
                "pinning it to the target mean",
                DegenerateChannelWarning,
                stacklevel=2,
            )
            out[..., c] = target.mean[c]
        else:
            scale = target.std[c] / stats.std[c]
            out[..., c] = (f3.data[..., c] - stats.mean[c]) * scale + target.mean[c]
    return space_to_rgb(ImageF3(out, space))


# ---------------------------------------------------------------------------
# stats records and image files
# ---------------------------------------------------------------------------

def stats_to_record(stats: ChannelStats) -> str:
    """Serialize stats as ``colorspace,mean1,mean2,mean3,std1,std2,std3``."""
    values = [repr(float(v)) for v in (*stats.mean, *stats.std)]
    return ",".join([stats.space, *values])


def stats_from_record(record: str) -> ChannelStats:
    parts = record.strip().split(",")
    if len(parts) != 7:
        raise ValueError("stats record must have 7 comma-separated fields")
    space = parts[0]
    if space not in COLORSPACES:
        raise ValueError(f"unknown colorspace {space!r} in stats record")
    vals = [float(p) for p in parts[1:]]
    return ChannelStats(space, np.array(vals[:3]), np.array(vals[3:]))


def save_stats(stats: ChannelStats, path) -> None:
    Path(path).write_text(stats_to_record(stats) + "\n", encoding="utf-8")


def load_stats(path) -> ChannelStats:
    return stats_from_record(Path(path).read_text(encoding="utf-8"))


def read_image(path) -> np.ndarray:
    """Load a PNG or TIFF file as an (H, W, 3) uint8 array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def write_image(img: np.ndarray, path) -> None:
    img = validate_rgb(img)
    Image.fromarray(img, mode="RGB").save(path)
