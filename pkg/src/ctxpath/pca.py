"""Principal component analysis for block feature vectors.

The decomposition is exact and deterministic: covariance eigenvectors via
the symmetric eigensolver when the dimension is small, or the Gram-matrix
dual when there are far fewer samples than dimensions (the usual case for
concatenated CNN block features). Component signs are fixed so that each
component's largest-magnitude entry is non-negative, which makes
serialized models reproducible across runs and platforms.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataWarning, DimMismatch, InsufficientSamples

_RANK_CUTOFF = 1e-10


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (m, d), orthonormal rows
    explained_variance: np.ndarray  # (m,), non-increasing

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def _fix_signs(components: np.ndarray) -> np.ndarray:
    out = components.copy()
    for i in range(out.shape[0]):
        j = int(np.argmax(np.abs(out[i])))
        if out[i, j] < 0:
            out[i] = -out[i]
    return out


def pca_fit(
    x: np.ndarray,
    n_components: int | None = None,
    variance_fraction: float | None = None,
) -> PcaModel:
    """Fit a PCA model on the rows of ``x``.

    Exactly one target should be given: a fixed component count, or a
    fraction f in (0, 1] meaning "smallest m whose cumulative explained
    variance ratio reaches f". The count is always capped at
    ``min(n - 1, d)``. Covariance uses the 1/(n-1) convention.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected an (n, d) matrix")
    n, d = x.shape
    if n < 2:
        raise InsufficientSamples(f"need at least 2 rows, got {n}")
    if (n_components is None) == (variance_fraction is None):
        raise ValueError("give exactly one of n_components / variance_fraction")
    if variance_fraction is not None and not (0.0 < variance_fraction <= 1.0):
        raise ValueError("variance_fraction must be in (0, 1]")
    if n_components is not None and n_components < 1:
        raise ValueError("n_components must be >= 1")

    mean = x.mean(axis=0)
    xc = x - mean
    total_var = float(np.sum(xc * xc) / (n - 1))
    if total_var < 1e-30:
        warnings.warn(
            "data has no variance; returning an empty model",
            DegenerateDataWarning,
            stacklevel=2,
        )
        return PcaModel(mean, np.zeros((0, d)), np.zeros(0))

    max_rank = min(n - 1, d)
    if d <= n:
        cov = (xc.T @ xc) / (n - 1)
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(-eigvals)
        eigvals = eigvals[order][:max_rank]
        comps = eigvecs[:, order][:, :max_rank].T
    else:
        gram = (xc @ xc.T) / (n - 1)
        eigvals, eigvecs = np.linalg.eigh(gram)
        order = np.argsort(-eigvals)
        eigvals = eigvals[order]
        eigvecs = eigvecs[:, order]
        keep = eigvals > _RANK_CUTOFF * max(eigvals[0], 1e-300)
        keep &= np.arange(len(eigvals)) < max_rank
        eigvals = eigvals[keep]
        comps = (xc.T @ eigvecs[:, keep]) / np.sqrt(eigvals * (n - 1))
        comps = comps.T

    eigvals = np.maximum(eigvals, 0.0)
    if n_components is not None:
        m = min(n_components, len(eigvals))
    else:
        ratios = np.cumsum(eigvals) / total_var
        m = int(np.searchsorted(ratios, variance_fraction - 1e-12) + 1)
        m = min(m, len(eigvals))
    return PcaModel(mean, _fix_signs(comps[:m]), eigvals[:m])


def pca_transform(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """Project vectors onto the component basis: components @ (x - mean)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise DimMismatch(
            f"expected dim {model.input_dim}, got {x.shape[-1]}"
        )
    return (x - model.mean) @ model.components.T


def pca_inverse_transform(model: PcaModel, z: np.ndarray) -> np.ndarray:
    """Reconstruct from component scores: mean + components^T @ z."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != model.n_components:
        raise DimMismatch(
            f"expected {model.n_components} component scores, got {z.shape[-1]}"
        )
    return z @ model.components + model.mean


def explained_variance_ratio(model: PcaModel, total_variance: float) -> np.ndarray:
    return model.explained_variance / total_variance
