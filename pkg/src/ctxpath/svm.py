"""Soft-margin RBF-kernel SVMs trained by sequential minimal optimization.

The binary solver works on the standard dual

    min 0.5 * a'Qa - sum(a)   s.t.  y'a = 0,  0 <= a_i <= C,

with Q_ij = y_i y_j K(x_i, x_j), picking the maximal violating pair each
iteration and solving the two-variable subproblem in closed form. Training
is deterministic for fixed input order. Multiclass classification is
one-vs-one: one binary machine per unordered class pair, combined by
voting with a deterministic tie-break chain (votes, then summed signed
margin, then class order).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceWarning, DimMismatch, SingleClassData

GRAM_CACHE_LIMIT = 4096
SV_CUTOFF = 1e-12
_ETA_FLOOR = 1e-12
# Composite bound arithmetic can leave an alpha a few ulp shy of 0 or C,
# which would keep it in the working-set masks and stall the solver; snap
# within this relative distance onto the exact bound.
_BOUND_SNAP = 1e-12


@dataclass(frozen=True)
class KernelParams:
    gamma: float

    def __post_init__(self):
        if not (self.gamma > 0):
            raise ValueError(f"gamma must be positive, got {self.gamma}")


def rbf_kernel(x: np.ndarray, y: np.ndarray, params: KernelParams) -> float:
    """exp(-gamma * ||x - y||^2) for a single pair of vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimMismatch(f"kernel arguments differ in shape: {x.shape} vs {y.shape}")
    d = x - y
    return float(np.exp(-params.gamma * np.dot(d, d)))


def rbf_kernel_matrix(
    a: np.ndarray, b: np.ndarray, params: KernelParams
) -> np.ndarray:
    """Kernel block K[i, j] = k(a_i, b_j), computed via the norm expansion."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise DimMismatch(f"dim mismatch: {a.shape[1]} vs {b.shape[1]}")
    d2 = (
        (a * a).sum(axis=1)[:, None]
        + (b * b).sum(axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-params.gamma * d2)


def resolve_gamma(x: np.ndarray, policy) -> float:
    """Turn a gamma policy into a number.

    ``"scale"`` is 1 / (n_features * mean per-dimension population
    variance); a positive float passes through unchanged.
    """
    if isinstance(policy, str):
        if policy != "scale":
            raise ValueError(f"unknown gamma policy {policy!r}")
        x = np.asarray(x, dtype=np.float64)
        var = float(x.var(axis=0).mean())
        if var <= 0.0:
            return 1.0
        return 1.0 / (x.shape[1] * var)
    gamma = float(policy)
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return gamma


@dataclass(frozen=True)
class BinarySvm:
    support_vectors: np.ndarray  # (s, m)
    dual_coef: np.ndarray  # (s,), alpha_i * y_i
    bias: float
    c: float
    params: KernelParams
    objective: float  # dual objective at the returned iterate
    converged: bool = True


def _snap(v: float, c: float) -> float:
    if v < _BOUND_SNAP * c:
        return 0.0
    if v > c * (1.0 - _BOUND_SNAP):
        return c
    return v


class _GramCache:
    """Full Gram matrix when it fits, per-row recomputation otherwise."""

    def __init__(self, x, params):
        self.x = x
        self.params = params
        n = x.shape[0]
        self.full = None
        if n <= GRAM_CACHE_LIMIT:
            g = rbf_kernel_matrix(x, x, params)
            np.fill_diagonal(g, 1.0)
            self.full = g

    def row(self, i):
        if self.full is not None:
            return self.full[i]
        r = rbf_kernel_matrix(self.x[i : i + 1], self.x, self.params)[0]
        r[i] = 1.0
        return r

    def entry(self, i, j):
        if self.full is not None:
            return self.full[i, j]
        if i == j:
            return 1.0
        return rbf_kernel(self.x[i], self.x[j], self.params)


def smo_train(
    x: np.ndarray,
    y: np.ndarray,
    c: float,
    params: KernelParams,
    tol: float = 1e-3,
    max_passes: int | None = None,
) -> BinarySvm:
    """Train a binary soft-margin SVM.

    ``y`` must contain both -1 and +1. ``max_passes`` counts sweeps of n
    pair updates each and defaults to 10*n; exhausting it returns the best
    iterate with ``converged=False`` under a ``ConvergenceWarning``. On
    return, support vectors are the points with alpha above ``SV_CUTOFF``
    and the KKT conditions hold within ``tol``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("x must be (n, m) with one label per row")
    n = x.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if np.all(y == y[0]):
        raise SingleClassData("training labels contain a single class")
    if c <= 0:
        raise ValueError(f"C must be positive, got {c}")
    if max_passes is None:
        max_passes = 10 * n

    gram = _GramCache(x, params)
    alpha = np.zeros(n)
    u = np.zeros(n)  # u_k = sum_l alpha_l y_l K_lk; decision minus bias
    max_updates = max_passes * n
    converged = False

    for _ in range(max_updates):
        neg_e = y - u
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0))
        if not up.any() or not low.any():
            converged = True
            break
        up_vals = np.where(up, neg_e, -np.inf)
        low_vals = np.where(low, neg_e, np.inf)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(low_vals))
        if up_vals[i] - low_vals[j] <= tol:
            converged = True
            break

        s = y[i] * y[j]
        if s < 0:
            lo = max(0.0, alpha[j] - alpha[i])
            hi = min(c, c + alpha[j] - alpha[i])
        else:
            lo = max(0.0, alpha[i] + alpha[j] - c)
            hi = min(c, alpha[i] + alpha[j])
        e_i = u[i] - y[i]
        e_j = u[j] - y[j]
        eta = gram.entry(i, i) + gram.entry(j, j) - 2.0 * gram.entry(i, j)
        if eta > _ETA_FLOOR:
            target = alpha[j] + y[j] * (e_i - e_j) / eta
        else:
            # Flat direction (duplicate points): slide to the endpoint the
            # linear term favors.
            slope = y[j] * (e_j - e_i)
            if slope > 0:
                target = lo
            elif slope < 0:
                target = hi
            else:
                target = alpha[j]
        new_j = min(max(target, lo), hi)
        delta_j = new_j - alpha[j]
        if abs(delta_j) < 1e-14:
            # The most violating pair cannot move; no other pair can do
            # better, so this is as converged as floating point allows.
            converged = up_vals[i] - low_vals[j] <= tol
            break
        old_i, old_j = alpha[i], alpha[j]
        alpha[j] = _snap(new_j, c)
        alpha[i] = _snap(min(max(old_i - s * delta_j, 0.0), c), c)
        delta_j = alpha[j] - old_j
        delta_i = alpha[i] - old_i
        u += (delta_i * y[i]) * gram.row(i) + (delta_j * y[j]) * gram.row(j)

    if not converged:
        warnings.warn(
            f"SMO stopped after {max_passes} passes above tolerance {tol}",
            ConvergenceWarning,
            stacklevel=2,
        )

    free = (alpha > 0.0) & (alpha < c)
    if free.any():
        bias = float(np.mean((y - u)[free]))
    else:
        neg_e = y - u
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0))
        hi = float(np.max(neg_e[up])) if up.any() else 0.0
        lo = float(np.min(neg_e[low])) if low.any() else 0.0
        bias = 0.5 * (hi + lo)

    objective = float(np.sum(alpha) - 0.5 * np.dot(alpha * y, u))
    sv = alpha > SV_CUTOFF
    return BinarySvm(
        support_vectors=np.ascontiguousarray(x[sv]),
        dual_coef=alpha[sv] * y[sv],
        bias=bias,
        c=c,
        params=params,
        objective=objective,
        converged=converged,
    )


def svm_decision(model: BinarySvm, x: np.ndarray) -> float | np.ndarray:
    """sum_i coef_i K(sv_i, x) + bias; accepts one vector or a matrix."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if model.support_vectors.shape[0] == 0:
        vals = np.full(pts.shape[0], model.bias)
        return float(vals[0]) if single else vals
    if pts.shape[1] != model.support_vectors.shape[1]:
        raise DimMismatch(
            f"expected dim {model.support_vectors.shape[1]}, got {pts.shape[1]}"
        )
    k = rbf_kernel_matrix(model.support_vectors, pts, model.params)
    # elementwise products + pairwise sum keep symmetric cancellations exact
    # (BLAS FMA paths would leave ~1e-17 residue on mirrored coefficients)
    vals = (model.dual_coef[:, None] * k).sum(axis=0) + model.bias
    return float(vals[0]) if single else vals


@dataclass(frozen=True)
class MulticlassSvm:
    classes: tuple  # ordered class labels
    pairs: tuple  # ((i, j), ...) indices into classes, i < j, lexicographic
    machines: tuple  # BinarySvm per pair; the i-class maps to +1
    params: KernelParams


def ovo_train(
    x: np.ndarray,
    labels,
    c: float,
    gamma="scale",
    tol: float = 1e-3,
    max_passes: int | None = None,
    classes=None,
) -> MulticlassSvm:
    """Train one binary machine per unordered class pair.

    ``classes`` fixes the class order (used for tie-breaks and
    serialization); by default classes appear in first-seen order. The
    kernel width is resolved once on the full training matrix and shared
    by every pair machine.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = list(labels)
    if classes is None:
        classes = list(dict.fromkeys(labels))
    classes = tuple(classes)
    if len(classes) < 2:
        raise SingleClassData(f"need at least 2 classes, got {list(classes)}")
    unknown = set(labels) - set(classes)
    if unknown:
        raise ValueError(f"labels {sorted(unknown)} not in class list")
    counts = {cls: labels.count(cls) for cls in classes}
    missing = [cls for cls, k in counts.items() if k == 0]
    if missing:
        raise SingleClassData(f"classes {missing} have no samples")

    params = KernelParams(resolve_gamma(x, gamma))
    label_arr = np.array([classes.index(l) for l in labels])
    pairs = []
    machines = []
    for i in range(len(classes)):
        for j in range(i + 1, len(classes)):
            mask = (label_arr == i) | (label_arr == j)
            y = np.where(label_arr[mask] == i, 1.0, -1.0)
            machines.append(
                smo_train(x[mask], y, c, params, tol=tol, max_passes=max_passes)
            )
            pairs.append((i, j))
    return MulticlassSvm(
        classes=classes, pairs=tuple(pairs), machines=tuple(machines), params=params
    )


def ovo_decisions(model: MulticlassSvm, x: np.ndarray) -> np.ndarray:
    """Signed decision value of every pair machine, pair order; (P,) for a
    single vector or (N, P) for a matrix."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    vals = np.empty((pts.shape[0], len(model.pairs)))
    for p, machine in enumerate(model.machines):
        vals[:, p] = svm_decision(machine, pts)
    return vals[0] if single else vals


def ovo_tally(model: MulticlassSvm, decisions: np.ndarray):
    """Turn one row of pair decisions into (label, votes, scores).

    Each pair machine votes for its first class when the decision value is
    positive, its second otherwise; +f is credited to the first class's
    score and -f to the second's. Ties resolve by larger summed score,
    then by class order.
    """
    votes = {cls: 0 for cls in model.classes}
    scores = {cls: 0.0 for cls in model.classes}
    for (i, j), f in zip(model.pairs, decisions):
        winner = model.classes[i] if f > 0 else model.classes[j]
        votes[winner] += 1
        scores[model.classes[i]] += float(f)
        scores[model.classes[j]] -= float(f)
    label = min(
        model.classes,
        key=lambda cls: (-votes[cls], -scores[cls], model.classes.index(cls)),
    )
    return label, votes, scores


def ovo_predict(model: MulticlassSvm, x: np.ndarray):
    """Classify one vector; returns ``(label, votes, scores)``."""
    return ovo_tally(model, ovo_decisions(model, x))
