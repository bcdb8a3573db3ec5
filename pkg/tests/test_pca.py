import numpy as np
import pytest

from ctxpath import pca
from ctxpath.errors import DegenerateDataWarning, DimMismatch, InsufficientSamples

import oracles


def naive_covariance(x):
    n = x.shape[0]
    mean = x.mean(axis=0)
    xc = x - mean
    return (xc.T @ xc) / (n - 1)


def assert_matches_jacobi(x, atol=1e-8):
    """Full-rank fit must agree with the rotation-based eigensolver."""
    n, d = x.shape
    model = pca.pca_fit(x, n_components=min(n - 1, d))
    eigvals, eigvecs = oracles.jacobi_eigh(naive_covariance(x))
    m = model.n_components
    assert np.abs(model.explained_variance - eigvals[:m]).max() < atol
    lead = eigvals[0]
    for i in range(m):
        if eigvals[i] < 1e-10 * lead:
            continue  # null-space directions are arbitrary
        mine, ref = model.components[i], eigvecs[:, i]
        assert min(np.abs(mine - ref).max(), np.abs(mine + ref).max()) < atol


class TestPcaFit:
    def test_rank_one_line(self):
        t = np.array([-2.0, -1.0, 1.0, 2.0])
        x = np.stack([t, 2.0 * t], axis=1)
        model = pca.pca_fit(x, variance_fraction=0.95)
        assert model.n_components == 1
        expected = np.array([1.0, 2.0]) / np.sqrt(5.0)
        assert np.abs(model.components[0] - expected).max() < 1e-12
        total = float(np.sum((x - x.mean(axis=0)) ** 2) / (len(x) - 1))
        assert model.explained_variance[0] / total == pytest.approx(1.0, abs=1e-12)

    def test_identical_rows_degenerate(self):
        x = np.tile([3.0, 1.0, 4.0], (5, 1))
        with pytest.warns(DegenerateDataWarning):
            model = pca.pca_fit(x, variance_fraction=0.95)
        assert model.n_components == 0

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientSamples):
            pca.pca_fit(np.zeros((1, 3)), n_components=1)

    def test_matches_jacobi_oracle_20x5(self):
        rng = np.random.default_rng(101)
        x = rng.normal(size=(20, 5)) @ np.diag([3.0, 2.0, 1.5, 1.0, 0.5])
        assert_matches_jacobi(x)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_jacobi_oracle_random(self, seed):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(25, 51))
        d = int(rng.integers(3, 21))
        x = rng.normal(size=(n, d)) * rng.uniform(0.5, 4.0, size=d)
        assert_matches_jacobi(x)

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_jacobi_oracle_dual_branch(self, seed):
        # more dimensions than samples exercises the Gram-matrix path
        rng = np.random.default_rng(2000 + seed)
        n = int(rng.integers(5, 12))
        d = int(rng.integers(n + 1, 21))
        x = rng.normal(size=(n, d))
        assert_matches_jacobi(x)

    def test_component_cap_and_fraction_selection(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(6, 10))
        model = pca.pca_fit(x, n_components=50)
        assert model.n_components <= 5  # min(n - 1, d)
        model = pca.pca_fit(x, variance_fraction=1.0)
        assert model.n_components <= 5

    def test_exactly_one_target_required(self):
        x = np.random.default_rng(0).normal(size=(5, 3))
        with pytest.raises(ValueError):
            pca.pca_fit(x)
        with pytest.raises(ValueError):
            pca.pca_fit(x, n_components=2, variance_fraction=0.5)


class TestInvariants:
    @pytest.mark.parametrize("seed", range(6))
    def test_orthonormal_components(self, seed):
        rng = np.random.default_rng(300 + seed)
        n, d = int(rng.integers(5, 40)), int(rng.integers(2, 15))
        x = rng.normal(size=(n, d))
        model = pca.pca_fit(x, variance_fraction=1.0)
        if model.n_components == 0:
            return
        gram = model.components @ model.components.T
        assert np.abs(gram - np.eye(model.n_components)).max() <= 1e-8

    @pytest.mark.parametrize("seed", range(6))
    def test_full_variance_accounted(self, seed):
        rng = np.random.default_rng(400 + seed)
        n, d = int(rng.integers(8, 40)), int(rng.integers(2, 15))
        x = rng.normal(size=(n, d))
        model = pca.pca_fit(x, variance_fraction=1.0)
        total = float(np.sum((x - x.mean(axis=0)) ** 2) / (n - 1))
        assert np.sum(model.explained_variance) == pytest.approx(
            total, rel=1e-6
        )
        assert np.all(np.diff(model.explained_variance) <= 1e-12)
        assert np.all(model.explained_variance >= -1e-12)

    def test_transformed_training_mean_is_zero(self):
        rng = np.random.default_rng(42)
        x = rng.normal(size=(30, 8)) + 5.0
        model = pca.pca_fit(x, variance_fraction=1.0)
        z = pca.pca_transform(model, x)
        assert np.abs(z.mean(axis=0)).max() <= 1e-8

    def test_sign_convention(self):
        rng = np.random.default_rng(43)
        x = rng.normal(size=(25, 6))
        model = pca.pca_fit(x, variance_fraction=1.0)
        for row in model.components:
            assert row[np.argmax(np.abs(row))] >= 0


class TestTransform:
    def test_mean_maps_to_zero(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(12, 4))
        model = pca.pca_fit(x, variance_fraction=1.0)
        z = pca.pca_transform(model, model.mean)
        assert np.abs(z).max() < 1e-12

    def test_full_rank_round_trip(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(20, 5))
        model = pca.pca_fit(x, n_components=5)
        assert model.n_components == 5
        probe = rng.normal(size=5)
        back = pca.pca_inverse_transform(model, pca.pca_transform(model, probe))
        assert np.abs(back - probe).max() < 1e-8

    def test_rank_one_projection_value(self):
        t = np.array([-2.0, -1.0, 1.0, 2.0])
        x = np.stack([t, 2.0 * t], axis=1)
        model = pca.pca_fit(x, variance_fraction=0.95)
        z = pca.pca_transform(model, np.array([2.0, 4.0]))
        assert z[0] == pytest.approx(10.0 / np.sqrt(5.0), abs=1e-12)

    def test_dim_mismatch(self):
        model = pca.pca_fit(np.random.default_rng(0).normal(size=(5, 3)),
                            n_components=2)
        with pytest.raises(DimMismatch):
            pca.pca_transform(model, np.zeros(4))
        with pytest.raises(DimMismatch):
            pca.pca_inverse_transform(model, np.zeros(3))


class TestInverseTransform:
    def test_zero_scores_give_mean(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(10, 4)) + 2.0
        model = pca.pca_fit(x, n_components=2)
        back = pca.pca_inverse_transform(model, np.zeros(2))
        assert np.abs(back - model.mean).max() < 1e-12

    def test_reconstruction_error_non_increasing_in_m(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(30, 8)) * np.linspace(3.0, 0.3, 8)
        errors = []
        for m in range(1, 9):
            model = pca.pca_fit(x, n_components=m)
            recon = pca.pca_inverse_transform(model, pca.pca_transform(model, x))
            errors.append(float(np.sum((recon - x) ** 2)))
        assert all(e2 <= e1 + 1e-9 for e1, e2 in zip(errors, errors[1:]))
