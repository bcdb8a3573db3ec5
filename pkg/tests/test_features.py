import hashlib
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from ctxpath import features
from ctxpath.errors import (
    BadMagic,
    CorruptRecord,
    DimMismatch,
    DuplicateKey,
    OutOfGrid,
    UnsupportedVersion,
)
from ctxpath.tiling import ContextBlock

import oracles


class TestBaselineExtract:
    def test_dimension(self):
        patch = np.full((8, 8, 3), 100, dtype=np.uint8)
        assert features.baseline_extract(patch).shape == (features.BASELINE_DIM,)

    def test_constant_patch(self):
        patch = np.full((16, 16, 3), 128, dtype=np.uint8)
        vec = features.baseline_extract(patch)
        assert vec[3:6] == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)
        for start in (6, 22, 38, 54):
            hist = vec[start : start + 16]
            assert np.count_nonzero(hist) == 1
            assert hist.max() == pytest.approx(1.0)

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        patch = rng.integers(0, 256, (32, 32, 3)).astype(np.uint8)
        a = features.baseline_extract(patch)
        b = features.baseline_extract(patch)
        assert (a == b).all()

    def test_two_tone_patch_matches_hand_enumeration(self):
        a, b = (60, 90, 120), (180, 150, 120)
        patch = np.full((4, 4, 3), a, dtype=np.uint8)
        patch[:2, :2] = b  # 4 pixels of b in the top-left corner, 12 of a
        vec = features.baseline_extract(patch)

        def bin_of(v, lo, hi):
            return min(max(int(math.floor((v - lo) / (hi - lo) * 16)), 0), 15)

        lab_a = oracles.srgb8_to_lalphabeta(*a)
        lab_b = oracles.srgb8_to_lalphabeta(*b)
        for c, (lo, hi) in enumerate(
            (features.L_RANGE, features.ALPHA_RANGE, features.BETA_RANGE)
        ):
            expected = np.zeros(16)
            expected[bin_of(lab_a[c], lo, hi)] += 12 / 16
            expected[bin_of(lab_b[c], lo, hi)] += 4 / 16
            assert vec[6 + 16 * c : 22 + 16 * c] == pytest.approx(expected)

        # gradient magnitudes, enumerated pixel by pixel: the two-tone edge
        # contributes two straight-edge pixels and one corner pixel
        luma_a = 0.299 * a[0] + 0.587 * a[1] + 0.114 * a[2]
        luma_b = 0.299 * b[0] + 0.587 * b[1] + 0.114 * b[2]
        step = abs(luma_a - luma_b)
        lo, hi = features.GRAD_RANGE
        expected = np.zeros(16)
        expected[bin_of(0.0, lo, hi)] = 13 / 16
        expected[bin_of(step, lo, hi)] += 2 / 16
        expected[bin_of(step * math.sqrt(2.0), lo, hi)] += 1 / 16
        assert vec[54:70] == pytest.approx(expected)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_histogram_blocks_sum_to_one(self, seed):
        rng = np.random.default_rng(seed)
        patch = rng.integers(0, 256, (7, 5, 3)).astype(np.uint8)
        vec = features.baseline_extract(patch)
        for start in (6, 22, 38, 54):
            assert vec[start : start + 16].sum() == pytest.approx(1.0, abs=1e-9)
        assert np.isfinite(vec).all()


def _entry(image_id, aug, rows, cols, dim, rng):
    values = rng.normal(size=(rows, cols, dim)).astype(np.float32).astype(np.float64)
    return features.FeatureStoreEntry(image_id, aug, features.FeatureMatrix(values))


class TestStore:
    def test_write_read_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        entries = [
            _entry("img_a", 0, 3, 4, 6, rng),
            _entry("img_a", 5, 3, 4, 6, rng),
            _entry("img_b", 0, 2, 2, 6, rng),
        ]
        path = tmp_path / "f.ctxf"
        features.store_write(path, entries)
        back = features.store_read(path)
        assert len(back) == 3
        for orig, got in zip(entries, back):
            assert got.image_id == orig.image_id
            assert got.augmentation == orig.augmentation
            assert (got.matrix.values == orig.matrix.values).all()

    def test_empty_store(self, tmp_path):
        path = tmp_path / "empty.ctxf"
        features.store_write(path, [])
        assert features.store_read(path) == []

    def test_byte_deterministic(self, tmp_path):
        rng = np.random.default_rng(2)
        entries = [_entry("x", a, 2, 3, 5, rng) for a in range(4)]
        p1, p2 = tmp_path / "a.ctxf", tmp_path / "b.ctxf"
        features.store_write(p1, entries)
        features.store_write(p2, entries)
        h1 = hashlib.sha256(p1.read_bytes()).hexdigest()
        h2 = hashlib.sha256(p2.read_bytes()).hexdigest()
        assert h1 == h2

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ctxf"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(BadMagic):
            features.store_read(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "v9.ctxf"
        import struct

        path.write_bytes(struct.pack("<4sIII", b"CTXF", 9, 4, 0))
        with pytest.raises(UnsupportedVersion):
            features.store_read(path)

    def test_truncated_payload(self, tmp_path):
        rng = np.random.default_rng(3)
        path = tmp_path / "t.ctxf"
        features.store_write(path, [_entry("img", 0, 2, 2, 4, rng)])
        raw = path.read_bytes()
        path.write_bytes(raw[:-7])
        with pytest.raises(CorruptRecord):
            features.store_read(path)

    def test_trailing_garbage(self, tmp_path):
        rng = np.random.default_rng(4)
        path = tmp_path / "g.ctxf"
        features.store_write(path, [_entry("img", 0, 1, 1, 4, rng)])
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(CorruptRecord):
            features.store_read(path)

    def test_duplicate_key_rejected_on_write(self, tmp_path):
        rng = np.random.default_rng(5)
        entries = [_entry("img", 0, 1, 1, 4, rng), _entry("img", 0, 1, 1, 4, rng)]
        with pytest.raises(DuplicateKey):
            features.store_write(tmp_path / "d.ctxf", entries)

    def test_mixed_dims_rejected_on_write(self, tmp_path):
        rng = np.random.default_rng(6)
        entries = [_entry("a", 0, 1, 1, 4, rng), _entry("b", 0, 1, 1, 5, rng)]
        with pytest.raises(DimMismatch):
            features.store_write(tmp_path / "m.ctxf", entries)

    @given(
        shapes=st.lists(
            st.tuples(st.integers(1, 3), st.integers(1, 3), st.integers(0, 7)),
            min_size=1,
            max_size=5,
        ),
        dim=st.integers(1, 6),
        seed=st.integers(0, 2**31 - 1),
    )
    @settings(
        max_examples=30,
        deadline=None,
        suppress_health_check=[HealthCheck.function_scoped_fixture],
    )
    def test_round_trip_lossless_property(self, tmp_path, shapes, dim, seed):
        rng = np.random.default_rng(seed)
        entries = []
        for i, (rows, cols, aug) in enumerate(shapes):
            entries.append(_entry(f"img{i}", aug, rows, cols, dim, rng))
        path = tmp_path / "p.ctxf"
        features.store_write(path, entries)
        back = features.store_read(path)
        for orig, got in zip(entries, back):
            assert got.key == orig.key
            assert (got.matrix.values == orig.matrix.values).all()


class TestAssembleBlockFeatures:
    def _matrix(self, rows, cols, dim, fill=None):
        values = np.arange(rows * cols * dim, dtype=np.float64).reshape(
            rows, cols, dim
        )
        if fill is not None:
            values = fill
        return features.FeatureMatrix(values)

    def test_k1_returns_patch_vector(self):
        fm = self._matrix(2, 3, 4)
        out = features.assemble_block_features(fm, ContextBlock(1, (1, 2)))
        assert (out == fm.values[1, 2]).all()

    def test_k2_concatenation_order(self):
        dim = 3
        vals = np.zeros((2, 2, dim))
        a, b, c, d = (np.full(dim, v) for v in (1.0, 2.0, 3.0, 4.0))
        vals[0, 0], vals[0, 1], vals[1, 0], vals[1, 1] = a, b, c, d
        fm = features.FeatureMatrix(vals)
        out = features.assemble_block_features(fm, ContextBlock(2, (0, 0)))
        assert (out == np.concatenate([a, b, c, d])).all()

    def test_k2_dim_is_four_times_patch_dim(self):
        # with the 8192-wide CNN vectors a 2x2 block flattens to 32768
        fm = features.FeatureMatrix(np.zeros((2, 2, 8192)))
        out = features.assemble_block_features(fm, ContextBlock(2, (0, 0)))
        assert out.shape == (32768,)

    def test_member_order_sensitivity(self):
        rng = np.random.default_rng(7)
        vals = rng.normal(size=(2, 2, 5))
        fm = features.FeatureMatrix(vals)
        out = features.assemble_block_features(fm, ContextBlock(2, (0, 0)))
        swapped = vals.copy()
        swapped[0, 0], swapped[0, 1] = vals[0, 1], vals[0, 0]
        out2 = features.assemble_block_features(
            features.FeatureMatrix(swapped), ContextBlock(2, (0, 0))
        )
        assert not (out == out2).all()

    def test_out_of_grid(self):
        fm = self._matrix(2, 2, 3)
        with pytest.raises(OutOfGrid):
            features.assemble_block_features(fm, ContextBlock(2, (1, 1)))

    def test_values_stay_finite(self):
        rng = np.random.default_rng(8)
        fm = features.FeatureMatrix(rng.normal(size=(3, 3, 4)) * 1e6)
        out = features.assemble_block_features(fm, ContextBlock(3, (0, 0)))
        assert np.isfinite(out).all()
