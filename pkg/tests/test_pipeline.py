import numpy as np
import pytest

from ctxpath import color, features, pipeline, svm, tiling
from ctxpath.errors import (
    EmptyDataset,
    ImageTooSmall,
    SchemaViolation,
    SingleClassData,
    VersionMismatch,
)
from ctxpath.manifest import ManifestRecord

CLASS_COLORS = {
    "normal": (190, 80, 90),
    "benign": (80, 190, 90),
    "insitu": (80, 90, 190),
    "invasive": (190, 180, 80),
}


def make_dataset(tmp_path, labels, size=(64, 48), seed=0, prefix="t"):
    """Tiny labeled corpus: one noisy solid-color image per requested label."""
    rng = np.random.default_rng(seed)
    records = []
    for i, label in enumerate(labels):
        base = np.array(CLASS_COLORS[label], dtype=np.float64)
        img = base + rng.integers(-25, 26, (size[1], size[0], 3))
        img = np.clip(img, 0, 255).astype(np.uint8)
        image_id = f"{prefix}{i:02d}_{label}"
        path = tmp_path / f"{image_id}.png"
        color.write_image(img, path)
        records.append(ManifestRecord(image_id, path, label))
    return records


def target_from(records, cfg):
    img = color.read_image(records[0].path)
    return color.compute_stats(color.rgb_to_space(img, cfg.colorspace))


def small_cfg(**kw):
    defaults = dict(patch_size=16, block_size=1, augmentations=(0,))
    defaults.update(kw)
    return pipeline.PipelineConfig(**defaults)


class TestToTwoClass:
    def test_mappings(self):
        assert pipeline.to_two_class("normal") == "noncarcinoma"
        assert pipeline.to_two_class("benign") == "noncarcinoma"
        assert pipeline.to_two_class("insitu") == "carcinoma"
        assert pipeline.to_two_class("invasive") == "carcinoma"

    def test_total_and_surjective(self):
        images = {pipeline.to_two_class(l) for l in pipeline.CLASS_LABELS}
        assert images == set(pipeline.TWO_CLASS_LABELS)

    def test_unknown_rejected(self):
        with pytest.raises(ValueError):
            pipeline.to_two_class("metastasis")


class TestMajorityVote:
    def score_row(self, **vals):
        base = {cls: 0.0 for cls in pipeline.CLASS_LABELS}
        base.update(vals)
        return base

    def test_unanimous(self):
        labels = ["invasive"] * 6
        scores = [self.score_row(invasive=1.0)] * 6
        winner, votes = pipeline.majority_vote(labels, scores, pipeline.CLASS_LABELS)
        assert winner == "invasive"
        assert votes["invasive"] == 6

    def test_plurality(self):
        labels = ["normal"] * 3 + ["benign"] * 2 + ["insitu"]
        scores = [self.score_row() for _ in labels]
        winner, _ = pipeline.majority_vote(labels, scores, pipeline.CLASS_LABELS)
        assert winner == "normal"

    def test_tie_broken_by_summed_score(self):
        labels = ["normal"] * 3 + ["benign"] * 3
        scores = [self.score_row(normal=0.2, benign=0.5)] * 3 + [
            self.score_row(normal=0.2, benign=0.166666666666667)
        ] * 3
        # summed: normal = 1.2, benign = 2.0
        winner, votes = pipeline.majority_vote(labels, scores, pipeline.CLASS_LABELS)
        assert votes["normal"] == votes["benign"] == 3
        assert winner == "benign"

    def test_full_tie_falls_back_to_class_order(self):
        labels = ["benign", "insitu"]
        scores = [self.score_row(), self.score_row()]
        winner, _ = pipeline.majority_vote(labels, scores, pipeline.CLASS_LABELS)
        assert winner == "benign"

    def test_block_order_irrelevant(self):
        rng = np.random.default_rng(0)
        labels = ["normal", "benign", "insitu", "invasive", "benign", "benign"]
        scores = [
            self.score_row(**{c: float(rng.normal()) for c in pipeline.CLASS_LABELS})
            for _ in labels
        ]
        ref = pipeline.majority_vote(labels, scores, pipeline.CLASS_LABELS)
        for _ in range(5):
            perm = rng.permutation(len(labels))
            shuffled = pipeline.majority_vote(
                [labels[i] for i in perm], [scores[i] for i in perm],
                pipeline.CLASS_LABELS,
            )
            assert shuffled == ref


class TestTrainPredict:
    def test_two_image_memorization(self, tmp_path):
        records = make_dataset(tmp_path, ["normal", "invasive"])
        cfg = small_cfg()
        model = pipeline.train(records, cfg, target_from(records, cfg))
        for rec in records:
            pred = pipeline.predict(model, color.read_image(rec.path), rec.image_id)
            assert pred.label == rec.label

    def test_augmentation_multiplies_block_samples_by_eight(self, tmp_path):
        records = make_dataset(tmp_path, ["normal", "invasive"] * 2)
        cfg_id = small_cfg()
        cfg_all = small_cfg(augmentations=tuple(range(8)))
        target = target_from(records, cfg_id)
        _, s_id = pipeline.train_with_summary(records, cfg_id, target)
        _, s_all = pipeline.train_with_summary(records, cfg_all, target)
        assert s_all["block_samples"] == 8 * s_id["block_samples"]

    def test_predict_is_pure(self, tmp_path):
        records = make_dataset(tmp_path, ["normal", "benign", "invasive"])
        cfg = small_cfg()
        model = pipeline.train(records, cfg, target_from(records, cfg))
        img = color.read_image(records[0].path)
        p1 = pipeline.predict(model, img, "x")
        p2 = pipeline.predict(model, img, "x")
        assert p1.label == p2.label and p1.votes == p2.votes
        assert all(
            b1.scores == b2.scores for b1, b2 in zip(p1.blocks, p2.blocks)
        )

    def test_k1_single_patch_image_is_plain_svm(self, tmp_path):
        records = make_dataset(tmp_path, ["normal", "invasive"], size=(16, 16))
        cfg = small_cfg()
        model = pipeline.train(records, cfg, target_from(records, cfg))
        pred = pipeline.predict(model, color.read_image(records[0].path), "q")
        assert len(pred.blocks) == 1
        assert sum(pred.votes.values()) == 1

    def test_block_count_matches_grid(self, tmp_path):
        records = make_dataset(tmp_path, ["normal", "invasive"], size=(64, 48))
        cfg = small_cfg(block_size=2)
        model = pipeline.train(records, cfg, target_from(records, cfg))
        pred = pipeline.predict(model, color.read_image(records[0].path), "q")
        # 4x3 grid of 16-px patches -> (4-1)*(3-1) blocks
        assert len(pred.blocks) == 6

    def test_two_class_grouping_applied_before_training(self, tmp_path):
        records = make_dataset(
            tmp_path, ["normal", "benign", "insitu", "invasive"]
        )
        cfg = small_cfg(two_class=True)
        model = pipeline.train(records, cfg, target_from(records, cfg))
        assert model.svm_model.classes == pipeline.TWO_CLASS_LABELS
        pred = pipeline.predict(model, color.read_image(records[3].path), "q")
        assert pred.label in pipeline.TWO_CLASS_LABELS

    def test_empty_dataset(self, tmp_path):
        cfg = small_cfg()
        stats = color.ChannelStats(cfg.colorspace, np.zeros(3), np.ones(3))
        with pytest.raises(EmptyDataset):
            pipeline.train([], cfg, stats)

    def test_single_class_dataset(self, tmp_path):
        records = make_dataset(tmp_path, ["normal", "normal"])
        cfg = small_cfg()
        with pytest.raises(SingleClassData):
            pipeline.train(records, cfg, target_from(records, cfg))

    def test_image_too_small(self, tmp_path):
        records = make_dataset(tmp_path, ["normal", "invasive"], size=(8, 8))
        cfg = small_cfg()  # patch 16 > image 8
        with pytest.raises(ImageTooSmall):
            pipeline.train(records, cfg, target_from(records, cfg))

    def test_threads_do_not_change_results(self, tmp_path):
        records = make_dataset(tmp_path, ["normal", "benign", "invasive"] * 2)
        cfg = small_cfg()
        target = target_from(records, cfg)
        m1 = pipeline.train(records, cfg, target, threads=1)
        m2 = pipeline.train(records, cfg, target, threads=4)
        assert (m1.pca_model.components == m2.pca_model.components).all()
        for a, b in zip(m1.svm_model.machines, m2.svm_model.machines):
            assert (a.dual_coef == b.dual_coef).all() and a.bias == b.bias


class TestStoreBackedTraining:
    def _store_from_pixels(self, records, cfg, target):
        index = {}
        for rec in records:
            img = color.reinhard_normalize(
                color.read_image(rec.path), target, cfg.colorspace
            )
            for aug in cfg.augmentations:
                tr = tiling.apply_dihedral(img, aug)
                grid = tiling.make_grid(
                    tr.shape[1], tr.shape[0], cfg.patch_size, cfg.patch_size
                )
                index[(rec.image_id, aug)] = features.baseline_matrix(tr, grid)
        return index

    def test_train_and_predict_from_store(self, tmp_path):
        records = make_dataset(tmp_path, ["normal", "invasive"] * 2)
        cfg = small_cfg(extractor="store")
        target = pipeline.color.ChannelStats(
            cfg.colorspace, np.zeros(3), np.ones(3)
        )
        pixel_cfg = small_cfg()
        real_target = target_from(records, pixel_cfg)
        store = self._store_from_pixels(records, pixel_cfg, real_target)
        model = pipeline.train(records, cfg, target, store=store)
        for rec in records:
            pred = pipeline.predict_record(model, rec, store)
            assert pred.label == rec.label

    def test_pixel_predict_refused_for_store_model(self, tmp_path):
        records = make_dataset(tmp_path, ["normal", "invasive"])
        cfg = small_cfg(extractor="store")
        pixel_cfg = small_cfg()
        real_target = target_from(records, pixel_cfg)
        store = self._store_from_pixels(records, pixel_cfg, real_target)
        stats = color.ChannelStats(cfg.colorspace, np.zeros(3), np.ones(3))
        model = pipeline.train(records, cfg, stats, store=store)
        with pytest.raises(ValueError, match="store"):
            pipeline.predict(model, color.read_image(records[0].path))


class TestModelSerialization:
    @pytest.fixture
    def trained(self, tmp_path):
        records = make_dataset(
            tmp_path, ["normal", "benign", "insitu", "invasive"], seed=3
        )
        cfg = small_cfg(block_size=2)
        model = pipeline.train(records, cfg, target_from(records, cfg))
        return model, records

    def test_round_trip_preserves_predictions_exactly(self, trained, tmp_path):
        model, records = trained
        path = tmp_path / "model.json"
        pipeline.save_model(model, path)
        loaded = pipeline.load_model(path)
        for rec in records:
            img = color.read_image(rec.path)
            a = pipeline.predict(model, img, rec.image_id)
            b = pipeline.predict(loaded, img, rec.image_id)
            assert a.label == b.label
            assert a.votes == b.votes
            for ba, bb in zip(a.blocks, b.blocks):
                assert ba.label == bb.label
                for cls in a.votes:
                    assert ba.scores[cls] == bb.scores[cls]

    def test_save_is_byte_deterministic(self, trained, tmp_path):
        model, _ = trained
        p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
        pipeline.save_model(model, p1)
        pipeline.save_model(model, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_version_bump_rejected(self, trained, tmp_path):
        model, _ = trained
        path = tmp_path / "model.json"
        pipeline.save_model(model, path)
        doc = path.read_text().replace('"format_version": 1', '"format_version": 2')
        path.write_text(doc)
        with pytest.raises(VersionMismatch):
            pipeline.load_model(path)

    def test_truncated_file_rejected(self, trained, tmp_path):
        model, _ = trained
        path = tmp_path / "model.json"
        pipeline.save_model(model, path)
        raw = path.read_text()
        path.write_text(raw[: len(raw) // 2])
        with pytest.raises(SchemaViolation):
            pipeline.load_model(path)

    def test_missing_field_rejected(self, trained, tmp_path):
        model, _ = trained
        path = tmp_path / "model.json"
        pipeline.save_model(model, path)
        import json

        doc = json.loads(path.read_text())
        del doc["pca"]
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaViolation):
            pipeline.load_model(path)


class TestConfigValidation:
    def test_augmentations_must_include_identity(self):
        with pytest.raises(ValueError, match="identity"):
            pipeline.PipelineConfig(augmentations=(1, 2))

    def test_pca_targets_mutually_exclusive(self):
        with pytest.raises(ValueError):
            pipeline.PipelineConfig(pca_variance=0.9, pca_components=4)

    def test_block_size_positive(self):
        with pytest.raises(ValueError):
            pipeline.PipelineConfig(block_size=0)
