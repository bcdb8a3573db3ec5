"""End-to-end orchestration of the context-aware classifier.

Training: every image is stain-normalized against the stored target,
transformed by each configured dihedral op, tiled into a patch grid, and
turned into per-patch feature vectors; every k-by-k context block is
flattened into one sample carrying its image's label; PCA is fit on all
block samples and a one-vs-one RBF-SVM on the reduced vectors.

Prediction: the same front half runs with the identity augmentation only,
each block is classified, and the image label is the plurality of block
labels with a deterministic tie-break chain (votes, then summed per-class
score over blocks, then class order).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import color, features, pca, svm, tiling
from .errors import (
    BlockTooLarge,
    EmptyDataset,
    ImageTooSmall,
    MissingFeatures,
    PatchTooLarge,
    SchemaViolation,
    SingleClassData,
    VersionMismatch,
)
from .manifest import LABELS, ManifestRecord

CLASS_LABELS = LABELS
TWO_CLASS_LABELS = ("noncarcinoma", "carcinoma")
MODEL_FORMAT_VERSION = 1

_CARCINOMA = {"insitu", "invasive"}


def to_two_class(label: str) -> str:
    """Group the four tissue labels into carcinoma vs non-carcinoma."""
    if label not in CLASS_LABELS:
        raise ValueError(f"unknown label {label!r}")
    return "carcinoma" if label in _CARCINOMA else "noncarcinoma"


@dataclass(frozen=True)
class PipelineConfig:
    colorspace: str = color.LALPHABETA
    patch_size: int = 512
    block_size: int = 2
    pca_variance: float | None = 0.95
    pca_components: int | None = None
    svm_c: float = 1.0
    gamma: float | str = "scale"
    augmentations: tuple = tuple(range(8))
    extractor: str = "baseline"
    two_class: bool = False

    def __post_init__(self):
        if self.patch_size < 1:
            raise ValueError("patch_size must be >= 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.colorspace not in color.COLORSPACES:
            raise ValueError(f"unknown colorspace {self.colorspace!r}")
        if self.extractor not in ("baseline", "store"):
            raise ValueError("extractor must be baseline or store")
        augs = tuple(sorted(set(self.augmentations)))
        if 0 not in augs:
            raise ValueError("augmentation set must contain the identity (0)")
        if any(a not in tiling.DIHEDRAL_IDS for a in augs):
            raise ValueError("augmentation ids must be in 0..7")
        object.__setattr__(self, "augmentations", augs)
        if (self.pca_variance is None) == (self.pca_components is None):
            raise ValueError("set exactly one of pca_variance / pca_components")

    @property
    def class_order(self) -> tuple:
        return TWO_CLASS_LABELS if self.two_class else CLASS_LABELS


@dataclass(frozen=True)
class BlockResult:
    anchor: tuple[int, int]
    label: str
    scores: dict


@dataclass(frozen=True)
class ImagePrediction:
    image_id: str
    label: str
    votes: dict
    blocks: list[BlockResult]


@dataclass(frozen=True)
class TrainedModel:
    config: PipelineConfig
    target_stats: color.ChannelStats
    pca_model: pca.PcaModel
    svm_model: svm.MulticlassSvm
    feature_dim: int

    def __post_init__(self):
        k = self.config.block_size
        if self.pca_model.input_dim != k * k * self.feature_dim:
            raise SchemaViolation(
                f"PCA input dim {self.pca_model.input_dim} != "
                f"{k}x{k} blocks of {self.feature_dim}-dim features"
            )
        for machine in self.svm_model.machines:
            if (
                machine.support_vectors.shape[0]
                and machine.support_vectors.shape[1] != self.pca_model.n_components
            ):
                raise SchemaViolation(
                    f"SVM input dim {machine.support_vectors.shape[1]} != "
                    f"PCA output dim {self.pca_model.n_components}"
                )


def majority_vote(block_labels, block_scores, class_order):
    """Image label from per-block labels and per-class score dicts.

    Plurality of block labels wins; ties go to the class with the larger
    summed score over all blocks, then to the earlier class in
    ``class_order``. Depends only on the multiset of (label, scores)
    pairs, never on block order.
    """
    votes = {cls: 0 for cls in class_order}
    totals = {cls: 0.0 for cls in class_order}
    for label, scores in zip(block_labels, block_scores):
        votes[label] += 1
        for cls, val in scores.items():
            totals[cls] += val
    order = {cls: i for i, cls in enumerate(class_order)}
    winner = min(class_order, key=lambda cls: (-votes[cls], -totals[cls], order[cls]))
    return winner, votes


def _matrix_grid(cfg: PipelineConfig, fm: features.FeatureMatrix) -> tiling.PatchGrid:
    return tiling.PatchGrid(
        patch_size=cfg.patch_size, stride=cfg.patch_size, rows=fm.rows, cols=fm.cols
    )


def _block_vectors(cfg: PipelineConfig, fm: features.FeatureMatrix):
    """(anchor, flattened vector) per context block, row-major anchors."""
    try:
        blocks = tiling.enumerate_blocks(_matrix_grid(cfg, fm), cfg.block_size)
    except BlockTooLarge as exc:
        raise ImageTooSmall(str(exc)) from exc
    return [(b.anchor, features.assemble_block_features(fm, b)) for b in blocks]


def _pixel_matrices(cfg: PipelineConfig, img: np.ndarray, target, augmentations):
    """Normalize once, then one baseline feature matrix per dihedral op."""
    normalized = color.reinhard_normalize(img, target, cfg.colorspace)
    out = []
    for aug in augmentations:
        tr = tiling.apply_dihedral(normalized, aug)
        try:
            grid = tiling.make_grid(
                tr.shape[1], tr.shape[0], cfg.patch_size, cfg.patch_size
            )
        except PatchTooLarge as exc:
            raise ImageTooSmall(str(exc)) from exc
        out.append((aug, features.baseline_matrix(tr, grid)))
    return out


def _record_matrices(cfg, record, target, store, augmentations):
    if cfg.extractor == "store":
        out = []
        for aug in augmentations:
            key = (record.image_id, aug)
            if key not in store:
                raise MissingFeatures(f"store has no entry for {key!r}")
            out.append((aug, store[key]))
        return out
    return _pixel_matrices(cfg, color.read_image(record.path), target, augmentations)


def train(
    records: list[ManifestRecord],
    cfg: PipelineConfig,
    target_stats: color.ChannelStats,
    store=None,
    threads: int = 1,
) -> TrainedModel:
    model, _ = train_with_summary(records, cfg, target_stats, store, threads)
    return model


def train_with_summary(
    records: list[ManifestRecord],
    cfg: PipelineConfig,
    target_stats: color.ChannelStats,
    store=None,
    threads: int = 1,
):
    """Train and also return a summary dict (sample counts, PCA width,
    support vector counts, block-level training accuracy)."""
    if target_stats.space != cfg.colorspace:
        raise ValueError(
            f"target stats are in {target_stats.space!r}, config says {cfg.colorspace!r}"
        )
    if cfg.extractor == "store" and store is None:
        raise ValueError("store-backed config requires a feature store")
    if not records:
        raise EmptyDataset("no training records")

    ordered = sorted(records, key=lambda r: r.image_id)
    label_of = {
        r.image_id: (to_two_class(r.label) if cfg.two_class else r.label)
        for r in ordered
    }
    present = {label_of[r.image_id] for r in ordered}
    if len(present) < 2:
        raise SingleClassData(
            f"training manifest covers one class: {sorted(present)}"
        )
    augmentations = cfg.augmentations

    def job(record):
        return _record_matrices(cfg, record, target_stats, store, augmentations)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_record = list(pool.map(job, ordered))
    else:
        per_record = [job(r) for r in ordered]

    vectors, labels = [], []
    feature_dim = None
    for record, matrices in zip(ordered, per_record):
        for _aug, fm in matrices:
            if feature_dim is None:
                feature_dim = fm.dim
            elif fm.dim != feature_dim:
                raise SchemaViolation(
                    f"feature dim drift: {fm.dim} vs {feature_dim}"
                )
            for _anchor, vec in _block_vectors(cfg, fm):
                vectors.append(vec)
                labels.append(label_of[record.image_id])
    if not vectors:
        raise EmptyDataset("no block samples produced")

    x = np.stack(vectors)
    classes = tuple(cls for cls in cfg.class_order if cls in present)
    pca_model = pca.pca_fit(
        x, n_components=cfg.pca_components, variance_fraction=cfg.pca_variance
    )
    z = pca.pca_transform(pca_model, x)
    svm_model = svm.ovo_train(
        z, labels, c=cfg.svm_c, gamma=cfg.gamma, classes=classes
    )
    model = TrainedModel(cfg, target_stats, pca_model, svm_model, feature_dim)

    predicted = [
        svm.ovo_tally(svm_model, row)[0]
        for row in svm.ovo_decisions(svm_model, z)
    ]
    summary = {
        "images": len(ordered),
        "block_samples": len(labels),
        "pca_components": pca_model.n_components,
        "support_vectors": [
            int(m.support_vectors.shape[0]) for m in svm_model.machines
        ],
        "block_train_accuracy": float(
            np.mean([p == t for p, t in zip(predicted, labels)])
        ),
    }
    return model, summary


def predict_matrix(
    model: TrainedModel, fm: features.FeatureMatrix, image_id: str = ""
) -> ImagePrediction:
    """Classify an image given its per-patch feature matrix."""
    if fm.dim != model.feature_dim:
        raise SchemaViolation(
            f"feature dim {fm.dim} does not match model ({model.feature_dim})"
        )
    anchored = _block_vectors(model.config, fm)
    x = np.stack([vec for _a, vec in anchored])
    z = pca.pca_transform(model.pca_model, x)
    decisions = svm.ovo_decisions(model.svm_model, z)
    results = []
    for (anchor, _vec), row in zip(anchored, decisions):
        label, _votes, scores = svm.ovo_tally(model.svm_model, row)
        results.append(BlockResult(anchor=anchor, label=label, scores=scores))
    winner, votes = majority_vote(
        [r.label for r in results],
        [r.scores for r in results],
        model.svm_model.classes,
    )
    return ImagePrediction(image_id=image_id, label=winner, votes=votes, blocks=results)


def predict(model: TrainedModel, img: np.ndarray, image_id: str = "") -> ImagePrediction:
    """Classify an image from pixels (baseline extractor models only)."""
    if model.config.extractor != "baseline":
        raise ValueError(
            "model was trained on store features; use predict_matrix with "
            "an exported feature matrix"
        )
    matrices = _pixel_matrices(
        model.config, img, model.target_stats, augmentations=(0,)
    )
    return predict_matrix(model, matrices[0][1], image_id)


def predict_record(model: TrainedModel, record: ManifestRecord, store=None):
    """Classify one manifest record through whichever feature path the
    model was trained with."""
    if model.config.extractor == "store":
        if store is None:
            raise ValueError("store-backed model requires a feature store")
        key = (record.image_id, 0)
        if key not in store:
            raise MissingFeatures(f"store has no entry for {key!r}")
        return predict_matrix(model, store[key], record.image_id)
    return predict(model, color.read_image(record.path), record.image_id)


# ---------------------------------------------------------------------------
# model serialization (versioned JSON document; floats round-trip exactly)
# ---------------------------------------------------------------------------

def _config_to_dict(cfg: PipelineConfig) -> dict:
    return {
        "colorspace": cfg.colorspace,
        "patch_size": cfg.patch_size,
        "block_size": cfg.block_size,
        "pca_variance": cfg.pca_variance,
        "pca_components": cfg.pca_components,
        "svm_c": cfg.svm_c,
        "gamma": cfg.gamma,
        "augmentations": list(cfg.augmentations),
        "extractor": cfg.extractor,
        "two_class": cfg.two_class,
    }


def _config_from_dict(d: dict) -> PipelineConfig:
    return PipelineConfig(
        colorspace=d["colorspace"],
        patch_size=d["patch_size"],
        block_size=d["block_size"],
        pca_variance=d["pca_variance"],
        pca_components=d["pca_components"],
        svm_c=d["svm_c"],
        gamma=d["gamma"],
        augmentations=tuple(d["augmentations"]),
        extractor=d["extractor"],
        two_class=d["two_class"],
    )


def save_model(model: TrainedModel, path) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "config": _config_to_dict(model.config),
        "target_stats": {
            "space": model.target_stats.space,
            "mean": [float(v) for v in model.target_stats.mean],
            "std": [float(v) for v in model.target_stats.std],
        },
        "feature_dim": model.feature_dim,
        "pca": {
            "mean": model.pca_model.mean.tolist(),
            "components": model.pca_model.components.tolist(),
            "explained_variance": model.pca_model.explained_variance.tolist(),
        },
        "svm": {
            "classes": list(model.svm_model.classes),
            "gamma": model.svm_model.params.gamma,
            "pairs": [
                {
                    "first": i,
                    "second": j,
                    "support_vectors": machine.support_vectors.tolist(),
                    "dual_coef": machine.dual_coef.tolist(),
                    "bias": machine.bias,
                    "c": machine.c,
                    "objective": machine.objective,
                    "converged": machine.converged,
                }
                for (i, j), machine in zip(
                    model.svm_model.pairs, model.svm_model.machines
                )
            ],
        },
    }
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def load_model(path) -> TrainedModel:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise SchemaViolation(f"{path}: missing format_version")
    if doc["format_version"] != MODEL_FORMAT_VERSION:
        raise VersionMismatch(
            f"{path}: format version {doc['format_version']} not supported"
        )
    try:
        cfg = _config_from_dict(doc["config"])
        ts = doc["target_stats"]
        target = color.ChannelStats(
            ts["space"], np.array(ts["mean"], dtype=np.float64),
            np.array(ts["std"], dtype=np.float64),
        )
        p = doc["pca"]
        mean = np.array(p["mean"], dtype=np.float64)
        comps = np.array(p["components"], dtype=np.float64).reshape(-1, mean.shape[0])
        pca_model = pca.PcaModel(
            mean=mean,
            components=comps,
            explained_variance=np.array(p["explained_variance"], dtype=np.float64),
        )
        s = doc["svm"]
        params = svm.KernelParams(s["gamma"])
        machines, pairs = [], []
        for entry in s["pairs"]:
            sv = np.array(entry["support_vectors"], dtype=np.float64)
            if sv.size == 0:
                sv = sv.reshape(0, pca_model.n_components)
            machines.append(
                svm.BinarySvm(
                    support_vectors=sv,
                    dual_coef=np.array(entry["dual_coef"], dtype=np.float64),
                    bias=entry["bias"],
                    c=entry["c"],
                    params=params,
                    objective=entry["objective"],
                    converged=entry["converged"],
                )
            )
            pairs.append((entry["first"], entry["second"]))
        svm_model = svm.MulticlassSvm(
            classes=tuple(s["classes"]),
            pairs=tuple(pairs),
            machines=tuple(machines),
            params=params,
        )
        return TrainedModel(cfg, target, pca_model, svm_model, doc["feature_dim"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (VersionMismatch, SchemaViolation)):
            raise
        raise SchemaViolation(f"{path}: malformed model document: {exc}") from exc


def prediction_csv_rows(predictions: list[ImagePrediction]) -> list[str]:
    """Rows of the prediction CSV: ``image_id,label,block_labels,votes``.

    Block labels are ``;``-joined in block order; votes are
    ``class=count`` pairs in class order, ``;``-joined.
    """
    rows = ["image_id,label,block_labels,votes"]
    for p in predictions:
        blocks = ";".join(b.label for b in p.blocks)
        votes = ";".join(f"{cls}={n}" for cls, n in p.votes.items())
        rows.append(f"{p.image_id},{p.label},{blocks},{votes}")
    return rows
