"""Seeded dataset splits, evaluation reports, and experiment sweeps.

All randomness flows from a single integer seed through
``numpy.random.default_rng``, so every split, report, and sweep is
reproducible byte for byte given the same dataset, seed, and config.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyDataset, TooFewSamples
from .manifest import LABELS, ManifestRecord
from .pipeline import PipelineConfig, TrainedModel, predict_record, to_two_class, train


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.75
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError("train_fraction must be in (0, 1)")


def split(records: list[ManifestRecord], spec: SplitSpec):
    """Partition records into (train, validation).

    Stratified splits draw ``round(fraction * n_c)`` training samples from
    every class, preserving class balance within one sample; they require
    at least 2 samples per class. The partition is exact: every record
    lands on exactly one side.
    """
    if not records:
        raise EmptyDataset("cannot split an empty dataset")
    rng = np.random.default_rng(spec.seed)
    train_idx: list[int] = []
    if spec.stratified:
        classes = sorted({r.label for r in records}, key=LABELS.index)
        for cls in classes:
            idxs = [i for i, r in enumerate(records) if r.label == cls]
            if len(idxs) < 2:
                raise TooFewSamples(
                    f"class {cls!r} has {len(idxs)} sample(s); stratified "
                    "splitting needs at least 2"
                )
            perm = rng.permutation(len(idxs))
            n_train = int(np.floor(spec.train_fraction * len(idxs) + 0.5))
            train_idx.extend(idxs[p] for p in perm[:n_train])
    else:
        perm = rng.permutation(len(records))
        n_train = int(np.floor(spec.train_fraction * len(records) + 0.5))
        train_idx.extend(int(p) for p in perm[:n_train])
    chosen = set(train_idx)
    train_set = [records[i] for i in sorted(chosen)]
    val_set = [records[i] for i in range(len(records)) if i not in chosen]
    return train_set, val_set


@dataclass(frozen=True)
class EvalReport:
    class_order: tuple
    confusion: np.ndarray  # [true][predicted], ints
    image_accuracy: float
    block_accuracy: float
    precision: dict
    recall: dict
    support: dict
    config_echo: dict

    def to_csv_rows(self) -> list[str]:
        rows = ["section,name,value"]
        for key in sorted(self.config_echo):
            rows.append(f"config,{key},{self.config_echo[key]}")
        rows.append(f"accuracy,image,{self.image_accuracy!r}")
        rows.append(f"accuracy,block,{self.block_accuracy!r}")
        for cls in self.class_order:
            rows.append(f"precision,{cls},{self.precision[cls]!r}")
            rows.append(f"recall,{cls},{self.recall[cls]!r}")
            rows.append(f"support,{cls},{self.support[cls]}")
        for i, t in enumerate(self.class_order):
            for j, p in enumerate(self.class_order):
                rows.append(f"confusion,{t}:{p},{int(self.confusion[i, j])}")
        return rows

    def to_text(self) -> str:
        width = max(len(c) for c in self.class_order) + 2
        lines = [
            f"image accuracy: {self.image_accuracy:.4f}",
            f"block accuracy: {self.block_accuracy:.4f}",
            "",
            " " * width + "".join(c.rjust(width) for c in self.class_order)
            + "   (predicted)",
        ]
        for i, t in enumerate(self.class_order):
            row = "".join(str(int(v)).rjust(width) for v in self.confusion[i])
            lines.append(t.rjust(width) + row)
        lines.append("")
        for cls in self.class_order:
            lines.append(
                f"{cls.rjust(width)}  precision {self.precision[cls]:.4f}"
                f"  recall {self.recall[cls]:.4f}  support {self.support[cls]}"
            )
        return "\n".join(lines) + "\n"


def evaluate(
    model: TrainedModel, records: list[ManifestRecord], store=None, threads: int = 1
) -> EvalReport:
    """Predict every record and tally image- and block-level agreement."""
    if not records:
        raise EmptyDataset("nothing to evaluate")
    classes = model.svm_model.classes
    index = {cls: i for i, cls in enumerate(classes)}

    def truth(record):
        label = to_two_class(record.label) if model.config.two_class else record.label
        if label not in index:
            raise ValueError(f"label {label!r} unknown to the model {classes}")
        return label

    def job(record):
        return predict_record(model, record, store)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            preds = list(pool.map(job, records))
    else:
        preds = [job(r) for r in records]

    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    blocks_right = blocks_total = 0
    for record, pred in zip(records, preds):
        t = truth(record)
        confusion[index[t], index[pred.label]] += 1
        for b in pred.blocks:
            blocks_total += 1
            blocks_right += b.label == t
    total = int(confusion.sum())
    precision, recall, support = {}, {}, {}
    for i, cls in enumerate(classes):
        col = int(confusion[:, i].sum())
        row = int(confusion[i].sum())
        precision[cls] = float(confusion[i, i] / col) if col else 0.0
        recall[cls] = float(confusion[i, i] / row) if row else 0.0
        support[cls] = row
    echo = {
        "block_size": model.config.block_size,
        "colorspace": model.config.colorspace,
        "extractor": model.config.extractor,
        "patch_size": model.config.patch_size,
        "two_class": model.config.two_class,
    }
    return EvalReport(
        class_order=classes,
        confusion=confusion,
        image_accuracy=float(np.trace(confusion) / total),
        block_accuracy=float(blocks_right / blocks_total) if blocks_total else 0.0,
        precision=precision,
        recall=recall,
        support=support,
        config_echo=echo,
    )


@dataclass(frozen=True)
class SweepRow:
    k: int
    image_accuracy: float
    block_accuracy: float
    seed: int


def sweep_block_size(
    records: list[ManifestRecord],
    cfg: PipelineConfig,
    target_stats,
    k_values,
    split_spec: SplitSpec,
    store=None,
    threads: int = 1,
) -> list[SweepRow]:
    """Train and evaluate one model per block size on one shared split."""
    train_set, val_set = split(records, split_spec)
    rows = []
    for k in k_values:
        model = train(
            train_set, replace(cfg, block_size=k), target_stats, store, threads
        )
        report = evaluate(model, val_set, store, threads)
        rows.append(
            SweepRow(
                k=k,
                image_accuracy=report.image_accuracy,
                block_accuracy=report.block_accuracy,
                seed=split_spec.seed,
            )
        )
    return rows


def sweep_csv_rows(rows: list[SweepRow]) -> list[str]:
    out = ["k,image_accuracy,block_accuracy,seed"]
    for r in rows:
        out.append(f"{r.k},{r.image_accuracy!r},{r.block_accuracy!r},{r.seed}")
    return out


def grid_search(
    records: list[ManifestRecord],
    cfg: PipelineConfig,
    target_stats,
    c_grid,
    gamma_grid,
    split_spec: SplitSpec,
    store=None,
    threads: int = 1,
):
    """Exhaustive (C, gamma) search on a held-out validation split.

    Returns ``((best_c, best_gamma), table)`` where the table lists every
    combination with its validation accuracy. Accuracy ties go to the
    smaller C, then the smaller gamma.
    """
    if not c_grid or not gamma_grid:
        raise ValueError("grids must be nonempty")
    train_set, val_set = split(records, split_spec)
    table = []
    for c in c_grid:
        for gamma in gamma_grid:
            model = train(
                train_set,
                replace(cfg, svm_c=c, gamma=gamma),
                target_stats,
                store,
                threads,
            )
            report = evaluate(model, val_set, store, threads)
            table.append((float(c), float(gamma), report.image_accuracy))
    best = min(table, key=lambda row: (-row[2], row[0], row[1]))
    return (best[0], best[1]), table
