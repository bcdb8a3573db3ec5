#!/usr/bin/env python3
"""End-to-end run on the four-class synthetic corpus.

Generates disjoint train/test corpora, trains with the default config
(2x2 context, PCA at 0.95 variance, all eight dihedral augmentations),
and prints the evaluation report. Pass --two-class to group the labels
into carcinoma vs non-carcinoma before training.

Usage: python scripts/run_end_to_end.py [--train-per-class 10]
       [--test-per-class 5] [--two-class] [--work-dir DIR]
"""

import argparse
import tempfile
from pathlib import Path

from ctxpath import color, evaluation, pipeline, synthetic


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--train-per-class", type=int, default=10)
    ap.add_argument("--test-per-class", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--two-class", action="store_true")
    ap.add_argument("--work-dir", default=None)
    args = ap.parse_args()

    work = Path(args.work_dir) if args.work_dir else Path(tempfile.mkdtemp())
    train_recs = synthetic.color_corpus(
        work / "train", args.train_per_class, size=(1024, 768), seed=args.seed
    )
    test_recs = synthetic.color_corpus(
        work / "test", args.test_per_class, size=(1024, 768),
        seed=args.seed + 1, prefix="t",
    )
    cfg = pipeline.PipelineConfig(patch_size=256, two_class=args.two_class)
    target = color.compute_stats(
        color.rgb_to_space(color.read_image(train_recs[0].path), cfg.colorspace)
    )
    model, summary = pipeline.train_with_summary(train_recs, cfg, target)
    print(
        f"trained on {summary['images']} images "
        f"({summary['block_samples']} block samples, "
        f"{summary['pca_components']} PCA components); block-level training "
        f"accuracy {summary['block_train_accuracy']:.3f}"
    )
    report = evaluation.evaluate(model, test_recs)
    print(report.to_text())


if __name__ == "__main__":
    main()
