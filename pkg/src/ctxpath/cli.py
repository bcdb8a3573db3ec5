"""Command-line interface: normalize, extract, train, predict, evaluate, sweep.

Exit codes are a stable contract for scripting:
  0  success
  2  I/O failure
  3  data warning escalated by --strict
  4  schema violation (manifest, feature store, or model file)
  5  training or prediction failure

Every command is deterministic given identical inputs, flags, and --seed.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import color, evaluation, features, pipeline, synthetic, tiling
from .errors import (
    BadMagic,
    CorruptRecord,
    DegenerateChannelWarning,
    DuplicateKey,
    ManifestError,
    SchemaViolation,
    UnsupportedVersion,
    VersionMismatch,
)
from .manifest import load_manifest

IMAGE_SUFFIXES = (".png", ".tif", ".tiff")

_SCHEMA_ERRORS = (
    ManifestError,
    SchemaViolation,
    VersionMismatch,
    BadMagic,
    UnsupportedVersion,
    CorruptRecord,
    DuplicateKey,
)


class _StrictEscalation(Exception):
    pass


def _default_threads() -> int:
    env = os.environ.get("CTXPATH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _list_images(root: Path) -> list[Path]:
    return sorted(
        p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )


def _resolve_target(args, cfg_space: str) -> color.ChannelStats:
    if getattr(args, "target_stats", None):
        stats = color.load_stats(args.target_stats)
        if stats.space != cfg_space:
            raise ValueError(
                f"stats file is in {stats.space!r} but the requested space "
                f"is {cfg_space!r}"
            )
        return stats
    if getattr(args, "target", None):
        img = color.read_image(args.target)
        return color.compute_stats(color.rgb_to_space(img, cfg_space))
    return None


# ---------------------------------------------------------------------------
# config files: flat key=value text mirroring PipelineConfig
# ---------------------------------------------------------------------------

def _parse_augment(spec: str):
    if spec == "all":
        return tuple(range(8))
    if spec == "none":
        return (0,)
    return tuple(int(v) for v in spec.replace(",", ";").split(";"))


def load_config_file(path) -> dict:
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SchemaViolation(f"{path}:{lineno}: expected key=value")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key in ("patch_size", "block_size", "pca_components"):
            values[key] = None if raw == "none" else int(raw)
        elif key in ("pca_variance", "svm_c"):
            values[key] = None if raw == "none" else float(raw)
        elif key == "gamma":
            values[key] = raw if raw == "scale" else float(raw)
        elif key == "augmentations":
            values[key] = _parse_augment(raw)
        elif key == "two_class":
            values[key] = raw.lower() in ("1", "true", "yes")
        elif key in ("colorspace", "extractor"):
            values[key] = raw
        else:
            raise SchemaViolation(f"{path}:{lineno}: unknown config key {key!r}")
    return values


def _build_config(args) -> pipeline.PipelineConfig:
    values = load_config_file(args.config) if getattr(args, "config", None) else {}
    overrides = {
        "colorspace": getattr(args, "space", None),
        "patch_size": getattr(args, "patch_size", None),
        "block_size": getattr(args, "block_size", None),
        "svm_c": getattr(args, "svm_c", None),
        "two_class": True if getattr(args, "two_class", False) else None,
    }
    if getattr(args, "gamma", None) is not None:
        overrides["gamma"] = (
            args.gamma if args.gamma == "scale" else float(args.gamma)
        )
    if getattr(args, "augment", None) is not None:
        overrides["augmentations"] = _parse_augment(args.augment)
    if getattr(args, "pca_variance", None) is not None:
        overrides["pca_variance"] = args.pca_variance
        overrides["pca_components"] = None
    if getattr(args, "pca_components", None) is not None:
        overrides["pca_components"] = args.pca_components
        overrides["pca_variance"] = None
    if getattr(args, "extractor", None):
        overrides["extractor"] = args.extractor
    elif getattr(args, "features", None):
        overrides["extractor"] = "store"
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    if values.get("pca_components") is not None and "pca_variance" not in values:
        values["pca_variance"] = None
    return pipeline.PipelineConfig(**values)


def _load_store(path):
    return features.store_index(features.store_read(path))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_normalize(args) -> int:
    space = args.space
    target = _resolve_target(args, space)
    if target is None:
        raise ValueError("give --target or --target-stats")
    src = Path(args.input)
    out = Path(args.output)
    if src.is_dir():
        out.mkdir(parents=True, exist_ok=True)
        jobs = [(p, out / p.name) for p in _list_images(src)]
    else:
        jobs = [(src, out)]
        if out.parent != Path(""):
            out.parent.mkdir(parents=True, exist_ok=True)
    for in_path, out_path in jobs:
        img = color.read_image(in_path)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateChannelWarning)
            result = color.reinhard_normalize(img, target, space)
        for w in caught:
            print(f"warning: {in_path.name}: {w.message}", file=sys.stderr)
        if caught and args.strict:
            raise _StrictEscalation(f"{in_path}: degenerate channel under --strict")
        color.write_image(result, out_path)
        achieved = color.compute_stats(color.rgb_to_space(result, space))
        print(f"{in_path.name} -> {out_path}: {color.stats_to_record(achieved)}")
    return 0


def cmd_extract(args) -> int:
    records = load_manifest(args.manifest, check_paths=args.extractor == "baseline")
    augs = _parse_augment(args.augment)
    target = _resolve_target(args, args.space)
    entries = []
    if args.extractor == "store":
        if not args.features:
            raise ValueError("--extractor store requires --features")
        store = _load_store(args.features)
        for rec in records:
            for aug in augs:
                key = (rec.image_id, aug)
                if key not in store:
                    raise SchemaViolation(f"input store has no entry {key!r}")
                entries.append(
                    features.FeatureStoreEntry(rec.image_id, aug, store[key])
                )
    else:
        for rec in records:
            img = color.read_image(rec.path)
            if target is not None:
                img = color.reinhard_normalize(img, target, args.space)
            for aug in augs:
                tr = tiling.apply_dihedral(img, aug)
                grid = tiling.make_grid(
                    tr.shape[1], tr.shape[0], args.patch_size, args.patch_size
                )
                fm = features.baseline_matrix(tr, grid)
                entries.append(features.FeatureStoreEntry(rec.image_id, aug, fm))
    features.store_write(args.out, entries)
    dim = entries[0].matrix.dim if entries else 0
    print(f"wrote {len(entries)} records (D={dim}) to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _build_config(args)
    store = None
    if args.features:
        store = _load_store(args.features)
    records = load_manifest(args.manifest, check_paths=cfg.extractor == "baseline")
    target = _resolve_target(args, cfg.colorspace)
    if target is None:
        if cfg.extractor == "baseline":
            first = min(records, key=lambda r: r.image_id)
            img = color.read_image(first.path)
            target = color.compute_stats(color.rgb_to_space(img, cfg.colorspace))
            print(f"normalization target: stats of {first.image_id}")
        else:
            # Store-backed features were extracted (and normalized) outside
            # this process; the stored stats are an inert placeholder.
            target = color.ChannelStats(
                cfg.colorspace, np.zeros(3), np.ones(3)
            )
    model, summary = pipeline.train_with_summary(
        records, cfg, target, store, threads=args.threads
    )
    pipeline.save_model(model, args.model)
    print(
        f"trained on {summary['images']} images / {summary['block_samples']} block samples"
    )
    print(f"pca components: {summary['pca_components']}")
    print(f"support vectors per pair machine: {summary['support_vectors']}")
    print(f"training accuracy (block level): {summary['block_train_accuracy']:.4f}")
    print(f"model written to {args.model}")
    return 0


def cmd_predict(args) -> int:
    model = pipeline.load_model(args.model)
    store = _load_store(args.features) if args.features else None
    if args.manifest:
        records = load_manifest(
            args.manifest, check_paths=model.config.extractor == "baseline"
        )
        preds = [pipeline.predict_record(model, rec, store) for rec in records]
    else:
        src = Path(args.input)
        paths = _list_images(src) if src.is_dir() else [src]
        preds = []
        for p in paths:
            preds.append(pipeline.predict(model, color.read_image(p), p.stem))
    rows = pipeline.prediction_csv_rows(preds)
    Path(args.out).write_text("\n".join(rows) + "\n", encoding="utf-8")
    for row in rows[1:]:
        print(row)
    return 0


def cmd_evaluate(args) -> int:
    model = pipeline.load_model(args.model)
    store = _load_store(args.features) if args.features else None
    records = load_manifest(
        args.manifest, check_paths=model.config.extractor == "baseline"
    )
    report = evaluation.evaluate(model, records, store, threads=args.threads)
    if args.out_csv:
        Path(args.out_csv).write_text(
            "\n".join(report.to_csv_rows()) + "\n", encoding="utf-8"
        )
    print(report.to_text(), end="")
    return 0


def cmd_sweep(args) -> int:
    cfg = _build_config(args)
    store = _load_store(args.features) if args.features else None
    records = load_manifest(args.manifest, check_paths=cfg.extractor == "baseline")
    target = _resolve_target(args, cfg.colorspace)
    if target is None:
        first = min(records, key=lambda r: r.image_id)
        img = color.read_image(first.path)
        target = color.compute_stats(color.rgb_to_space(img, cfg.colorspace))
    k_values = [int(v) for v in args.k.split(",")]
    spec = evaluation.SplitSpec(
        train_fraction=args.train_fraction, seed=args.seed, stratified=True
    )
    rows = evaluation.sweep_block_size(
        records, cfg, target, k_values, spec, store, threads=args.threads
    )
    csv_rows = evaluation.sweep_csv_rows(rows)
    if args.out:
        Path(args.out).write_text("\n".join(csv_rows) + "\n", encoding="utf-8")
    for row in csv_rows:
        print(row)
    return 0


def cmd_make_corpus(args) -> int:
    if args.kind == "color":
        records = synthetic.color_corpus(
            args.out_dir, args.per_class, (args.width, args.height), args.seed
        )
    else:
        records = synthetic.context_corpus(
            args.out_dir,
            args.per_class,
            (args.width, args.height),
            args.patch_size,
            args.seed,
        )
    print(f"wrote {len(records)} images under {args.out_dir}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common_model_flags(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--space", dest="space", choices=color.COLORSPACES, default=None,
                   help="working colorspace")
    p.add_argument("--patch-size", dest="patch_size", type=int, default=None,
                   help="patch edge length in pixels")
    p.add_argument("--block-size", dest="block_size", type=int, default=None,
                   help="context block size k (k x k patches)")
    p.add_argument("--pca-variance", dest="pca_variance", type=float, default=None,
                   help="PCA explained-variance fraction target")
    p.add_argument("--pca-components", dest="pca_components", type=int, default=None,
                   help="fixed PCA component count (overrides --pca-variance)")
    p.add_argument("--c", dest="svm_c", type=float, default=None,
                   help="SVM soft-margin parameter C")
    p.add_argument("--gamma", default=None,
                   help="RBF width: a float or 'scale'")
    p.add_argument("--augment", choices=["all", "none"], default=None,
                   help="dihedral augmentation set for training")
    p.add_argument("--two-class", action="store_true",
                   help="group labels into carcinoma vs non-carcinoma")


def _add_target_flags(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--target", help="target image for stain normalization")
    g.add_argument("--target-stats", help="stored channel-stats record file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxpath",
        description="Context-aware histology image classification pipeline",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=_default_threads(),
        help="worker thread cap (default: CTXPATH_THREADS or CPU count)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="stain-normalize images to a target")
    p.add_argument("--input", required=True, help="image file or directory")
    p.add_argument("--output", required=True, help="output file or directory")
    _add_target_flags(p)
    p.add_argument("--space", choices=color.COLORSPACES, default=color.LALPHABETA,
                   help="colorspace to match statistics in")
    p.add_argument("--strict", action="store_true",
                   help="treat degenerate-channel warnings as errors (exit 3)")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("extract", help="write per-patch features to a CTXF store")
    p.add_argument("--manifest", required=True, help="dataset manifest CSV")
    p.add_argument("--out", required=True, help="output CTXF store path")
    p.add_argument("--extractor", choices=["baseline", "store"], default="baseline")
    p.add_argument("--features", help="input CTXF store (with --extractor store)")
    p.add_argument("--augment", choices=["all", "none"], default="none")
    p.add_argument("--patch-size", dest="patch_size", type=int, default=512)
    p.add_argument("--space", choices=color.COLORSPACES, default=color.LALPHABETA)
    _add_target_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a model from a labeled manifest")
    p.add_argument("--manifest", required=True, help="dataset manifest CSV")
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--features", help="CTXF store to train from")
    p.add_argument("--extractor", choices=["baseline", "store"], default=None)
    _add_target_flags(p)
    _add_common_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify images with a trained model")
    p.add_argument("--model", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--input", help="image file or directory")
    g.add_argument("--manifest", help="dataset manifest CSV")
    p.add_argument("--features", help="CTXF store (for store-backed models)")
    p.add_argument("--out", required=True, help="output prediction CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a model against a labeled manifest")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", help="CTXF store (for store-backed models)")
    p.add_argument("--out-csv", help="write the report as CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="train/evaluate across block sizes")
    p.add_argument("--manifest", required=True)
    p.add_argument("--k", required=True, help="comma-separated block sizes, e.g. 1,2,3")
    p.add_argument("--seed", type=int, default=0, help="split seed")
    p.add_argument("--train-fraction", dest="train_fraction", type=float, default=0.75)
    p.add_argument("--features", help="CTXF store to train from")
    p.add_argument("--out", help="output CSV path")
    _add_target_flags(p)
    _add_common_model_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("make-corpus", help="generate a synthetic labeled corpus")
    p.add_argument("--kind", choices=["color", "context"], required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--per-class", dest="per_class", type=int, default=10)
    p.add_argument("--width", type=int, default=1024)
    p.add_argument("--height", type=int, default=768)
    p.add_argument("--patch-size", dest="patch_size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_corpus)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _StrictEscalation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except _SCHEMA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # training/prediction failures
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
