"""Dataset manifests: CSV files mapping image ids to paths and labels.

Schema: a header row ``image_id,path,label`` followed by one record per
image. Labels are lowercase and drawn from the closed four-class set.
Relative paths are resolved against the manifest's own directory.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError

LABELS = ("normal", "benign", "insitu", "invasive")
_HEADER = ["image_id", "path", "label"]


@dataclass(frozen=True)
class ManifestRecord:
    image_id: str
    path: Path
    label: str


def load_manifest(path, check_paths: bool = True) -> list[ManifestRecord]:
    """Parse and validate a manifest CSV.

    Raises ``ManifestError`` on schema problems: wrong header, unknown
    label, duplicate image id, or (with ``check_paths``) a path that does
    not resolve to an existing file.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: empty manifest") from None
        if [h.strip() for h in header] != _HEADER:
            raise ManifestError(
                f"{path}: expected header {','.join(_HEADER)!r}, got {','.join(header)!r}"
            )
        records = []
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ManifestError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            image_id, rel, label = (f.strip() for f in row)
            if not image_id:
                raise ManifestError(f"{path}:{lineno}: empty image_id")
            if image_id in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
            seen.add(image_id)
            if label not in LABELS:
                raise ManifestError(
                    f"{path}:{lineno}: label {label!r} not in {'/'.join(LABELS)}"
                )
            img_path = Path(rel)
            if not img_path.is_absolute():
                img_path = path.parent / img_path
            if check_paths and not img_path.is_file():
                raise ManifestError(f"{path}:{lineno}: no such image file {img_path}")
            records.append(ManifestRecord(image_id, img_path, label))
    return records


def save_manifest(records: list[ManifestRecord], path) -> None:
    """Write records as a manifest CSV.

    Image paths are stored relative to the manifest's own directory so the
    file stays valid wherever the tree is mounted (and round-trips through
    ``load_manifest``, which resolves against that directory).
    """
    path = Path(path)
    base = path.resolve().parent
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_HEADER)
        for rec in records:
            rel = os.path.relpath(Path(rec.path).resolve(), base)
            writer.writerow([rec.image_id, rel, rec.label])
