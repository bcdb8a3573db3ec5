#!/usr/bin/env python3
"""Regenerate the shared patch-grid geometry fixture.

Both the Python package and the feature exporter under frontend/ must
enumerate identical grids; this fixture pins the expected geometry for a
spread of image sizes so either side can assert against it.

Usage: python scripts/make_geometry_fixture.py
"""

import json
from pathlib import Path

from ctxpath.tiling import make_grid

CASES = [
    (2048, 1536, 512, 512),
    (1024, 768, 256, 256),
    (512, 512, 512, 512),
    (1000, 700, 256, 256),
    (2048, 1536, 512, 256),
    (640, 480, 128, 64),
]


def main():
    out = []
    for width, height, patch, stride in CASES:
        grid = make_grid(width, height, patch, stride)
        out.append(
            {
                "width": width,
                "height": height,
                "patch_size": patch,
                "stride": stride,
                "rows": grid.rows,
                "cols": grid.cols,
                "origins": [
                    list(grid.origin(r, c)) for r, c in grid.cells()
                ],
            }
        )
    path = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "grid_geometry.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(out, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {len(out)} cases to {path}")


if __name__ == "__main__":
    main()
