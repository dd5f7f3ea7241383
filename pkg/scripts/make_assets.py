#!/usr/bin/env python3
"""Materialize the procedural asset library (meshes, cutouts, backgrounds).

Writes OBJ meshes for the train/test role pools, RGBA cutouts and RGB
backgrounds for the paste baselines, plus library.json / library_test.json
role manifests.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from sceneaug.benchmark import BENCHMARK_CONFIG, write_benchmark_assets
from sceneaug.geometry import TopDownConfig


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="assets")
    parser.add_argument("--resolution", type=float, default=BENCHMARK_CONFIG.resolution,
                        help="px/m used when rendering the background corpus")
    args = parser.parse_args()
    config = TopDownConfig(resolution=args.resolution)
    path = write_benchmark_assets(Path(args.out), config)
    n_meshes = len(list((path / "meshes").glob("*.obj")))
    print(f"wrote {n_meshes} meshes, cutouts and backgrounds under {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
