"""Estimate ITA throughput and extrapolate to a full 16,577-image run.

Generates random RGBA images at a typical web resolution, times
``ItaTask`` (both modes, both schemes) across a worker pool and prints
images/second with the projected wall time.

    python scripts/bench_ita.py --images 64 --size 600x450 --workers 4
"""

import argparse
import tempfile
import time
from pathlib import Path

import numpy as np
from PIL import Image

from fitzaudit.batch import ItaTask, jobs_from_paths, run_jobs
from fitzaudit.ita import MODES, SCHEMES

FULL_RUN = 16_577


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--images", type=int, default=64)
    ap.add_argument("--size", default="600x450")
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()
    w, h = map(int, args.size.lower().split("x"))
    rng = np.random.default_rng(0)

    with tempfile.TemporaryDirectory() as tmp:
        paths = []
        for i in range(args.images):
            px = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
            path = Path(tmp) / f"b{i:04d}.jpg"
            Image.fromarray(px).save(path, quality=90)
            paths.append(path)
        jobs = jobs_from_paths(paths)
        start = time.perf_counter()
        results = run_jobs(ItaTask(MODES, SCHEMES), jobs, args.workers)
        elapsed = time.perf_counter() - start

    assert not any(r.error for r in results)
    rate = args.images / elapsed
    print(f"{args.images} images {w}x{h}, {args.workers} workers: {rate:.1f} img/s")
    print(f"projected {FULL_RUN} images: {FULL_RUN / rate / 60:.1f} min")


if __name__ == "__main__":
    main()
