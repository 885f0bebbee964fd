"""Per-image batch jobs with a process pool and ordered, deterministic output."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .image import find_image, load_image, save_mask_png
from .ita import SCHEMES, compute_ita, ita_to_fitzpatrick
from .skinmask import skin_mask

WORKERS_ENV = "FITZAUDIT_WORKERS"

ITA_COLUMNS = (
    "image_id", "mode", "ita_degrees", "fitz_kinyanjui", "fitz_empirical",
    "pixels_considered", "pixels_retained", "fallback", "singular",
)


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        n = int(raw)
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ImageJob:
    image_id: str
    path: Path | None  # None when the image could not be located


@dataclass
class JobResult:
    image_id: str
    rows: list[dict]
    error: str | None = None


def jobs_from_paths(paths: Iterable[Path]) -> list[ImageJob]:
    return [ImageJob(p.stem, p) for p in paths]


def jobs_from_manifest(image_ids: Iterable[str], image_dir) -> list[ImageJob]:
    return [ImageJob(i, find_image(image_dir, i)) for i in image_ids]


def run_jobs(fn: Callable[[ImageJob], JobResult], jobs: Sequence[ImageJob], workers: int = 1) -> list[JobResult]:
    """Apply ``fn`` to every job; results come back sorted by image id."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1 or len(jobs) < 2:
        results = [fn(j) for j in jobs]
    else:
        chunk = max(1, len(jobs) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, jobs, chunksize=chunk))
    return sorted(results, key=lambda r: r.image_id)


def _guarded(job: ImageJob, body) -> JobResult:
    if job.path is None:
        return JobResult(job.image_id, [], "image file not found")
    try:
        return JobResult(job.image_id, body())
    except (OSError, ValueError) as exc:
        return JobResult(job.image_id, [], f"{type(exc).__name__}: {exc}")


@dataclass(frozen=True)
class ItaTask:
    modes: tuple[str, ...] = ("masked",)
    schemes: tuple[str, ...] = SCHEMES
    trim: str = "independent"

    def __call__(self, job: ImageJob) -> JobResult:
        def body():
            img = load_image(job.path)
            rows = []
            for mode in self.modes:
                res = compute_ita(img, mode, trim=self.trim)
                row = {
                    "image_id": job.image_id,
                    "mode": mode,
                    "ita_degrees": repr(res.ita_degrees),
                    "fitz_kinyanjui": "",
                    "fitz_empirical": "",
                    "pixels_considered": res.pixels_considered,
                    "pixels_retained": res.pixels_retained,
                    "fallback": int(res.fallback),
                    "singular": int(res.singular),
                }
                for scheme in self.schemes:
                    row[f"fitz_{scheme}"] = ita_to_fitzpatrick(res.ita_degrees, scheme)
                rows.append(row)
            return rows

        return _guarded(job, body)


@dataclass(frozen=True)
class MaskTask:
    out_dir: Path | None = None

    def __call__(self, job: ImageJob) -> JobResult:
        def body():
            img = load_image(job.path)
            m = skin_mask(img)
            if self.out_dir is not None:
                save_mask_png(m.bits, Path(self.out_dir) / f"{job.image_id}_mask.png")
            return [{
                "image_id": job.image_id,
                "width": m.width,
                "height": m.height,
                "skin_pixels": m.count,
                "coverage": repr(m.coverage),
            }]

        return _guarded(job, body)


def write_rows(path, columns: Sequence[str], results: Sequence[JobResult]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns))
        w.writeheader()
        for r in results:
            w.writerows(r.rows)


def write_errors(path, results: Sequence[JobResult]) -> int:
    """Write ``image_id,error`` for failed jobs; returns the failure count."""
    failed = [r for r in results if r.error]
    if failed:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["image_id", "error"])
            for r in failed:
                w.writerow([r.image_id, r.error])
    return len(failed)


@dataclass(frozen=True)
class ItaRow:
    image_id: str
    mode: str
    ita_degrees: float
    fitz_kinyanjui: int | None
    fitz_empirical: int | None
    pixels_considered: int
    pixels_retained: int
    fallback: bool
    singular: bool

    def fitzpatrick(self, scheme: str) -> int | None:
        return getattr(self, f"fitz_{scheme}")


def load_ita_csv(path) -> list[ItaRow]:
    """Read an ``ita`` output file back into typed rows."""
    def opt_int(s):
        return int(s) if s not in ("", None) else None

    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(ITA_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: ITA file lacks columns {sorted(missing)}")
        for row in reader:
            out.append(ItaRow(
                row["image_id"], row["mode"], float(row["ita_degrees"]),
                opt_int(row["fitz_kinyanjui"]), opt_int(row["fitz_empirical"]),
                int(row["pixels_considered"]), int(row["pixels_retained"]),
                row["fallback"] in ("1", "True", "true"), row["singular"] in ("1", "True", "true"),
            ))
    return out
