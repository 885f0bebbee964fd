"""``fitzaudit`` command line entry point.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import batch
from .dataset import (
    DEFAULT_SEED,
    ColumnMap,
    ManifestError,
    SplitError,
    SplitSpec,
    condition_skin_coverage,
    distribution_stats,
    load_manifest,
    read_manifest,
    read_split,
    sampling_weights,
    split,
    type_label,
    write_split,
)
from .evalharness import (
    EvaluationError,
    MissingEstimate,
    concordance,
    confusion_matrix,
    ita_distribution,
    load_predictions,
    topk_accuracy,
    write_ita_distribution,
    write_report,
)
from .image import list_images
from .ita import FITZPATRICK_TYPES, MODES, SCHEMES

log = logging.getLogger("fitzaudit")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


class InputMissing(OSError):
    pass


@dataclass
class RunConfig:
    manifest: Path | None = None
    image_dir: Path | None = None
    out: Path | None = None
    workers: int = 1

    def check(self) -> None:
        for p in (self.manifest, self.image_dir):
            if p is not None and not p.exists():
                raise InputMissing(f"no such file or directory: {p}")
        if self.workers < 1:
            raise ValueError("worker count must be >= 1")


def _config(args) -> RunConfig:
    cfg = RunConfig(
        manifest=getattr(args, "manifest", None),
        image_dir=getattr(args, "image_dir", None),
        out=getattr(args, "out", None),
        workers=getattr(args, "workers", None) or batch.default_workers(),
    )
    cfg.check()
    return cfg


def _columns(args) -> ColumnMap:
    mapping = {}
    for item in getattr(args, "column", None) or []:
        key, _, col = item.partition("=")
        if not col:
            raise ValueError(f"--column expects field=header, got {item!r}")
        mapping[key.strip()] = col.strip()
    return ColumnMap.from_mapping(mapping)


def _records(args):
    if getattr(args, "lenient", False):
        records, errors = read_manifest(args.manifest, _columns(args))
        for i, msg in errors:
            log.warning("manifest row %d skipped: %s", i, msg)
        return records
    return load_manifest(args.manifest, _columns(args))


def _print_table(rows, stream=None) -> None:
    stream = stream or sys.stdout
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    for r in rows:
        stream.write("  ".join(str(c).rjust(w) if j else str(c).ljust(w)
                               for j, (c, w) in enumerate(zip(r, widths))) + "\n")


def _image_jobs(args, cfg: RunConfig):
    if cfg.manifest is not None:
        if cfg.image_dir is None:
            raise ValueError("--manifest requires --image-dir")
        ids = [r.image_id for r in _records(args)]
        return batch.jobs_from_manifest(ids, cfg.image_dir)
    if not args.inputs:
        raise ValueError("give image paths or --manifest with --image-dir")
    for p in args.inputs:
        if not Path(p).exists():
            raise InputMissing(f"no such file or directory: {p}")
    return batch.jobs_from_paths(list_images(args.inputs))


def _finish_rows(results, errors_path: Path, strict: bool) -> int:
    failed = batch.write_errors(errors_path, results)
    if failed:
        log.warning("%d images failed; see %s", failed, errors_path)
        if strict:
            return EXIT_IO
    return EXIT_OK


# --- subcommands ---------------------------------------------------------------


def cmd_mask(args) -> int:
    cfg = _config(args)
    jobs = _image_jobs(args, cfg)
    cfg.out.mkdir(parents=True, exist_ok=True)
    task = batch.MaskTask(None if args.no_png else cfg.out)
    results = batch.run_jobs(task, jobs, cfg.workers)
    batch.write_rows(cfg.out / "coverage.csv",
                     ["image_id", "width", "height", "skin_pixels", "coverage"], results)
    log.info("masked %d images -> %s", sum(not r.error for r in results), cfg.out)
    # explicitly named files that fail to decode are always fatal
    return _finish_rows(results, cfg.out / "errors.csv", args.strict or cfg.manifest is None)


def cmd_ita(args) -> int:
    cfg = _config(args)
    jobs = _image_jobs(args, cfg)
    modes = MODES if args.mode == "both" else (args.mode,)
    schemes = SCHEMES if args.scheme == "both" else (args.scheme,)
    task = batch.ItaTask(modes, schemes, args.trim)
    results = batch.run_jobs(task, jobs, cfg.workers)
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    batch.write_rows(cfg.out, batch.ITA_COLUMNS, results)
    log.info("ITA for %d images -> %s", sum(not r.error for r in results), cfg.out)
    return _finish_rows(results, cfg.out.with_suffix(".errors.csv"), args.strict)


def _estimate_sets(rows, modes, schemes):
    """``{(mode, scheme): {image_id: type}}`` for each configuration present."""
    out = {}
    for mode in modes:
        for scheme in schemes:
            est = {r.image_id: r.fitzpatrick(scheme) for r in rows
                   if r.mode == mode and r.fitzpatrick(scheme) is not None}
            if est:
                out[(mode, scheme)] = est
    return out


def cmd_concordance(args) -> int:
    cfg = _config(args)
    if not args.estimates.exists():
        raise InputMissing(f"no such file: {args.estimates}")
    records = _records(args)
    rows = batch.load_ita_csv(args.estimates)
    modes = MODES if args.mode == "both" else (args.mode,)
    schemes = SCHEMES if args.scheme == "both" else (args.scheme,)
    configs = _estimate_sets(rows, modes, schemes)
    if not configs:
        raise ValueError("estimates file has no rows for the requested mode/scheme")
    reports = {}
    for (mode, scheme), est in configs.items():
        subset = records
        if args.drop_missing:
            subset = [r for r in records if not r.known_type or r.image_id in est]
            dropped = len(records) - len(subset)
            if dropped:
                log.warning("%s/%s: %d labelled images without estimates dropped", mode, scheme, dropped)
        reports[f"{mode}/{scheme}"] = concordance(est, subset, args.tolerance)

    groups = ["Overall"] + [type_label(t) for t in FITZPATRICK_TYPES]
    table = [["group"] + list(reports)]
    for g in groups:
        cells = []
        for rep in reports.values():
            acc = rep.accuracy(g, args.tolerance)
            cells.append("-" if acc is None else f"{100 * acc:.2f}%")
        table.append([g] + cells)
    table.append(["Unknown (excluded)"] + [str(rep.row("Unknown").support) for rep in reports.values()])
    _print_table(table)
    if cfg.out is not None:
        cfg.out.parent.mkdir(parents=True, exist_ok=True)
        with open(cfg.out.with_suffix(".json"), "w", encoding="utf-8") as fh:
            json.dump({k: v.to_json() for k, v in reports.items()}, fh, indent=2)
        with open(cfg.out.with_suffix(".csv"), "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows(table)
    return EXIT_OK


def cmd_stats(args) -> int:
    cfg = _config(args)
    table = distribution_stats(_records(args))
    _print_table(table.as_rows())
    if cfg.out is not None:
        cfg.out.parent.mkdir(parents=True, exist_ok=True)
        with open(cfg.out.with_suffix(".csv"), "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows(table.as_rows())
        cfg.out.with_suffix(".json").write_text(json.dumps(table.to_json(), indent=2))
    return EXIT_OK


def cmd_coverage(args) -> int:
    cfg = _config(args)
    cov = condition_skin_coverage(_records(args))
    header = ["condition"] + [f"type_{t}" for t in FITZPATRICK_TYPES] + ["unknown", "mean_fitzpatrick"]
    rows = [[c.condition] + [c.counts[t] for t in FITZPATRICK_TYPES]
            + [c.unknown, "" if c.mean_fitzpatrick is None else repr(c.mean_fitzpatrick)]
            for c in cov]
    out = open(cfg.out, "w", newline="", encoding="utf-8") if cfg.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(header)
        w.writerows(rows)
    finally:
        if cfg.out:
            out.close()
    missing6 = sum(1 for c in cov if c.counts[6] == 0)
    means = [c.mean_fitzpatrick for c in cov if c.mean_fitzpatrick is not None]
    log.info("%d conditions, %d without type 6; mean type spans %.2f-%.2f",
             len(cov), missing6, min(means), max(means))
    return EXIT_OK


def cmd_split(args) -> int:
    cfg = _config(args)
    types = tuple(int(t) for t in args.train_types.split(",")) if args.train_types else None
    spec = SplitSpec(args.strategy, args.test_source, types, args.fraction, args.seed)
    result = split(_records(args), spec)
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    sidecar = write_split(result, cfg.out)
    print(json.dumps(json.loads(sidecar.read_text())["counts"]))
    return EXIT_OK


def _restrict(records, split_path, side):
    if split_path is None:
        return records
    sides = read_split(split_path)
    return [r for r in records if sides.get(r.image_id) == side]


def cmd_weights(args) -> int:
    cfg = _config(args)
    train = _restrict(_records(args), args.split, "train")
    weights = sampling_weights(train, args.level)
    with open(cfg.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["image_id", "weight"])
        for r, wt in zip(train, weights):
            w.writerow([r.image_id, repr(wt)])
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    if not args.predictions.exists():
        raise InputMissing(f"no such file: {args.predictions}")
    everything = _records(args)
    records = _restrict(everything, args.split, "test")
    space = {r.label(args.level) for r in everything}
    preds = load_predictions(args.predictions)
    ks = [int(k) for k in args.k.split(",")]
    report = topk_accuracy(preds, records, ks, True, args.level, space)
    _print_table(report.table_rows())
    cm = None
    if args.confusion:
        cm = confusion_matrix(preds, records, args.level, space)
        print()
        _print_table(cm.table_rows())
    if cfg.out is not None:
        cfg.out.parent.mkdir(parents=True, exist_ok=True)
        write_report(report, cfg.out.with_suffix(".json"), cfg.out.with_suffix(".csv"))
        if cm is not None:
            stem = cfg.out.with_name(cfg.out.stem + "_confusion")
            write_report(cm, stem.with_suffix(".json"), stem.with_suffix(".csv"))
    return EXIT_OK


def cmd_ita_dist(args) -> int:
    cfg = _config(args)
    if not args.estimates.exists():
        raise InputMissing(f"no such file: {args.estimates}")
    records = _records(args)
    ita = {r.image_id: r.ita_degrees for r in batch.load_ita_csv(args.estimates) if r.mode == args.mode}
    dist = ita_distribution(ita, records)
    summary = cfg.out.with_name(cfg.out.stem + "_summary.csv")
    write_ita_distribution(dist, cfg.out, summary)
    rows = [["group", "support", "median", "mean"]]
    for s in dist.summary():
        rows.append([s["group"], s["support"],
                     f"{s['median']:.2f}" if s["support"] else "-",
                     f"{s['mean']:.2f}" if s["support"] else "-"])
    _print_table(rows)
    return EXIT_OK


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fitzaudit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def manifest_args(sp, required=True):
        sp.add_argument("--manifest", type=Path, required=required)
        sp.add_argument("--column", action="append", metavar="FIELD=HEADER",
                        help="override a manifest column name (repeatable)")
        sp.add_argument("--lenient", action="store_true",
                        help="skip invalid manifest rows with a warning instead of failing")

    def image_args(sp):
        sp.add_argument("inputs", nargs="*", help="image files or directories")
        manifest_args(sp, required=False)
        sp.add_argument("--image-dir", type=Path)
        sp.add_argument("--workers", type=int, help=f"default: ${batch.WORKERS_ENV} or CPU count")
        sp.add_argument("--strict", action="store_true", help="exit 2 if any image fails")

    sp = sub.add_parser("mask", help="YCbCr skin masks and coverage")
    image_args(sp)
    sp.add_argument("--out", type=Path, required=True, help="output directory")
    sp.add_argument("--no-png", action="store_true", help="only write coverage.csv")
    sp.set_defaults(func=cmd_mask)

    sp = sub.add_parser("ita", help="per-image ITA and Fitzpatrick estimates")
    image_args(sp)
    sp.add_argument("--mode", choices=MODES + ("both",), default="masked")
    sp.add_argument("--scheme", choices=SCHEMES + ("both",), default="both")
    sp.add_argument("--trim", choices=("independent", "joint"), default="independent")
    sp.add_argument("--out", type=Path, required=True, help="output CSV")
    sp.set_defaults(func=cmd_ita)

    sp = sub.add_parser("concordance", help="+/-k agreement of ITA types with labels")
    manifest_args(sp)
    sp.add_argument("--estimates", type=Path, required=True, help="CSV written by `ita`")
    sp.add_argument("--mode", choices=MODES + ("both",), default="both")
    sp.add_argument("--scheme", choices=SCHEMES + ("both",), default="both")
    sp.add_argument("--tolerance", type=int, default=1)
    sp.add_argument("--drop-missing", action="store_true",
                    help="score only images that have estimates")
    sp.add_argument("--out", type=Path, help="output prefix (.json and .csv)")
    sp.set_defaults(func=cmd_concordance)

    sp = sub.add_parser("stats", help="skin-type composition by high-level category")
    manifest_args(sp)
    sp.add_argument("--out", type=Path, help="output prefix (.json and .csv)")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("coverage", help="per-condition Fitzpatrick coverage")
    manifest_args(sp)
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_coverage)

    sp = sub.add_parser("split", help="generate a holdout partition")
    manifest_args(sp)
    sp.add_argument("--strategy", required=True,
                    help="verified | random | source | fitz (long forms accepted)")
    sp.add_argument("--test-source", help="DermaAmin or AtlasDermatologico")
    sp.add_argument("--train-types", help="comma-separated Fitzpatrick types, e.g. 1,2")
    sp.add_argument("--fraction", type=float, default=0.2)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--out", type=Path, required=True, help="split CSV; sidecar gets .json")
    sp.set_defaults(func=cmd_split)

    sp = sub.add_parser("weights", help="inverse-frequency sampling weights")
    manifest_args(sp)
    sp.add_argument("--split", type=Path, help="split CSV; weights cover its train side")
    sp.add_argument("--level", type=int, choices=(3, 9, 114), default=114)
    sp.add_argument("--out", type=Path, required=True)
    sp.set_defaults(func=cmd_weights)

    sp = sub.add_parser("evaluate", help="per-type top-k accuracy and confusion matrix")
    manifest_args(sp)
    sp.add_argument("--predictions", type=Path, required=True,
                    help="long-form CSV: image_id, rank, label, score")
    sp.add_argument("--split", type=Path, help="split CSV; evaluates its test side")
    sp.add_argument("--level", type=int, choices=(3, 9, 114), default=114)
    sp.add_argument("--k", default="1,2,3")
    sp.add_argument("--confusion", action="store_true")
    sp.add_argument("--out", type=Path, help="output prefix (.json and .csv)")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("ita-dist", help="plot-ready ITA values per Fitzpatrick label")
    manifest_args(sp)
    sp.add_argument("--estimates", type=Path, required=True)
    sp.add_argument("--mode", choices=MODES, default="masked")
    sp.add_argument("--out", type=Path, required=True, help="long-form CSV (fitzpatrick, ita_degrees)")
    sp.set_defaults(func=cmd_ita_dist)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except MissingEstimate as exc:
        log.error("%s", exc)
        for image_id in exc.image_ids:
            print(image_id, file=sys.stderr)
        return EXIT_VALIDATION
    except (ManifestError, SplitError, EvaluationError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
