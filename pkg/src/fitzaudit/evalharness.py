"""Disaggregated scoring: top-k accuracy, confusion matrices, ITA concordance,
and ITA distribution exports, all grouped by Fitzpatrick type.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import LEVELS, ManifestRecord, normalize_label, type_label
from .ita import FITZPATRICK_TYPES, UNKNOWN

OVERALL = "Overall"
OVERALL_KNOWN = "Overall (known types)"


class EvaluationError(ValueError):
    pass


class MissingPrediction(EvaluationError):
    def __init__(self, image_ids: Sequence[str]):
        self.image_ids = list(image_ids)
        super().__init__(f"{len(self.image_ids)} images lack predictions, e.g. {self.image_ids[:5]}")


class MissingEstimate(EvaluationError):
    def __init__(self, image_ids: Sequence[str]):
        self.image_ids = list(image_ids)
        super().__init__(f"{len(self.image_ids)} images lack estimates, e.g. {self.image_ids[:5]}")


class UnknownImage(EvaluationError):
    pass


class UnknownLabel(EvaluationError):
    pass


class LevelMismatch(EvaluationError):
    pass


@dataclass(frozen=True)
class PredictionRecord:
    image_id: str
    ranked_labels: tuple[str, ...]
    scores: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.ranked_labels:
            raise ValueError(f"{self.image_id}: empty prediction list")
        if len(set(self.ranked_labels)) != len(self.ranked_labels):
            raise ValueError(f"{self.image_id}: ranked labels are not distinct")
        if self.scores is not None and len(self.scores) != len(self.ranked_labels):
            raise ValueError(f"{self.image_id}: scores and labels differ in length")


def load_predictions(path) -> list[PredictionRecord]:
    """Read long-form predictions: ``image_id, rank, label[, score]``.

    Rank 1 is the top prediction. The file's ranks are authoritative; scores
    are carried along but never used to reorder.
    """
    rows: dict[str, list[tuple[int, str, float | None]]] = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or [])
        if not {"image_id", "rank", "label"} <= cols:
            raise EvaluationError(f"{path}: prediction file needs image_id, rank, label columns")
        has_score = "score" in cols
        for i, row in enumerate(reader, start=1):
            try:
                rank = int(row["rank"])
                score = float(row["score"]) if has_score and row["score"] not in ("", None) else None
            except ValueError as exc:
                raise EvaluationError(f"{path}: row {i}: {exc}") from None
            rows[row["image_id"]].append((rank, normalize_label(row["label"]), score))
    preds = []
    for image_id, items in rows.items():
        items.sort(key=lambda x: x[0])
        ranks = [x[0] for x in items]
        if len(set(ranks)) != len(ranks):
            raise EvaluationError(f"{path}: duplicate rank for {image_id}")
        scores = tuple(x[2] for x in items)
        preds.append(
            PredictionRecord(
                image_id,
                tuple(x[1] for x in items),
                scores if all(s is not None for s in scores) else None,
            )
        )
    return preds


def write_predictions(preds: Iterable[PredictionRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["image_id", "rank", "label", "score"])
        for p in preds:
            for i, label in enumerate(p.ranked_labels):
                w.writerow([p.image_id, i + 1, label, "" if p.scores is None else repr(p.scores[i])])


# --- reports -----------------------------------------------------------------


@dataclass
class GroupRow:
    group: str
    support: int
    correct: dict[int, int]

    def accuracy(self, key: int) -> float | None:
        return self.correct[key] / self.support if self.support else None


@dataclass
class GroupedAccuracyReport:
    """Accuracy-style metric per Fitzpatrick group.

    ``keys`` are the k values for top-k, or the tolerance for concordance.
    """

    metric: str
    keys: tuple[int, ...]
    rows: list[GroupRow]
    meta: dict = field(default_factory=dict)

    def row(self, group: str) -> GroupRow:
        for r in self.rows:
            if r.group == group:
                return r
        raise KeyError(group)

    def accuracy(self, group: str, key: int) -> float | None:
        return self.row(group).accuracy(key)

    def to_json(self) -> dict:
        return {
            "metric": self.metric,
            "keys": list(self.keys),
            "meta": self.meta,
            "rows": [
                {
                    "group": r.group,
                    "support": r.support,
                    "correct": {str(k): r.correct[k] for k in self.keys},
                    "accuracy": {str(k): r.accuracy(k) for k in self.keys},
                }
                for r in self.rows
            ],
        }

    def table_rows(self, decimals: int = 1) -> list[list[str]]:
        """Percent table; empty groups render as '-'."""
        label = "top-{}" if self.metric == "top-k" else "tol-{}"
        out = [["group", "support"] + [label.format(k) for k in self.keys]]
        for r in self.rows:
            cells = []
            for k in self.keys:
                acc = r.accuracy(k)
                cells.append("-" if acc is None else f"{100 * acc:.{decimals}f}%")
            out.append([r.group, str(r.support)] + cells)
        return out


def write_report(report, json_path=None, csv_path=None, decimals: int = 1) -> None:
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(report.to_json(), fh, indent=2)
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            if isinstance(report, GroupedAccuracyReport):
                rows = report.table_rows(decimals)
            else:
                rows = report.table_rows()
            csv.writer(fh).writerows(rows)


def _label_space(records: Sequence[ManifestRecord], level: int) -> set[str]:
    return {r.label(level) for r in records}


def _resolve(
    preds: Sequence[PredictionRecord],
    records: Sequence[ManifestRecord],
    level: int,
    label_space: set[str] | None,
) -> dict[str, PredictionRecord]:
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}, got {level}")
    by_id: dict[str, PredictionRecord] = {}
    for p in preds:
        if p.image_id in by_id:
            raise EvaluationError(f"duplicate prediction for {p.image_id}")
        by_id[p.image_id] = p
    wanted = {r.image_id for r in records}
    stray = [i for i in by_id if i not in wanted]
    if stray:
        raise UnknownImage(f"{len(stray)} predictions for images outside the evaluation set, e.g. {stray[:5]}")
    missing = [r.image_id for r in records if r.image_id not in by_id]
    if missing:
        raise MissingPrediction(missing)

    space = label_space if label_space is not None else _label_space(records, level)
    predicted = {lab for p in by_id.values() for lab in p.ranked_labels}
    unknown = predicted - space
    if unknown:
        for other in LEVELS:
            if other != level and predicted <= _label_space(records, other):
                raise LevelMismatch(f"predicted labels belong to the {other}-level taxonomy, not {level}")
        raise UnknownLabel(f"labels outside the {level}-level space: {sorted(unknown)[:5]}")
    too_long = [p.image_id for p in by_id.values() if len(p.ranked_labels) > len(space)]
    if too_long:
        raise EvaluationError(f"more ranked labels than classes for {too_long[:5]}")
    return by_id


def _group_rows(
    records: Sequence[ManifestRecord],
    hits: Mapping[str, Mapping[int, bool]],
    keys: Sequence[int],
    include_unknown_in_overall: bool,
) -> list[GroupRow]:
    groups = [OVERALL] + ([OVERALL_KNOWN] if include_unknown_in_overall else [])
    groups += [type_label(t) for t in FITZPATRICK_TYPES] + [type_label(UNKNOWN)]
    rows = {g: GroupRow(g, 0, {k: 0 for k in keys}) for g in groups}
    for r in records:
        targets = [type_label(r.fitzpatrick)]
        if r.known_type:
            targets.append(OVERALL)
            if include_unknown_in_overall:
                targets.append(OVERALL_KNOWN)
        elif include_unknown_in_overall:
            targets.append(OVERALL)
        for g in targets:
            row = rows[g]
            row.support += 1
            for k in keys:
                row.correct[k] += bool(hits[r.image_id][k])
    return [rows[g] for g in groups]


def topk_accuracy(
    preds: Sequence[PredictionRecord],
    records: Sequence[ManifestRecord],
    ks: Iterable[int] = (1,),
    group_by_fitzpatrick: bool = True,
    level: int = 114,
    label_space: set[str] | None = None,
) -> GroupedAccuracyReport:
    """Fraction of images whose true label is among the first k predictions.

    ``records`` is the evaluation set and must be covered exactly by ``preds``.
    The ``Overall`` row counts every image, Unknown-typed ones included;
    ``Overall (known types)`` drops them.
    """
    ks = tuple(sorted(set(int(k) for k in ks)))
    if not ks or ks[0] < 1:
        raise ValueError("k values must be positive integers")
    by_id = _resolve(preds, records, level, label_space)
    hits = {}
    for r in records:
        ranked = by_id[r.image_id].ranked_labels
        truth = r.label(level)
        hits[r.image_id] = {k: truth in ranked[:k] for k in ks}
    if group_by_fitzpatrick:
        rows = _group_rows(records, hits, ks, include_unknown_in_overall=True)
    else:
        rows = [GroupRow(OVERALL, len(records), {k: sum(h[k] for h in hits.values()) for k in ks})]
    return GroupedAccuracyReport("top-k", ks, rows, {"level": level, "images": len(records)})


@dataclass
class ConfusionMatrix:
    labels: list[str]
    counts: np.ndarray  # rows = actual, columns = predicted (rank 1)

    def cell(self, actual: str, predicted: str) -> int:
        return int(self.counts[self.labels.index(actual), self.labels.index(predicted)])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_json(self) -> dict:
        return {"labels": self.labels, "counts": self.counts.tolist()}

    def table_rows(self) -> list[list[str]]:
        out = [["actual \\ predicted"] + self.labels]
        for lab, row in zip(self.labels, self.counts):
            out.append([lab] + [str(int(v)) for v in row])
        return out


def confusion_matrix(
    preds: Sequence[PredictionRecord],
    records: Sequence[ManifestRecord],
    level: int = 3,
    label_space: set[str] | None = None,
) -> ConfusionMatrix:
    by_id = _resolve(preds, records, level, label_space)
    space = label_space if label_space is not None else _label_space(records, level)
    labels = sorted(space)
    index = {lab: i for i, lab in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for r in records:
        counts[index[r.label(level)], index[by_id[r.image_id].ranked_labels[0]]] += 1
    return ConfusionMatrix(labels, counts)


def concordance(
    estimates: Mapping[str, int],
    records: Sequence[ManifestRecord],
    tolerance: int = 1,
) -> GroupedAccuracyReport:
    """Share of images whose estimated type is within ``tolerance`` of the label.

    Unknown-labelled images are excluded from ``Overall`` and reported only
    as a support count.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    missing = [r.image_id for r in records if r.known_type and r.image_id not in estimates]
    if missing:
        raise MissingEstimate(missing)
    hits = {}
    for r in records:
        if r.known_type:
            est = int(estimates[r.image_id])
            if est not in FITZPATRICK_TYPES:
                raise EvaluationError(f"{r.image_id}: estimate {est} is not a Fitzpatrick type")
            hits[r.image_id] = {tolerance: abs(est - r.fitzpatrick) <= tolerance}
        else:
            hits[r.image_id] = {tolerance: False}
    rows = _group_rows(records, hits, (tolerance,), include_unknown_in_overall=False)
    return GroupedAccuracyReport(
        "concordance", (tolerance,), rows,
        {"tolerance": tolerance, "images": sum(r.known_type for r in records)},
    )


# --- ITA distribution --------------------------------------------------------


@dataclass
class ItaDistribution:
    values: dict[int, list[float]]  # Fitzpatrick label (UNKNOWN = -1) -> ITA values

    def summary(self) -> list[dict]:
        rows = []
        for t in FITZPATRICK_TYPES + (UNKNOWN,):
            vals = self.values.get(t, [])
            row = {"fitzpatrick": t, "group": type_label(t), "support": len(vals)}
            if vals:
                arr = np.asarray(vals, dtype=np.float64)
                q = np.percentile(arr, [0, 25, 50, 75, 100])
                row.update(
                    min=float(q[0]), p25=float(q[1]), median=float(q[2]),
                    p75=float(q[3]), max=float(q[4]), mean=float(arr.mean()),
                )
            rows.append(row)
        return rows

    def long_rows(self) -> list[tuple[int, float]]:
        return [(t, v) for t in sorted(self.values) for v in self.values[t]]


def ita_distribution(
    ita_by_id: Mapping[str, float], records: Sequence[ManifestRecord]
) -> ItaDistribution:
    """Group ITA values by the records' Fitzpatrick label, in record order."""
    values: dict[int, list[float]] = defaultdict(list)
    for r in records:
        v = ita_by_id.get(r.image_id)
        if v is not None and math.isfinite(v):
            values[r.fitzpatrick].append(float(v))
    return ItaDistribution(dict(values))


def write_ita_distribution(dist: ItaDistribution, path, summary_path=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["fitzpatrick", "ita_degrees"])
        for t, v in dist.long_rows():
            w.writerow([t, repr(v)])
    if summary_path is not None:
        cols = ["fitzpatrick", "group", "support", "min", "p25", "median", "p75", "max", "mean"]
        with open(summary_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, restval="")
            w.writeheader()
            w.writerows(dist.summary())
