"""Annotation manifest ingestion, composition reports, holdout splits, weights."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

from .ita import FITZPATRICK_TYPES, UNKNOWN

SOURCES = ("DermaAmin", "AtlasDermatologico")
THREE_PARTITIONS = ("non-neoplastic", "benign", "malignant")
NINE_TO_THREE = {
    "inflammatory": "non-neoplastic",
    "genodermatoses": "non-neoplastic",
    "benign dermal": "benign",
    "benign epidermal": "benign",
    "benign melanocyte": "benign",
    "malignant epidermal": "malignant",
    "malignant melanoma": "malignant",
    "malignant cutaneous lymphoma": "malignant",
    "malignant dermal": "malignant",
}
QC_LABELS = (
    "diagnostic",
    "potentially-diagnostic",
    "characteristic",
    "wrongly-labeled",
    "other",
    "unreviewed",
)
LEVELS = (3, 9, 114)
DEFAULT_SEED = 20210407


class ManifestError(ValueError):
    pass


class MissingColumn(ManifestError):
    pass


class EmptyManifest(ManifestError):
    pass


class UnparseableRow(ManifestError):
    def __init__(self, errors: Sequence[tuple[int, str]]):
        self.errors = list(errors)
        head = "; ".join(f"row {i}: {msg}" for i, msg in self.errors[:5])
        more = f" (+{len(self.errors) - 5} more)" if len(self.errors) > 5 else ""
        super().__init__(f"{len(self.errors)} invalid manifest rows: {head}{more}")


class SplitError(ValueError):
    pass


class EmptySide(SplitError):
    pass


class MissingQC(SplitError):
    pass


@dataclass(frozen=True)
class ManifestRecord:
    image_id: str
    source: str | None
    condition: str
    nine_partition: str
    three_partition: str
    fitzpatrick: int  # 1-6, or UNKNOWN (-1)
    qc: str | None = None  # None when the manifest carries no QC column
    extra: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    @property
    def known_type(self) -> bool:
        return self.fitzpatrick != UNKNOWN

    def label(self, level: int) -> str:
        if level == 114:
            return self.condition
        if level == 9:
            return self.nine_partition
        if level == 3:
            return self.three_partition
        raise ValueError(f"level must be one of {LEVELS}, got {level}")


@dataclass
class ColumnMap:
    """Manifest header names; each field lists accepted aliases in priority order.

    Defaults follow the public annotation release. When no source column is
    present the source is inferred from the image URL host.
    """

    image_id: tuple[str, ...] = ("md5hash", "image_id")
    fitzpatrick: tuple[str, ...] = ("fitzpatrick", "fitzpatrick_scale")
    condition: tuple[str, ...] = ("label", "condition")
    nine_partition: tuple[str, ...] = ("nine_partition_label", "nine_partition")
    three_partition: tuple[str, ...] = ("three_partition_label", "three_partition")
    qc: tuple[str, ...] = ("qc",)
    source: tuple[str, ...] = ("source",)
    url: tuple[str, ...] = ("url",)

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> ColumnMap:
        """Override individual fields, e.g. ``{"image_id": "hash"}``."""
        cm = cls()
        for key, col in mapping.items():
            if not hasattr(cm, key):
                raise ValueError(f"unknown manifest field {key!r}")
            setattr(cm, key, (col,) if isinstance(col, str) else tuple(col))
        return cm


def _pick(header: Sequence[str], aliases: Iterable[str]) -> str | None:
    for a in aliases:
        if a in header:
            return a
    return None


def normalize_label(s: str) -> str:
    """Lower-case, underscores to spaces, collapsed whitespace."""
    return " ".join(s.strip().lower().replace("_", " ").split())


def parse_fitzpatrick(raw: str) -> int:
    s = raw.strip().lower()
    if s in ("", "unknown", "nan", "none"):
        return UNKNOWN
    value = int(float(s))
    if float(s) != value:
        raise ValueError(f"non-integer Fitzpatrick value {raw!r}")
    if value in FITZPATRICK_TYPES or value == UNKNOWN:
        return value
    raise ValueError(f"Fitzpatrick value out of range: {raw!r}")


def parse_source(raw: str) -> str:
    key = raw.strip().lower().replace(" ", "").replace("_", "").replace("-", "")
    if "dermaamin" in key:
        return "DermaAmin"
    if "atlasdermatologico" in key:
        return "AtlasDermatologico"
    raise ValueError(f"unrecognised source {raw!r}")


def parse_qc(raw: str) -> str:
    s = normalize_label(raw).lstrip("0123456789. ")
    if not s or s in ("nan", "none"):
        return "unreviewed"
    if "potential" in s:
        return "potentially-diagnostic"
    if "wrong" in s:
        return "wrongly-labeled"
    for label in ("diagnostic", "characteristic", "other", "unreviewed"):
        if s.startswith(label):
            return label
    raise ValueError(f"unrecognised qc value {raw!r}")


def parse_three_partition(raw: str) -> str:
    s = normalize_label(raw).replace(" ", "-")
    if s == "nonneoplastic":
        s = "non-neoplastic"
    if s not in THREE_PARTITIONS:
        raise ValueError(f"unrecognised three-partition label {raw!r}")
    return s


def read_manifest(
    path, columns: ColumnMap | None = None
) -> tuple[list[ManifestRecord], list[tuple[int, str]]]:
    """Parse a manifest CSV leniently: valid records plus ``(row_index, error)`` pairs.

    Row indices are 1-based data rows (the header is row 0).
    """
    columns = columns or ColumnMap()
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        rows = list(reader)
    if not header:
        raise EmptyManifest(f"{path}: no header")

    resolved = {}
    for name in ("image_id", "fitzpatrick", "condition", "nine_partition", "three_partition"):
        col = _pick(header, getattr(columns, name))
        if col is None:
            raise MissingColumn(f"{path}: none of {getattr(columns, name)} present in header")
        resolved[name] = col
    qc_col = _pick(header, columns.qc)
    source_col = _pick(header, columns.source)
    url_col = _pick(header, columns.url)
    used = set(resolved.values()) | {c for c in (qc_col, source_col) if c}

    if not rows:
        raise EmptyManifest(f"{path}: manifest has no data rows")

    records: list[ManifestRecord] = []
    errors: list[tuple[int, str]] = []
    seen: set[str] = set()
    condition_nine: dict[str, str] = {}
    for i, row in enumerate(rows, start=1):
        try:
            if None in row:
                raise ValueError("more fields than header columns")
            image_id = (row[resolved["image_id"]] or "").strip()
            if not image_id:
                raise ValueError("empty image id")
            if image_id in seen:
                raise ValueError(f"duplicate image id {image_id!r}")
            condition = normalize_label(row[resolved["condition"]] or "")
            if not condition:
                raise ValueError("empty condition label")
            nine = normalize_label(row[resolved["nine_partition"]] or "")
            three = parse_three_partition(row[resolved["three_partition"]] or "")
            if nine in NINE_TO_THREE and NINE_TO_THREE[nine] != three:
                raise ValueError(f"nine-partition {nine!r} is not {three!r}")
            if not nine:
                raise ValueError("empty nine-partition label")
            prev = condition_nine.setdefault(condition, nine)
            if prev != nine:
                raise ValueError(f"condition {condition!r} filed under both {prev!r} and {nine!r}")
            fitz = parse_fitzpatrick(row[resolved["fitzpatrick"]] or "")
            if source_col and (row.get(source_col) or "").strip():
                source = parse_source(row[source_col])
            elif url_col and (row.get(url_col) or "").strip():
                source = parse_source(row[url_col])
            else:
                source = None
            qc = parse_qc(row.get(qc_col) or "") if qc_col else None
        except (ValueError, TypeError) as exc:
            errors.append((i, str(exc)))
            continue
        seen.add(image_id)
        extra = {k: v for k, v in row.items() if k not in used}
        records.append(
            ManifestRecord(image_id, source, condition, nine, three, fitz, qc, extra)
        )
    return records, errors


def load_manifest(path, columns: ColumnMap | None = None) -> list[ManifestRecord]:
    """Strict manifest load: any invalid row raises ``UnparseableRow`` listing all of them."""
    records, errors = read_manifest(path, columns)
    if errors:
        raise UnparseableRow(errors)
    return records


def write_manifest(records: Sequence[ManifestRecord], path) -> None:
    """Write records back in the public-release column layout plus passthrough columns."""
    extra_cols: list[str] = []
    for r in records:
        for k in r.extra:
            if k not in extra_cols:
                extra_cols.append(k)
    header = [
        "md5hash", "fitzpatrick", "label", "nine_partition_label",
        "three_partition_label", "source", "qc",
    ] + [c for c in extra_cols if c not in ("md5hash", "source", "qc")]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in records:
            w.writerow(
                [r.image_id, r.fitzpatrick, r.condition, r.nine_partition,
                 r.three_partition, r.source or "", r.qc or ""]
                + [r.extra.get(c, "") for c in header[7:]]
            )


# --- composition reports -----------------------------------------------------


def type_label(t: int) -> str:
    return "Unknown" if t == UNKNOWN else f"Type {t}"


@dataclass
class DistributionTable:
    """Counts per (three-partition column, Fitzpatrick row), normalised per column."""

    counts: dict[str, dict[int, int]]
    columns: tuple[str, ...] = THREE_PARTITIONS
    rows: tuple[int, ...] = FITZPATRICK_TYPES + (UNKNOWN,)

    def column_total(self, col: str) -> int:
        return sum(self.counts[col].values())

    @property
    def totals(self) -> dict[str, int]:
        return {c: self.column_total(c) for c in self.columns}

    def percent(self, col: str, row: int) -> float:
        total = self.column_total(col)
        return 100.0 * self.counts[col][row] / total if total else 0.0

    def row_total(self, row: int) -> int:
        return sum(self.counts[c][row] for c in self.columns)

    def as_rows(self, decimals: int = 1) -> list[list[str]]:
        """Table layout: header, '# Images' totals, then one percentage row per type."""
        out = [[""] + [c.title() if c != "non-neoplastic" else "Non-Neoplastic" for c in self.columns]]
        out.append(["# Images"] + [f"{self.column_total(c):,}" for c in self.columns])
        for t in self.rows:
            out.append([type_label(t)] + [f"{self.percent(c, t):.{decimals}f}%" for c in self.columns])
        return out

    def to_json(self) -> dict:
        return {
            "columns": list(self.columns),
            "totals": self.totals,
            "counts": {c: {type_label(t): self.counts[c][t] for t in self.rows} for c in self.columns},
            "percent": {c: {type_label(t): self.percent(c, t) for t in self.rows} for c in self.columns},
            "records": sum(self.totals.values()),
        }


def distribution_stats(records: Sequence[ManifestRecord]) -> DistributionTable:
    if not records:
        raise EmptyManifest("no records")
    counts = {c: {t: 0 for t in FITZPATRICK_TYPES + (UNKNOWN,)} for c in THREE_PARTITIONS}
    for r in records:
        counts[r.three_partition][r.fitzpatrick] += 1
    return DistributionTable(counts)


@dataclass(frozen=True)
class ConditionCoverage:
    condition: str
    counts: dict[int, int]  # types 1-6
    unknown: int
    mean_fitzpatrick: float | None

    @property
    def types_present(self) -> tuple[int, ...]:
        return tuple(t for t in FITZPATRICK_TYPES if self.counts[t] > 0)


def condition_skin_coverage(records: Sequence[ManifestRecord]) -> list[ConditionCoverage]:
    """Per-condition Fitzpatrick histogram and mean type (Unknown excluded from the mean)."""
    if not records:
        raise EmptyManifest("no records")
    hist: dict[str, Counter] = defaultdict(Counter)
    for r in records:
        hist[r.condition][r.fitzpatrick] += 1
    out = []
    for cond in sorted(hist):
        h = hist[cond]
        counts = {t: h.get(t, 0) for t in FITZPATRICK_TYPES}
        n = sum(counts.values())
        mean = sum(t * c for t, c in counts.items()) / n if n else None
        out.append(ConditionCoverage(cond, counts, h.get(UNKNOWN, 0), mean))
    return out


# --- splits ------------------------------------------------------------------

Strategy = Literal["verified", "random-stratified", "by-source", "by-fitzpatrick"]
STRATEGIES = ("verified", "random-stratified", "by-source", "by-fitzpatrick")
STRATEGY_ALIASES = {
    "random": "random-stratified",
    "stratified": "random-stratified",
    "source": "by-source",
    "fitz": "by-fitzpatrick",
    "fitzpatrick": "by-fitzpatrick",
}


@dataclass(frozen=True)
class SplitSpec:
    strategy: str
    test_source: str | None = None
    train_types: tuple[int, ...] | None = None
    fraction: float = 0.2
    seed: int | None = None

    def __post_init__(self):
        strategy = STRATEGY_ALIASES.get(self.strategy, self.strategy)
        object.__setattr__(self, "strategy", strategy)
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown split strategy {self.strategy!r}")
        if strategy == "random-stratified":
            if self.seed is None:
                raise ValueError("random-stratified split requires a seed")
            if not 0.0 < self.fraction < 1.0:
                raise ValueError(f"fraction must be in (0, 1), got {self.fraction}")
        if strategy == "by-source":
            if self.test_source is None:
                raise ValueError("by-source split requires test_source")
            object.__setattr__(self, "test_source", parse_source(self.test_source))
        if strategy == "by-fitzpatrick":
            if not self.train_types:
                raise ValueError("by-fitzpatrick split requires train_types")
            types = tuple(sorted(set(int(t) for t in self.train_types)))
            if any(t not in FITZPATRICK_TYPES for t in types):
                raise ValueError(f"train_types must be within 1-6, got {types}")
            object.__setattr__(self, "train_types", types)

    def params(self) -> dict:
        d = asdict(self)
        d.pop("strategy")
        if d["train_types"] is not None:
            d["train_types"] = list(d["train_types"])
        return d


@dataclass
class Split:
    spec: SplitSpec
    train: list[ManifestRecord]
    test: list[ManifestRecord]
    excluded: int = 0

    def counts(self) -> dict[str, int]:
        return {"train": len(self.train), "test": len(self.test), "excluded": self.excluded}


def stratified_rank_key(seed: int, image_id: str) -> bytes:
    """Deterministic pseudo-random sort key: SHA-256 of ``"<seed>:<image_id>"``.

    Stable across Python/numpy releases and independent of record order.
    """
    return hashlib.sha256(f"{seed}:{image_id}".encode("utf-8")).digest()


def split(records: Sequence[ManifestRecord], spec: SplitSpec) -> Split:
    """Partition ``records`` into train/test according to ``spec``."""
    s = spec.strategy
    excluded = 0
    if s == "verified":
        if all(r.qc is None for r in records):
            raise MissingQC("verified holdout needs a qc column in the manifest")
        test = [r for r in records if r.qc == "diagnostic"]
        train = [r for r in records if r.qc != "diagnostic"]
    elif s == "random-stratified":
        by_cond: dict[str, list[ManifestRecord]] = defaultdict(list)
        for r in records:
            by_cond[r.condition].append(r)
        chosen: set[str] = set()
        for cond, group in by_cond.items():
            k = math.ceil(spec.fraction * len(group) - 1e-12)
            ranked = sorted(group, key=lambda r: stratified_rank_key(spec.seed, r.image_id))
            chosen.update(r.image_id for r in ranked[:k])
        test = [r for r in records if r.image_id in chosen]
        train = [r for r in records if r.image_id not in chosen]
    elif s == "by-source":
        if any(r.source is None for r in records):
            raise SplitError("by-source split needs a source for every record")
        test = [r for r in records if r.source == spec.test_source]
        train = [r for r in records if r.source != spec.test_source]
    else:
        pair = set(spec.train_types)
        train = [r for r in records if r.fitzpatrick in pair]
        test = [r for r in records if r.known_type and r.fitzpatrick not in pair]
        excluded = len(records) - len(train) - len(test)
    if not train:
        raise EmptySide(f"{s} split leaves the train side empty")
    if not test:
        raise EmptySide(f"{s} split leaves the test side empty")
    return Split(spec, train, test, excluded)


def write_split(result: Split, path) -> Path:
    """Write ``image_id,split`` CSV plus a ``.json`` sidecar; returns the sidecar path."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["image_id", "split"])
        for r in result.train:
            w.writerow([r.image_id, "train"])
        for r in result.test:
            w.writerow([r.image_id, "test"])
    sidecar = path.with_suffix(".json")
    sidecar.write_text(
        json.dumps(
            {
                "strategy": result.spec.strategy,
                "params": result.spec.params(),
                "seed": result.spec.seed,
                "counts": result.counts(),
            },
            indent=2,
        )
    )
    return sidecar


def read_split(path) -> dict[str, str]:
    """Read a split CSV into ``{image_id: "train" | "test"}``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"image_id", "split"} <= set(reader.fieldnames):
            raise MissingColumn(f"{path}: split file needs image_id and split columns")
        out = {}
        for row in reader:
            side = row["split"].strip()
            if side not in ("train", "test"):
                raise ValueError(f"{path}: bad split value {side!r}")
            out[row["image_id"]] = side
    return out


# --- sampling weights ----------------------------------------------------------


def sampling_weights(train: Sequence[ManifestRecord], level: int = 114) -> list[float]:
    """Inverse class frequency per record, aligned with ``train``; each class sums to 1."""
    if not train:
        raise ValueError("sampling_weights needs a non-empty training set")
    freq = Counter(r.label(level) for r in train)
    return [1.0 / freq[r.label(level)] for r in train]
