"""Acceptance criteria. Each test records one status line printed at the end of the run.

Criteria 1-3 need the released annotation CSV (``FITZ17K_CSV`` or
``tests/data/fitzpatrick17k.csv``) and, for 3, the downloaded images
(``FITZ17K_IMAGES``). Without the images, criterion 3 runs its stated
fallback: the oracle suite plus the cached 50-image fixture.
"""

import json
import os
import random
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from fitzaudit import cli
from fitzaudit.batch import load_ita_csv
from fitzaudit.dataset import SplitSpec, load_manifest, split
from fitzaudit.evalharness import OVERALL, concordance, confusion_matrix, topk_accuracy
from fitzaudit.image import ImageBuffer
from fitzaudit.ita import compute_ita, ita_to_fitzpatrick
from fitzaudit.skinmask import skin_rule

FIXTURE = Path(__file__).parent / "data" / "fixture50"

# reference composition: type -> (non-neoplastic, benign, malignant) percent
COMPOSITION_TOTALS = {"non-neoplastic": 12080, "benign": 2234, "malignant": 2263}
COMPOSITION_PERCENT = {
    1: (17.0, 19.9, 20.2),
    2: (28.1, 30.0, 32.8),
    3: (19.7, 21.2, 20.2),
    4: (17.5, 16.4, 13.3),
    5: (10.1, 7.1, 6.5),
    6: (4.4, 2.0, 2.7),
    -1: (3.2, 3.3, 4.6),
}
# reference ITA concordance at tolerance 1 (percent): config -> Overall, Type 1..6
CONCORDANCE_REF = {
    "full/kinyanjui": (45.87, 50.97, 42.60, 35.43, 34.09, 78.21, 74.80),
    "full/empirical": (60.34, 65.35, 59.57, 55.20, 58.54, 65.49, 65.04),
    "masked/kinyanjui": (53.30, 52.22, 49.15, 45.13, 40.24, 93.41, 90.71),
    "masked/empirical": (70.38, 66.00, 69.47, 66.41, 72.10, 82.26, 79.69),
}


def _blocked(log, key, why):
    log[key] = ("BLOCKED", why)
    pytest.skip(why)


# --- 1 ------------------------------------------------------------------------------


def test_c1_composition(public_csv, acceptance_log, tmp_path):
    if public_csv is None:
        _blocked(acceptance_log, "1", "public annotation CSV not available (set FITZ17K_CSV)")
    start = time.perf_counter()
    code = cli.main(["stats", "--manifest", str(public_csv), "--out", str(tmp_path / "t1")])
    elapsed = time.perf_counter() - start
    assert code == 0
    data = json.loads((tmp_path / "t1.json").read_text())
    assert data["totals"] == COMPOSITION_TOTALS
    worst = 0.0
    for t, row in COMPOSITION_PERCENT.items():
        label = "Unknown" if t == -1 else f"Type {t}"
        for col, expected in zip(("non-neoplastic", "benign", "malignant"), row):
            worst = max(worst, abs(data["percent"][col][label] - expected))
    assert worst <= 0.1 + 1e-9
    assert elapsed < 5.0
    acceptance_log["1"] = ("PASS", f"totals exact, max cell error {worst:.3f}pp, {elapsed:.2f}s")


# --- 2 ------------------------------------------------------------------------------


def test_c2_split_sizes(public_csv, acceptance_log):
    if public_csv is None:
        _blocked(acceptance_log, "2", "public annotation CSV not available (set FITZ17K_CSV)")
    start = time.perf_counter()
    records = load_manifest(public_csv)
    fitz = {pair: split(records, SplitSpec("by-fitzpatrick", train_types=pair))
            for pair in ((1, 2), (3, 4), (5, 6))}
    assert [len(fitz[p].train) for p in ((1, 2), (3, 4), (5, 6))] == [7755, 6089, 2168]
    assert len(fitz[(1, 2)].test) == 8257
    atlas = split(records, SplitSpec("by-source", test_source="AtlasDermatologico"))
    assert (len(atlas.train), len(atlas.test)) == (12672, 3905)
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    acceptance_log["2"] = ("PASS", f"7755/6089/2168, test 8257, 12672/3905, {elapsed:.2f}s")


# --- 3 ------------------------------------------------------------------------------


def _run_ita(manifest, images, out, workers):
    return cli.main(["ita", "--manifest", str(manifest), "--image-dir", str(images),
                     "--mode", "both", "--scheme", "both", "--workers", str(workers), "--out", str(out)])


def test_c3_ita_concordance(public_csv, public_images, acceptance_log, tmp_path):
    if public_csv is not None and public_images is not None:
        _concordance_real(public_csv, public_images, acceptance_log, tmp_path)
    else:
        _concordance_fixture(acceptance_log, tmp_path)


def _concordance_real(csv_path, images, log, tmp_path):
    workers = max(4, int(os.environ.get("FITZAUDIT_WORKERS", "4")))
    start = time.perf_counter()
    assert _run_ita(csv_path, images, tmp_path / "ita.csv", workers) == 0
    elapsed = time.perf_counter() - start
    assert cli.main(["concordance", "--manifest", str(csv_path), "--estimates", str(tmp_path / "ita.csv"),
                     "--drop-missing", "--out", str(tmp_path / "t3")]) == 0
    reports = json.loads((tmp_path / "t3.json").read_text())
    worst_overall = worst_type = 0.0
    for config, reference in CONCORDANCE_REF.items():
        rows = {r["group"]: r["accuracy"]["1"] for r in reports[config]["rows"]}
        worst_overall = max(worst_overall, abs(100 * rows[OVERALL] - reference[0]))
        for t in range(1, 7):
            worst_type = max(worst_type, abs(100 * rows[f"Type {t}"] - reference[t]))
    assert worst_overall <= 3.0
    assert worst_type <= 5.0
    assert elapsed < 15 * 60
    log["3"] = ("PASS", f"overall within {worst_overall:.2f}pp, types within {worst_type:.2f}pp, {elapsed:.0f}s")


def _concordance_fixture(log, tmp_path):
    expected = json.loads((FIXTURE / "expected.json").read_text())
    manifest = FIXTURE / "manifest.csv"
    assert _run_ita(manifest, FIXTURE / "images", tmp_path / "ita4.csv", 4) == 0
    assert _run_ita(manifest, FIXTURE / "images", tmp_path / "ita1.csv", 1) == 0
    assert (tmp_path / "ita4.csv").read_bytes() == (tmp_path / "ita1.csv").read_bytes()

    rows = load_ita_csv(tmp_path / "ita4.csv")
    assert len(rows) == 2 * len(expected["ita"])
    for r in rows:
        ref = expected["ita"][r.image_id]
        assert r.ita_degrees == pytest.approx(ref[r.mode], abs=1e-9)
        if r.mode == "masked":
            assert r.fallback == ref["masked_fallback"]

    assert cli.main(["concordance", "--manifest", str(manifest), "--estimates", str(tmp_path / "ita4.csv"),
                     "--out", str(tmp_path / "t3")]) == 0
    reports = json.loads((tmp_path / "t3.json").read_text())
    assert set(reports) == set(CONCORDANCE_REF)
    for config, groups in expected["concordance"].items():
        got = {r["group"]: r for r in reports[config]["rows"]}
        for g, want in groups.items():
            assert got[g]["correct"]["1"] == want["correct"]
            assert got[g]["support"] == want["support"]
    log["3"] = ("PASS", "replacement route (dataset images unavailable): 50-image fixture matches frozen "
                        "oracle ITA (1e-9) and concordance counts, workers 1 vs 4 byte-identical")


# --- 4 ------------------------------------------------------------------------------


def test_c4a_skin_rule_oracle(acceptance_log):
    px = np.random.default_rng(2021).integers(0, 256, size=(100_000, 4), dtype=np.uint8)
    got = skin_rule(px)
    expected = np.array([oracles.is_skin(*map(int, p)) for p in px])
    mismatches = int((got != expected).sum())
    assert got.sum() > 0
    assert mismatches == 0
    acceptance_log["4a"] = ("PASS", f"10^5 random RGBA pixels, {mismatches} mismatches ({int(got.sum())} skin)")


def test_c4b_compute_ita_oracle(acceptance_log):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(200):
        px = rng.integers(0, 256, size=(16, 16, 4), dtype=np.uint8)
        skin_rows = rng.random(16) < 0.5
        px[skin_rows, :, :3] = rng.integers([130, 70, 50], [256, 190, 150], size=(skin_rows.sum(), 16, 3))
        flat = [tuple(map(int, p)) for p in px.reshape(-1, 4)]
        for mode in ("full", "masked"):
            res = compute_ita(ImageBuffer(px), mode)
            ref, fallback = oracles.ita(flat, masked=mode == "masked")
            worst = max(worst, abs(res.ita_degrees - ref))
            assert res.fallback == fallback
    assert worst <= 1e-9
    acceptance_log["4b"] = ("PASS", f"200 images x 2 modes, max |diff| {worst:.2e} deg")


def test_c4c_counting_oracle(acceptance_log):
    rng = random.Random(500)
    from test_evalharness import make_records, random_predictions

    records = make_records(500, rng)
    preds = random_predictions(records, rng)
    by_id = {p.image_id: p.ranked_labels for p in preds}
    rep = topk_accuracy(preds, records, (1, 2, 3))
    for k in (1, 2, 3):
        want = oracles.topk([r.condition for r in records], [list(by_id[r.image_id]) for r in records], k)
        assert rep.row(OVERALL).correct[k] == want
    preds3 = random_predictions(records, rng, level=3)
    cm = confusion_matrix(preds3, records, 3)
    top1 = {p.image_id: p.ranked_labels[0] for p in preds3}
    assert cm.counts.tolist() == oracles.confusion(
        [r.three_partition for r in records], [top1[r.image_id] for r in records], cm.labels)
    acceptance_log["4c"] = ("PASS", "top-1/2/3 and 3x3 confusion on 500 synthetic images equal brute force")


def test_c4d_off_by_one_concordance(acceptance_log):
    rng = random.Random(4)
    from test_evalharness import make_records

    records = make_records(300, rng)
    est = {r.image_id: r.fitzpatrick + (1 if r.fitzpatrick < 6 else -1) for r in records if r.known_type}
    value = concordance(est, records, 1).accuracy(OVERALL, 1)
    assert value == 1.0
    acceptance_log["4d"] = ("PASS", "everywhere-off-by-one estimates give exactly 1.0 at tolerance 1")


# --- 5 ------------------------------------------------------------------------------


def test_c5_mapping_sweep(acceptance_log):
    sweep = [i / 100 for i in range(-9000, 9001)]
    for scheme in ("kinyanjui", "empirical"):
        types = [ita_to_fitzpatrick(v, scheme) for v in sweep]
        assert all(t in range(1, 7) for t in types)
        assert all(a >= b for a, b in zip(types, types[1:]))
        assert set(types) == set(range(1, 7))
    boundaries = {
        "kinyanjui": {55: 2, 41: 3, 28: 4, 19: 5, 10: 6},
        "empirical": {40: 2, 23: 3, 12: 4, 0: 5, -25: 6},
    }
    for scheme, table in boundaries.items():
        for ita, t in table.items():
            assert ita_to_fitzpatrick(float(ita), scheme) == t
            assert ita_to_fitzpatrick(ita + 0.01, scheme) == t - 1
    acceptance_log["5"] = ("PASS", "18001-point sweep total/monotone/complete; all 10 boundaries exact")


# --- 6 ------------------------------------------------------------------------------


def test_c6_out_of_scope(acceptance_log):
    acceptance_log["6"] = ("N/A", "trained-model accuracies are out of scope; report formats covered by 4c")
