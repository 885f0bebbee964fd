"""Generate the 50-image cached fixture used by the acceptance suite.

Writes PNG images, a manifest in the public column layout and
``expected.json`` holding per-image ITA values and the four concordance
tables, all computed with the scalar oracles in ``tests/oracles.py``.

    python scripts/make_fixture.py [--out tests/data/fixture50]
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))
import oracles  # noqa: E402

N_IMAGES = 50
W, H = 40, 30
LIGHT = np.array([248, 214, 190])
DARK = np.array([92, 58, 42])
CONDITIONS = [
    ("psoriasis", "inflammatory", "non-neoplastic"),
    ("lichen planus", "inflammatory", "non-neoplastic"),
    ("seborrheic keratosis", "benign epidermal", "benign"),
    ("basal cell carcinoma", "malignant epidermal", "malignant"),
    ("melanoma", "malignant melanoma", "malignant"),
]


def make_image(rng, tone, skin_share):
    if skin_share:
        bg = rng.integers(0, 256, size=3)
    else:
        bg = rng.integers([0, 90, 130], [50, 150, 255])  # blue-green: never passes R > G
    px = np.clip(bg + rng.normal(0, 20, size=(H, W, 3)), 0, 255)
    rows = int(round(H * skin_share))
    if rows:
        skin = tone + rng.normal(0, 8, size=(rows, W, 3))
        px[:rows] = np.clip(skin, 0, 255)
        # a reddish lesion inside the skin area
        cy, cx, rad = rows // 2, int(rng.integers(8, W - 8)), 4
        yy, xx = np.ogrid[:H, :W]
        blob = ((yy - cy) ** 2 + (xx - cx) ** 2 <= rad * rad) & (yy < rows)
        px[blob] = np.clip(np.array([170, 60, 70]) + rng.normal(0, 6, size=(blob.sum(), 3)), 0, 255)
    alpha = np.full((H, W, 1), 255.0)
    return np.concatenate([px, alpha], axis=2).round().astype(np.uint8)


def concordance_table(ita_by_id, labels, scheme, tol=1):
    groups = {"Overall": [0, 0], **{f"Type {t}": [0, 0] for t in range(1, 7)}}
    for image_id, label in labels.items():
        if label == -1:
            continue
        hit = abs(oracles.fitz(ita_by_id[image_id], scheme) - label) <= tol
        for g in ("Overall", f"Type {label}"):
            groups[g][0] += hit
            groups[g][1] += 1
    return {g: {"correct": c, "support": n} for g, (c, n) in groups.items()}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=ROOT / "tests" / "data" / "fixture50")
    ap.add_argument("--seed", type=int, default=17)
    args = ap.parse_args()
    out = args.out
    (out / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    manifest, labels, expected = [], {}, {}
    for i in range(N_IMAGES):
        image_id = f"fx{i:03d}"
        frac = i / (N_IMAGES - 1)
        tone = LIGHT + frac * (DARK - LIGHT)
        skin_share = 0.0 if i % 13 == 5 else float(rng.uniform(0.4, 0.85))
        px = make_image(rng, tone, skin_share)
        Image.fromarray(px, "RGBA").save(out / "images" / f"{image_id}.png")

        base_type = 1 + min(5, int(frac * 6))
        label = -1 if i % 12 == 7 else int(np.clip(base_type + rng.integers(-2, 3), 1, 6))
        cond, nine, three = CONDITIONS[i % len(CONDITIONS)]
        manifest.append([image_id, label, cond, nine, three, "", f"http://www.dermaamin.com/{image_id}.jpg"])
        labels[image_id] = label

        decoded = np.asarray(Image.open(out / "images" / f"{image_id}.png").convert("RGBA"))
        flat = [tuple(map(int, p)) for p in decoded.reshape(-1, 4)]
        full, _ = oracles.ita(flat, masked=False)
        masked, fallback = oracles.ita(flat, masked=True)
        expected[image_id] = {"full": full, "masked": masked, "masked_fallback": fallback}

    with open(out / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["md5hash", "fitzpatrick", "label", "nine_partition_label",
                    "three_partition_label", "qc", "url"])
        w.writerows(manifest)

    tables = {}
    for mode in ("full", "masked"):
        ita = {k: v[mode] for k, v in expected.items()}
        for scheme in ("kinyanjui", "empirical"):
            tables[f"{mode}/{scheme}"] = concordance_table(ita, labels, scheme)
    (out / "expected.json").write_text(json.dumps({"ita": expected, "concordance": tables}, indent=1))
    for k, t in tables.items():
        print(f"{k:20s} overall {t['Overall']['correct']}/{t['Overall']['support']}")


if __name__ == "__main__":
    main()
