#!/usr/bin/env python3
"""Generate the dataset fixture CSVs used by the tests.

- table1_full.csv:  12,400-image manifest with the published per-class image
  counts (597 / 1,638 / 714 / 143 trans-ventricular, trans-thalamic,
  trans-cerebellar, brain-other; 9,308 not-a-brain).
- table1_train.csv: training-split subset with 231 / 873 / 375 / 77 / 5,509
  images per class.
- table2_videos.csv: 130 video entries whose duration moments
  (min 4, max 50, mean 16.42, population std 7.85) and fps moments
  (min 22, max 55, mean 29.67, population std ~3.63) match the published
  statistics to two decimals.

Deterministic: rerunning reproduces identical files.
"""

import csv
import math
import random
import sys
from pathlib import Path

CLASS_ROWS = [
    # (label, full_count, train_count)
    ("trans_ventricular", 597, 231),
    ("trans_thalamic", 1638, 873),
    ("trans_cerebellar", 714, 375),
    ("brain_other", 143, 77),
    ("not_a_brain", 9308, 5509),
]
N_PATIENTS = 1792


def write_manifests(out_dir: Path) -> None:
    full_rows = []
    train_rows = []
    for label, full_count, train_count in CLASS_ROWS:
        for j in range(full_count):
            patient = f"P{(j * 7 + hash_offset(label)) % N_PATIENTS:04d}"
            path = f"images/{label}/{j:05d}.png"
            row = (patient, path, label)
            full_rows.append(row)
            if j < train_count:
                train_rows.append(row)
    for name, rows in [("table1_full.csv", full_rows), ("table1_train.csv", train_rows)]:
        with open(out_dir / name, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["patient_id", "image_path", "label"])
            w.writerows(rows)
        print(f"wrote {out_dir / name} ({len(rows)} rows)")


def hash_offset(label: str) -> int:
    return sum(label.encode()) % N_PATIENTS


def shaped_values(rng, n, lo, hi, mean, std):
    """n values in (lo, hi) with the requested mean and population std,
    rounded to 2 decimals. Rescale toward the target moments and clip to
    the open interval until both converge."""
    for _ in range(100):
        vals = [rng.gauss(mean, std) for _ in range(n)]
        for _ in range(500):
            m = sum(vals) / n
            s = math.sqrt(sum((v - m) ** 2 for v in vals) / n)
            a = std / s
            vals = [min(hi - 0.01, max(lo + 0.01, mean + a * (v - m))) for v in vals]
        vals = [round(v, 2) for v in vals]
        m2 = sum(vals) / n
        s2 = math.sqrt(sum((v - m2) ** 2 for v in vals) / n)
        if all(lo < v < hi for v in vals) and abs(m2 - mean) < 0.004 and abs(s2 - std) < 0.004:
            return vals
    raise RuntimeError("could not shape the sample")


def write_videos(out_dir: Path) -> None:
    rng = random.Random(20230913)
    n = 130
    # Pin the extremes, shape the rest so the overall moments land on the
    # published values.
    d_sum = n * 16.42
    d_sumsq = n * (7.85**2 + 16.42**2)
    rest = n - 2
    d_mean = (d_sum - 4 - 50) / rest
    d_var = (d_sumsq - 16 - 2500) / rest - d_mean**2
    durations = [4.0, 50.0] + shaped_values(rng, rest, 4.0, 50.0, d_mean, math.sqrt(d_var))

    f_sum = n * 29.67
    f_sumsq = n * (3.63**2 + 29.67**2)
    f_mean = (f_sum - 22 - 55) / rest
    f_var = (f_sumsq - 484 - 3025) / rest - f_mean**2
    fps = [22.0, 55.0] + shaped_values(rng, rest, 22.0, 55.0, f_mean, math.sqrt(f_var))
    rng.shuffle(fps)

    check(durations, 16.42, 7.85, 4, 50, "duration")
    check(fps, 29.67, 3.63, 22, 55, "fps")

    with open(out_dir / "table2_videos.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["video_id", "duration_s", "fps", "frame_count"])
        for i, (d, r) in enumerate(zip(durations, fps)):
            w.writerow([f"vid{i:03d}", f"{d:.2f}", f"{r:.2f}", round(d * r)])
    print(f"wrote {out_dir / 'table2_videos.csv'} (130 rows)")


def check(vals, mean, std, lo, hi, what):
    n = len(vals)
    m = sum(vals) / n
    s = math.sqrt(sum((v - m) ** 2 for v in vals) / n)
    assert min(vals) == lo and max(vals) == hi, what
    assert abs(m - mean) < 0.005, (what, m)
    assert abs(s - std) < 0.005, (what, s)
    print(f"{what}: mean {m:.4f} std {s:.4f} min {min(vals)} max {max(vals)}")


def main() -> None:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("crates/core/tests/fixtures")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_manifests(out_dir)
    write_videos(out_dir)


if __name__ == "__main__":
    main()
