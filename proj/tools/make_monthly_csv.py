"""Writes data/monthly_indices.csv: a synthetic two-index monthly record.

The first index is a damped seasonal oscillator; the second follows it with a
three-month delay during boreal winters and is otherwise self-driven.
"""
import csv
import math
import random
import sys

def main(path="data/monthly_indices.csv", months=480, seed=11):
    rng = random.Random(seed)
    a, b = [0.0, 0.0], [0.0, 0.0, 0.0]
    rows = []
    for m in range(months):
        year, month = 1980 + m // 12, m % 12 + 1
        season = math.sin(2 * math.pi * m / 12.0)
        x = 1.6 * a[-1] - 0.75 * a[-2] + 0.3 * season + rng.gauss(0, 0.3)
        winter = month in (12, 1, 2)
        drive = 0.8 * a[-3] if winter and len(a) >= 3 else 0.0
        y = 0.5 * b[-1] + drive + rng.gauss(0, 0.3)
        a.append(x)
        b.append(y)
        rows.append((f"{year:04d}-{month:02d}", round(x, 6), round(y, 6)))
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["date", "index_a", "index_b"])
        w.writerows(rows)

if __name__ == "__main__":
    main(*sys.argv[1:2])
