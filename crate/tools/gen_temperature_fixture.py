#!/usr/bin/env python3
"""Write a synthetic monthly land-temperature file, 1756-01 to 2016-12.

Columns are date,avg_temp,ci95. Temperatures follow a seasonal cycle plus a
slow warming trend and Gaussian noise; the interval widths shrink over time
the way early thermometer records are noisier. Output is deterministic for a
given seed.
"""

import argparse
import math
import random

FIRST_YEAR = 1756
LAST_YEAR = 2016


def rows(seed):
    rng = random.Random(seed)
    for year in range(FIRST_YEAR, LAST_YEAR + 1):
        age = (year - FIRST_YEAR) / (LAST_YEAR - FIRST_YEAR)
        for month in range(1, 13):
            season = 6.5 * math.cos(2 * math.pi * (month - 7) / 12)
            trend = 1.2 * age * age
            ci95 = round(3.2 * (1 - age) + 0.1 + 0.2 * rng.random(), 3)
            temp = 8.3 + season + trend + rng.gauss(0, ci95 / 3.92)
            yield f"{year:04d}-{month:02d}-01,{temp:.3f},{ci95:.3f}"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=1756)
    parser.add_argument("--out", default="crates/core/tests/fixtures/land_temperatures.csv")
    args = parser.parse_args()
    with open(args.out, "w", newline="\n") as f:
        f.write("date,avg_temp,ci95\n")
        for line in rows(args.seed):
            f.write(line + "\n")


if __name__ == "__main__":
    main()
