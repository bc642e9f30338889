"""Writes the synthetic input tables used by the CLI tests and the desk run.

The numbers are shaped like national statistics but are not real data:
Gompertz-style mortality with steady improvement, a base-year roster with
immigrant cohorts, migration flows whose EU inflow jumps after 2004, and a
bell-shaped fertility schedule.

    python3 fixtures/generate.py [OUT_DIR]
"""

import csv
import math
import random
import sys
from pathlib import Path

FIRST_YEAR, LAST_YEAR = 1951, 2016
MAX_AGE = 100
BASE_YEAR = 1991
FLOW_YEARS = range(1991, 2017)
BANDS = [(0, 14, 0.15), (15, 29, 0.50), (30, 44, 0.25), (45, 64, 0.08), (65, MAX_AGE, 0.02)]


def qx(sex, year, age, rng):
    tau = year - FIRST_YEAR
    if age == 0:
        log_q = -3.6 - 0.035 * tau + (0.2 if sex == "M" else 0.0)
        q = math.exp(log_q)
    else:
        improvement = 0.012 + 0.010 * math.exp(-(((age - 70) / 20.0) ** 2))
        senescent = -10.2 + 0.093 * age - improvement * tau
        if sex == "M":
            senescent += 0.45 * math.exp(-(((age - 50) / 25.0) ** 2))
        q = 0.0003 * math.exp(-0.03 * tau) + math.exp(senescent)
    q *= math.exp(rng.gauss(0.0, 0.02))
    return min(q, 0.9)


def write_mortality(out, rng):
    with open(out / "mortality.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["year", "age", "sex", "qx"])
        for sex in ("M", "F"):
            for year in range(FIRST_YEAR, LAST_YEAR + 1):
                for age in range(MAX_AGE + 1):
                    w.writerow([year, age, sex, f"{qx(sex, year, age, rng):.10g}"])


def write_population(out):
    rows = []
    for sex in ("M", "F"):
        for age in range(MAX_AGE + 1):
            tail = 88.0 if sex == "F" else 83.0
            count = 330000.0 * math.exp(-((age / tail) ** 7))
            rows.append([age, sex, "domestic", "", round(count)])
        for origin, total in (("eu_immigrant", 450000.0), ("other", 1100000.0)):
            per_cell = total / (51 * 4)
            for age in range(20, 71):
                for back in (1, 5, 10, 20):
                    rows.append([age, sex, origin, BASE_YEAR - back, round(per_cell)])
        for age in range(20, 81):
            rows.append([age, sex, "uk_emigrant_abroad", "", round(600000.0 / 61)])
    with open(out / "population.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["age", "sex", "origin", "arrival_year", "count"])
        w.writerows(rows)


def corridor_totals(year):
    s = year - 1991
    if year <= 2003:
        eu_in = 50000 + 800 * s
        eu_out = 30000 + 800 * s
    else:
        eu_in = 170000 + 6500 * (year - 2004)
        eu_out = 60000 + 3500 * (year - 2004)
    return {
        ("eu", "in"): eu_in,
        ("eu", "out"): eu_out,
        ("other", "in"): 150000 + 4000 * s,
        ("other", "out"): 80000 + 1500 * s,
        ("uk_citizens", "in"): 80000,
        ("uk_citizens", "out"): 140000,
    }


def write_flows(out):
    with open(out / "flows.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["year", "corridor", "sex", "age_lo", "age_hi", "direction", "count"])
        for year in FLOW_YEARS:
            for (corridor, direction), total in corridor_totals(year).items():
                for sex in ("M", "F"):
                    for lo, hi, share in BANDS:
                        w.writerow([year, corridor, sex, lo, hi, direction, round(total * share / 2)])


def write_fertility(out):
    with open(out / "fertility.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["age", "rate"])
        for age in range(15, 50):
            density = math.exp(-0.5 * ((age - 30) / 5.5) ** 2) / (5.5 * math.sqrt(2 * math.pi))
            w.writerow([age, f"{1.85 * density:.8f}"])


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(1951)
    write_mortality(out, rng)
    write_population(out)
    write_flows(out)
    write_fertility(out)


if __name__ == "__main__":
    main()
