"""Regenerate fixtures/synthetic/: a small structured trade world.

Products sit on a circle of capabilities; each country exports the products
near its own position and, by 2017, has widened its reach to neighbouring
products plus a few random jumps. Values are whole dollars.

    python fixtures/make_synthetic.py
"""

import csv
import itertools
import string
from pathlib import Path

import numpy as np

SEED = 7
N_COUNTRIES = 40
N_PRODUCTS = 60
N_GREEN = 30
INDICATORS = ("env_tech_per_capita", "env_patents", "env_tech_share")


def circ_dist(a, b):
    d = np.abs(a - b) % 1.0
    return np.minimum(d, 1.0 - d)


def main(out=Path(__file__).parent / "synthetic"):
    rng = np.random.default_rng(SEED)
    out.mkdir(exist_ok=True)
    codes = ["".join(t) for t in itertools.product(string.ascii_uppercase, repeat=3)]
    countries = codes[:: len(codes) // N_COUNTRIES][:N_COUNTRIES]
    products = [f"{840000 + 7 * k:06d}" for k in range(N_PRODUCTS)]
    pos = np.sort(rng.random(N_PRODUCTS))
    centre = rng.random(N_COUNTRIES)
    width = rng.uniform(0.04, 0.12, N_COUNTRIES)
    growth = rng.uniform(1.2, 2.0, N_COUNTRIES)
    size = rng.lognormal(16, 1.0, N_COUNTRIES)

    rows = []
    for year, widen in ((2007, np.ones(N_COUNTRIES)), (2017, growth)):
        for c in range(N_COUNTRIES):
            w = width[c] * widen[c]
            affinity = np.exp(-0.5 * (circ_dist(pos, centre[c]) / w) ** 2)
            base = 0.01 + affinity
            if year == 2017:
                jumps = rng.choice(N_PRODUCTS, 2, replace=False)
                base[jumps] += rng.uniform(0.5, 1.0, 2)
            values = np.round(size[c] * base * rng.lognormal(0, 0.3, N_PRODUCTS)).astype(np.int64)
            for p in range(N_PRODUCTS):
                if values[p] > 0:
                    rows.append((year, countries[c], products[p], int(values[p])))

    with (out / "trade.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "reporter_iso", "hs6", "trade_value_usd"])
        w.writerows(rows)

    green = sorted(rng.choice(products, N_GREEN, replace=False))
    (out / "green.txt").write_text("\n".join(green) + "\n")

    with (out / "indicators.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["country_iso3", "indicator_name", "value"])
        for k, c in enumerate(countries):
            per_capita = rng.gamma(2.0, 1.5)
            patents = round(rng.lognormal(4, 1.2))
            share = rng.uniform(2, 15)
            vals = (round(per_capita, 4), patents, round(share, 3))
            for name, v in zip(INDICATORS, vals):
                # one gap to exercise listwise deletion
                w.writerow([c, name, "" if (k == 5 and name == "env_patents") else v])

    (out / "pipeline.ini").write_text(
        "[greenjump]\n"
        "trade = trade.csv\n"
        "green = green.txt\n"
        "indicators = indicators.csv\n"
        "t0 = 2007\n"
        "t1 = 2017\n"
        "new_low_threshold = 0.5\n"
        "seed = 12345\n"
        "draws = 1000\n"
        f"regressors = {','.join(INDICATORS)}\n"
        "countries = YAT\n"
    )


if __name__ == "__main__":
    main()
