"""Predicted versus measured density of A A^T.

Prints the model value for the published problem sizes and, for generated
analogues small enough to form A A^T, the measured density next to it.

    python3 scripts/density_table.py [--measure-limit 3000000]
"""
import argparse
import csv
import sys
from dataclasses import dataclass, field

from fabgmres import ProblemSpec, gram, random_ill_conditioned, sprandn
from fabgmres.workmodel import crossover_sparse, predicted_gram_density

SIZES = [
    ("RANDL", 5000, 500, 0.2),
    ("Maragal_3", 1682, 858, 1.27e-2),
    ("Maragal_4", 1964, 1027, 1.32e-2),
    ("Maragal_5", 4654, 3296, 6.10e-3),
    ("RANDLT", 500, 5000, 0.2),
    ("Maragal_3T", 858, 1682, 1.27e-2),
    ("Maragal_4T", 1027, 1964, 1.32e-2),
    ("Maragal_5T", 3296, 4654, 6.10e-3),
]


@dataclass
class DensityConfig:
    sizes: list = field(default_factory=lambda: list(SIZES))
    measure_limit: int = 3_000_000  # skip measurements for larger m * n
    seed: int = 0
    out: str = "density_table.csv"


def run(cfg: DensityConfig) -> list[dict]:
    rows = []
    for name, m, n, d in cfg.sizes:
        p_est = predicted_gram_density(m, n, d)
        row = {"name": name, "m": m, "n": n, "d": d, "p_estimated": round(p_est, 4)}
        if m * n <= cfg.measure_limit:
            # uniform pattern: the model's own assumption
            row["p_uniform"] = round(gram(sprandn(m, n, d, seed=cfg.seed)).density, 4)
            if d >= 0.05:
                A = random_ill_conditioned(ProblemSpec(m, n, d, 1e3, seed=cfg.seed))
                row["p_generator"] = round(gram(A).density, 4)
        q = d * n
        row["crossover_estimated"] = round(crossover_sparse(m, q, p_est), 2) if q > p_est else float("inf")
        rows.append(row)
        print(row, flush=True)
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--measure-limit", type=int, default=DensityConfig.measure_limit)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="density_table.csv")
    args = p.parse_args(argv)
    cfg = DensityConfig(measure_limit=args.measure_limit, seed=args.seed, out=args.out)
    rows = run(cfg)
    fields = list(dict.fromkeys(k for r in rows for k in r))
    with open(cfg.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


if __name__ == "__main__":
    sys.exit(main())
