"""Relative residual against cumulative inner projections and wall time for every method.

Writes one whitespace-separated file per method into --out-dir.

    python3 scripts/convergence_curves.py --m 500 --n 50 --kappa 1e3 --seed 1
"""
import argparse
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fabgmres import BreakdownWithSingularH, ProblemSpec, SolverConfig, ab_gmres, fab_gmres
from fabgmres import make_consistent_rhs, random_ill_conditioned


@dataclass
class CurveConfig:
    m: int = 500
    n: int = 50
    density: float = 0.2
    kappa: float = 1e3
    seed: int = 1
    transpose: bool = False
    out_dir: str = "curves"


def run(cfg: CurveConfig) -> dict:
    A = random_ill_conditioned(ProblemSpec(cfg.m, cfg.n, cfg.density, cfg.kappa, seed=cfg.seed))
    if cfg.transpose:
        A = A.T
    b, _ = make_consistent_rhs(A, cfg.seed)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for method in ("nesor", "rk", "grk", "gk"):
        driver = ab_gmres if method == "nesor" else fab_gmres
        try:
            rep = driver(A, b, SolverConfig(method=method, seed=cfg.seed))
        except BreakdownWithSingularH as exc:
            rep = exc.report
        inner = np.concatenate([[0], np.cumsum(rep.per_step_inner)])[: len(rep.relres_history)]
        secs = np.concatenate([[0.0], rep.step_seconds])[: len(rep.relres_history)] + rep.tuning_seconds
        table = np.column_stack([np.arange(len(inner)), inner, secs, rep.relres_history])
        np.savetxt(out / f"{method}.dat", table, header="outer inner seconds relres", fmt="%.10g")
        summary[method] = (rep.outer_iters, rep.total_inner, rep.omega_used, rep.ell_max_used)
        print(method, *summary[method], flush=True)
    return summary


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--m", type=int, default=CurveConfig.m)
    p.add_argument("--n", type=int, default=CurveConfig.n)
    p.add_argument("--density", type=float, default=CurveConfig.density)
    p.add_argument("--kappa", type=float, default=CurveConfig.kappa)
    p.add_argument("--seed", type=int, default=CurveConfig.seed)
    p.add_argument("--transpose", action="store_true")
    p.add_argument("--out-dir", default=CurveConfig.out_dir)
    warnings.simplefilter("ignore")
    run(CurveConfig(**vars(p.parse_args(argv))))


if __name__ == "__main__":
    sys.exit(main())
