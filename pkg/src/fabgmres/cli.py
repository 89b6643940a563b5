"""Command-line front end: ``solve``, ``bench``, ``tune``, ``genmat`` and ``workmodel``.

Exit codes: 0 success, 1 bad input (parse, I/O, out-of-range values),
2 no convergence (report still written), 3 breakdown with a singular
Hessenberg factor (report of the best iterate still written).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import statistics
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import BreakdownWithSingularH, FabError, ParseError
from .genmat import ProblemSpec, make_consistent_rhs, random_ill_conditioned, sprandn, write_problem
from .inner import Method
from .outer import SolverConfig, ab_gmres, fab_gmres
from .sparsela import SparseMatrix, drop_zero_rows, gram, load_matrix_market, write_matrix_market
from .tuning import tune
from .workmodel import workmodel_row

log = logging.getLogger("fabgmres")

EXIT_OK, EXIT_INPUT, EXIT_NOCONV, EXIT_BREAKDOWN = 0, 1, 2, 3
METHODS = ("nesor-fixed", "nesor", "rk", "grk", "gk")
BENCH_COLUMNS = [
    "problem", "method", "solver", "status", "runs_ok", "runs_failed", "m", "n", "gram_density",
    "outer_median", "inner_median", "omega", "ell_max", "tuning_seconds", "gram_seconds",
    "solve_seconds", "total_seconds", "fastest", "outer_raw", "inner_raw", "error",
]
WORKMODEL_COLUMNS = [
    "name", "m", "n", "d", "q", "p_estimated", "p_actual", "crossover_dense",
    "crossover_sparse_estimated", "crossover_sparse_actual",
]


class CliError(FabError):
    """Input problem reported with exit code 1."""


# ---------------------------------------------------------------------------
# problem sources


def _split_spec(text: str, prefix: str):
    body = text[len(prefix):]
    pos, kw = [], {}
    for tok in filter(None, (t.strip() for t in body.split(","))):
        if "=" in tok:
            k, v = tok.split("=", 1)
            kw[k.strip()] = v.strip()
        else:
            pos.append(tok)
    return pos, kw


def parse_gen(text: str) -> tuple[SparseMatrix, ProblemSpec | None]:
    """Build a matrix from ``identity:N``, ``randl:M,N,D,KAPPA[,rank=R][,seed=S]`` or ``sprandn:M,N,D[,seed=S]``."""
    try:
        if text.startswith("identity:"):
            n = int(text.split(":", 1)[1])
            if n < 1:
                raise CliError("identity size must be positive")
            return SparseMatrix.identity(n), None
        if text.startswith("randl:"):
            pos, kw = _split_spec(text, "randl:")
            if len(pos) != 4 or set(kw) - {"rank", "seed"}:
                raise CliError(f"expected randl:M,N,D,KAPPA[,rank=R][,seed=S], got {text!r}")
            spec = ProblemSpec(
                m=int(pos[0]), n=int(pos[1]), density=float(pos[2]), kappa=float(pos[3]),
                rank=int(kw["rank"]) if "rank" in kw else None, seed=int(kw.get("seed", 0)),
            )
            return random_ill_conditioned(spec), spec
        if text.startswith("sprandn:"):
            pos, kw = _split_spec(text, "sprandn:")
            if len(pos) != 3 or set(kw) - {"seed"}:
                raise CliError(f"expected sprandn:M,N,D[,seed=S], got {text!r}")
            return sprandn(int(pos[0]), int(pos[1]), float(pos[2]), seed=int(kw.get("seed", 0))), None
    except ValueError as exc:
        raise CliError(f"cannot parse generator {text!r}: {exc}") from exc
    raise CliError(f"unknown generator {text!r} (identity:, randl:, sprandn:)")


@lru_cache(maxsize=8)
def load_problem(source: str, transpose: bool = False):
    """``(A, kept_rows, seed)`` for a generator string or Matrix Market path, zero rows removed."""
    if ":" in source and source.split(":", 1)[0] in ("identity", "randl", "sprandn"):
        A, spec = parse_gen(source)
        seed = spec.seed if spec is not None else 0
    else:
        A = load_matrix_market(source)
        seed = 0
    if transpose:
        A = A.T
    A, kept = drop_zero_rows(A)
    if len(kept) < A.meta.get("rows_before_zero_row_removal", len(kept)):
        log.info("removed %d zero rows", A.meta["zero_rows_removed"])
    return A, kept, seed


def load_rhs(rhs: str, A: SparseMatrix, kept, seed: int) -> np.ndarray:
    if rhs == "random":
        return make_consistent_rhs(A, seed)[0]
    if rhs == "ones":
        return np.ones(A.nrows)
    try:
        b = np.loadtxt(rhs, dtype=np.float64, ndmin=1, comments="%")
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read right-hand side {rhs!r}: {exc}") from exc
    if b.shape[0] == A.nrows:
        return b
    if b.shape[0] == A.meta.get("rows_before_zero_row_removal"):
        return b[kept]
    raise CliError(f"right-hand side has {b.shape[0]} entries, matrix has {A.nrows} rows")


def make_config(method: str, args) -> SolverConfig:
    tag = "nesor" if method == "nesor-fixed" else method
    return SolverConfig(
        method=Method(tag), omega=args.omega, ell_max=args.ell_max, tol=args.tol,
        max_outer=args.max_outer, eta=args.eta, seed=args.seed, use_gram=not args.no_gram,
    )


def run_solver(A, b, method: str, config: SolverConfig):
    solver = ab_gmres if method == "nesor-fixed" else fab_gmres
    return solver(A, b, config)


# ---------------------------------------------------------------------------
# output helpers


def write_convergence(report, out: Path) -> None:
    hist = report.relres_history
    inner = np.concatenate([[0], np.cumsum(report.per_step_inner[: len(hist) - 1])])
    offset = report.tuning_seconds + report.gram_seconds
    secs = np.concatenate([[0.0], np.asarray(report.step_seconds[: len(hist) - 1])]) + offset
    np.savetxt(out / "convergence_inner.dat", np.column_stack([inner, hist]), fmt=["%d", "%.17g"],
               header="total_inner_iterations relative_residual")
    np.savetxt(out / "convergence_time.dat", np.column_stack([secs, hist]), fmt="%.17g",
               header="seconds relative_residual")


def write_report(report, out: Path, extra: dict | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    data = report.to_dict()
    if extra:
        data.update(extra)
    (out / "report.json").write_text(json.dumps(data, indent=2))
    write_convergence(report, out)


# ---------------------------------------------------------------------------
# subcommands


def _source(args) -> str:
    if bool(args.matrix) == bool(args.gen):
        raise CliError("give exactly one of --matrix or --gen")
    return args.matrix or args.gen


def cmd_solve(args) -> int:
    A, kept, seed = load_problem(_source(args), args.transpose)
    b = load_rhs(args.rhs, A, kept, seed)
    config = make_config(args.method, args)
    out = Path(args.out)
    extra = {"source": _source(args), "transpose": bool(args.transpose), "shape": list(A.shape)}
    try:
        report = run_solver(A, b, args.method, config)
    except BreakdownWithSingularH as exc:
        write_report(exc.report, out, extra)
        print(f"breakdown with singular H: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN
    write_report(report, out, extra)
    print(
        f"{args.method}: converged={report.converged} outer={report.outer_iters} inner={report.total_inner} "
        f"omega={report.omega_used} relres={report.relres_direct:.3e} seconds={report.total_seconds:.3f}"
    )
    return EXIT_OK if report.converged else EXIT_NOCONV


def cmd_tune(args) -> int:
    A, kept, seed = load_problem(_source(args), args.transpose)
    b = load_rhs(args.rhs, A, kept, seed)
    tag = "nesor" if args.method == "nesor-fixed" else args.method
    C = None
    if tag in ("gk", "grk") and not args.no_gram:
        C = gram(A)
    result = tune(A, b, tag, eta=args.eta, seed=args.seed, C=C)
    text = json.dumps(result.to_dict(), indent=2)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    print(text)
    return EXIT_OK


def cmd_genmat(args) -> int:
    A, spec = parse_gen(args.gen)
    if args.transpose:
        A = A.T
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if spec is not None and not args.transpose:
        write_problem(out, A, spec)
    else:
        header = spec.header() if spec is not None else {}
        header["source"] = args.gen
        header["transposed"] = bool(args.transpose)
        write_matrix_market(out, A, header=header)
    if args.rhs_out:
        b, x_star = make_consistent_rhs(A, spec.seed if spec is not None else 0)
        np.savetxt(args.rhs_out, b, fmt="%.17g")
        np.savetxt(Path(args.rhs_out).with_suffix(".xstar"), x_star, fmt="%.17g")
    print(f"wrote {out} ({A.nrows}x{A.ncols}, nnz={A.nnz}, density={A.density:.4f})")
    return EXIT_OK


def workmodel_rows(args) -> list[dict]:
    if args.from_matrix:
        rows = []
        for path in args.from_matrix:
            A, _, _ = load_problem(path, args.transpose)
            C = gram(A)
            row = workmodel_row(A.nrows, A.ncols, A.density, p_actual=C.density, nnz=A.nnz)
            row["name"] = Path(path).stem + ("T" if args.transpose else "")
            rows.append(row)
        return rows
    if args.m is None or args.n is None or args.d is None:
        raise CliError("workmodel needs --m, --n and --d, or --from-matrix")
    row = workmodel_row(args.m, args.n, args.d)
    row["name"] = f"m{args.m}_n{args.n}_d{args.d:g}"
    return [row]


def _write_csv(rows, columns, dest) -> None:
    if dest:
        Path(dest).parent.mkdir(parents=True, exist_ok=True)
        fh = open(dest, "w", newline="")
    else:
        fh = sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if dest:
            fh.close()


def cmd_workmodel(args) -> int:
    _write_csv(workmodel_rows(args), WORKMODEL_COLUMNS, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# benchmark plans


@dataclass
class BenchProblem:
    source: str
    transpose: bool = False

    @property
    def name(self) -> str:
        return self.source + ("T" if self.transpose else "")


@dataclass
class BenchPlan:
    problems: list
    methods: list
    repeats: int = 10
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "bench_out"
    tol: float = 1e-6
    max_outer: int = 2000
    eta: float = 0.1
    use_gram: bool = True
    jobs: int = 1

    def __post_init__(self):
        if self.repeats < 1:
            raise ParseError("repeats must be at least 1")
        if not self.methods:
            raise ParseError("plan lists no methods")
        if not self.problems:
            raise ParseError("plan lists no problems")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ParseError(f"unknown methods {bad}; choose from {METHODS}")
        if not self.seeds:
            raise ParseError("seeds must not be empty")

    def run_seeds(self) -> list[int]:
        """One solver seed per repeat; missing ones continue counting from the last."""
        seeds = list(self.seeds[: self.repeats])
        while len(seeds) < self.repeats:
            seeds.append(seeds[-1] + 1)
        return seeds


def _as_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ParseError(f"not a boolean: {text!r}")


def parse_plan(text: str) -> BenchPlan:
    """Parse ``key = value`` lines; ``problem`` may repeat and takes an optional ``transpose`` suffix."""
    kw: dict = {"problems": []}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key == "problem":
                parts = value.split()
                if not parts or len(parts) > 2 or (len(parts) == 2 and parts[1] != "transpose"):
                    raise ParseError(f"line {lineno}: problem = SOURCE [transpose]")
                kw["problems"].append(BenchProblem(parts[0], len(parts) == 2))
            elif key == "methods":
                kw["methods"] = [m.strip() for m in value.split(",") if m.strip()]
            elif key == "seeds":
                kw["seeds"] = [int(s) for s in value.split(",") if s.strip()]
            elif key in ("repeats", "max_outer", "jobs"):
                kw[key] = int(value)
            elif key in ("tol", "eta"):
                kw[key] = float(value)
            elif key == "use_gram":
                kw[key] = _as_bool(value)
            elif key == "output_dir":
                kw[key] = value
            else:
                raise ParseError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
    if "methods" not in kw:
        raise ParseError("plan lists no methods")
    return BenchPlan(**kw)


def _median(values):
    return float(statistics.median(values)) if values else float("nan")


def run_cell(plan: BenchPlan, problem: BenchProblem, method: str) -> dict:
    """All repeats of one (problem, method) pair. Failures are recorded, not raised."""
    row = {"problem": problem.name, "method": method,
           "solver": "ab_gmres" if method == "nesor-fixed" else "fab_gmres"}
    try:
        A, kept, seed = load_problem(problem.source, problem.transpose)
        b = make_consistent_rhs(A, seed)[0]
    except (FabError, OSError) as exc:
        row.update(status="error", runs_ok=0, runs_failed=plan.repeats, error=str(exc))
        return row
    row.update(m=A.nrows, n=A.ncols)
    runs, errors = [], []
    for s in plan.run_seeds():
        tag = "nesor" if method == "nesor-fixed" else method
        config = SolverConfig(method=tag, tol=plan.tol, max_outer=plan.max_outer, eta=plan.eta,
                              seed=s, use_gram=plan.use_gram)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rep = run_solver(A, b, method, config)
        except BreakdownWithSingularH as exc:
            errors.append(f"seed {s}: {exc}")
            continue
        except FabError as exc:
            errors.append(f"seed {s}: {exc}")
            continue
        if not rep.converged:
            errors.append(f"seed {s}: not converged (relres {rep.relres_direct:.2e})")
        runs.append(rep)
    ok = [r for r in runs if r.converged]
    row.update(
        status="ok" if len(ok) == plan.repeats else ("partial" if ok else "failed"),
        runs_ok=len(ok),
        runs_failed=plan.repeats - len(ok),
        error="; ".join(errors),
    )
    if runs:
        omegas = [r.omega_used for r in runs]
        row.update(
            outer_median=_median([r.outer_iters for r in runs]),
            inner_median=_median([r.total_inner for r in runs]),
            omega=statistics.mode(omegas),
            ell_max=statistics.mode([r.ell_max_used for r in runs]),
            tuning_seconds=_median([r.tuning_seconds for r in runs]),
            gram_seconds=_median([r.gram_seconds for r in runs]),
            solve_seconds=_median([r.solve_seconds for r in runs]),
            total_seconds=_median([r.total_seconds for r in runs]),
            outer_raw=";".join(str(r.outer_iters) for r in runs),
            inner_raw=";".join(str(r.total_inner) for r in runs),
        )
        if method in ("gk", "grk") and plan.use_gram:
            row["gram_density"] = gram(A).density
    return row


def _cell_task(args):
    return run_cell(*args)


def mark_fastest(rows: list[dict]) -> None:
    by_problem: dict = {}
    for row in rows:
        row["fastest"] = ""
        if row.get("status") == "ok":
            by_problem.setdefault(row["problem"], []).append(row)
    for cand in by_problem.values():
        min(cand, key=lambda r: r["total_seconds"])["fastest"] = "*"


def run_bench(plan: BenchPlan) -> list[dict]:
    tasks = [(plan, p, m) for p in plan.problems for m in plan.methods]
    if plan.jobs > 1:
        with ProcessPoolExecutor(max_workers=plan.jobs) as pool:
            rows = list(pool.map(_cell_task, tasks))
    else:
        rows = [_cell_task(t) for t in tasks]
    mark_fastest(rows)
    return rows


def cmd_bench(args) -> int:
    try:
        text = Path(args.plan).read_text()
    except OSError as exc:
        raise CliError(f"cannot read plan: {exc}") from exc
    plan = parse_plan(text)
    if args.out:
        plan.output_dir = args.out
    if args.jobs is not None:
        plan.jobs = args.jobs
    rows = run_bench(plan)
    out = Path(plan.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(rows, BENCH_COLUMNS, out / "bench.csv")
    (out / "bench.json").write_text(json.dumps(rows, indent=2, default=float))
    for row in rows:
        print(f"{row['problem']:>40s} {row['method']:>12s} {row['status']:>8s} "
              f"outer={row.get('outer_median', '-')} inner={row.get('inner_median', '-')} {row.get('fastest', '')}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are input errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _solver_flags(p, with_method=True):
    src = p.add_argument_group("problem")
    src.add_argument("--matrix", help="Matrix Market file")
    src.add_argument("--gen", help="identity:N | randl:M,N,D,KAPPA[,rank=R][,seed=S] | sprandn:M,N,D[,seed=S]")
    src.add_argument("--transpose", action="store_true", help="solve with the transposed matrix")
    src.add_argument("--rhs", default="random", help="'random' (b = A x*, x* ~ N(0,1)), 'ones' or a text file")
    if with_method:
        p.add_argument("--method", choices=METHODS, default="grk")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-outer", type=int, default=2000)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--omega", type=float)
    p.add_argument("--ell-max", type=int)
    p.add_argument("--no-gram", action="store_true", help="do not store A A^T for GK/GRK")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fabgmres", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one system and write report.json plus convergence data")
    _solver_flags(p)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("tune", help="run the parameter tuner only")
    _solver_flags(p)
    p.add_argument("--out", help="JSON output file")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("bench", help="run a benchmark plan")
    p.add_argument("plan")
    p.add_argument("--out", help="override output_dir")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("genmat", help="write a generated matrix in Matrix Market format")
    p.add_argument("--gen", required=True)
    p.add_argument("--transpose", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--rhs-out", help="also write b = A x* (and x* next to it)")
    p.set_defaults(func=cmd_genmat)

    p = sub.add_parser("workmodel", help="Gram density estimates and GK/MGK crossovers as CSV")
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=float)
    p.add_argument("--from-matrix", nargs="+")
    p.add_argument("--transpose", action="store_true")
    p.add_argument("--out", help="CSV file (default stdout)")
    p.set_defaults(func=cmd_workmodel)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (FabError, OSError, ValueError) as exc:
        print(f"fabgmres: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
