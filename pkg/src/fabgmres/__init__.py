"""Flexible AB-GMRES with Kaczmarz-type inner-iteration preconditioning."""
from .errors import *  # noqa: F401,F403
from .genmat import ProblemSpec, make_consistent_rhs, random_ill_conditioned, sprandn
from .inner import InnerMethod, Method, run_inner
from .outer import SolveReport, SolverConfig, ab_gmres, fab_gmres, fgmres_square, hessenberg_lsq
from .sparsela import (
    GramMatrix,
    SparseMatrix,
    drop_zero_rows,
    gram,
    load_matrix_market,
    matvec,
    matvec_transpose,
    write_matrix_market,
)
from .tuning import TuningResult, tune
from .workmodel import FlopCounter, predicted_gram_density

__version__ = "0.1.0"
