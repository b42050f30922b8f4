"""Solvers for v'' + lam v = h + eps f(x, v) on [0, pi] with nonlocal boundary conditions

    v(0) = h1 + eps eta1(v),   v(pi) = h2 + eps eta2(v).

Away from lam = n^2 the problem is solved by Picard iteration or Newton's
method on the integral form; at lam = n^2 by a Lyapunov-Schmidt reduction
with a bifurcation scan for the kernel coordinate.
"""

from .errors import (
    BVPError,
    DegenerateRoot,
    DisallowedVariable,
    DomainError,
    ExprSyntaxError,
    GridMismatch,
    NoConvergence,
    NotInImage,
    ProblemFileError,
    ResonantLambda,
    SingularBoundarySystem,
    SingularJacobian,
    UnknownIdentifier,
    UnsupportedDerivative,
)
from .expr import diff, evaluate, parse, parse_constant, to_text
from .grid import BoundaryTriple, Grid, GridFunction, inner_l2, inner_weighted, integrate, sample, sup_norm
from .hydrology import AquiferParams, build_problem, rescaling, steady_state_head
from .linear import LinearSolve, is_resonant, solve_linear
from .oracle import fd_refine_study, fd_solve
from .problem import NonlocalFunctional, ProblemSpec, Term, apply_DF, apply_F
from .problemfile import parse_problem_text, read_problem_file
from .resonance import generalized_inverse, make_basis, project_coimage, project_kernel, solvability_defect
from .solvers import (
    BifurcationRoot,
    SolveReport,
    bifurcation_function,
    continue_in_epsilon,
    find_bifurcation_roots,
    newton_solve,
    picard_solve,
    resonant_solve,
    transversality,
)

__all__ = [
    "BVPError",
    "DegenerateRoot",
    "DisallowedVariable",
    "DomainError",
    "ExprSyntaxError",
    "GridMismatch",
    "NoConvergence",
    "NotInImage",
    "ProblemFileError",
    "ResonantLambda",
    "SingularBoundarySystem",
    "SingularJacobian",
    "UnknownIdentifier",
    "UnsupportedDerivative",
    "diff",
    "evaluate",
    "parse",
    "parse_constant",
    "to_text",
    "BoundaryTriple",
    "Grid",
    "GridFunction",
    "inner_l2",
    "inner_weighted",
    "integrate",
    "sample",
    "sup_norm",
    "AquiferParams",
    "build_problem",
    "rescaling",
    "steady_state_head",
    "LinearSolve",
    "is_resonant",
    "solve_linear",
    "fd_refine_study",
    "fd_solve",
    "NonlocalFunctional",
    "ProblemSpec",
    "Term",
    "apply_DF",
    "apply_F",
    "parse_problem_text",
    "read_problem_file",
    "generalized_inverse",
    "make_basis",
    "project_coimage",
    "project_kernel",
    "solvability_defect",
    "BifurcationRoot",
    "SolveReport",
    "bifurcation_function",
    "continue_in_epsilon",
    "find_bifurcation_roots",
    "newton_solve",
    "picard_solve",
    "resonant_solve",
    "transversality",
]

__version__ = "0.1.0"
