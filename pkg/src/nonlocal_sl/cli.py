"""Command-line interface: `nonlocal-sl {solve,check,bifurcation,oracle,example,aquifer}`.

Exit codes: 0 success, 1 failed assertion (example), 2 no solution found,
3 input error, 4 linear problem unsolvable at resonance.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import expr as E
from .errors import (
    BVPError,
    DegenerateRoot,
    DomainError,
    NoConvergence,
    NotInImage,
    ProblemFileError,
    SingularBoundarySystem,
    SingularJacobian,
)
from .grid import Grid, GridFunction, to_csv
from .hydrology import rescaling, steady_state_head
from .linear import RESONANCE_TOL, inverse_norm_estimate, is_resonant
from .oracle import fd_solve, observed_order
from .problem import ProblemSpec, Term, off_node_points, suggest_grid
from .problemfile import read_problem_file
from .resonance import image_tolerance, make_basis, solvability_defect
from .solvers import (
    ContractionWarning,
    continue_in_epsilon,
    find_bifurcation_roots,
    linear_solution,
    lipschitz_estimate,
    newton_solve,
    picard_solve,
    resonant_solve,
    scan_bifurcation,
)

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_NO_SOLUTION = 2
EXIT_INPUT = 3
EXIT_UNSOLVABLE = 4

SOLVE_FAILURES = (NoConvergence, SingularJacobian, DegenerateRoot, DomainError, SingularBoundarySystem)
CONTINUATION_STEPS = 10


def _g(x):
    return f"{x:.17g}"


def _err(msg):
    print(msg, file=sys.stderr)


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    print(f"wrote {path}")
    return path


def _csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_g(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def _outputs(path, out_dir):
    path = Path(path)
    return Path(out_dir) if out_dir is not None else path.parent, path.stem


def _problem_lines(p):
    lines = [
        f"lambda={_g(p.lam)}",
        f"epsilon={_g(p.epsilon)}",
        f"h={E.to_text(p.h)}",
        f"h1={_g(p.h1)}",
        f"h2={_g(p.h2)}",
        f"f={E.to_text(p.f)}",
    ]
    for name in ("eta1", "eta2"):
        for term in getattr(p, name).terms:
            lines.append(f"{name}_term={E.to_text(term.g)} @ {_g(term.point)}")
    return lines


def _warn_off_node(p, grid):
    """Stderr warning for nonlocal points that are not grid nodes; returns the warning lines."""
    off = off_node_points(p, grid)
    if not off:
        return []
    better = suggest_grid(p, grid.N)
    hint = f"; N={better} puts every point on a node" if better else ""
    msg = (f"nonlocal point(s) {', '.join(_g(x) for x in off)} are not grid nodes for N={grid.N}; "
           f"point values are linearly interpolated{hint}")
    _err("warning: " + msg)
    return [msg]


def _load(path):
    pf = read_problem_file(path)
    return pf, pf.problem, Grid(pf.numerics["N"])


# ---------------------------------------------------------------------------
# solver routing


def _nonresonant(p, grid, num, picard=False):
    """Newton (or Picard) with an epsilon-continuation fallback."""
    tol, max_iter = num["tol"], num["max_iter"]
    if picard:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ContractionWarning)
            report = picard_solve(p, grid=grid, tol=tol, max_iter=max(max_iter, 500))
        for w in caught:
            _err(f"warning: {w.message}")
        return report
    try:
        return newton_solve(p, grid=grid, tol=tol, max_iter=max_iter)
    except (NoConvergence, SingularJacobian, DomainError) as first:
        if p.epsilon == 0.0:
            raise
        run = continue_in_epsilon(p, p.epsilon, CONTINUATION_STEPS, grid=grid, tol=tol, max_iter=max_iter)
        if run.failed_at is not None:
            raise NoConvergence(f"{first}; continuation also failed at eps={run.failed_at!r} ({run.error})")
        report = run.reports[-1]
        report.method = "newton+continuation"
        return report


def _resonant_roots(p, grid, num):
    basis = make_basis(is_resonant(p.lam, RESONANCE_TOL), grid)
    roots = find_bifurcation_roots(p, basis, (num["c_min"], num["c_max"]), num["scan_points"])
    return basis, roots


def _resonant_one(p, basis, root, num):
    tol, max_iter = num["tol"], num["max_iter"]
    try:
        return resonant_solve(p, root, basis=basis, tol=tol, max_iter=max_iter)
    except (NoConvergence, SingularJacobian, DomainError) as first:
        if p.epsilon == 0.0:
            raise
        run = continue_in_epsilon(p, p.epsilon, CONTINUATION_STEPS, root=root, grid=basis.grid, tol=tol,
                                  max_iter=max_iter, eps_ceiling=0.1)
        if run.failed_at is not None:
            raise NoConvergence(f"{first}; continuation also failed at eps={run.failed_at!r} ({run.error})")
        report = run.reports[-1]
        report.method = "resonant+continuation"
        return report


def _root_lines(roots):
    return [f"root_{k}: c_bar={_g(r.c_bar)} B={_g(r.defect)} T={_g(r.transversality)} "
            f"degenerate={'yes' if r.degenerate else 'no'}" for k, r in enumerate(roots, start=1)]


def _solution_name(stem, k):
    return f"{stem}.solution.csv" if k == 1 else f"{stem}.root{k}.solution.csv"


def resonant_pipeline(p, grid, num):
    """Solvability check, root scan and one resonant solve per nondegenerate root.

    Returns (basis, roots, results) where results holds (root, report or
    error text) in root order.  Raises NotInImage when the linear problem has
    no solution.
    """
    basis = make_basis(is_resonant(p.lam, RESONANCE_TOL), grid)
    rhs = p.forcing(grid)
    defect = solvability_defect(basis, rhs)
    tol = image_tolerance(rhs)
    if abs(defect) > tol:
        raise NotInImage(defect, tol)
    _, roots = _resonant_roots(p, grid, num)
    results = []
    for root in roots:
        if root.degenerate:
            results.append((root, f"skipped: degenerate root (|T|={abs(root.transversality):.3e})"))
            continue
        try:
            results.append((root, _resonant_one(p, basis, root, num)))
        except SOLVE_FAILURES as exc:
            results.append((root, f"{type(exc).__name__}: {exc}"))
    return basis, roots, results


# ---------------------------------------------------------------------------
# commands


def cmd_solve(file, out_dir=None, picard=False):
    try:
        pf, p, grid = _load(file)
    except ProblemFileError as exc:
        _err(f"error: {file}: {exc}")
        return EXIT_INPUT
    out, stem = _outputs(file, out_dir)
    notes = _warn_off_node(p, grid)
    header = [f"problem={Path(file).name}", f"N={grid.N}"] + _problem_lines(p)
    if pf.aquifer is not None:
        header += rescaling(pf.aquifer).lines()
    header += [f"warning={m}" for m in notes]
    n = is_resonant(p.lam, RESONANCE_TOL)

    if n is None:
        header.append("resonant=no")
        try:
            report = _nonresonant(p, grid, pf.numerics, picard)
        except SOLVE_FAILURES as exc:
            _err(f"no solution: {type(exc).__name__}: {exc}")
            _write(out / f"{stem}.report.txt", "\n".join(header + ["status=failed", f"error={exc}"]) + "\n")
            return EXIT_NO_SOLUTION
        _write(out / f"{stem}.solution.csv", to_csv(report.solution))
        _write(out / f"{stem}.report.txt", "\n".join(header + ["status=ok"]) + "\n" + report.summary())
        return EXIT_OK

    header.append(f"resonant=yes n={n}")
    try:
        _, roots, results = resonant_pipeline(p, grid, pf.numerics)
    except NotInImage as exc:
        _err(f"no solution: the linear problem at lambda={n * n} is unsolvable ({exc})")
        _write(out / f"{stem}.report.txt", "\n".join(header + ["status=unsolvable", f"error={exc}"]) + "\n")
        return EXIT_NO_SOLUTION
    body = header + [f"roots_found={len(roots)}"] + _root_lines(roots)
    solved = 0
    for k, (root, result) in enumerate(results, start=1):
        body.append(f"[root {k}]")
        if isinstance(result, str):
            body.append("status=failed")
            body.append(f"error={result}")
            continue
        solved += 1
        name = _solution_name(stem, solved)
        _write(out / name, to_csv(result.solution))
        body.append("status=ok")
        body.append(f"solution_file={name}")
        body.append(result.summary().rstrip("\n"))
    body.insert(len(header), f"status={'ok' if solved else 'failed'}")
    _write(out / f"{stem}.report.txt", "\n".join(body) + "\n")
    if not solved:
        _err("no solution: no bifurcation root led to a converged solution")
        return EXIT_NO_SOLUTION
    return EXIT_OK


def cmd_check(file):
    try:
        pf, p, grid = _load(file)
    except ProblemFileError as exc:
        _err(f"error: {file}: {exc}")
        return EXIT_INPUT
    _warn_off_node(p, grid)
    n = is_resonant(p.lam, RESONANCE_TOL)
    if n is not None:
        basis = make_basis(n, grid)
        rhs = p.forcing(grid)
        defect = solvability_defect(basis, rhs)
        tol = image_tolerance(rhs)
        solvable = abs(defect) <= tol
        print(f"resonant=yes n={n}")
        print(f"solvability_defect={_g(defect)}")
        print(f"image_tolerance={_g(tol)}")
        print(f"solvable={'yes' if solvable else 'no'}")
        return EXIT_OK if solvable else EXIT_UNSOLVABLE
    print("resonant=no")
    try:
        norm = inverse_norm_estimate(p.lam, grid)
        v0 = linear_solution(p, grid)
        lip = lipschitz_estimate(p, v0)
    except (SingularBoundarySystem, DomainError) as exc:
        _err(f"error: {type(exc).__name__}: {exc}")
        return EXIT_INPUT
    estimate = abs(p.epsilon) * norm * lip
    print(f"inverse_norm_estimate={_g(norm)}")
    print(f"lipschitz_estimate={_g(lip)}")
    print(f"contraction_estimate={_g(estimate)}")
    print(f"contraction={'yes' if estimate < 1 else 'no'}")
    return EXIT_OK


def cmd_bifurcation(file, out_dir=None):
    try:
        pf, p, grid = _load(file)
    except ProblemFileError as exc:
        _err(f"error: {file}: {exc}")
        return EXIT_INPUT
    n = is_resonant(p.lam, RESONANCE_TOL)
    if n is None:
        _err(f"error: lambda={p.lam!r} is not of the form n^2; there is no bifurcation equation")
        return EXIT_INPUT
    _warn_off_node(p, grid)
    num = pf.numerics
    basis = make_basis(n, grid)
    try:
        cs, B, T = scan_bifurcation(p, basis, (num["c_min"], num["c_max"]), num["scan_points"])
        roots = find_bifurcation_roots(p, basis, (num["c_min"], num["c_max"]), num["scan_points"])
    except NotInImage as exc:
        _err(f"the linear problem at lambda={n * n} is unsolvable ({exc})")
        return EXIT_UNSOLVABLE
    except DomainError as exc:
        _err(f"error: {exc}")
        return EXIT_NO_SOLUTION
    out, stem = _outputs(file, out_dir)
    _write(out / f"{stem}.bifurcation.csv", _csv(["c", "B", "T"], zip(map(float, cs), map(float, B), map(float, T))))
    _write(out / f"{stem}.roots.csv",
           _csv(["c_bar", "B", "T", "degenerate"],
                [(r.c_bar, r.defect, r.transversality, int(r.degenerate)) for r in roots]))
    for line in _root_lines(roots) or ["no roots found on the scan interval"]:
        print(line)
    return EXIT_OK


def cmd_oracle(file, out_dir=None, N_list=(64, 128, 256, 512)):
    try:
        pf, p, grid = _load(file)
    except ProblemFileError as exc:
        _err(f"error: {file}: {exc}")
        return EXIT_INPUT
    _warn_off_node(p, grid)
    try:
        if is_resonant(p.lam, RESONANCE_TOL) is None:
            main = _nonresonant(p, grid, pf.numerics).solution
        else:
            _, _, results = resonant_pipeline(p, grid, pf.numerics)
            solved = [r for _, r in results if not isinstance(r, str)]
            if not solved:
                raise NoConvergence("no bifurcation root led to a converged solution")
            main = solved[0].solution
        N_list = sorted(set(int(N) for N in N_list))
        fd = {N: fd_solve(p, N, initial=main, tol=pf.numerics["tol"]) for N in N_list}
    except (NotInImage, *SOLVE_FAILURES) as exc:
        _err(f"no solution: {type(exc).__name__}: {exc}")
        return EXIT_NO_SOLUTION

    def diff(u, ref):
        # compare on the nodes the two grids share; interpolating would add O(h^2) of its own
        step = math.gcd(u.grid.N, ref.grid.N)
        return float(np.max(np.abs(u.values[::u.grid.N // step] - ref.values[::ref.grid.N // step])))

    finest = fd[N_list[-1]]
    rows = [(N, diff(fd[N], main), diff(fd[N], finest)) for N in N_list]
    out, stem = _outputs(file, out_dir)
    _write(out / f"{stem}.oracle.csv", _csv(["N", "fd_vs_main", "fd_vs_finest"], rows))
    lines = [f"problem={Path(file).name}", f"main_N={grid.N}"]
    for N, d_main, _ in rows:
        lines.append(f"fd_vs_main_N{N}={_g(d_main)}")
    if len(N_list) >= 3:
        # successive differences |u_N - u_next| avoid the bias of a fixed finest reference
        steps = [(N, diff(fd[N], fd[M])) for N, M in zip(N_list, N_list[1:])]
        lines.append(f"observed_order={_g(observed_order(steps))}")
    if len(N_list) >= 2:
        coarse, fine = fd[N_list[-2]], fd[N_list[-1]]
        rich = GridFunction(coarse.grid, (4 * fine.values[::2] - coarse.values) / 3) \
            if fine.grid.N == 2 * coarse.grid.N else None
        if rich is not None:
            lines.append(f"richardson_vs_main={_g(diff(rich, main))}")
    _write(out / f"{stem}.oracle.txt", "\n".join(lines) + "\n")
    return EXIT_OK


def example_problem(n, m, K, t1, epsilon):
    """v'' + n^2 v = eps v^2, v(0) = 1 + eps v(t1)^m, v(pi) = (-1)^n + eps (-1)^n K."""
    sign = (-1) ** n
    return ProblemSpec(
        lam=float(n * n),
        h="0",
        h1=1.0,
        h2=float(sign),
        f="v^2",
        eta1=(Term(f"v^{m}", t1),),
        eta2=(Term(E.Const(float(sign * K)), 0.0),),
        epsilon=epsilon,
    )


def j_function(w, n, m, K, t1):
    s, c = math.sin(n * t1), math.cos(n * t1)
    return (w * s + c) ** m - K - (2 * w * w + 1) * (1 + (-1) ** (n + 1)) / (3 * n * n)


def closed_form_root(n, m, K, t1):
    """(K^(1/m) - cos(n t1)) / sin(n t1), the root of j for even n."""
    return (K ** (1.0 / m) - math.cos(n * t1)) / math.sin(n * t1)


def cmd_example(n=2, m=3, K=8.0, t1=math.pi / 4, eps=1e-3, out_dir=".", N=256,
                c_range=(-10.0, 10.0), scan_points=401, residual_tol=1e-8, root_tol=1e-10):
    if n < 1 or m < 1 or K <= 0 or not 0 <= t1 <= math.pi:
        _err("error: need n >= 1, m >= 1, K > 0 and t1 in [0, pi]")
        return EXIT_INPUT
    if abs(math.sin(n * t1)) < 1e-12:
        _err(f"error: t1={t1!r} is a multiple of pi/n; the family is degenerate there")
        return EXIT_INPUT
    p = example_problem(n, m, K, t1, eps)
    grid = Grid(N)
    if off_node_points(p, grid):
        better = suggest_grid(p, N)
        if better is None:
            _err(f"warning: t1={t1!r} is not a node for any N <= 4096; interpolation error enters c_bar")
        else:
            _err(f"note: using N={better} so that t1 is a grid node")
            grid = Grid(better)
    num = {"tol": 1e-12, "max_iter": 50, "c_min": c_range[0], "c_max": c_range[1], "scan_points": scan_points}
    lines = [f"example n={n} m={m} K={_g(float(K))} t1={_g(t1)}", f"N={grid.N}"] + _problem_lines(p)
    failures = []
    try:
        _, roots, results = resonant_pipeline(p, grid, num)
    except NotInImage as exc:
        _err(f"assertion failed: the linear problem is unsolvable ({exc})")
        return EXIT_ASSERTION
    lines += [f"roots_found={len(roots)}"] + _root_lines(roots)
    if not roots:
        failures.append("no bifurcation root found on the scan interval")
    j_scale = 1.0 + K
    for k, root in enumerate(roots, start=1):
        jv = j_function(root.c_bar, n, m, K, t1)
        lines.append(f"root_{k}_j={_g(jv)}")
        if abs(jv) > 1e-8 * j_scale:
            failures.append(f"j(c_bar) = {jv:.3e} at root {k}")
    if n % 2 == 0:
        c_cf = closed_form_root(n, m, K, t1)
        lines.append(f"closed_form_c_bar={_g(c_cf)}")
        best = min((abs(r.c_bar - c_cf) for r in roots), default=math.inf)
        lines.append(f"closed_form_error={_g(best)}")
        if best > root_tol:
            failures.append(f"closed-form root {c_cf!r} not matched (closest {best:.3e})")

    out = Path(out_dir)
    solved = 0
    for k, (root, result) in enumerate(results, start=1):
        lines.append(f"[root {k}]")
        if isinstance(result, str):
            lines.append("status=failed")
            lines.append(f"error={result}")
            failures.append(f"root {k}: {result}")
            continue
        solved += 1
        name = _solution_name("example", solved)
        _write(out / name, to_csv(result.solution))
        lines.append(f"solution_file={name}")
        lines.append(result.summary().rstrip("\n"))
        worst = max(result.ode_residual, *result.bc_residual)
        if worst > residual_tol:
            failures.append(f"root {k}: residual {worst:.3e} > {residual_tol:.1e}")
    lines.append(f"assertions={'passed' if not failures else 'failed'}")
    lines += [f"failure={msg}" for msg in failures]
    _write(out / "example.report.txt", "\n".join(lines) + "\n")
    for msg in failures:
        _err(f"assertion failed: {msg}")
    if failures:
        return EXIT_ASSERTION if solved else EXIT_NO_SOLUTION
    return EXIT_OK


def cmd_aquifer(file, out_dir=None):
    try:
        pf, p, grid = _load(file)
    except ProblemFileError as exc:
        _err(f"error: {file}: {exc}")
        return EXIT_INPUT
    if pf.aquifer is None:
        _err(f"error: {file}: no [aquifer] section")
        return EXIT_INPUT
    a = pf.aquifer
    head = steady_state_head(a)
    x = head.physical_nodes(grid.N)
    out, stem = _outputs(file, out_dir)
    _write(out / f"{stem}.head.csv", _csv(["x", "value"], zip(map(float, x), map(float, head(x)))))
    lines = [
        f"problem={Path(file).name}",
        f"alpha={_g(a.alpha)}",
        f"beta={_g(a.beta)}",
        f"L={_g(a.L)}",
        f"h1={_g(a.h1)}",
        f"h2={_g(a.h2)}",
        f"c2={_g(head.c2)}",
        f"c1={_g(head.c1)}",
        f"c0={_g(head.c0)}",
    ] + rescaling(a).lines() + _problem_lines(p)
    if is_resonant(p.lam, RESONANCE_TOL) is None and p.epsilon == 0.0:
        try:
            v = linear_solution(p, grid)
            lines.append(f"linear_vs_closed_form={_g(float(np.max(np.abs(v.values - head(x)))))}")
        except (SingularBoundarySystem, DomainError) as exc:
            lines.append(f"linear_solve_error={exc}")
    _write(out / f"{stem}.aquifer.txt", "\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _constant_arg(text):
    try:
        return E.parse_constant(text)
    except BVPError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _n_list(text):
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not values or any(N < 2 or N % 2 for N in values):
        raise argparse.ArgumentTypeError("grid sizes must be even integers >= 2")
    return values


def build_parser():
    parser = argparse.ArgumentParser(prog="nonlocal-sl",
                                     description="Weakly nonlinear Sturm-Liouville problems with nonlocal boundary conditions.")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a problem file")
    s.add_argument("file")
    s.add_argument("--picard", action="store_true", help="use fixed-point iteration instead of Newton")
    s.add_argument("--out", help="output directory (default: next to the problem file)")

    s = sub.add_parser("check", help="resonance status, solvability defect and contraction estimate")
    s.add_argument("file")

    s = sub.add_parser("bifurcation", help="scan B(c), T(c) and list the roots")
    s.add_argument("file")
    s.add_argument("--out")

    s = sub.add_parser("oracle", help="compare against the finite-difference solver")
    s.add_argument("file")
    s.add_argument("--out")
    s.add_argument("--N-list", dest="N_list", type=_n_list, default=[64, 128, 256, 512])

    s = sub.add_parser("example", help="the worked resonant example v'' + n^2 v = eps v^2")
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--m", type=int, default=3)
    s.add_argument("--K", type=_constant_arg, default=8.0)
    s.add_argument("--t1", type=_constant_arg, default=math.pi / 4)
    s.add_argument("--eps", type=_constant_arg, default=1e-3)
    s.add_argument("--N", type=int, default=256)
    s.add_argument("--out", default=".")

    s = sub.add_parser("aquifer", help="steady-state head of the [aquifer] section")
    s.add_argument("file")
    s.add_argument("--out")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return cmd_solve(args.file, args.out, args.picard)
        if args.command == "check":
            return cmd_check(args.file)
        if args.command == "bifurcation":
            return cmd_bifurcation(args.file, args.out)
        if args.command == "oracle":
            return cmd_oracle(args.file, args.out, args.N_list)
        if args.command == "example":
            if args.N < 2 or args.N % 2:
                _err("error: --N must be an even integer >= 2")
                return EXIT_INPUT
            return cmd_example(args.n, args.m, args.K, args.t1, args.eps, args.out, args.N)
        if args.command == "aquifer":
            return cmd_aquifer(args.file, args.out)
    except BVPError as exc:
        _err(f"error: {type(exc).__name__}: {exc}")
        return EXIT_INPUT
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
