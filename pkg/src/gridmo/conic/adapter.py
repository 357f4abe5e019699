"""External-solver adapter.

The adapter contract is file based: the program is serialised to the text
format, a runner produces a solution file, and the solution is read back
and re-checked.  The bundled runner hands the standard form to cvxopt's
conelp; any other solver can be plugged in as a callable
`runner(program_path, solution_path)`.
"""

from __future__ import annotations

import tempfile
import time
from pathlib import Path

import numpy as np

from .api import kkt_residuals
from .program import ConicProgram, Solution, objective_value
from .standard import standard_form
from . import textio

_STATUS_MAP = {
    "optimal": "Optimal",
    "primal infeasible": "Infeasible",
    "dual infeasible": "Unbounded",
    "unknown": "IterLimit",
}


def solve_cvxopt(prog: ConicProgram, tol: float = 1e-8,
                 max_iter: int = 200) -> Solution:
    import cvxopt
    import cvxopt.solvers

    from .api import objective_scale, rescale_solution, scaled_copy

    t0 = time.perf_counter()
    orig = prog
    scale = objective_scale(prog)
    prog = scaled_copy(prog, scale)
    sf = standard_form(prog)
    coo_g = sf.g.tocoo()
    coo_a = sf.a.tocoo()
    g = cvxopt.spmatrix(coo_g.data, coo_g.row.tolist(), coo_g.col.tolist(),
                        (sf.m, sf.n))
    a = cvxopt.spmatrix(coo_a.data, coo_a.row.tolist(), coo_a.col.tolist(),
                        (sf.p, sf.n))
    c = cvxopt.matrix(sf.c)
    h = cvxopt.matrix(sf.h)
    b = cvxopt.matrix(sf.b)
    dims = {"l": sf.dims_l, "q": sf.dims_q, "s": []}
    options = {"show_progress": False, "abstol": tol, "reltol": tol,
               "feastol": tol, "maxiters": max_iter}
    try:
        res = cvxopt.solvers.conelp(c, g, h, dims, a, b, options=options)
    except (ValueError, ArithmeticError) as exc:
        # cvxopt's KKT path can fail on degenerate scalings; report an
        # indeterminate outcome instead of crashing the caller
        return Solution(status="IterLimit", x=None, y_eq=None, z_cone=None,
                        objective=None, residuals=None, iterations=-1,
                        wall_time=time.perf_counter() - t0,
                        raw={"error": str(exc)})
    elapsed = time.perf_counter() - t0
    status = _STATUS_MAP.get(res["status"], "IterLimit")
    if status == "Optimal" or (status == "IterLimit" and res["x"] is not None):
        x_std = np.asarray(res["x"]).ravel()
        y_std = np.asarray(res["y"]).ravel()
        z_std = np.asarray(res["z"]).ravel()
        x = x_std[:sf.n_orig]
        sol = Solution(status=status, x=x, y_eq=y_std[:sf.p_orig],
                       z_cone=-(sf.g.T @ z_std)[:sf.n_orig],
                       objective=None, residuals=None,
                       iterations=res.get("iterations", -1) or -1,
                       wall_time=elapsed,
                       raw={"x_std": x_std, "y_std": y_std, "z_std": z_std})
        return rescale_solution(orig, sol, scale)
    if status == "Infeasible":
        y_std = np.asarray(res["y"]).ravel()
        return Solution(status=status, x=None, y_eq=None, z_cone=None,
                        objective=None, residuals=None, iterations=-1,
                        wall_time=elapsed, certificate=y_std[:sf.p_orig])
    if status == "Unbounded":
        x_std = np.asarray(res["x"]).ravel()
        return Solution(status=status, x=None, y_eq=None, z_cone=None,
                        objective=None, residuals=None, iterations=-1,
                        wall_time=elapsed, certificate=x_std[:sf.n_orig])
    return Solution(status="IterLimit", x=None, y_eq=None, z_cone=None,
                    objective=None, residuals=None, iterations=-1,
                    wall_time=elapsed)


def _cvxopt_runner(program_path, solution_path) -> None:
    prog = textio.read_program(program_path)
    sol = solve_cvxopt(prog)
    textio.write_solution(sol, solution_path)


def solve_via_files(prog: ConicProgram, workdir=None, runner=None) -> Solution:
    """Round-trip solve through the file contract; default runner is cvxopt."""
    runner = runner or _cvxopt_runner
    with tempfile.TemporaryDirectory(dir=workdir) as td:
        ppath = Path(td) / "program.txt"
        spath = Path(td) / "solution.txt"
        textio.write_program(prog, ppath)
        runner(ppath, spath)
        sol = textio.read_solution(spath)
    if sol.x is not None:
        sol.objective = objective_value(prog, sol.x)
        sol.residuals = kkt_residuals(prog, sol)
    return sol
