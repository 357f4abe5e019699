"""Solve entry points and independent KKT residual checks.

`kkt_residuals` re-derives the epigraph-lifted standard form from the
program data and evaluates

    primal = max(||A x - b||_inf / (1 + ||b||_inf), cone violation of s)
    dual   = max(||A'y + G'z + c||_inf / (1 + ||c||_inf), cone violation of z)
    gap    = |<s, z>| / (1 + |c'x|)

with s = h - G x, using only the public solution vectors (lift coordinates
are reconstructed from the primal, so hand-perturbed probes work).
"""

from __future__ import annotations

import time

import numpy as np

from . import ipm
from .program import ConicProgram, Solution, objective_value
from .standard import StandardForm, cone_distance, standard_form

_SQ2 = np.sqrt(2.0)


def _lift_primal(prog: ConicProgram, sf: StandardForm, x: np.ndarray) -> np.ndarray:
    if sf.n == prog.n:
        return np.asarray(x, dtype=float)
    quad_cols = np.nonzero(prog.obj_quad)[0]
    w = np.sqrt(prog.obj_quad[quad_cols]) * x[quad_cols]
    t = float(w @ w)
    return np.concatenate([x, [t, 0.5], w])


def _lift_duals(prog: ConicProgram, sf: StandardForm, x: np.ndarray,
                y_eq: np.ndarray, mu: np.ndarray):
    """Standard-form (y, z) from original-space multipliers."""
    z = np.zeros(sf.m)
    for cone, rows in zip(prog.cones, sf.cone_rows):
        blk = mu[cone.start:cone.stop]
        if cone.kind == "rsoc":
            # z = T mu with the same orthogonal map used for G
            zb = blk.copy()
            zb[0] = (blk[0] + blk[1]) / _SQ2
            zb[1] = (blk[0] - blk[1]) / _SQ2
            z[rows] = zb
        else:
            z[rows] = blk
    if sf.n == prog.n:
        return np.asarray(y_eq, dtype=float), z
    quad_cols = np.nonzero(prog.obj_quad)[0]
    w = np.sqrt(prog.obj_quad[quad_cols]) * x[quad_cols]
    t = float(w @ w)
    # tight epigraph duals: RSOC multiplier (1, 2t, -2w), eq-row duals (2t, 2w)
    mu_lift = np.concatenate([[1.0, 2.0 * t], -2.0 * w])
    zb = mu_lift.copy()
    zb[0] = (mu_lift[0] + mu_lift[1]) / _SQ2
    zb[1] = (mu_lift[0] - mu_lift[1]) / _SQ2
    z[len(z) - len(zb):] = zb  # the lift cone is the last G block
    y = np.concatenate([y_eq, [2.0 * t], -2.0 * w])
    return y, z


def kkt_residuals(prog: ConicProgram, sol: Solution) -> tuple[float, float, float]:
    """Recompute (primal, dual, gap) residuals from the solution vectors.

    Raw standard-form vectors are used when the solution carries them;
    hand-built solutions (probes) fall back to a deterministic lift of the
    public fields.
    """
    sf = standard_form(prog)
    raw = sol.raw or {}
    if "x_std" in raw and "y_std" in raw and "z_std" in raw:
        x = raw["x_std"]
        y = raw["y_std"]
        z = raw["z_std"]
    else:
        x = _lift_primal(prog, sf, sol.x)
        y_eq = sol.y_eq if sol.y_eq is not None else np.zeros(prog.n_eq)
        mu = sol.z_cone if sol.z_cone is not None else np.zeros(prog.n)
        y, z = _lift_duals(prog, sf, sol.x, y_eq, mu)

    s = sf.h - sf.g @ x
    eq = sf.a @ x - sf.b
    bnorm = 1.0 + (np.abs(sf.b).max() if sf.b.size else 0.0)
    pres = max(float(np.abs(eq).max(initial=0.0)) / bnorm,
               cone_distance(sf, s))
    stat = sf.a.T @ y + sf.g.T @ z + sf.c
    cnorm = 1.0 + (np.abs(sf.c).max() if sf.c.size else 0.0)
    dres = max(float(np.abs(stat).max(initial=0.0)) / cnorm,
               cone_distance(sf, z))
    gap = abs(float(s @ z)) / (1.0 + abs(float(sf.c @ x)))
    return pres, dres, gap


def objective_scale(prog: ConicProgram) -> float:
    """Uniform divisor that brings objective coefficients to O(1); the
    feasible set is untouched, so minimisers are preserved."""
    s = max(1.0,
            float(np.abs(prog.obj_lin).max(initial=0.0)),
            float(prog.obj_quad.max(initial=0.0)))
    return s


def scaled_copy(prog: ConicProgram, scale: float) -> ConicProgram:
    if scale == 1.0:
        return prog
    return ConicProgram(n=prog.n, obj_lin=prog.obj_lin / scale,
                        obj_quad=prog.obj_quad / scale,
                        obj_const=prog.obj_const / scale,
                        a_eq=prog.a_eq, b_eq=prog.b_eq, cones=prog.cones)


def rescale_solution(prog: ConicProgram, sol: Solution,
                     scale: float) -> Solution:
    """Map a solution of the objective-scaled program back to the original.

    Objective scaling leaves the feasible set and minimisers unchanged;
    duals scale by `scale`, and the epigraph-lift coordinates pick up the
    exact (s, sqrt s) factors so the raw standard-form vectors stay valid
    for the original program.
    """
    if scale != 1.0:
        sq = np.sqrt(scale)
        if sol.y_eq is not None:
            sol.y_eq = sol.y_eq * scale
        if sol.z_cone is not None:
            sol.z_cone = sol.z_cone * scale
        has_lift = bool(np.any(prog.obj_quad))
        n0, p0 = prog.n, prog.n_eq
        nq = int(np.count_nonzero(prog.obj_quad))
        if "y_std" in sol.raw:
            y = sol.raw["y_std"] * scale
            if has_lift:
                # lift w-rows sit after the original rows and the v-row
                y[p0 + 1:p0 + 1 + nq] = sol.raw["y_std"][p0 + 1:] * sq
            sol.raw["y_std"] = y
        if "z_std" in sol.raw:
            z = sol.raw["z_std"] * scale
            if has_lift:
                blk = sol.raw["z_std"][-(2 + nq):]
                a_m = (blk[0] + blk[1]) / _SQ2
                b_m = (blk[0] - blk[1]) / _SQ2
                c_m = blk[2:]
                b_m = b_m * scale
                c_m = c_m * sq
                z[-(2 + nq)] = (a_m + b_m) / _SQ2
                z[-(2 + nq) + 1] = (a_m - b_m) / _SQ2
                z[-nq:] = c_m
            sol.raw["z_std"] = z
        if has_lift and "x_std" in sol.raw:
            x = sol.raw["x_std"].copy()
            x[n0] *= scale       # epigraph value
            x[n0 + 2:] *= sq     # w = sqrt(P) x coordinates
            sol.raw["x_std"] = x
            sol.raw.pop("s_std", None)
    if sol.x is not None:
        sol.objective = objective_value(prog, sol.x)
        sol.residuals = kkt_residuals(prog, sol)
    return sol


def _solution_from_ipm(prog: ConicProgram, sf: StandardForm,
                       res: ipm.IpmResult, t0: float) -> Solution:
    elapsed = time.perf_counter() - t0
    if res.status == ipm.STATUS_OPTIMAL or res.status == ipm.STATUS_ITER:
        x = res.x[:sf.n_orig]
        y_eq = res.y[:sf.p_orig]
        mu = -(sf.g.T @ res.z)[:sf.n_orig]
        sol = Solution(
            status=res.status, x=x, y_eq=y_eq, z_cone=mu,
            objective=objective_value(prog, x),
            residuals=None, iterations=res.iterations, wall_time=elapsed,
            raw={"x_std": res.x, "y_std": res.y, "z_std": res.z,
                 "s_std": res.s, "tau": res.tau, "kappa": res.kappa,
                 "ipm_pres": res.pres, "ipm_dres": res.dres,
                 "ipm_relgap": res.relgap},
        )
        sol.residuals = kkt_residuals(prog, sol)
        return sol
    if res.status == ipm.STATUS_PINFEAS:
        cert = res.y[:sf.p_orig]
        return Solution(status="Infeasible", x=None, y_eq=None, z_cone=None,
                        objective=None, residuals=None,
                        iterations=res.iterations, wall_time=elapsed,
                        certificate=cert,
                        raw={"y_std": res.y, "z_std": res.z})
    cert = res.x[:sf.n_orig]
    return Solution(status="Unbounded", x=None, y_eq=None, z_cone=None,
                    objective=None, residuals=None,
                    iterations=res.iterations, wall_time=elapsed,
                    certificate=cert, raw={"x_std": res.x, "s_std": res.s})


def solve(prog: ConicProgram, tol: float = 1e-8, max_iter: int = 200,
          backend: str = "embedded") -> Solution:
    """Solve a ConicProgram; `backend` is "embedded" or "cvxopt".

    The objective is normalised to O(1) coefficients before the solve and
    the solution mapped back, so badly scaled cost data does not disturb
    the homogeneous embedding.
    """
    prog.validate()
    if backend == "cvxopt":
        from .adapter import solve_cvxopt
        return solve_cvxopt(prog, tol=tol, max_iter=max_iter)
    if backend != "embedded":
        raise ValueError(f"unknown backend {backend!r}")
    t0 = time.perf_counter()
    scale = objective_scale(prog)
    sprog = scaled_copy(prog, scale)
    sf = standard_form(sprog)
    res = ipm.solve_standard(sf, tol=tol, max_iter=max_iter)
    sol = _solution_from_ipm(sprog, sf, res, t0)
    return rescale_solution(prog, sol, scale)
