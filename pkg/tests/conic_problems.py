"""Regression SOCP suite: feasible problems with known optima plus
infeasible/unbounded instances with certified statuses."""

from __future__ import annotations

import numpy as np

from gridmo.conic import ProgramBuilder


def lp_scalar():
    b = ProgramBuilder()
    x = b.nonneg(1)
    b.add_ineq([x[0]], [-1.0], -1.0)  # x >= 1
    b.add_obj_lin([x[0]], [1.0])
    return b.build(), 1.0


def lp_box():
    # min -x - y  s.t. x + y <= 1, 0 <= x, y
    b = ProgramBuilder()
    xy = b.nonneg(2)
    b.add_ineq(xy, [1.0, 1.0], 1.0)
    b.add_obj_lin(xy, [-1.0, -1.0])
    return b.build(), -1.0


def lp_diet():
    # min 2a + 3b  s.t. a + 2b >= 4, 3a + b >= 6, a,b >= 0 -> a=8/5, b=6/5
    b = ProgramBuilder()
    ab = b.nonneg(2)
    b.add_ineq(ab, [-1.0, -2.0], -4.0)
    b.add_ineq(ab, [-3.0, -1.0], -6.0)
    b.add_obj_lin(ab, [2.0, 3.0])
    return b.build(), 2 * 8 / 5 + 3 * 6 / 5


def soc_norm():
    b = ProgramBuilder()
    s = b.soc(3)
    b.eq([s[1]], [1.0], 3.0)
    b.eq([s[2]], [1.0], 4.0)
    b.add_obj_lin([s[0]], [1.0])
    return b.build(), 5.0


def soc_ball_lp():
    # min c'x s.t. ||x|| <= 1 -> -||c||
    c = np.array([1.0, -2.0, 2.0])
    b = ProgramBuilder()
    s = b.soc(4)
    b.eq([s[0]], [1.0], 1.0)
    b.add_obj_lin(s[1:], c)
    return b.build(), -float(np.linalg.norm(c))


def rsoc_geomean():
    # min u + v s.t. 2uv >= 1 -> sqrt(2)
    b = ProgramBuilder()
    r = b.rsoc(3)
    b.eq([r[2]], [1.0], 1.0)
    b.add_obj_lin(r[:2], [1.0, 1.0])
    return b.build(), float(np.sqrt(2.0))


def rsoc_inverse():
    # min u s.t. 2 u * 4 >= 3^2 -> u = 9/8
    b = ProgramBuilder()
    r = b.rsoc(3)
    b.eq([r[1]], [1.0], 4.0)
    b.eq([r[2]], [1.0], 3.0)
    b.add_obj_lin([r[0]], [1.0])
    return b.build(), 9.0 / 8.0


def qp_unconstrained_min():
    # min (x-3)^2 with x <= 10 -> 0
    b = ProgramBuilder()
    x = b.new_vars(1)
    b.add_ineq([x[0]], [1.0], 10.0)
    b.add_obj_quad([x[0]], [1.0])
    b.add_obj_lin([x[0]], [-6.0])
    b.add_obj_const(9.0)
    return b.build(), 0.0


def qp_active_bound():
    # min x^2 s.t. x >= 2 -> 4
    b = ProgramBuilder()
    x = b.nonneg(1)
    b.add_ineq([x[0]], [-1.0], -2.0)
    b.add_obj_quad([x[0]], [1.0])
    return b.build(), 4.0


def qp_projection():
    # min ||x - p||^2 s.t. sum x = 1, x >= 0; p = (0.9, 0.5, -0.2)
    # Euclidean projection onto the simplex: analytic by threshold.
    p = np.array([0.9, 0.5, -0.2])
    # solve the projection analytically (sorted threshold rule)
    u = np.sort(p)[::-1]
    css = np.cumsum(u)
    rho = max(j for j in range(1, 4) if u[j - 1] + (1 - css[j - 1]) / j > 0)
    theta = (1 - css[rho - 1]) / rho
    xstar = np.maximum(p + theta, 0.0)
    opt = float(((xstar - p) ** 2).sum())
    b = ProgramBuilder()
    x = b.nonneg(3)
    b.eq(x, np.ones(3), 1.0)
    b.add_obj_quad(x, np.ones(3))
    b.add_obj_lin(x, -2.0 * p)
    b.add_obj_const(float(p @ p))
    return b.build(), opt


def random_known(seed: int, n=25, p=10, l=12, qdims=(5, 8, 3)):
    """SOCP with a constructed complementary primal-dual pair.

    Keeps p + m >= n so [G; A] has full column rank (well posed for any
    conic solver)."""
    rng = np.random.default_rng(seed)
    m = l + sum(qdims)
    s = np.zeros(m)
    z = np.zeros(m)
    for i in range(l):
        if rng.random() < 0.5:
            s[i] = rng.uniform(0.5, 2)
        else:
            z[i] = rng.uniform(0.5, 2)
    off = l
    for q in qdims:
        w = rng.normal(size=q - 1)
        if rng.random() < 0.5:
            s[off] = np.linalg.norm(w)
            s[off + 1:off + q] = w
            z[off] = np.linalg.norm(w)
            z[off + 1:off + q] = -w
        else:
            s[off] = np.linalg.norm(w) + rng.uniform(0.5, 1.5)
            s[off + 1:off + q] = w
        off += q
    a = rng.normal(size=(p, n))
    g = rng.normal(size=(m, n))
    xstar = rng.normal(size=n)
    ystar = rng.normal(size=p)
    b_vec = a @ xstar
    h = g @ xstar + s
    c = -(a.T @ ystar + g.T @ z)

    bld = ProgramBuilder()
    x = bld.new_vars(n)
    sv = [bld.nonneg(l)]
    for q in qdims:
        sv.append(bld.soc(q))
    sv = np.concatenate(sv)
    for i in range(p):
        bld.eq(x, a[i], b_vec[i])
    for i in range(m):
        bld.eq(np.append(x, sv[i]), np.append(g[i], 1.0), h[i])
    bld.add_obj_lin(x, c)
    return bld.build(), float(c @ xstar)


def infeasible_lp():
    b = ProgramBuilder()
    x = b.new_vars(1)
    b.add_ineq([x[0]], [-1.0], -1.0)  # x >= 1
    b.add_ineq([x[0]], [1.0], 0.0)    # x <= 0
    b.add_obj_lin([x[0]], [1.0])
    return b.build()


def infeasible_soc():
    # ||(3,4)|| <= t and t <= 4
    b = ProgramBuilder()
    s = b.soc(3)
    b.eq([s[1]], [1.0], 3.0)
    b.eq([s[2]], [1.0], 4.0)
    b.add_ineq([s[0]], [1.0], 4.0)
    b.add_obj_lin([s[0]], [1.0])
    return b.build()


def unbounded_lp():
    b = ProgramBuilder()
    x = b.nonneg(1)
    b.add_obj_lin([x[0]], [-1.0])
    return b.build()


def feasible_suite():
    """(name, program, known optimum) for every feasible regression case."""
    cases = [
        ("lp_scalar", *lp_scalar()),
        ("lp_box", *lp_box()),
        ("lp_diet", *lp_diet()),
        ("soc_norm", *soc_norm()),
        ("soc_ball_lp", *soc_ball_lp()),
        ("rsoc_geomean", *rsoc_geomean()),
        ("rsoc_inverse", *rsoc_inverse()),
        ("qp_unconstrained_min", *qp_unconstrained_min()),
        ("qp_active_bound", *qp_active_bound()),
        ("qp_projection", *qp_projection()),
    ]
    for seed in range(12):
        prog, opt = random_known(seed)
        cases.append((f"random_known_{seed}", prog, opt))
    return cases


def pathological_suite():
    return [
        ("infeasible_lp", infeasible_lp(), "Infeasible"),
        ("infeasible_soc", infeasible_soc(), "Infeasible"),
        ("unbounded_lp", unbounded_lp(), "Unbounded"),
    ]
