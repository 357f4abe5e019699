"""Moment-optimization program: deterministic conic program over the first
and second moments of controls, energy states and network variables.

Structure per control step k (rectangle rule, step dt):

  policy mean      u~_k = u0_k + K_w xi~_k
  control std      u^_k,i >= || N_k' K_i ||          N_k N_k' = M^xixi_k
  EU mean          e~_{k+1} = phi e~_k + gamma beta u~_k   (exact hold)
  EU std           e^_k,i >= || Ne_k,i' K_eu,i ||     per-EU eta block
  network mean     x~_k = A_y y~_k + A_xi xi~_k + A_d d_k + A_e e~_k + A_u u~_k
  network std      x^_k,r >= || (L N^aug_k)_r ||      lossless sensitivities
  branch relation  l~ v~ >= P~^2 + Q~^2 + P^^2 + Q^^2 (rotated cone)
  bounds           mean +- kappa * std within raw bounds; polygon rows with
                   entrywise |C| on the std terms.

The K gain is one matrix per recompute window.  With several windows the
energy-deviation map uses the active window's gain against the full
auxiliary state (exact for a single window).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .conic import ProgramBuilder, ConicProgram, Solution
from .grid import CompactNetwork, GridModel, InjectionProfile, LinearSensitivity, build_lindistflow
from .sde import EUParams, MomentTrajectory

KAPPA_DR = "dr"
KAPPA_GAUSS = "gauss"

_CHOL_SHIFT = 1e-10
_INTERMEDIATE_MIN_ROWS = 50  # use K-product intermediates on larger grids


class MoError(ValueError):
    pass


@dataclass
class DisturbanceSpec:
    """Case-file description of the Ito disturbance (see caseio)."""
    family: str
    tau: float
    sigma: np.ndarray
    mean0: np.ndarray | None = None
    cov0: np.ndarray | None = None
    a_drift: np.ndarray | None = None
    b_drift: np.ndarray | None = None

    def build(self):
        from .sde import ItoModel
        return ItoModel(family=self.family, sigma=self.sigma, tau=self.tau,
                        a_drift=self.a_drift, b_drift=self.b_drift,
                        mean0=self.mean0, cov0=self.cov0)


@dataclass
class CaseConfig:
    name: str
    horizon: int
    dt: float                      # hours
    window: int                    # gain recompute window, in steps
    gamma: float
    kappa_rule: str
    r_u: np.ndarray                # (n_u,) diagonal control weight
    r_v: float                     # voltage deviation weight
    r_e: np.ndarray                # (n_e,) terminal energy weight
    price: np.ndarray              # (N,) $/kWh at the root
    base_mva: float = 10.0
    base_kv: float = 10.0
    disturbance: DisturbanceSpec | None = None

    def __post_init__(self):
        self.r_u = np.atleast_1d(np.asarray(self.r_u, dtype=float))
        self.r_e = np.atleast_1d(np.asarray(self.r_e, dtype=float))
        self.price = np.asarray(self.price, dtype=float)
        if self.horizon < 1 or self.dt <= 0:
            raise MoError("horizon >= 1 and dt > 0 required")
        if not (0.5 <= self.gamma < 1.0):
            raise MoError("gamma must lie in [0.5, 1)")
        if self.kappa_rule not in (KAPPA_DR, KAPPA_GAUSS):
            raise MoError(f"unknown kappa rule {self.kappa_rule!r}")
        if np.any(self.r_u < 0) or self.r_v < 0 or np.any(self.r_e < 0):
            raise MoError("weights must be nonnegative")
        if self.price.shape != (self.horizon,):
            raise MoError("price sequence must have one entry per step")
        if self.window < 1:
            self.window = self.horizon

    @property
    def n_windows(self) -> int:
        return -(-self.horizon // self.window)

    def window_of(self, k: int) -> int:
        return min(k // self.window, self.n_windows - 1)

    def price_scale(self) -> np.ndarray:
        """$ per (p.u. power) per step at the root: lambda * S_base * dt."""
        return self.price * self.base_mva * 1e3 * self.dt


@dataclass
class AffinePolicy:
    u0: np.ndarray        # (N, n_u)
    gains: np.ndarray     # (n_windows, n_u, n_xi)
    window: int

    def gain_at(self, k: int) -> np.ndarray:
        w = min(k // self.window, self.gains.shape[0] - 1)
        return self.gains[w]

    def control(self, k: int, xi: np.ndarray) -> np.ndarray:
        """u_k = u0_k + K xi_k; xi may carry leading batch dims."""
        return self.u0[k] + xi @ self.gain_at(k).T

    @property
    def horizon(self) -> int:
        return self.u0.shape[0]

    @property
    def n_u(self) -> int:
        return self.u0.shape[1]


@dataclass
class MomentVariables:
    u_mean: np.ndarray
    u_std: np.ndarray
    e_mean: np.ndarray
    e_std: np.ndarray
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray


def kappa(gamma: float, rule: str = KAPPA_DR) -> float:
    """Safety multiplier for one-sided chance constraints."""
    if not (0.5 <= gamma < 1.0):
        raise MoError("gamma must lie in [0.5, 1)")
    if rule == KAPPA_DR:
        return math.sqrt(gamma / (1.0 - gamma))
    if rule == KAPPA_GAUSS:
        return _normal_quantile(gamma)
    raise MoError(f"unknown kappa rule {rule!r}")


def _normal_quantile(p: float) -> float:
    """Acklam's rational approximation with one Halley polish step."""
    a = (-3.969683028665376e+01, 2.209460984245205e+02,
         -2.759285104469687e+02, 1.383577518672690e+02,
         -3.066479806614716e+01, 2.506628277459239e+00)
    b = (-5.447609879822406e+01, 1.615858368580409e+02,
         -1.556989798598866e+02, 6.680131188771972e+01,
         -1.328068155288572e+01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01,
         -2.400758277161838e+00, -2.549732539343734e+00,
         4.374664141464968e+00, 2.938163982698783e+00)
    d = (7.784695709041462e-03, 3.224671290700398e-01,
         2.445134137142996e+00, 3.754408661907416e+00)
    plow, phigh = 0.02425, 1 - 0.02425
    if p <= 0.0 or p >= 1.0:
        raise MoError("quantile argument must be in (0, 1)")
    if p < plow:
        q = math.sqrt(-2 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q
             + c[5]) / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    elif p <= phigh:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r
             + a[5]) * q / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r
                             + b[4]) * r + 1)
    else:
        q = math.sqrt(-2 * math.log(1 - p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q
              + c[5]) / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    # Halley refinement against the exact cdf
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


def _chol_factor(m: np.ndarray) -> np.ndarray:
    """Cholesky factor of a PSD matrix; empty for the zero matrix,
    diagonal shift when semidefinite."""
    m = np.asarray(m, dtype=float)
    if m.size == 0 or not np.any(m):
        return np.zeros((m.shape[0], 0))
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return np.linalg.cholesky(m + _CHOL_SHIFT * np.eye(m.shape[0]))


@dataclass
class _Layout:
    """Variable indices of the assembled program."""
    u0: np.ndarray
    gains: list  # per window: (n_u, n_xi) index array or None
    u_mean: np.ndarray
    u_hat: np.ndarray | None
    e_mean: np.ndarray
    e_hat: np.ndarray | None
    x_mean: np.ndarray
    x_hat: np.ndarray | None
    y_mean: np.ndarray


@dataclass
class MoProgram:
    """Conic program plus everything needed to interpret its solution."""
    prog: ConicProgram
    layout: _Layout
    cfg: CaseConfig
    net: CompactNetwork
    lin: LinearSensitivity
    moments: MomentTrajectory | None
    eu: EUParams
    profile: InjectionProfile
    with_gain: bool
    kappa_value: float

    def size_summary(self) -> dict:
        out = self.prog.size_summary()
        out["gain_entries"] = 0 if not self.with_gain else sum(
            g.size for g in self.layout.gains)
        return out


def _zero_moments(moments: MomentTrajectory | None) -> bool:
    return moments is None or not np.any(moments.cov)


def build_mo(net: CompactNetwork, moments: MomentTrajectory | None,
             profile: InjectionProfile, eu: EUParams, cfg: CaseConfig,
             fix_gain_zero: bool = False) -> MoProgram:
    """Assemble the moment program (Table-I constraint set).

    With `fix_gain_zero` or identically-zero moments the program collapses
    to the deterministic control problem (no gain block, no std variables).
    """
    grid = net.grid
    n_src, n_e = grid.n_source, grid.n_eu
    n_u = n_src + n_e
    n_xi = n_src
    n_x, n_br, n_bus = net.n_x, grid.n_branch, grid.n_bus
    N = cfg.horizon
    dt = cfg.dt
    if cfg.r_u.shape == (1,) and n_u > 1:
        cfg.r_u = np.full(n_u, cfg.r_u[0])
    if cfg.r_e.shape == (1,) and n_e > 1:
        cfg.r_e = np.full(n_e, cfg.r_e[0])
    if cfg.r_u.shape != (n_u,):
        raise MoError(f"r_u must have {n_u} entries")
    if n_e and cfg.r_e.shape != (n_e,):
        raise MoError(f"r_e must have {n_e} entries")
    profile.validate(grid, N)
    deterministic = fix_gain_zero or _zero_moments(moments)
    if not deterministic and moments.horizon < N:
        raise MoError("moment trajectory shorter than the horizon")
    if not deterministic and (moments.n_xi != n_xi or moments.n_eu != n_e):
        raise MoError("moment trajectory dimensions do not match the case")

    if moments is not None:
        xi_mean = moments.mean
    else:
        xi_mean = np.zeros((N + 1, n_xi))
    kap = kappa(cfg.gamma, cfg.kappa_rule)
    lin = build_lindistflow(grid)

    b = ProgramBuilder()
    u0 = b.new_vars(N * n_u).reshape(N, n_u)
    gains = []
    if not deterministic:
        for _ in range(cfg.n_windows):
            gains.append(b.new_vars(n_u * n_xi).reshape(n_u, n_xi))
    u_mean = b.new_vars(N * n_u).reshape(N, n_u)
    e_mean = b.new_vars((N + 1) * n_e).reshape(N + 1, n_e) if n_e else \
        np.zeros((N + 1, 0), dtype=int)
    x_mean = b.new_vars(N * n_x).reshape(N, n_x)

    use_inter = not deterministic and n_x >= _INTERMEDIATE_MIN_ROWS

    # policy first moment: u~ = u0 + K xi~
    for k in range(N):
        for a_row in range(n_u):
            cols = [u_mean[k, a_row], u0[k, a_row]]
            vals = [1.0, -1.0]
            if not deterministic:
                kw = gains[cfg.window_of(k)]
                nzb = np.nonzero(xi_mean[k])[0]
                cols.extend(kw[a_row, nzb].tolist())
                vals.extend((-xi_mean[k, nzb]).tolist())
            b.eq(cols, vals, 0.0)

    # control std cones
    u_hat = None
    if not deterministic:
        u_hat = np.empty((N, n_u), dtype=int)
        for k in range(N):
            nfac = _chol_factor(moments.m_xi(k))
            for a_row in range(n_u):
                if nfac.shape[1] == 0:
                    u_hat[k, a_row] = b.nonneg(1)[0]
                    continue
                kw = gains[cfg.window_of(k)]
                tails = [(kw[a_row], nfac[:, c], 0.0)
                         for c in range(nfac.shape[1])]
                u_hat[k, a_row] = b.soc_epigraph(tails)[0]

    # EU mean dynamics (exact hold) and initial state
    phi, gam = eu.hold(dt)
    e_init = np.array([e.soc_init for e in grid.eus])
    for i in range(n_e):
        b.eq([e_mean[0, i]], [1.0], e_init[i])
        for k in range(N):
            b.eq([e_mean[k + 1, i], e_mean[k, i], u_mean[k, n_src + i]],
                 [1.0, -phi[i], -gam[i] * eu.beta[i]], 0.0)

    # EU std cones (per-EU eta block)
    e_hat = None
    if not deterministic and n_e:
        e_hat = np.empty((N + 1, n_e), dtype=int)
        for k in range(N + 1):
            for i in range(n_e):
                nfac = _chol_factor(moments.m_eta_block(k, i))
                if nfac.shape[1] == 0:
                    e_hat[k, i] = b.nonneg(1)[0]
                    continue
                kw = gains[cfg.window_of(min(k, N - 1))]
                tails = [(kw[n_src + i], nfac[:, c], 0.0)
                         for c in range(nfac.shape[1])]
                e_hat[k, i] = b.soc_epigraph(tails)[0]

    # network std cones from the lossless sensitivities
    x_hat = None
    a_e_zero = not np.any(lin.a_e)
    if not deterministic:
        x_hat = np.empty((N, n_x), dtype=int)
        for k in range(N):
            nfac = _chol_factor(moments.cov[k])
            ncols = nfac.shape[1]
            if ncols == 0:
                for r in range(n_x):
                    x_hat[k, r] = b.nonneg(1)[0]
                continue
            n_rows_xi = nfac[:n_xi, :]
            const_part = lin.a_xi @ n_rows_xi          # (n_x, ncols)
            kw = gains[cfg.window_of(k)]
            if use_inter:
                # intermediates Y[a, c] = (K Nxi)[a, c]
                yv = b.new_vars(n_u * ncols).reshape(n_u, ncols)
                for a_row in range(n_u):
                    for c in range(ncols):
                        b.eq(np.append(kw[a_row], yv[a_row, c]),
                             np.append(n_rows_xi[:, c], -1.0), 0.0)
            zv = None
            if not a_e_zero and n_e:
                zv = b.new_vars(n_e * ncols).reshape(n_e, ncols)
                for i in range(n_e):
                    blk = nfac[n_xi * (1 + i):n_xi * (2 + i), :]
                    for c in range(ncols):
                        b.eq(np.append(kw[n_src + i], zv[i, c]),
                             np.append(blk[:, c], -1.0), 0.0)
            for r in range(n_x):
                au_row = lin.a_u[r]
                nz = np.nonzero(au_row)[0]
                tails = []
                for c in range(ncols):
                    if use_inter:
                        cols = yv[nz, c]
                        vals = au_row[nz]
                    else:
                        cols = np.concatenate([kw[a] for a in nz]) \
                            if nz.size else np.zeros(0, dtype=int)
                        vals = np.concatenate(
                            [au_row[a] * n_rows_xi[:, c] for a in nz]) \
                            if nz.size else np.zeros(0)
                    if zv is not None:
                        ae_nz = np.nonzero(lin.a_e[r])[0]
                        cols = np.append(cols, zv[ae_nz, c])
                        vals = np.append(vals, lin.a_e[r, ae_nz])
                    tails.append((cols, vals, const_part[r, c]))
                x_hat[k, r] = b.soc_epigraph(tails)[0]

    # branch relation cones: the mean current variable heads a rotated cone
    # (u = l~, v = v~/2, w = (2 components or 4 with stds) / sqrt-2 scaling
    # follows from 2uv >= ||w||^2 = l~ v~ >= sum of squares)
    y_mean = np.empty((N, n_br), dtype=int)
    idx = {bus.id: kpos for kpos, bus in enumerate(grid.buses)}
    for k in range(N):
        for br_pos, br in enumerate(grid.branches):
            wdim = 2 if deterministic else 4
            cone = b.rsoc(2 + wdim)
            y_mean[k, br_pos] = cone[0]
            i_bus = idx[br.from_bus]
            b.eq([cone[1], x_mean[k, grid.v_row(i_bus)]], [1.0, -0.5], 0.0)
            b.eq([cone[2], x_mean[k, grid.p_row(br_pos)]], [1.0, -1.0], 0.0)
            b.eq([cone[3], x_mean[k, grid.q_row(br_pos)]], [1.0, -1.0], 0.0)
            if not deterministic:
                b.eq([cone[4], x_hat[k, grid.p_row(br_pos)]],
                     [1.0, -1.0], 0.0)
                b.eq([cone[5], x_hat[k, grid.q_row(br_pos)]],
                     [1.0, -1.0], 0.0)

    # network first moment: x~ = A_y y~ + A_e e~ + A_u u~ + const(xi~, d)
    eu_pos = [idx[e.bus] for e in grid.eus]
    for k in range(N):
        dvec = profile.d_vector(k)
        const = net.a_d @ dvec + net.a_xi @ xi_mean[k]
        for r in range(n_x):
            cols = [x_mean[k, r]]
            vals = [1.0]
            ynz = np.nonzero(net.a_y[r])[0]
            cols.extend(y_mean[k, ynz].tolist())
            vals.extend((-net.a_y[r, ynz]).tolist())
            unz = np.nonzero(net.a_u[r])[0]
            cols.extend(u_mean[k, unz].tolist())
            vals.extend((-net.a_u[r, unz]).tolist())
            if n_e:
                enz = np.nonzero(net.a_e[r])[0]
                cols.extend(e_mean[k, enz].tolist())
                vals.extend((-net.a_e[r, enz]).tolist())
            b.eq(cols, vals, const[r])

    # bounds: mean +- kappa * std within the raw bounds
    v_lo, v_hi = grid.v_bounds()
    l_hi = grid.l_bounds()
    root_pos = idx[grid.root]
    for k in range(N):
        for bus_pos in range(n_bus):
            if bus_pos == root_pos:
                continue  # root voltage is pinned by the network map
            r = grid.v_row(bus_pos)
            if np.isfinite(v_hi[bus_pos]):
                cols = [x_mean[k, r]]
                vals = [1.0]
                if x_hat is not None:
                    cols.append(x_hat[k, r])
                    vals.append(kap)
                b.add_ineq(cols, vals, v_hi[bus_pos])
            if np.isfinite(v_lo[bus_pos]):
                cols = [x_mean[k, r]]
                vals = [-1.0]
                if x_hat is not None:
                    cols.append(x_hat[k, r])
                    vals.append(kap)
                b.add_ineq(cols, vals, -v_lo[bus_pos])
        for br_pos in range(n_br):
            if np.isfinite(l_hi[br_pos]):
                b.add_ineq([y_mean[k, br_pos]], [1.0], l_hi[br_pos])
        # (the rotated cone already enforces l~ >= 0)
        for i in range(n_e):
            e_unit = grid.eus[i]
            cols = [e_mean[k + 1, i]]
            vals = [1.0]
            if e_hat is not None:
                cols.append(e_hat[k + 1, i])
                vals.append(kap)
            b.add_ineq(cols, vals, e_unit.soc_max)
            cols = [e_mean[k + 1, i]]
            vals = [-1.0]
            if e_hat is not None:
                cols.append(e_hat[k + 1, i])
                vals.append(kap)
            b.add_ineq(cols, vals, -e_unit.soc_min)
        # u-space rows: capacity polygons + EU power bounds
        src_pos = [idx[s.bus] for s in grid.sources]
        p_pred_src = profile.p_pred[k][src_pos] if n_src else np.zeros(0)
        c_u, c_xi, d_rhs = net.capacity_rows(p_pred_src)
        xi_hat_k = moments.xi_std(k) if not deterministic else np.zeros(n_xi)
        for row in range(c_u.shape[0]):
            rhs = d_rhs[row] - c_xi[row] @ xi_mean[k] \
                - kap * (np.abs(c_xi[row]) @ xi_hat_k)
            unz = np.nonzero(c_u[row])[0]
            cols = u_mean[k, unz].tolist()
            vals = c_u[row, unz].tolist()
            if u_hat is not None:
                cols.extend(u_hat[k, unz].tolist())
                vals.extend((kap * np.abs(c_u[row, unz])).tolist())
            b.add_ineq(cols, vals, rhs)

    # objective: discretised cost plus terminal energy penalty
    price_step = cfg.price_scale()  # (N,) $ per pu per step
    root_br = grid.root_branches()
    root_bus = grid.buses[root_pos]
    for k in range(N):
        for rb in root_br:
            b.add_obj_lin([x_mean[k, grid.p_row(rb)]], [price_step[k]])
        if root_bus.g:
            b.add_obj_const(price_step[k] * root_bus.g * grid.v0)
        if cfg.r_v > 0:
            w = cfg.r_v * dt
            vcols = [x_mean[k, grid.v_row(p)] for p in range(n_bus)]
            b.add_obj_quad(vcols, w)
            b.add_obj_lin(vcols, -2.0 * w)
            b.add_obj_const(w * n_bus)
            if x_hat is not None:
                b.add_obj_quad([x_hat[k, grid.v_row(p)]
                                for p in range(n_bus)], w)
        b.add_obj_quad(u_mean[k], cfg.r_u * dt)
        if u_hat is not None:
            b.add_obj_quad(u_hat[k], cfg.r_u * dt)
    if n_e:
        b.add_obj_quad(e_mean[N], cfg.r_e)
        if e_hat is not None:
            b.add_obj_quad(e_hat[N], cfg.r_e)
    # tiny linear pressure pins std variables at their tight values along
    # otherwise-flat directions (quadratic penalties have no gradient at 0)
    if not deterministic:
        eps = 1e-3 * max(1.0, float(np.abs(price_step).max()))
        b.add_obj_lin(u_hat.ravel(), eps)
        b.add_obj_lin(x_hat.ravel(), eps)
        if e_hat is not None:
            b.add_obj_lin(e_hat.ravel(), eps)

    layout = _Layout(u0=u0, gains=gains, u_mean=u_mean, u_hat=u_hat,
                     e_mean=e_mean, e_hat=e_hat, x_mean=x_mean,
                     x_hat=x_hat, y_mean=y_mean)
    return MoProgram(prog=b.build(), layout=layout, cfg=cfg, net=net,
                     lin=lin, moments=moments, eu=eu, profile=profile,
                     with_gain=not deterministic, kappa_value=kap)


def moment_variables(mop: MoProgram, sol: Solution) -> MomentVariables:
    x = sol.x
    lay = mop.layout
    take = lambda idx: x[idx] if idx is not None else None
    zeros_like = lambda idx: np.zeros(idx.shape)
    return MomentVariables(
        u_mean=x[lay.u_mean],
        u_std=take(lay.u_hat) if lay.u_hat is not None
        else zeros_like(lay.u_mean),
        e_mean=x[lay.e_mean] if lay.e_mean.size else np.zeros(lay.e_mean.shape),
        e_std=take(lay.e_hat) if lay.e_hat is not None
        else np.zeros(lay.e_mean.shape),
        x_mean=x[lay.x_mean],
        x_std=take(lay.x_hat) if lay.x_hat is not None
        else np.zeros(lay.x_mean.shape),
        y_mean=x[lay.y_mean],
    )


def extract_policy(mop: MoProgram, sol: Solution,
                   check_tol: float = 1e-8) -> AffinePolicy:
    """Pull (u0, K) out of an optimal solution and verify the first-moment
    policy identity u~ = u0 + K xi~."""
    if not sol.optimal:
        raise MoError(f"cannot extract a policy from status {sol.status}")
    lay = mop.layout
    cfg = mop.cfg
    n_u = lay.u0.shape[1]
    n_xi = mop.net.grid.n_source
    u0 = sol.x[lay.u0]
    if mop.with_gain:
        gains = np.stack([sol.x[g] for g in lay.gains])
    else:
        gains = np.zeros((cfg.n_windows, n_u, n_xi))
    xi_mean = mop.moments.mean if mop.moments is not None else \
        np.zeros((cfg.horizon + 1, n_xi))
    u_mean = sol.x[lay.u_mean]
    for k in range(cfg.horizon):
        replay = u0[k] + gains[cfg.window_of(k)] @ xi_mean[k]
        err = np.abs(replay - u_mean[k]).max()
        if err > check_tol:
            raise MoError(f"policy replay mismatch at step {k}: {err:.2e}")
    return AffinePolicy(u0=u0, gains=gains, window=cfg.window)


def relaxation_residuals(mop: MoProgram, sol: Solution) -> dict:
    """lhs - rhs of every relaxed equality at the solution.

    Keys: control_std, energy_std, network_std, branch_product; values are
    dicts with max/mean over all relaxed rows of that family.
    """
    if sol.x is None:
        raise MoError("solution carries no primal point")
    grid = mop.net.grid
    cfg = mop.cfg
    lay = mop.layout
    mv = moment_variables(mop, sol)
    n_src, n_e = grid.n_source, grid.n_eu
    out = {}

    def summary(vals):
        arr = np.asarray(vals, dtype=float)
        return {"max": float(arr.max(initial=0.0)),
                "mean": float(arr.mean()) if arr.size else 0.0,
                "count": int(arr.size)}

    if mop.with_gain:
        pol = extract_policy(mop, sol)
        res_u, res_e, res_x = [], [], []
        for k in range(cfg.horizon):
            kw = pol.gains[cfg.window_of(k)]
            nfac = _chol_factor(mop.moments.m_xi(k))
            target = np.linalg.norm(kw @ nfac, axis=1) \
                if nfac.shape[1] else np.zeros(kw.shape[0])
            res_u.extend(mv.u_std[k] - target)
            nfull = _chol_factor(mop.moments.cov[k])
            if nfull.shape[1]:
                lmat = mop.lin.a_xi + mop.lin.a_u @ kw
                ln = lmat @ nfull[:grid.n_source]
                if np.any(mop.lin.a_e) and n_e:
                    for i in range(n_e):
                        blk = nfull[n_src * (1 + i):n_src * (2 + i)]
                        ln = ln + np.outer(mop.lin.a_e[:, i],
                                           kw[n_src + i] @ blk)
                target_x = np.linalg.norm(ln, axis=1)
            else:
                target_x = np.zeros(mop.net.n_x)
            res_x.extend(mv.x_std[k] - target_x)
        for k in range(cfg.horizon + 1):
            kw = pol.gains[cfg.window_of(min(k, cfg.horizon - 1))]
            for i in range(n_e):
                nfac = _chol_factor(mop.moments.m_eta_block(k, i))
                target = np.linalg.norm(kw[n_src + i] @ nfac) \
                    if nfac.shape[1] else 0.0
                res_e.append(mv.e_std[k, i] - target)
        out["control_std"] = summary(res_u)
        out["energy_std"] = summary(res_e)
        out["network_std"] = summary(res_x)

    res_b = []
    idx = {bus.id: kpos for kpos, bus in enumerate(grid.buses)}
    for k in range(cfg.horizon):
        for br_pos, br in enumerate(grid.branches):
            i_bus = idx[br.from_bus]
            lhs = mv.y_mean[k, br_pos] * mv.x_mean[k, grid.v_row(i_bus)]
            rhs = (mv.x_mean[k, grid.p_row(br_pos)] ** 2
                   + mv.x_mean[k, grid.q_row(br_pos)] ** 2
                   + mv.x_std[k, grid.p_row(br_pos)] ** 2
                   + mv.x_std[k, grid.q_row(br_pos)] ** 2)
            res_b.append(lhs - rhs)
    out["branch_product"] = summary(res_b)
    return out
