"""Primal-dual interior-point solver for linear + second-order cone programs.

Solves the standard form produced by `standard.standard_form`:

    min c'x   s.t.  A x = b,  G x + s = h,  s in K = R+^l x SOC(q1) x ...

using a homogeneous self-dual embedding with Nesterov-Todd scaling and a
Mehrotra predictor-corrector, so primal/dual infeasibility is detected via
the (tau, kappa) ray.  Search directions come from the reduced KKT system

    [ G' W^-2 G   A' ] [dx]   [rx]
    [ A           0  ] [dy] = [ry]

factorised sparsely each iteration (G is a per-cone selector, so G'W^-2G
is block diagonal).  Solves are polished by iterative refinement against
the unreduced 3x3 system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .standard import StandardForm

STATUS_OPTIMAL = "Optimal"
STATUS_PINFEAS = "Infeasible"
STATUS_DINFEAS = "Unbounded"
STATUS_ITER = "IterLimit"

_REG = 1e-11  # static regularisation; refinement targets the exact system
_MIN_STEP = 1e-9


class ScalingBreakdown(RuntimeError):
    """NT scaling undefined: numerical loss of cone interiority."""


@dataclass
class IpmResult:
    status: str
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    tau: float
    kappa: float
    iterations: int
    pres: float
    dres: float
    relgap: float


class ConeOps:
    """Block operations on slack-space vectors for R+^l x SOC blocks."""

    def __init__(self, dims_l: int, dims_q: list[int]):
        self.l = dims_l
        self.q = list(dims_q)
        self.m = dims_l + sum(dims_q)
        self.degree = dims_l + len(dims_q)
        off = dims_l
        self.offsets = []
        for q in self.q:
            self.offsets.append(off)
            off += q

    def identity(self) -> np.ndarray:
        e = np.zeros(self.m)
        e[:self.l] = 1.0
        for off in self.offsets:
            e[off] = 1.0
        return e

    def margin(self, u: np.ndarray) -> float:
        """Distance to the cone boundary (positive strictly inside)."""
        vals = []
        if self.l:
            vals.append(u[:self.l].min())
        for off, q in zip(self.offsets, self.q):
            vals.append(u[off] - np.linalg.norm(u[off + 1:off + q]))
        return float(min(vals)) if vals else np.inf

    def max_step(self, u: np.ndarray, du: np.ndarray) -> float:
        """Largest t with u + t*du on the cone boundary (inf if interior ray)."""
        t = np.inf
        if self.l:
            neg = du[:self.l] < 0
            if neg.any():
                t = min(t, float((-u[:self.l][neg] / du[:self.l][neg]).min()))
        for off, q in zip(self.offsets, self.q):
            u0, u1 = u[off], u[off + 1:off + q]
            d0, d1 = du[off], du[off + 1:off + q]
            # roots of (u0 + t d0)^2 = ||u1 + t d1||^2
            a = d0 * d0 - d1 @ d1
            bq = u0 * d0 - u1 @ d1
            cq = u0 * u0 - u1 @ u1
            if abs(a) < 1e-300:
                if bq < 0 and cq > 0:
                    t = min(t, -cq / (2 * bq))
                continue
            disc = bq * bq - a * cq
            if disc < 0:
                continue
            sq = np.sqrt(disc)
            for root in ((-bq - sq) / a, (-bq + sq) / a):
                if root > 0 and (u0 + root * d0) >= 0:
                    t = min(t, float(root))
        return t

    def jordan(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.empty(self.m)
        out[:self.l] = u[:self.l] * v[:self.l]
        for off, q in zip(self.offsets, self.q):
            u0, u1 = u[off], u[off + 1:off + q]
            v0, v1 = v[off], v[off + 1:off + q]
            out[off] = u0 * v0 + u1 @ v1
            out[off + 1:off + q] = u0 * v1 + v0 * u1
        return out

    def jordan_solve(self, lmbda: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Solve lambda o v = w blockwise."""
        out = np.empty(self.m)
        out[:self.l] = w[:self.l] / lmbda[:self.l]
        for off, q in zip(self.offsets, self.q):
            l0, l1 = lmbda[off], lmbda[off + 1:off + q]
            w0, w1 = w[off], w[off + 1:off + q]
            rho = l0 * l0 - l1 @ l1
            v0 = (l0 * w0 - l1 @ w1) / rho
            out[off] = v0
            out[off + 1:off + q] = (w1 - v0 * l1) / l0
        return out


class NTScaling:
    """Nesterov-Todd scaling blocks W with lambda = W z = W^{-1} s."""

    def __init__(self, ops: ConeOps, s: np.ndarray, z: np.ndarray):
        self.ops = ops
        self.d = np.sqrt(s[:ops.l] / z[:ops.l]) if ops.l else np.zeros(0)
        self.blocks: list[np.ndarray] = []      # dense W per SOC block
        self.blocks_inv: list[np.ndarray] = []
        for off, q in zip(ops.offsets, ops.q):
            sb, zb = s[off:off + q], z[off:off + q]
            det_s = sb[0] ** 2 - sb[1:] @ sb[1:]
            det_z = zb[0] ** 2 - zb[1:] @ zb[1:]
            if det_s <= 0 or det_z <= 0:
                raise ScalingBreakdown("iterate left the cone interior")
            anrm = np.sqrt(det_s)
            bnrm = np.sqrt(det_z)
            sn, zn = sb / anrm, zb / bnrm
            gamma = np.sqrt((1.0 + sn @ zn) / 2.0)
            wbar = np.empty(q)
            wbar[0] = (sn[0] + zn[0]) / (2 * gamma)
            wbar[1:] = (sn[1:] - zn[1:]) / (2 * gamma)
            eta = np.sqrt(anrm / bnrm)
            v = wbar.copy()
            v[0] += 1.0
            v /= np.sqrt(2.0 * (wbar[0] + 1.0))
            jmat = -np.eye(q)
            jmat[0, 0] = 1.0
            w = eta * (2.0 * np.outer(v, v) - jmat)
            winv = (2.0 * np.outer(jmat @ v, jmat @ v) - jmat) / eta
            self.blocks.append(w)
            self.blocks_inv.append(winv)

    def apply(self, u: np.ndarray) -> np.ndarray:
        out = np.empty(self.ops.m)
        out[:self.ops.l] = self.d * u[:self.ops.l]
        for w, off, q in zip(self.blocks, self.ops.offsets, self.ops.q):
            out[off:off + q] = w @ u[off:off + q]
        return out

    def apply_inv(self, u: np.ndarray) -> np.ndarray:
        out = np.empty(self.ops.m)
        out[:self.ops.l] = u[:self.ops.l] / self.d
        for w, off, q in zip(self.blocks_inv, self.ops.offsets, self.ops.q):
            out[off:off + q] = w @ u[off:off + q]
        return out

    def inv_matrix(self) -> sp.csr_matrix:
        """Block-diagonal W^{-1} as a sparse matrix on slack space."""
        mats = []
        if self.ops.l:
            mats.append(sp.diags(1.0 / self.d))
        for w in self.blocks_inv:
            mats.append(sp.csr_matrix(w))
        if not mats:
            return sp.csr_matrix((0, 0))
        return sp.block_diag(mats, format="csr")


def _factor_reduced(sf: StandardForm, gs: sp.csr_matrix):
    n, p = sf.n, sf.p
    reg_n = sp.diags(np.full(n, _REG))
    gtg = (gs.T @ gs).tocsr()
    if p:
        k2 = sp.bmat([[gtg + reg_n, sf.a.T],
                      [sf.a, sp.diags(np.full(p, -_REG))]], format="csc")
    else:
        k2 = (gtg + reg_n).tocsc()
    return spla.splu(k2)


class _KKT:
    """Factorisation of the reduced KKT, working with the scaled dual
    direction dzs = W dz so W is never squared numerically."""

    def __init__(self, sf: StandardForm, winv: sp.csr_matrix):
        self.sf = sf
        self.gs = (winv @ sf.g).tocsr()  # W^{-1} G
        self.winv = winv
        self.lu = _factor_reduced(sf, self.gs)
        self.n, self.p = sf.n, sf.p

    def _solve_reduced(self, rx: np.ndarray, ry: np.ndarray):
        rhs = np.concatenate([rx, ry])
        sol = self.lu.solve(rhs)
        return sol[:self.n], sol[self.n:]

    def solve3(self, f1: np.ndarray, f2: np.ndarray, f3s: np.ndarray,
               refine: int = 2):
        """Solve [0 A' Gs'; A 0 0; Gs 0 -I] (dx, dy, dzs) = (f1, f2, f3s)."""
        sf = self.sf
        dx = np.zeros(sf.n)
        dy = np.zeros(sf.p)
        dzs = np.zeros(sf.m)
        scale = max(1.0, np.abs(f1).max(initial=0.0),
                    np.abs(f2).max(initial=0.0), np.abs(f3s).max(initial=0.0))
        r1, r2, r3 = f1.copy(), f2.copy(), f3s.copy()
        for _ in range(1 + refine):
            ex, ey = self._solve_reduced(r1 + self.gs.T @ r3, r2)
            ez = self.gs @ ex - r3
            dx += ex
            dy += ey
            dzs += ez
            r1 = f1 - (sf.a.T @ dy + self.gs.T @ dzs)
            r2 = f2 - sf.a @ dx
            r3 = f3s - (self.gs @ dx - dzs)
            if max(np.abs(r1).max(initial=0), np.abs(r2).max(initial=0),
                   np.abs(r3).max(initial=0)) < 1e-13 * scale:
                break
        return dx, dy, dzs


def _initial_point(sf: StandardForm, ops: ConeOps):
    kkt = _KKT(sf, sp.identity(sf.m, format="csr"))

    # primal: min ||s|| s.t. Ax = b, Gx + s = h
    x, _, zt = kkt.solve3(np.zeros(sf.n), sf.b, sf.h)
    s = -zt
    mrg = ops.margin(s)
    if mrg < 1e-8:
        s += (1.0 - mrg) * ops.identity()
    # dual: min ||z|| s.t. A'y + G'z + c = 0
    _, y, z = kkt.solve3(-sf.c, np.zeros(sf.p), np.zeros(sf.m))
    mrg = ops.margin(z)
    if mrg < 1e-8:
        z += (1.0 - mrg) * ops.identity()
    return x, y, z, s


def solve_standard(sf: StandardForm, tol: float = 1e-8,
                   max_iter: int = 200) -> IpmResult:
    ops = ConeOps(sf.dims_l, sf.dims_q)
    if sf.m == 0:
        raise ValueError("program has no cone constraints")
    c, a, b, g, h = sf.c, sf.a, sf.b, sf.g, sf.h

    x, y, z, s = _initial_point(sf, ops)
    tau, kappa = 1.0, 1.0

    norm_b = 1.0 + (float(np.abs(b).max()) if b.size else 0.0)
    norm_h = 1.0 + (float(np.abs(h).max()) if h.size else 0.0)
    norm_bh = max(1.0, float(np.sqrt(b @ b + h @ h)))
    norm_c = 1.0 + (float(np.abs(c).max()) if c.size else 0.0)

    best = None
    pres = dres = relgap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        hresx = a.T @ y + g.T @ z + c * tau
        resy = a @ x - b * tau
        resz = s + g @ x - h * tau
        restau = kappa + c @ x + b @ y + h @ z

        gap = s @ z + tau * kappa
        mu = gap / (ops.degree + 1)

        pcost = (c @ x) / tau
        dcost = -(b @ y + h @ z) / tau
        pres = max(float(np.abs(resy).max(initial=0.0)) / norm_b,
                   float(np.abs(resz).max(initial=0.0)) / norm_h) / tau
        dres = float(np.abs(hresx).max(initial=0.0)) / tau / norm_c
        agap = s @ z / tau ** 2
        relgap = agap / (1.0 + abs(pcost))

        if pres < tol and dres < tol and (relgap < tol or agap < tol):
            return IpmResult(STATUS_OPTIMAL, x / tau, y / tau, z / tau,
                             s / tau, tau, kappa, it, pres, dres, relgap)

        # infeasibility certificates from the (tau, kappa) ray
        by_hz = b @ y + h @ z
        if by_hz < -1e-12:
            cert = float(np.linalg.norm(a.T @ y + g.T @ z)) / (-by_hz) / norm_c
            if cert < tol and ops.margin(z) > -tol * max(1.0, np.linalg.norm(z)):
                scl = -1.0 / by_hz
                return IpmResult(STATUS_PINFEAS, x, y * scl, z * scl, s,
                                 tau, kappa, it, pres, dres, relgap)
        ctx = c @ x
        if ctx < -1e-12:
            cert = max(float(np.linalg.norm(a @ x)),
                       float(np.linalg.norm(g @ x + s))) / (-ctx) / norm_bh
            if cert < tol and ops.margin(s) > -tol * max(1.0, np.linalg.norm(s)):
                scl = -1.0 / ctx
                return IpmResult(STATUS_DINFEAS, x * scl, y, z, s * scl,
                                 tau, kappa, it, pres, dres, relgap)

        try:
            scaling = NTScaling(ops, s, z)
            lmbda = scaling.apply(z)
            kkt = _KKT(sf, scaling.inv_matrix())
        except (ScalingBreakdown, RuntimeError):
            break
        # constant column (for the tau elimination)
        u1x, u1y, u1zs = kkt.solve3(-c, b, scaling.apply_inv(h))
        u1z = scaling.apply_inv(u1zs)
        zeta1 = c @ u1x + b @ u1y + h @ u1z

        lam2 = ops.jordan(lmbda, lmbda)
        wiresz = scaling.apply_inv(resz)

        def direction(sigma: float, ds_aff=None, dz_aff=None,
                      dtau_aff=0.0, dkappa_aff=0.0):
            psi = lam2 - sigma * mu * ops.identity()
            psi_tau = tau * kappa - sigma * mu
            if ds_aff is not None:
                psi = psi + ops.jordan(scaling.apply_inv(ds_aff),
                                       scaling.apply(dz_aff))
                psi_tau += dtau_aff * dkappa_aff
            fac = 1.0 - sigma
            lpsi = ops.jordan_solve(lmbda, psi)
            f1 = -fac * hresx
            f2 = -fac * resy
            f3s = -fac * wiresz + lpsi
            u2x, u2y, u2zs = kkt.solve3(f1, f2, f3s)
            u2z = scaling.apply_inv(u2zs)
            zeta2 = c @ u2x + b @ u2y + h @ u2z
            denom = kappa - tau * zeta1
            dtau = (tau * (fac * restau + zeta2) - psi_tau) / denom \
                if abs(denom) > 1e-300 else 0.0
            dx = u2x + dtau * u1x
            dy = u2y + dtau * u1y
            dz = u2z + dtau * u1z
            ds = -scaling.apply(lpsi + u2zs + dtau * u1zs)
            dkappa = (-psi_tau - kappa * dtau) / tau
            return dx, dy, dz, ds, dtau, dkappa

        dxa, dya, dza, dsa, dta, dka = direction(0.0)
        step_s = ops.max_step(s, dsa)
        step_z = ops.max_step(z, dza)
        step_t = -tau / dta if dta < 0 else np.inf
        step_k = -kappa / dka if dka < 0 else np.inf
        alpha_aff = min(1.0, step_s, step_z, step_t, step_k)

        gap_aff = ((s + alpha_aff * dsa) @ (z + alpha_aff * dza)
                   + (tau + alpha_aff * dta) * (kappa + alpha_aff * dka))
        sigma = float(np.clip((gap_aff / gap) ** 3, 0.0, 1.0))

        dx, dy, dz, ds, dt, dk = direction(sigma, dsa, dza, dta, dka)
        step_s = ops.max_step(s, ds)
        step_z = ops.max_step(z, dz)
        step_t = -tau / dt if dt < 0 else np.inf
        step_k = -kappa / dk if dk < 0 else np.inf
        alpha = min(1.0, 0.99 * min(step_s, step_z, step_t, step_k))
        if alpha < _MIN_STEP:
            break

        x += alpha * dx
        y += alpha * dy
        z += alpha * dz
        s += alpha * ds
        tau += alpha * dt
        kappa += alpha * dk
        best = (x.copy(), y.copy(), z.copy(), s.copy(), tau, kappa)

    if best is None:
        best = (x, y, z, s, tau, kappa)
    bx, byv, bz, bs, btau, bkappa = best
    return IpmResult(STATUS_ITER, bx / btau, byv / btau, bz / btau,
                     bs / btau, btau, bkappa, it, pres, dres, relgap)
