"""Radial network model: exact distFlow, compact matrix reduction,
lossless linearisation, capacity polygons and a per-scenario power flow.

Conventions (all per unit):
  - v is the *square* voltage magnitude, l the *square* branch current.
  - x stacks [P per branch, Q per branch, v per bus]; y stacks l per branch.
  - d stacks [p_pred per bus, p_load per bus, q_load per bus, 1]; the
    trailing constant carries the fixed root voltage through the affine map.
  - u stacks [q of each stochastic source, p of each energy unit].
  - Injections are positive into the network (generation positive).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class GridError(ValueError):
    """Invalid grid data (named offender in the message)."""


class PowerFlowError(RuntimeError):
    """Backward/forward sweep failed to converge."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


@dataclass(frozen=True)
class Bus:
    id: int
    g: float = 0.0
    b: float = 0.0
    v_min: float = 0.8
    v_max: float = 1.21


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    l_max: float = np.inf


@dataclass(frozen=True)
class Source:
    """Stochastic generator: active power uncertain, reactive controllable."""
    bus: int
    s_max: float
    n_polygon: int = 12


@dataclass(frozen=True)
class EnergyUnit:
    bus: int
    p_min: float
    p_max: float
    soc_min: float
    soc_max: float
    soc_init: float = 0.0
    alpha: float = 0.0  # dissipation, 1/h
    beta: float = 1.0   # charging efficiency


@dataclass(frozen=True)
class GridModel:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    sources: tuple[Source, ...] = ()
    eus: tuple[EnergyUnit, ...] = ()
    root: int = 0
    v0: float = 1.0  # fixed square voltage at the root

    def __post_init__(self):
        self.validate()

    # -- structure ---------------------------------------------------------

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_branch(self) -> int:
        return len(self.branches)

    @property
    def n_source(self) -> int:
        return len(self.sources)

    @property
    def n_eu(self) -> int:
        return len(self.eus)

    def bus_pos(self, bus_id: int) -> int:
        return self._bus_index()[bus_id]

    def _bus_index(self) -> dict:
        idx = getattr(self, "_bus_index_cache", None)
        if idx is None:
            idx = {b.id: k for k, b in enumerate(self.buses)}
            object.__setattr__(self, "_bus_index_cache", idx)
        return idx

    def parent_branch(self) -> np.ndarray:
        """Branch position feeding each bus (-1 for the root)."""
        arr = getattr(self, "_parent_cache", None)
        if arr is None:
            arr = np.full(self.n_bus, -1, dtype=int)
            idx = self._bus_index()
            for k, br in enumerate(self.branches):
                arr[idx[br.to_bus]] = k
            object.__setattr__(self, "_parent_cache", arr)
        return arr

    def topo_levels(self) -> list[np.ndarray]:
        """Branch positions grouped by depth, shallow to deep."""
        levels = getattr(self, "_levels_cache", None)
        if levels is None:
            idx = self._bus_index()
            depth = {self.root: 0}
            remaining = list(range(self.n_branch))
            by_depth: dict[int, list[int]] = {}
            while remaining:
                progressed = False
                rest = []
                for k in remaining:
                    br = self.branches[k]
                    if br.from_bus in depth:
                        d = depth[br.from_bus] + 1
                        depth[br.to_bus] = d
                        by_depth.setdefault(d, []).append(k)
                        progressed = True
                    else:
                        rest.append(k)
                remaining = rest
                if not progressed:
                    raise GridError("branches disconnected from the root: "
                                    f"{[self.branches[k] for k in remaining]}")
            levels = [np.array(by_depth[d], dtype=int)
                      for d in sorted(by_depth)]
            object.__setattr__(self, "_levels_cache", levels)
        return levels

    def validate(self) -> None:
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise GridError("duplicate bus ids")
        idx = {b: k for k, b in enumerate(ids)}
        if self.root not in idx:
            raise GridError(f"root bus {self.root} not in bus list")
        if len(self.branches) != self.n_bus - 1:
            raise GridError(
                f"{len(self.branches)} branches for {self.n_bus} buses: "
                "not a spanning tree")
        seen_to = set()
        for br in self.branches:
            if br.from_bus not in idx or br.to_bus not in idx:
                raise GridError(f"branch {br.from_bus}->{br.to_bus} "
                                "references unknown bus")
            if br.r <= 0 or br.x <= 0:
                raise GridError(f"branch {br.from_bus}->{br.to_bus}: "
                                "impedances must be positive")
            if br.to_bus == self.root:
                raise GridError(f"branch {br.from_bus}->{br.to_bus} "
                                "points into the root")
            if br.to_bus in seen_to:
                raise GridError(f"bus {br.to_bus} fed by two branches "
                                "(cycle or reconvergence)")
            seen_to.add(br.to_bus)
            if br.l_max <= 0:
                raise GridError(f"branch {br.from_bus}->{br.to_bus}: "
                                "l_max must be positive")
        for bus in self.buses:
            if not (0 < bus.v_min <= bus.v_max):
                raise GridError(f"bus {bus.id}: bad voltage bounds "
                                f"[{bus.v_min}, {bus.v_max}]")
        for s in self.sources:
            if s.bus not in idx:
                raise GridError(f"source at unknown bus {s.bus}")
            if s.s_max <= 0:
                raise GridError(f"source at bus {s.bus}: s_max must be > 0")
        for e in self.eus:
            if e.bus not in idx:
                raise GridError(f"energy unit at unknown bus {e.bus}")
            if e.p_min > e.p_max or e.soc_min > e.soc_max:
                raise GridError(f"energy unit at bus {e.bus}: bounds "
                                "out of order")
            if not (e.soc_min <= e.soc_init <= e.soc_max):
                raise GridError(f"energy unit at bus {e.bus}: initial "
                                "energy outside bounds")
            if e.alpha < 0 or e.beta <= 0:
                raise GridError(f"energy unit at bus {e.bus}: alpha >= 0 "
                                "and beta > 0 required")
        # reachability (tree rooted at root) is proven by topo_levels
        self.topo_levels()

    # -- x-vector layout -----------------------------------------------------

    @property
    def n_x(self) -> int:
        return 2 * self.n_branch + self.n_bus

    def p_row(self, branch_pos: int) -> int:
        return branch_pos

    def q_row(self, branch_pos: int) -> int:
        return self.n_branch + branch_pos

    def v_row(self, bus_pos: int) -> int:
        return 2 * self.n_branch + bus_pos

    def root_branches(self) -> np.ndarray:
        return np.array([k for k, br in enumerate(self.branches)
                         if br.from_bus == self.root], dtype=int)

    def v_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([b.v_min for b in self.buses])
        hi = np.array([b.v_max for b in self.buses])
        return lo, hi

    def l_bounds(self) -> np.ndarray:
        return np.array([br.l_max for br in self.branches])


@dataclass
class InjectionProfile:
    """Per-step fixed injections (p.u.); arrays are (N, n_bus)."""
    p_pred: np.ndarray
    p_load: np.ndarray
    q_load: np.ndarray

    @property
    def horizon(self) -> int:
        return self.p_pred.shape[0]

    def validate(self, grid: GridModel, horizon: int) -> None:
        for name in ("p_pred", "p_load", "q_load"):
            arr = getattr(self, name)
            if arr.shape != (horizon, grid.n_bus):
                raise GridError(f"profile {name}: shape {arr.shape} != "
                                f"({horizon}, {grid.n_bus})")
            if not np.all(np.isfinite(arr)):
                raise GridError(f"profile {name}: non-finite entries")

    def d_vector(self, k: int) -> np.ndarray:
        return np.concatenate([self.p_pred[k], self.p_load[k],
                               self.q_load[k], [1.0]])


@dataclass
class NetworkState:
    """Solved or candidate network state; arrays may carry leading
    batch dimensions."""
    v: np.ndarray       # (..., n_bus) square voltage
    flow_p: np.ndarray  # (..., n_branch)
    flow_q: np.ndarray  # (..., n_branch)
    current: np.ndarray  # (..., n_branch) square current
    p: np.ndarray       # (..., n_bus) net injection (root = import)
    q: np.ndarray

    def x_vector(self) -> np.ndarray:
        return np.concatenate([self.flow_p, self.flow_q, self.v], axis=-1)


@dataclass
class CompactNetwork:
    """x = A_y y + A_xi xi + A_d d + A_e e + A_u u (exact distFlow, with the
    quadratic current relation kept separate)."""
    a_y: np.ndarray
    a_xi: np.ndarray
    a_d: np.ndarray
    a_e: np.ndarray
    a_u: np.ndarray
    # static u-space inequality rows (energy-unit power bounds)
    c_u: np.ndarray
    c_xi: np.ndarray
    d_rhs: np.ndarray
    # per-source capacity polygons
    polygons: list[tuple[np.ndarray, np.ndarray]]
    grid: GridModel

    @property
    def n_x(self) -> int:
        return self.a_y.shape[0]

    def x_of(self, y, xi, d, e, u) -> np.ndarray:
        out = self.a_d @ d
        if self.a_y.shape[1]:
            out = out + self.a_y @ y
        if self.a_xi.shape[1]:
            out = out + self.a_xi @ xi
        if self.a_e.shape[1]:
            out = out + self.a_e @ e
        if self.a_u.shape[1]:
            out = out + self.a_u @ u
        return out

    def capacity_rows(self, p_pred_sources: np.ndarray):
        """(C_u, C_xi, D) for one step: polygon rows shifted by the predicted
        source output plus the static energy-unit power rows."""
        grid = self.grid
        n_u = grid.n_source + grid.n_eu
        rows_cu, rows_cxi, rhs = [], [], []
        for si, (cs, ds) in enumerate(self.polygons):
            m = cs.shape[0]
            cu = np.zeros((m, n_u))
            cxi = np.zeros((m, grid.n_source))
            cu[:, si] = cs[:, 1]          # reactive output of source si
            cxi[:, si] = cs[:, 0]         # active deviation of source si
            rows_cu.append(cu)
            rows_cxi.append(cxi)
            rhs.append(ds - cs[:, 0] * p_pred_sources[si])
        if self.c_u.size:
            rows_cu.append(self.c_u)
            rows_cxi.append(self.c_xi)
            rhs.append(self.d_rhs)
        return (np.vstack(rows_cu), np.vstack(rows_cxi),
                np.concatenate(rhs))


@dataclass
class LinearSensitivity:
    """Lossless flat-voltage model, used only for second moments."""
    a_xi: np.ndarray
    a_u: np.ndarray
    a_e: np.ndarray
    inj_p: np.ndarray  # d x / d p_bus  (n_x, n_bus)
    inj_q: np.ndarray


def _assemble_system(grid: GridModel, lossless: bool):
    """Rows of A_x0 x + A_y0 y + A_xi0 xi + A_d0 d + A_e0 e + A_u0 u = 0."""
    nb, ne_br = grid.n_bus, grid.n_branch
    n_x = grid.n_x
    n_d = 3 * nb + 1
    n_u = grid.n_source + grid.n_eu
    idx = {b.id: k for k, b in enumerate(grid.buses)}
    src_at = {idx[s.bus]: si for si, s in enumerate(grid.sources)}
    eu_at: dict[int, list[int]] = {}
    for ei, e in enumerate(grid.eus):
        eu_at.setdefault(idx[e.bus], []).append(ei)

    out_branches: dict[int, list[int]] = {}
    in_branch: dict[int, int] = {}
    for k, br in enumerate(grid.branches):
        out_branches.setdefault(idx[br.from_bus], []).append(k)
        in_branch[idx[br.to_bus]] = k

    ax = sp.lil_matrix((n_x, n_x))
    ay = sp.lil_matrix((n_x, ne_br))
    axi = sp.lil_matrix((n_x, grid.n_source))
    ad = sp.lil_matrix((n_x, n_d))
    au = sp.lil_matrix((n_x, n_u))
    ae = sp.lil_matrix((n_x, grid.n_eu))

    row = 0
    non_root = [k for k in range(nb) if grid.buses[k].id != grid.root]
    for bp in non_root:  # active power balance
        bus = grid.buses[bp]
        for k in out_branches.get(bp, []):
            ax[row, grid.p_row(k)] += 1.0
        if bp in in_branch:
            k = in_branch[bp]
            ax[row, grid.p_row(k)] -= 1.0
            if not lossless:
                ay[row, k] += grid.branches[k].r
        if not lossless and bus.g:
            ax[row, grid.v_row(bp)] += bus.g
        elif lossless and bus.g:
            ad[row, 3 * nb] += bus.g * grid.v0  # shunt at flat voltage
        # p_i = p_pred + xi (source) - p_load + p_eu
        ad[row, bp] -= 1.0          # p_pred
        ad[row, nb + bp] += 1.0     # p_load enters negatively in p_i
        if bp in src_at:
            axi[row, src_at[bp]] -= 1.0
        for ei in eu_at.get(bp, []):
            au[row, grid.n_source + ei] -= 1.0
        row += 1
    for bp in non_root:  # reactive power balance
        bus = grid.buses[bp]
        for k in out_branches.get(bp, []):
            ax[row, grid.q_row(k)] += 1.0
        if bp in in_branch:
            k = in_branch[bp]
            ax[row, grid.q_row(k)] -= 1.0
            if not lossless:
                ay[row, k] += grid.branches[k].x
        if not lossless and bus.b:
            ax[row, grid.v_row(bp)] += bus.b
        elif lossless and bus.b:
            ad[row, 3 * nb] += bus.b * grid.v0
        ad[row, 2 * nb + bp] += 1.0  # q_load enters negatively in q_i
        if bp in src_at:
            au[row, src_at[bp]] -= 1.0  # controllable reactive output
        row += 1
    for k, br in enumerate(grid.branches):  # voltage drop
        i, j = idx[br.from_bus], idx[br.to_bus]
        ax[row, grid.v_row(j)] += 1.0
        ax[row, grid.v_row(i)] -= 1.0
        ax[row, grid.p_row(k)] += 2.0 * br.r
        ax[row, grid.q_row(k)] += 2.0 * br.x
        if not lossless:
            ay[row, k] -= br.r ** 2 + br.x ** 2
        row += 1
    # fixed root voltage
    ax[row, grid.v_row(idx[grid.root])] += 1.0
    ad[row, 3 * nb] -= grid.v0
    row += 1
    assert row == n_x
    return (ax.tocsc(), ay.tocsc(), axi.tocsc(), ad.tocsc(), ae.tocsc(),
            au.tocsc())


def _eliminate(ax0, mats):
    try:
        lu = spla.splu(ax0)
    except RuntimeError as exc:
        raise GridError(f"structural matrix is singular: {exc}") from exc
    out = []
    for m in mats:
        dense = m.toarray()
        out.append(-lu.solve(dense) if dense.size else
                   np.zeros((ax0.shape[0], m.shape[1])))
    return out


def build_compact(grid: GridModel) -> CompactNetwork:
    """Exact reduction x = A_y y + A_xi xi + A_d d + A_e e + A_u u."""
    ax0, ay0, axi0, ad0, ae0, au0 = _assemble_system(grid, lossless=False)
    a_y, a_xi, a_d, a_e, a_u = _eliminate(ax0, [ay0, axi0, ad0, ae0, au0])

    n_u = grid.n_source + grid.n_eu
    rows_cu, rows_cxi, rhs = [], [], []
    for ei, e in enumerate(grid.eus):
        up = np.zeros(n_u)
        up[grid.n_source + ei] = 1.0
        rows_cu.extend([up, -up])
        rows_cxi.extend([np.zeros(grid.n_source)] * 2)
        rhs.extend([e.p_max, -e.p_min])
    c_u = np.array(rows_cu) if rows_cu else np.zeros((0, n_u))
    c_xi = np.array(rows_cxi) if rows_cxi else np.zeros((0, grid.n_source))
    d_rhs = np.array(rhs)
    polygons = [build_capacity_polygon(s.s_max, s.n_polygon)
                for s in grid.sources]
    return CompactNetwork(a_y=a_y, a_xi=a_xi, a_d=a_d, a_e=a_e, a_u=a_u,
                          c_u=c_u, c_xi=c_xi, d_rhs=d_rhs,
                          polygons=polygons, grid=grid)


def build_lindistflow(grid: GridModel) -> LinearSensitivity:
    """Lossless, flat-voltage sensitivities (no current terms)."""
    ax0, ay0, axi0, ad0, ae0, au0 = _assemble_system(grid, lossless=True)
    a_xi, a_d, a_e, a_u = _eliminate(ax0, [axi0, ad0, ae0, au0])
    nb = grid.n_bus
    # d columns: per-bus p_pred enters +1 in p_i, p_load enters -1
    inj_p = a_d[:, :nb].copy()
    inj_q = -a_d[:, 2 * nb:3 * nb].copy()
    return LinearSensitivity(a_xi=a_xi, a_u=a_u, a_e=a_e,
                             inj_p=inj_p, inj_q=inj_q)


def build_capacity_polygon(s_max: float, n_sides: int = 12):
    """Inner polygonal approximation of p^2 + q^2 <= s_max^2."""
    if s_max <= 0:
        raise GridError("capacity must be positive")
    if n_sides < 4:
        raise GridError("polygon needs at least 4 sides")
    phi = 2.0 * np.pi * np.arange(n_sides) / n_sides + np.pi / n_sides
    c = np.column_stack([np.cos(phi), np.sin(phi)])
    d = np.full(n_sides, s_max * np.cos(np.pi / n_sides))
    return c, d


def distflow_residual(grid: GridModel, state: NetworkState,
                      p_inj: np.ndarray, q_inj: np.ndarray) -> np.ndarray:
    """Stacked residuals of the balance, voltage-drop and current relations.

    Balance rows cover non-root buses (the root bus is the slack).
    """
    idx = {b.id: k for k, b in enumerate(grid.buses)}
    nb, nbr = grid.n_bus, grid.n_branch
    shape = state.v.shape[:-1]
    res_p = np.zeros(shape + (nb,))
    res_q = np.zeros(shape + (nb,))
    gsh = np.array([b.g for b in grid.buses])
    bsh = np.array([b.b for b in grid.buses])
    res_p += gsh * state.v - p_inj
    res_q += bsh * state.v - q_inj
    for k, br in enumerate(grid.branches):
        i, j = idx[br.from_bus], idx[br.to_bus]
        res_p[..., i] += state.flow_p[..., k]
        res_q[..., i] += state.flow_q[..., k]
        res_p[..., j] -= state.flow_p[..., k] - br.r * state.current[..., k]
        res_q[..., j] -= state.flow_q[..., k] - br.x * state.current[..., k]
    root = idx[grid.root]
    mask = np.ones(nb, dtype=bool)
    mask[root] = False
    res_v = np.zeros(shape + (nbr,))
    res_l = np.zeros(shape + (nbr,))
    for k, br in enumerate(grid.branches):
        i, j = idx[br.from_bus], idx[br.to_bus]
        res_v[..., k] = (state.v[..., j] - state.v[..., i]
                         + 2.0 * (br.r * state.flow_p[..., k]
                                  + br.x * state.flow_q[..., k])
                         - (br.r ** 2 + br.x ** 2) * state.current[..., k])
        res_l[..., k] = (state.current[..., k] * state.v[..., i]
                         - state.flow_p[..., k] ** 2
                         - state.flow_q[..., k] ** 2)
    return np.concatenate([res_p[..., mask], res_q[..., mask],
                           res_v, res_l], axis=-1)


def power_flow_solve(grid: GridModel, p_inj: np.ndarray, q_inj: np.ndarray,
                     v_root: float | None = None, tol: float = 1e-12,
                     max_iter: int = 100) -> NetworkState:
    """Backward/forward sweep for the exact distFlow equations.

    `p_inj`, `q_inj` are (..., n_bus) net injections; leading batch
    dimensions are solved simultaneously.  Raises PowerFlowError with the
    iteration trace on divergence.
    """
    p_inj = np.asarray(p_inj, dtype=float)
    q_inj = np.asarray(q_inj, dtype=float)
    if p_inj.shape[-1] != grid.n_bus or q_inj.shape != p_inj.shape:
        raise GridError("injection arrays must be (..., n_bus)")
    v0 = grid.v0 if v_root is None else float(v_root)
    idx = {b.id: k for k, b in enumerate(grid.buses)}
    root = idx[grid.root]
    levels = grid.topo_levels()
    nb, nbr = grid.n_bus, grid.n_branch
    shape = p_inj.shape[:-1]

    fr = np.array([idx[br.from_bus] for br in grid.branches])
    to = np.array([idx[br.to_bus] for br in grid.branches])
    r = np.array([br.r for br in grid.branches])
    xr = np.array([br.x for br in grid.branches])
    z2 = r ** 2 + xr ** 2
    gsh = np.array([b.g for b in grid.buses])
    bsh = np.array([b.b for b in grid.buses])

    v = np.full(shape + (nb,), v0)
    flow_p = np.zeros(shape + (nbr,))
    flow_q = np.zeros(shape + (nbr,))
    cur = np.zeros(shape + (nbr,))
    trace = []
    for it in range(max_iter):
        acc_p = np.zeros(shape + (nb,))
        acc_q = np.zeros(shape + (nb,))
        for lev in reversed(levels):
            j = to[lev]
            flow_p[..., lev] = (acc_p[..., j] + gsh[j] * v[..., j]
                                - p_inj[..., j] + r[lev] * cur[..., lev])
            flow_q[..., lev] = (acc_q[..., j] + bsh[j] * v[..., j]
                                - q_inj[..., j] + xr[lev] * cur[..., lev])
            np.add.at(acc_p, (..., fr[lev]), flow_p[..., lev])
            np.add.at(acc_q, (..., fr[lev]), flow_q[..., lev])
        cur = (flow_p ** 2 + flow_q ** 2) / v[..., fr]
        v_new = v.copy()
        for lev in levels:
            i, j = fr[lev], to[lev]
            v_new[..., j] = (v_new[..., i]
                             - 2.0 * (r[lev] * flow_p[..., lev]
                                      + xr[lev] * flow_q[..., lev])
                             + z2[lev] * cur[..., lev])
        dv = float(np.abs(v_new - v).max())
        trace.append(dv)
        v = v_new
        if not np.all(np.isfinite(v)) or v.min() <= 0:
            raise PowerFlowError(
                f"voltage collapse after {it + 1} sweeps", trace)
        if dv < tol:
            break
    else:
        raise PowerFlowError(
            f"no convergence in {max_iter} sweeps (last dv={trace[-1]:.3e})",
            trace)

    p_full = p_inj.copy()
    q_full = q_inj.copy()
    rb = grid.root_branches()
    p_full[..., root] = flow_p[..., rb].sum(axis=-1) + gsh[root] * v[..., root]
    q_full[..., root] = flow_q[..., rb].sum(axis=-1) + bsh[root] * v[..., root]
    return NetworkState(v=v, flow_p=flow_p, flow_q=flow_q, current=cur,
                        p=p_full, q=q_full)
