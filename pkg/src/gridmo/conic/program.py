"""Conic program container and incremental builder.

Programs are stored in "variables in cones" form:

    minimize    q'x + x' diag(P) x + const
    subject to  A x = b
                x[slice_j] in K_j   for each registered cone slice

where each K_j is the nonnegative orthant, a second-order cone
(t, w) with t >= ||w||, or a rotated second-order cone (u, v, w) with
2uv >= ||w||^2, u, v >= 0.  Cone slices are contiguous and disjoint;
inequalities and norm constraints are expressed by introducing cone
variables tied to affine expressions with equality rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

NONNEG = "nonneg"
SOC = "soc"
RSOC = "rsoc"

_VALID_KINDS = (NONNEG, SOC, RSOC)


@dataclass(frozen=True)
class Cone:
    kind: str
    start: int
    size: int

    def __post_init__(self):
        if self.kind not in _VALID_KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("cone size must be >= 1")
        if self.kind == RSOC and self.size < 3:
            raise ValueError("rotated cone needs at least (u, v, w1)")

    @property
    def stop(self) -> int:
        return self.start + self.size


@dataclass
class ConicProgram:
    """Immutable-by-convention conic program (see module docstring)."""

    n: int
    obj_lin: np.ndarray
    obj_quad: np.ndarray  # diagonal of the PSD quadratic term (>= 0)
    obj_const: float
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    cones: tuple[Cone, ...]

    def validate(self) -> None:
        if self.obj_lin.shape != (self.n,) or self.obj_quad.shape != (self.n,):
            raise ValueError("objective dimension mismatch")
        if np.any(self.obj_quad < 0):
            raise ValueError("quadratic objective must be PSD (diag >= 0)")
        if self.a_eq.shape[1] != self.n or self.a_eq.shape[0] != self.b_eq.shape[0]:
            raise ValueError("equality system dimension mismatch")
        covered = np.zeros(self.n, dtype=bool)
        for cone in self.cones:
            if cone.start < 0 or cone.stop > self.n:
                raise ValueError(f"cone slice {cone} out of range")
            if covered[cone.start:cone.stop].any():
                raise ValueError(f"cone slice {cone} overlaps another cone")
            covered[cone.start:cone.stop] = True

    @property
    def n_eq(self) -> int:
        return self.a_eq.shape[0]

    def size_summary(self) -> dict:
        kinds = {NONNEG: 0, SOC: 0, RSOC: 0}
        for c in self.cones:
            kinds[c.kind] += 1
        return {
            "variables": int(self.n),
            "eq_rows": int(self.n_eq),
            "eq_nnz": int(self.a_eq.nnz),
            "cones_nonneg": kinds[NONNEG],
            "cones_soc": kinds[SOC],
            "cones_rsoc": kinds[RSOC],
            "constraints": int(self.n_eq + len(self.cones)),
        }


@dataclass
class Solution:
    status: str  # Optimal | Infeasible | Unbounded | IterLimit
    x: np.ndarray | None
    y_eq: np.ndarray | None
    z_cone: np.ndarray | None  # dual multipliers per variable (0 on free vars)
    objective: float | None
    residuals: tuple[float, float, float] | None  # (primal, dual, gap)
    iterations: int
    wall_time: float
    certificate: np.ndarray | None = None
    # raw standard-form vectors, kept so residuals can be recomputed
    raw: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "Optimal"


class ProgramBuilder:
    """Accumulates variables, equality rows and cone slices."""

    def __init__(self):
        self._n = 0
        self._rows = 0
        self._tr: list[np.ndarray] = []
        self._tc: list[np.ndarray] = []
        self._tv: list[np.ndarray] = []
        self._rhs: list[float] = []
        self._cones: list[Cone] = []
        self._lin: dict[int, float] = {}
        self._quad: dict[int, float] = {}
        self._const = 0.0

    # -- variables -------------------------------------------------------

    def new_vars(self, k: int) -> np.ndarray:
        idx = np.arange(self._n, self._n + k)
        self._n += k
        return idx

    def new_cone_vars(self, kind: str, size: int) -> np.ndarray:
        idx = self.new_vars(size)
        self._cones.append(Cone(kind, int(idx[0]), size))
        return idx

    def nonneg(self, k: int = 1) -> np.ndarray:
        return self.new_cone_vars(NONNEG, k)

    def soc(self, dim: int) -> np.ndarray:
        if dim == 1:
            return self.new_cone_vars(NONNEG, 1)
        return self.new_cone_vars(SOC, dim)

    def rsoc(self, dim: int) -> np.ndarray:
        return self.new_cone_vars(RSOC, dim)

    # -- equality rows -----------------------------------------------------

    def eq(self, cols, vals, rhs: float) -> int:
        """Single row: sum(vals * x[cols]) = rhs."""
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if cols.shape != vals.shape:
            raise ValueError("cols/vals shape mismatch")
        row = self._rows
        self._tr.append(np.full(cols.shape, row, dtype=np.int64))
        self._tc.append(cols)
        self._tv.append(vals)
        self._rhs.append(float(rhs))
        self._rows += 1
        return row

    def eq_block(self, local_rows, cols, vals, rhs) -> np.ndarray:
        """Batch of rows given as flat triplets with 0-based local row ids."""
        local_rows = np.asarray(local_rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        rhs = np.asarray(rhs, dtype=np.float64).ravel()
        n_new = rhs.shape[0]
        if local_rows.size and local_rows.max() >= n_new:
            raise ValueError("local row index beyond rhs length")
        base = self._rows
        self._tr.append(local_rows + base)
        self._tc.append(cols)
        self._tv.append(vals)
        self._rhs.extend(rhs.tolist())
        self._rows += n_new
        return np.arange(base, base + n_new)

    # -- derived constraints ----------------------------------------------

    def add_ineq(self, cols, vals, ub: float) -> int:
        """sum(vals * x[cols]) <= ub via a nonnegative slack; returns slack index."""
        s = self.nonneg(1)[0]
        cols = np.append(np.asarray(cols, dtype=np.int64), s)
        vals = np.append(np.asarray(vals, dtype=np.float64), 1.0)
        self.eq(cols, vals, ub)
        return int(s)

    def add_soc_constraint(self, head_cols, head_vals, head_const,
                           tail_rows) -> np.ndarray:
        """||tail|| <= head for affine expressions.

        tail_rows: sequence of (cols, vals, const) triples.  Creates a fresh
        contiguous SOC block tied to the expressions by equality rows and
        returns its variable indices (head first).
        """
        dim = 1 + len(tail_rows)
        idx = self.soc(dim)
        self.eq(np.append(np.asarray(head_cols, dtype=np.int64), idx[0]),
                np.append(np.asarray(head_vals, dtype=np.float64), -1.0),
                -float(head_const))
        for j, (cols, vals, const) in enumerate(tail_rows):
            self.eq(np.append(np.asarray(cols, dtype=np.int64), idx[1 + j]),
                    np.append(np.asarray(vals, dtype=np.float64), -1.0),
                    -float(const))
        return idx

    def soc_epigraph(self, tail_rows) -> np.ndarray:
        """Fresh SOC block with a *free* head bounding ||tails|| from above;
        returns variable indices (head first)."""
        idx = self.soc(1 + len(tail_rows))
        for j, (cols, vals, const) in enumerate(tail_rows):
            self.eq(np.append(np.asarray(cols, dtype=np.int64), idx[1 + j]),
                    np.append(np.asarray(vals, dtype=np.float64), -1.0),
                    -float(const))
        return idx

    # -- objective ----------------------------------------------------------

    def add_obj_lin(self, cols, coefs) -> None:
        cols = np.asarray(cols, dtype=np.int64).ravel()
        coefs = np.broadcast_to(np.asarray(coefs, dtype=np.float64), cols.shape)
        for c, v in zip(cols.tolist(), coefs.tolist()):
            self._lin[c] = self._lin.get(c, 0.0) + v

    def add_obj_quad(self, cols, coefs) -> None:
        """Adds sum(coefs * x[cols]^2); coefs must be >= 0."""
        cols = np.asarray(cols, dtype=np.int64).ravel()
        coefs = np.broadcast_to(np.asarray(coefs, dtype=np.float64), cols.shape)
        if np.any(coefs < 0):
            raise ValueError("quadratic coefficients must be nonnegative")
        for c, v in zip(cols.tolist(), coefs.tolist()):
            self._quad[c] = self._quad.get(c, 0.0) + v

    def add_obj_const(self, c: float) -> None:
        self._const += float(c)

    # -- assembly ------------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return self._n

    def build(self) -> ConicProgram:
        obj_lin = np.zeros(self._n)
        for c, v in self._lin.items():
            obj_lin[c] = v
        obj_quad = np.zeros(self._n)
        for c, v in self._quad.items():
            obj_quad[c] = v
        if self._tr:
            rows = np.concatenate(self._tr)
            cols = np.concatenate(self._tc)
            vals = np.concatenate(self._tv)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
        a_eq = sp.coo_matrix((vals, (rows, cols)),
                             shape=(self._rows, self._n)).tocsr()
        a_eq.sum_duplicates()
        prog = ConicProgram(
            n=self._n,
            obj_lin=obj_lin,
            obj_quad=obj_quad,
            obj_const=self._const,
            a_eq=a_eq,
            b_eq=np.asarray(self._rhs, dtype=np.float64),
            cones=tuple(self._cones),
        )
        prog.validate()
        return prog


def objective_value(prog: ConicProgram, x: np.ndarray) -> float:
    return float(prog.obj_lin @ x + prog.obj_quad @ (x * x) + prog.obj_const)
