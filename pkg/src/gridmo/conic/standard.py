"""Reduction of a ConicProgram to the (c, A, b, G, h) solver form.

Target form:

    minimize    c'x
    subject to  A x = b
                G x + s = h,   s in R+^l x SOC(q_1) x ... x SOC(q_k)

The quadratic objective is lifted to an epigraph variable through a
rotated cone, and rotated cones are mapped onto plain second-order cones
with the orthogonal transform (u, v, w) -> ((u+v)/sqrt2, (u-v)/sqrt2, w).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .program import NONNEG, RSOC, SOC, Cone, ConicProgram

_SQ2 = np.sqrt(2.0)


@dataclass
class StandardForm:
    c: np.ndarray
    a: sp.csr_matrix
    b: np.ndarray
    g: sp.csr_matrix
    h: np.ndarray
    dims_l: int
    dims_q: list[int]
    n_orig: int
    p_orig: int
    # rows of G belonging to each original cone, in prog.cones order
    cone_rows: list[np.ndarray]

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def m(self) -> int:
        return self.h.shape[0]

    @property
    def p(self) -> int:
        return self.b.shape[0]


def _rsoc_rows(cone: Cone, base_row: int, tr, tc, tv):
    """G rows mapping the rotated-cone slice onto a plain SOC (negated)."""
    u, v = cone.start, cone.start + 1
    r0, r1 = base_row, base_row + 1
    tr.extend([r0, r0, r1, r1])
    tc.extend([u, v, u, v])
    tv.extend([-1.0 / _SQ2, -1.0 / _SQ2, -1.0 / _SQ2, 1.0 / _SQ2])
    for j in range(cone.size - 2):
        tr.append(base_row + 2 + j)
        tc.append(cone.start + 2 + j)
        tv.append(-1.0)


def standard_form(prog: ConicProgram) -> StandardForm:
    n0 = prog.n
    p0 = prog.n_eq

    quad_cols = np.nonzero(prog.obj_quad)[0]
    n_lift = 0
    if quad_cols.size:
        # epigraph t >= x' diag(P) x via rotated cone
        # vars appended: t, v_half (= 1/2), w_j (= sqrt(P_j) x_j)
        n_lift = 2 + quad_cols.size

    n = n0 + n_lift
    c = np.zeros(n)
    c[:n0] = prog.obj_lin
    a_blocks = [prog.a_eq]
    b_extra = []
    cones = list(prog.cones)
    if n_lift:
        t_idx = n0
        v_idx = n0 + 1
        w_idx = np.arange(n0 + 2, n0 + 2 + quad_cols.size)
        c[t_idx] = 1.0
        # rows: v = 1/2 ; w_j - sqrt(P_j) x_j = 0
        rows = [0] + list(range(1, 1 + quad_cols.size)) * 2
        cols = [v_idx] + list(w_idx) + list(quad_cols)
        vals = [1.0] + [1.0] * quad_cols.size + \
            list(-np.sqrt(prog.obj_quad[quad_cols]))
        lift = sp.coo_matrix((vals, (rows, cols)),
                             shape=(1 + quad_cols.size, n))
        a0 = sp.hstack(
            [prog.a_eq, sp.csr_matrix((p0, n_lift))], format="csr")
        a_blocks = [a0, lift.tocsr()]
        b_extra = [0.5] + [0.0] * quad_cols.size
        cones.append(Cone(RSOC, t_idx, 2 + quad_cols.size))
    else:
        a_blocks = [sp.hstack([prog.a_eq, sp.csr_matrix((p0, n_lift))],
                              format="csr") if n_lift else prog.a_eq]

    a = sp.vstack(a_blocks, format="csr") if len(a_blocks) > 1 else a_blocks[0]
    b = np.concatenate([prog.b_eq, np.asarray(b_extra)])

    # Order cone rows: all nonneg first, then SOC/RSOC blocks in declaration
    # order.  G is a (possibly rotated) negated selector; h = 0.
    nn_cones = [cn for cn in cones if cn.kind == NONNEG]
    q_cones = [cn for cn in cones if cn.kind != NONNEG]

    tr: list[int] = []
    tc: list[int] = []
    tv: list[float] = []
    cone_rows_map: dict[int, np.ndarray] = {}
    row = 0
    for cn in nn_cones:
        cone_rows_map[cn.start] = np.arange(row, row + cn.size)
        for j in range(cn.size):
            tr.append(row)
            tc.append(cn.start + j)
            tv.append(-1.0)
            row += 1
    dims_l = row
    dims_q = []
    for cn in q_cones:
        cone_rows_map[cn.start] = np.arange(row, row + cn.size)
        if cn.kind == SOC:
            for j in range(cn.size):
                tr.append(row + j)
                tc.append(cn.start + j)
                tv.append(-1.0)
        else:
            _rsoc_rows(cn, row, tr, tc, tv)
        dims_q.append(cn.size)
        row += cn.size

    m = row
    g = sp.coo_matrix((tv, (tr, tc)), shape=(m, n)).tocsr()
    h = np.zeros(m)
    cone_rows = [cone_rows_map[cn.start] for cn in prog.cones]
    return StandardForm(c=c, a=a, b=b, g=g, h=h, dims_l=dims_l,
                        dims_q=dims_q, n_orig=n0, p_orig=p0,
                        cone_rows=cone_rows)


def cone_distance(sf: StandardForm, s: np.ndarray) -> float:
    """Max violation of cone membership of a slack vector (0 if inside)."""
    worst = 0.0
    if sf.dims_l:
        worst = max(worst, float(-(s[:sf.dims_l]).min(initial=0.0)))
    off = sf.dims_l
    for q in sf.dims_q:
        blk = s[off:off + q]
        worst = max(worst, float(np.linalg.norm(blk[1:]) - blk[0]))
        off += q
    return worst
