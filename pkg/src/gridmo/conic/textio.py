"""Plain-text serialisation of programs and solutions.

Floats are written with `float.hex()` so a write/read round trip is
bit-exact.  The format is line oriented:

    GRIDMO-CONIC 1
    vars <n>
    objconst <hex>
    objlin <nnz>          followed by nnz lines "<col> <hex>"
    objquad <nnz>         followed by nnz lines "<col> <hex>"
    cones <k>             followed by k lines "<kind> <start> <size>"
    eq <rows> <nnz>       followed by nnz lines "<row> <col> <hex>"
    rhs <rows>            followed by rows lines "<hex>"
    end

Solution files carry status, objective and the primal/dual vectors in the
same hex encoding.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .program import Cone, ConicProgram, Solution

_MAGIC_PROG = "GRIDMO-CONIC 1"
_MAGIC_SOL = "GRIDMO-SOLUTION 1"


def _fmt(x: float) -> str:
    return float(x).hex()


def write_program(prog: ConicProgram, path) -> None:
    coo = prog.a_eq.tocoo()
    lin_nz = np.nonzero(prog.obj_lin)[0]
    quad_nz = np.nonzero(prog.obj_quad)[0]
    lines = [_MAGIC_PROG, f"vars {prog.n}", f"objconst {_fmt(prog.obj_const)}"]
    lines.append(f"objlin {lin_nz.size}")
    lines.extend(f"{i} {_fmt(prog.obj_lin[i])}" for i in lin_nz)
    lines.append(f"objquad {quad_nz.size}")
    lines.extend(f"{i} {_fmt(prog.obj_quad[i])}" for i in quad_nz)
    lines.append(f"cones {len(prog.cones)}")
    lines.extend(f"{c.kind} {c.start} {c.size}" for c in prog.cones)
    lines.append(f"eq {prog.n_eq} {coo.nnz}")
    lines.extend(f"{r} {c} {_fmt(v)}"
                 for r, c, v in zip(coo.row, coo.col, coo.data))
    lines.append(f"rhs {prog.b_eq.size}")
    lines.extend(_fmt(v) for v in prog.b_eq)
    lines.append("end")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_program(path) -> ConicProgram:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    pos = 0

    def take():
        nonlocal pos
        ln = lines[pos]
        pos += 1
        return ln

    if take() != _MAGIC_PROG:
        raise ValueError(f"{path}: not a conic program file")
    n = int(take().split()[1])
    obj_const = float.fromhex(take().split()[1])
    obj_lin = np.zeros(n)
    for _ in range(int(take().split()[1])):
        i, v = take().split()
        obj_lin[int(i)] = float.fromhex(v)
    obj_quad = np.zeros(n)
    for _ in range(int(take().split()[1])):
        i, v = take().split()
        obj_quad[int(i)] = float.fromhex(v)
    cones = []
    for _ in range(int(take().split()[1])):
        kind, start, size = take().split()
        cones.append(Cone(kind, int(start), int(size)))
    _, rows, nnz = take().split()
    rows, nnz = int(rows), int(nnz)
    rr = np.empty(nnz, dtype=np.int64)
    cc = np.empty(nnz, dtype=np.int64)
    vv = np.empty(nnz)
    for k in range(nnz):
        r, c, v = take().split()
        rr[k], cc[k], vv[k] = int(r), int(c), float.fromhex(v)
    a_eq = sp.coo_matrix((vv, (rr, cc)), shape=(rows, n)).tocsr()
    nb = int(take().split()[1])
    b_eq = np.array([float.fromhex(take()) for _ in range(nb)])
    if take() != "end":
        raise ValueError(f"{path}: missing end marker")
    prog = ConicProgram(n=n, obj_lin=obj_lin, obj_quad=obj_quad,
                        obj_const=obj_const, a_eq=a_eq, b_eq=b_eq,
                        cones=tuple(cones))
    prog.validate()
    return prog


def _write_vec(lines: list[str], name: str, vec) -> None:
    if vec is None:
        lines.append(f"{name} -1")
        return
    lines.append(f"{name} {len(vec)}")
    lines.extend(_fmt(v) for v in vec)


def write_solution(sol: Solution, path) -> None:
    lines = [_MAGIC_SOL, f"status {sol.status}"]
    lines.append("objective " + (_fmt(sol.objective)
                                 if sol.objective is not None else "none"))
    lines.append(f"iterations {sol.iterations}")
    _write_vec(lines, "x", sol.x)
    _write_vec(lines, "y", sol.y_eq)
    _write_vec(lines, "z", sol.z_cone)
    _write_vec(lines, "certificate", sol.certificate)
    lines.append("end")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_solution(path) -> Solution:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    pos = 0

    def take():
        nonlocal pos
        ln = lines[pos]
        pos += 1
        return ln

    if take() != _MAGIC_SOL:
        raise ValueError(f"{path}: not a solution file")
    status = take().split(None, 1)[1]
    objtok = take().split()[1]
    objective = None if objtok == "none" else float.fromhex(objtok)
    iterations = int(take().split()[1])

    def read_vec():
        count = int(take().split()[1])
        if count < 0:
            return None
        return np.array([float.fromhex(take()) for _ in range(count)])

    x = read_vec()
    y = read_vec()
    z = read_vec()
    cert = read_vec()
    if take() != "end":
        raise ValueError(f"{path}: missing end marker")
    return Solution(status=status, x=x, y_eq=y, z_cone=z,
                    objective=objective, residuals=None,
                    iterations=iterations, wall_time=0.0, certificate=cert)
