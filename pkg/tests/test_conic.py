import copy

import numpy as np
import pytest

from gridmo.conic import (ProgramBuilder, Solution, kkt_residuals,
                          read_program, read_solution, solve, solve_cvxopt,
                          solve_via_files, write_program, write_solution)

from conic_problems import feasible_suite, pathological_suite, soc_norm

FEASIBLE = feasible_suite()
PATHOLOGICAL = pathological_suite()


@pytest.mark.parametrize("name,prog,opt", FEASIBLE,
                         ids=[c[0] for c in FEASIBLE])
def test_regression_known_optimum(name, prog, opt):
    sol = solve(prog)
    assert sol.status == "Optimal"
    assert sol.objective == pytest.approx(opt, rel=1e-6, abs=1e-7)
    assert all(r < 1e-8 for r in sol.residuals), sol.residuals


@pytest.mark.parametrize("name,prog,expected", PATHOLOGICAL,
                         ids=[c[0] for c in PATHOLOGICAL])
def test_regression_certified_status(name, prog, expected):
    sol = solve(prog)
    assert sol.status == expected
    assert sol.certificate is not None


@pytest.mark.parametrize("name,prog,opt", FEASIBLE,
                         ids=[c[0] for c in FEASIBLE])
def test_adapter_equivalence(name, prog, opt):
    emb = solve(prog)
    ext = solve_cvxopt(prog)
    assert ext.status == "Optimal"
    assert ext.objective == pytest.approx(emb.objective, rel=1e-6, abs=1e-7)


def test_adapter_status_agreement_pathological():
    for name, prog, expected in PATHOLOGICAL:
        ext = solve_cvxopt(prog)
        assert ext.status == expected, name


def test_scale_invariance_of_status():
    for name, prog, _ in FEASIBLE[:6]:
        scaled = copy.deepcopy(prog)
        scaled.obj_lin = scaled.obj_lin * 1e3
        scaled.obj_quad = scaled.obj_quad * 1e3
        scaled.obj_const = scaled.obj_const * 1e3
        sol = solve(scaled)
        assert sol.status == "Optimal", name
    for name, prog, expected in PATHOLOGICAL:
        scaled = copy.deepcopy(prog)
        scaled.obj_lin = scaled.obj_lin * 1e3
        sol = solve(scaled)
        assert sol.status == expected, name


def test_determinism():
    prog, _ = soc_norm()
    s1 = solve(prog)
    s2 = solve(prog)
    assert np.array_equal(s1.x, s2.x)
    assert s1.objective == s2.objective


def test_kkt_residuals_match_solver_reported():
    for name, prog, _ in FEASIBLE[:8]:
        sol = solve(prog)
        pres, dres, gap = kkt_residuals(prog, sol)
        # internal 2-norm residuals are within 10x of the recomputed ones
        assert pres <= 10 * max(sol.raw["ipm_pres"], 1e-12) + 1e-10, name
        assert dres <= 10 * max(sol.raw["ipm_dres"], 1e-12) + 1e-10, name


def test_kkt_residuals_perturbed_primal():
    prog, _ = soc_norm()
    sol = solve(prog)
    probe = Solution(status="Optimal", x=sol.x.copy(), y_eq=sol.y_eq,
                     z_cone=sol.z_cone, objective=sol.objective,
                     residuals=None, iterations=0, wall_time=0.0)
    probe.x[1] -= 1e-3  # into the cone interior: only the eq row reacts
    pres, _, _ = kkt_residuals(prog, probe)
    bnorm = 1.0 + np.abs(prog.b_eq).max()
    assert pres == pytest.approx(1e-3 / bnorm, rel=1e-3)


def test_kkt_residuals_zero_dual():
    prog, _ = soc_norm()
    sol = solve(prog)
    probe = Solution(status="Optimal", x=sol.x, y_eq=np.zeros(prog.n_eq),
                     z_cone=np.zeros(prog.n), objective=sol.objective,
                     residuals=None, iterations=0, wall_time=0.0)
    _, dres, _ = kkt_residuals(prog, probe)
    assert dres > 1e-2  # objective gradient is unmatched


def test_program_text_roundtrip_bit_exact(tmp_path):
    for name, prog, _ in FEASIBLE[:6]:
        p1 = tmp_path / f"{name}.prog"
        p2 = tmp_path / f"{name}.prog2"
        write_program(prog, p1)
        again = read_program(p1)
        write_program(again, p2)
        assert p1.read_text() == p2.read_text(), name
        assert np.array_equal(prog.obj_lin, again.obj_lin)
        assert np.array_equal(prog.b_eq, again.b_eq)
        assert (prog.a_eq != again.a_eq).nnz == 0
        assert prog.cones == again.cones


def test_solution_text_roundtrip(tmp_path):
    prog, _ = soc_norm()
    sol = solve(prog)
    path = tmp_path / "sol.txt"
    write_solution(sol, path)
    again = read_solution(path)
    assert again.status == sol.status
    assert np.array_equal(again.x, sol.x)
    assert again.objective == sol.objective


def test_solve_via_files_matches_direct():
    prog, opt = soc_norm()
    sol = solve_via_files(prog)
    assert sol.status == "Optimal"
    assert sol.objective == pytest.approx(opt, rel=1e-6)


def test_builder_rejects_negative_quad():
    b = ProgramBuilder()
    x = b.new_vars(1)
    with pytest.raises(ValueError):
        b.add_obj_quad([x[0]], [-1.0])


def test_builder_cone_slices_disjoint():
    prog, _ = soc_norm()
    starts = sorted((c.start, c.stop) for c in prog.cones)
    for (s1, e1), (s2, e2) in zip(starts, starts[1:]):
        assert e1 <= s2
