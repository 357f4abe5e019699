"""Conic programming layer: program container, builder, solvers, text IO."""

from .api import kkt_residuals, solve
from .program import (NONNEG, RSOC, SOC, Cone, ConicProgram, ProgramBuilder,
                      Solution, objective_value)
from .adapter import solve_cvxopt, solve_via_files
from .textio import read_program, read_solution, write_program, write_solution

__all__ = [
    "Cone", "ConicProgram", "ProgramBuilder", "Solution",
    "NONNEG", "SOC", "RSOC",
    "solve", "solve_cvxopt", "solve_via_files", "kkt_residuals",
    "objective_value",
    "read_program", "read_solution", "write_program", "write_solution",
]
