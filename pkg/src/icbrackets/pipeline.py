"""parse -> Euler-Lagrange -> Taylor -> constraints -> H -> identify -> extend."""
from __future__ import annotations

import logging
from dataclasses import dataclass

from .bracket_solver import (
    BracketTable,
    Identification,
    IdentificationSystem,
    build_identification_system,
    extend_table,
    identify,
    reconstruct_brackets,
)
from .initial_instant import DEFAULT_ORDER, ICConstraintSet, TaylorSolution, detect_ic_constraints, taylor_solve
from .mechanics import hamiltonian_at_initial
from .symexpr import Expr
from .sysparse import SystemSpec
from .verify import (
    ALL_CHECKS,
    VerificationReport,
    covariance_check,
    hamilton_equivalence_check,
    jacobi_check,
    trajectory_check,
)

log = logging.getLogger(__name__)


@dataclass
class Derivation:
    spec: SystemSpec
    tsol: TaylorSolution
    constraints: ICConstraintSet
    H_ic: Expr  # Hamiltonian in independent initial conditions
    system: IdentificationSystem
    identification: Identification
    table: BracketTable  # closed over all phase variables

    @property
    def H(self) -> Expr:
        """Hamiltonian over phase variables."""
        return self.tsol.phase.to_phase(self.H_ic)


def derive(spec: SystemSpec, order: int = DEFAULT_ORDER, degree: int = 2, samples: int = 200, seed: int = 42, tol: float = 1e-9) -> Derivation:
    tsol = taylor_solve(spec, order)
    cs = detect_ic_constraints(spec, tsol)
    for w in cs.warnings:
        log.warning(w)
    H = hamiltonian_at_initial(spec, tsol, cs)
    system = build_identification_system(spec, tsol, cs, H)
    ident = identify(system, degree, samples, seed, tol)
    base = reconstruct_brackets(ident, system, cs, spec.name)
    table = extend_table(base, cs, tsol.phase)
    return Derivation(spec, tsol, cs, H, system, ident, table)


def verify(d: Derivation, checks=ALL_CHECKS, samples: int = 100, seed: int = 42, tol: float = 1e-9, order: int | None = None, table: BracketTable | None = None, trajectory_point: dict | None = None, dt: float = 1e-3, t_end: float = 1.0) -> VerificationReport:
    table = table or d.table
    report = VerificationReport()
    H = d.H
    for name in checks:
        if name == "jacobi":
            report.checks.append(jacobi_check(table, samples, seed, tol))
        elif name == "covariance":
            report.checks.append(covariance_check(d.spec, table, H, d.tsol, order or d.tsol.order, d.constraints))
        elif name == "hamilton-equivalence":
            report.checks.append(hamilton_equivalence_check(d.spec, table, H, d.tsol, d.constraints))
        elif name == "trajectory":
            report.checks.append(
                trajectory_check(d.spec, table, H, d.tsol, trajectory_point, t_end, dt, d.constraints, seed)
            )
        else:
            raise ValueError(f"unknown check {name!r}")
    return report
