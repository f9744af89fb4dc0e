"""Order-by-order Taylor solution at t=0 and the independent initial conditions.

Unknowns are the jets ``w^(n)(0)`` for n >= 1; the order-0 jets are the
initial-condition symbols.  Equations are the momentum definitions at t=0
and the Euler-Lagrange equations differentiated ``j`` times.  Each pass
substitutes what is known, solves the linear part exactly, and turns
equations without unknowns into relations among initial conditions.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import GaugeFreedom, Inconsistent, UnsolvableConstraint
from .linsolve import isolate, solve_linear
from .mechanics import PhaseSpace, euler_lagrange, momenta
from .series import SeriesPoly
from .symexpr import Expr, Symbol, substitute
from .sysparse import SystemSpec

log = logging.getLogger(__name__)

DEFAULT_ORDER = 3


@dataclass
class TaylorSolution:
    order: int
    phase: PhaseSpace
    series: dict  # phase symbol -> SeriesPoly over IC symbols
    jets: dict  # jet symbol -> value at t=0
    relations: list  # (Expr, origin) relations among ICs, discovery order

    def coefficient(self, var: Symbol, n: int) -> Expr:
        return self.series[var][n]

    def jets_at(self, _order: int | None = None) -> dict:
        return self.jets

    def max_known_order(self) -> int:
        best = None
        for c in self.phase.coords:
            n = 0
            while self.phase.jet(c, n + 1) in self.jets:
                n += 1
            best = n if best is None else min(best, n)
        return best or 0


@dataclass
class ICConstraintSet:
    constraints: list  # (eliminated IC symbol, Expr in independent ICs)
    independent: list  # IC symbols, coordinates first, declaration order
    elimination: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def reduce(self, e: Expr) -> Expr:
        if not self.elimination:
            return e
        hit = {s: v for s, v in self.elimination.items() if s in e.free_symbols()}
        return substitute(e, hit) if hit else e


def _preference(ps: PhaseSpace, s: Symbol):
    """Sort key: momenta before coordinates, then highest declaration index."""
    x = ps.from_ic[s]
    is_momentum = x in ps.coord_of
    return (0 if is_momentum else 1, -x.rank)


class _Eliminator:
    def __init__(self, ps: PhaseSpace):
        self.ps = ps
        self.ic_set = set(ps.from_ic)
        self.map: dict = {}
        self.order: list = []
        self.warnings: list = []

    def reduce(self, e: Expr) -> Expr:
        hit = {s: v for s, v in self.map.items() if s in e.free_symbols()}
        return substitute(e, hit) if hit else e

    def add(self, relation: Expr) -> Symbol | None:
        r = self.reduce(relation)
        if not r:
            return None
        cands = sorted((s for s in r.free_symbols() if s in self.ic_set), key=lambda s: _preference(self.ps, s))
        if not cands:
            raise Inconsistent(f"relation {r} = 0 has no initial condition to solve for")
        for k, s in enumerate(cands):
            v = isolate(r, s)
            if v is None:
                continue
            if k > 0:
                msg = f"eliminating {s.name} instead of preferred {cands[0].name} in {r} = 0"
                log.warning(msg)
                self.warnings.append(msg)
            for t in list(self.map):
                if s in self.map[t].free_symbols():
                    self.map[t] = substitute(self.map[t], {s: v})
            self.map[s] = v
            self.order.append(s)
            return s
        raise UnsolvableConstraint(f"no initial condition can be isolated from {r} = 0")


def taylor_solve(spec: SystemSpec, order: int = DEFAULT_ORDER) -> TaylorSolution:
    if order < 2:
        raise ValueError("Taylor order must be >= 2")
    ps = PhaseSpace(spec)
    el = euler_lagrange(spec, ps)
    moms = momenta(spec, ps)

    need = {c: order for c in ps.coords}
    for p in moms:
        for s in p.free_symbols():
            if s in ps.jet_of:
                c, n = ps.jet_of[s]
                need[c] = max(need[c], order + n)
    maxneed = max(need.values())

    known: dict = {c: ps.ic[c].as_expr() for c in ps.coords}
    elim = _Eliminator(ps)
    relations: list = []
    pool: list = []  # (expr, origin), substituted with everything known so far

    def handle_relation(r: Expr, origin: str):
        if not any(s in elim.ic_set for s in r.free_symbols()):
            raise Inconsistent(f"{origin}: {r} = 0 cannot hold")
        if elim.add(r) is not None:
            relations.append((r, origin))

    def is_unknown(s):
        info = ps.jet_of.get(s)
        return info is not None and info[1] >= 1

    def rounds(fresh: dict):
        nonlocal pool
        while True:
            kept = []
            for eq, origin in pool:
                if fresh:
                    hit = {s: v for s, v in fresh.items() if s in eq.free_symbols()}
                    if hit:
                        eq = substitute(eq, hit)
                if not eq:
                    continue
                if not any(is_unknown(s) for s in eq.free_symbols()):
                    handle_relation(eq, origin)
                    continue
                kept.append((eq, origin))
            pool = kept
            unknowns = sorted(
                {s for eq, _ in pool for s in eq.free_symbols() if is_unknown(s)},
                key=lambda s: (-ps.jet_of[s][1], ps.jet_of[s][0].rank),
            )
            res = solve_linear([eq for eq, _ in pool], unknowns)
            for r in res.residuals:
                handle_relation(r, "combined equations")
            fresh = {u: v for u, v in res.solution.items() if u not in known}
            if not fresh:
                return
            known.update(fresh)

    derivs = [[e] for e in el.equations]
    ranks = [max(ps.max_order(e), 0) for e in el.equations]

    def add_level(j: int, limit: int):
        added = False
        for i, c in enumerate(ps.coords):
            if j + ranks[i] > limit:
                continue
            while len(derivs[i]) <= j:
                derivs[i].append(ps.total_derivative(derivs[i][-1]))
            eq = substitute(derivs[i][j], known)
            pool.append((eq, f"Euler-Lagrange[{c.name}] level {j}"))
            added = True
        return added

    def missing():
        return [ps.jet(c, n) for c in ps.coords for n in range(1, need[c] + 1) if ps.jet(c, n) not in known]

    for c, p in zip(ps.coords, moms):
        pool.append((substitute(p, known) - ps.ic[ps.momentum_of[c]].as_expr(), f"momentum {ps.momentum_of[c].name}"))
    for j in range(maxneed + 1):
        add_level(j, maxneed)
        rounds({})
    extra = 0
    while missing() and extra < 2:
        extra += 1
        limit = maxneed + extra
        for j in range(limit + 1):
            # only the levels newly admitted by the raised limit
            for i, c in enumerate(ps.coords):
                if j + ranks[i] == limit:
                    while len(derivs[i]) <= j:
                        derivs[i].append(ps.total_derivative(derivs[i][-1]))
                    pool.append((substitute(derivs[i][j], known), f"Euler-Lagrange[{c.name}] level {j}"))
        rounds({})
    gone = missing()
    if gone:
        names = ", ".join(s.name for s in gone[:6])
        raise GaugeFreedom(f"evolution not determined by the equations of motion ({names}); fix the gauge first")

    series = {}
    for c in ps.coords:
        series[c] = SeriesPoly([known[ps.jet(c, n)] for n in range(order + 1)])
    for c, p in zip(ps.coords, moms):
        coeffs = [ps.ic[ps.momentum_of[c]].as_expr()]
        cur = p
        for n in range(1, order + 1):
            cur = ps.total_derivative(cur)
            v = substitute(cur, known)
            if any(is_unknown(s) for s in v.free_symbols()):
                raise GaugeFreedom(f"momentum {ps.momentum_of[c].name} coefficient {n} undetermined")
            coeffs.append(v)
        series[ps.momentum_of[c]] = SeriesPoly(coeffs)
    return TaylorSolution(order, ps, series, known, relations)


def select_independent(relations, phase: PhaseSpace, policy: str = "default") -> ICConstraintSet:
    """Eliminate one IC per relation; momenta before coordinates, then the
    highest declaration index.  The relation must be linear in the chosen
    symbol with an invertible coefficient."""
    if policy != "default":
        raise ValueError(f"unknown policy {policy!r}")
    elim = _Eliminator(phase)
    for r in relations:
        if isinstance(r, tuple):
            r = r[0]
        elim.add(r)
    eliminated = set(elim.map)
    independent = [phase.ic[x] for x in phase.phase if phase.ic[x] not in eliminated]
    constraints = [(s, elim.map[s]) for s in elim.order]
    return ICConstraintSet(constraints, independent, dict(elim.map), elim.warnings)


def detect_ic_constraints(spec: SystemSpec, tsol: TaylorSolution) -> ICConstraintSet:
    return select_independent(tsol.relations, tsol.phase)


def apply_elimination(tsol: TaylorSolution, cs: ICConstraintSet) -> TaylorSolution:
    """Series with every dependent IC replaced (coefficient 0 included)."""
    series = {x: SeriesPoly([cs.reduce(c) for c in s.coeffs]) for x, s in tsol.series.items()}
    jets = {k: cs.reduce(v) for k, v in tsol.jets.items()}
    return TaylorSolution(tsol.order, tsol.phase, series, jets, [])
