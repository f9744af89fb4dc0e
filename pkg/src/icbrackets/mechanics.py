"""Momenta, Euler-Lagrange equations and the Hamiltonian at t=0.

All derivatives use the left convention, so for odd coordinates
``p = dL/d(dq)`` is the left derivative and the Legendre transform pairs
velocities and momenta as ``dq * p``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from .errors import NonConservedHamiltonian, OddHamiltonian
from .symexpr import Expr, Symbol, ZERO, differentiate, substitute
from .sysparse import SystemSpec

DYNAMICAL = "dynamical"
FIRST_ORDER = "first-order"
ALGEBRAIC = "algebraic"


class PhaseSpace:
    """Symbol bookkeeping for one system.

    coordinate ``w``: jets ``w, dw, ddw, d3'w, ...``; momentum ``pw``;
    initial conditions ``w0`` and ``pw0``.
    """

    def __init__(self, spec: SystemSpec):
        self.spec = spec
        self.coords = list(spec.coords)
        n = len(self.coords)
        self.momenta = [Symbol("p" + c.name, c.odd, n + c.rank) for c in self.coords]
        self.momentum_of = dict(zip(self.coords, self.momenta))
        self.coord_of = dict(zip(self.momenta, self.coords))
        self.phase = self.coords + self.momenta
        self.ic = {x: Symbol(x.name + "0", x.odd, x.rank) for x in self.phase}
        self.from_ic = {v: k for k, v in self.ic.items()}
        self._jets: dict = {}
        self.jet_of: dict = {}  # jet symbol -> (coordinate, order)
        for c in self.coords:
            for k in range(3):
                self.jet(c, k)

    def jet(self, c: Symbol, n: int) -> Symbol:
        key = (c, n)
        s = self._jets.get(key)
        if s is None:
            if n == 0:
                s = c
            elif n <= 2:
                s = Symbol("d" * n + c.name, c.odd, c.rank)
            else:
                s = Symbol(f"d{n}'{c.name}", c.odd, c.rank)
            self._jets[key] = s
            self.jet_of[s] = (c, n)
        return s

    def velocity(self, c: Symbol) -> Symbol:
        return self.jet(c, 1)

    def total_derivative(self, e: Expr) -> Expr:
        """d/dt on jet expressions: sum over jets s of next(s) * dL/ds."""
        out = ZERO
        for s in sorted(e.free_symbols(), key=lambda s: s.key):
            info = self.jet_of.get(s)
            if info is None:
                continue
            c, n = info
            d = differentiate(e, s, "left")
            if d:
                out = out + self.jet(c, n + 1).as_expr() * d
        return out

    def max_order(self, e: Expr) -> int:
        orders = [self.jet_of[s][1] for s in e.free_symbols() if s in self.jet_of]
        return max(orders, default=-1)

    def to_phase(self, e: Expr) -> Expr:
        """Rename initial-condition symbols to phase-space variables."""
        return substitute(e, {k: v.as_expr() for k, v in self.from_ic.items() if k in e.free_symbols()})

    def to_ic(self, e: Expr) -> Expr:
        return substitute(e, {k: v.as_expr() for k, v in self.ic.items() if k in e.free_symbols()})

    @cached_property
    def momentum_exprs(self) -> list:
        return momenta(self.spec, self)


@dataclass
class EulerLagrangeSystem:
    coords: list
    equations: list  # E_i, one per coordinate
    kinds: list  # DYNAMICAL | FIRST_ORDER | ALGEBRAIC

    def __iter__(self):
        return iter(zip(self.coords, self.equations, self.kinds))


def momenta(spec: SystemSpec, ps: PhaseSpace | None = None) -> list:
    ps = ps or PhaseSpace(spec)
    return [differentiate(spec.lagrangian, ps.velocity(c), "left") for c in ps.coords]


def _classify(ps: PhaseSpace, e: Expr) -> str:
    k = ps.max_order(e)
    if k >= 2:
        return DYNAMICAL
    if k == 1:
        return FIRST_ORDER
    return ALGEBRAIC


def euler_lagrange(spec: SystemSpec, ps: PhaseSpace | None = None) -> EulerLagrangeSystem:
    """E_i = d/dt(dL/d(dq_i)) - dL/dq_i, chain rule over jets."""
    ps = ps or PhaseSpace(spec)
    eqs = []
    kinds = []
    for c, p in zip(ps.coords, momenta(spec, ps)):
        e = ps.total_derivative(p) - differentiate(spec.lagrangian, c, "left")
        eqs.append(e)
        kinds.append(_classify(ps, e))
    return EulerLagrangeSystem(list(ps.coords), eqs, kinds)


def energy_function(spec: SystemSpec, ps: PhaseSpace | None = None) -> Expr:
    """sum_i dq_i * p_i - L over jets."""
    ps = ps or PhaseSpace(spec)
    h = -spec.lagrangian
    for c, p in zip(ps.coords, momenta(spec, ps)):
        h = h + ps.velocity(c).as_expr() * p
    if h.parity == 1:
        raise OddHamiltonian("Legendre transform produced an odd Hamiltonian")
    return h


def hamiltonian_at_initial(spec: SystemSpec, tsol, constraints=None) -> Expr:
    """Conserved H in the independent initial conditions.

    ``constraints`` defaults to the set detected from ``tsol``.
    """
    if tsol.order < 1:
        raise ValueError("Taylor solution must have order >= 1")
    if constraints is None:
        from .initial_instant import detect_ic_constraints

        constraints = detect_ic_constraints(spec, tsol)
    ps = tsol.phase
    h = energy_function(spec, ps)
    h0 = constraints.reduce(substitute(h, tsol.jets_at(ps.max_order(h))))
    dh = ps.total_derivative(h)
    if ps.max_order(dh) <= tsol.max_known_order():
        rate = constraints.reduce(substitute(dh, tsol.jets_at(ps.max_order(dh))))
        if rate:
            raise NonConservedHamiltonian(f"dH/dt at t=0 is {rate}, not 0")
    return h0
