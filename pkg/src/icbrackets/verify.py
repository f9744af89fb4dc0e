"""Checks on a derived bracket table.

* Jacobi identity (numeric for even tables, symbolic for graded ones),
* time covariance of the brackets, order by order in t,
* equivalence of Hamilton's equations with the Euler-Lagrange flow at t=0,
* agreement of RK4 trajectories of both flows.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .bracket_solver import BracketTable, bracket_of
from .errors import CovarianceViolation, EquivalenceViolation, JacobiViolation, StepRejected
from .initial_instant import ICConstraintSet, TaylorSolution
from .linsolve import solve_linear
from .mechanics import euler_lagrange
from .numeric import compile_exprs, sample_points
from .series import SeriesPoly, compose
from .symexpr import ZERO, Expr, Symbol, substitute, to_string
from .sysparse import SystemSpec

log = logging.getLogger(__name__)

SYMBOLIC_ZERO = "symbolic-zero"
PASS = "pass"
FAIL = "fail"
SKIPPED = "skipped"


@dataclass
class CheckResult:
    name: str
    status: str
    residual: object  # float, SYMBOLIC_ZERO, or a message
    params: dict = field(default_factory=dict)
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != FAIL

    def as_dict(self) -> dict:
        d = {"name": self.name, "status": self.status, "residual": self.residual, "params": self.params}
        if self.detail:
            d["detail"] = self.detail
        return d


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


# ------------------------------------------------------------ Liouville


def liouville_apply(table: BracketTable, H: Expr, f: Expr, n: int) -> Expr:
    """G^n f with G f = {f, H}."""
    out = f
    for _ in range(n):
        out = bracket_of(out, H, table)
    return out


def _tower(table, H, x: Symbol, n: int) -> list:
    out = [table.expand(x.as_expr())]
    for _ in range(n):
        out.append(bracket_of(out[-1], H, table))
    return out


# ------------------------------------------------------------ covariance


def _reduced_series(tsol: TaylorSolution, cs: ICConstraintSet | None) -> dict:
    if cs is None:
        return dict(tsol.series)
    return {x: SeriesPoly([cs.reduce(c) for c in s.coeffs]) for x, s in tsol.series.items()}


def covariance_check(spec: SystemSpec, table: BracketTable, H: Expr, tsol: TaylorSolution, K: int | None = None, constraints: ICConstraintSet | None = None, raise_on_fail: bool = False) -> CheckResult:
    """{xi_I(t), xi_J(t)} against Theta_IJ(xi(t)) through order K-2."""
    K = tsol.order if K is None else K
    top = K - 2
    params = {"order": K, "max_t_power": top}
    if top < 0:
        return CheckResult("covariance", SKIPPED, "order too low", params)
    if tsol.order < top:
        raise ValueError("Taylor solution shorter than the requested order")
    ps = tsol.phase
    reduce = constraints.reduce if constraints is not None else (lambda e: e)
    series = _reduced_series(tsol, constraints)
    towers = {x: _tower(table, H, x, top) for x in table.phase}
    bindings = {x: series[x].truncate(top) for x in table.phase}
    worst = None
    for i, a in enumerate(table.phase):
        for b in table.phase[i:]:
            if a == b and not a.odd:
                continue
            theta = table.get(a, b)
            right = compose(theta, bindings, top)
            for k in range(top + 1):
                left = ZERO
                for s in range(k + 1):
                    term = bracket_of(towers[a][s], towers[b][k - s], table)
                    if term:
                        left = left + comb(k, s) * term
                diff = reduce(ps.to_ic(left)) - right[k]
                if diff:
                    msg = f"pair ({a.name}, {b.name}) fails at order {k}: residual {to_string(diff)}"
                    if raise_on_fail:
                        raise CovarianceViolation(msg)
                    worst = worst or msg
    if worst:
        return CheckResult("covariance", FAIL, worst, params)
    return CheckResult("covariance", PASS, SYMBOLIC_ZERO, params)


# ------------------------------------------------------------ Jacobi


def _jacobi_expr(table, a, b, c) -> Expr:
    """Graded cyclic sum; reduces to the usual one for even variables."""

    def sg(x, y):
        return -1 if (x.odd and y.odd) else 1

    out = ZERO
    for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
        inner = table.get(y, z)
        if not inner:
            continue
        v = bracket_of(x.as_expr(), inner, table)
        if v:
            out = out + sg(x, z) * v
    return out


def jacobi_check(table: BracketTable, samples: int = 100, seed: int = 42, tol: float = 1e-9, raise_on_fail: bool = False) -> CheckResult:
    variables = list(table.independent)
    graded = any(v.odd for v in variables)
    params = {"samples": samples, "seed": seed, "tol": tol}
    triples = itertools.combinations_with_replacement(variables, 3) if graded else itertools.combinations(variables, 3)
    exprs = []
    names = []
    for a, b, c in triples:
        e = _jacobi_expr(table, a, b, c)
        if e:
            exprs.append(e)
            names.append((a.name, b.name, c.name))
    if not exprs:
        return CheckResult("jacobi", PASS, SYMBOLIC_ZERO, params)
    if graded or any(e.has_odd() for e in exprs):
        msg = f"graded Jacobi fails on {names[0]}: {to_string(exprs[0])}"
        if raise_on_fail:
            raise JacobiViolation(msg)
        return CheckResult("jacobi", FAIL, msg, params)
    evars = variables + list(table.params)
    rng = np.random.default_rng(seed)
    positive = [False] * len(variables) + [True] * len(table.params)
    X = sample_points(rng, samples, len(evars), positive)
    vals = np.abs(compile_exprs(exprs, evars)(X))
    worst = float(vals.max())
    status = PASS if worst < tol else FAIL
    if status == FAIL:
        j = int(np.argmax(vals.max(axis=0)))
        msg = f"Jacobi residual {worst:.3g} on {names[j]}"
        if raise_on_fail:
            raise JacobiViolation(msg)
        return CheckResult("jacobi", FAIL, worst, params, msg)
    return CheckResult("jacobi", status, worst, params)


# ------------------------------------------------------------ Hamilton vs EL


def hamilton_equivalence_check(spec: SystemSpec, table: BracketTable, H: Expr, tsol: TaylorSolution, constraints: ICConstraintSet | None = None, raise_on_fail: bool = False) -> CheckResult:
    """{xi, H} must equal the order-1 Taylor coefficient of xi."""
    ps = tsol.phase
    reduce = constraints.reduce if constraints is not None else (lambda e: e)
    for x in table.phase:
        lhs = ps.to_phase(reduce(tsol.series[x][1]))
        rhs = bracket_of(x.as_expr(), H, table)
        diff = table.expand(lhs) - rhs
        if diff:
            msg = f"d{x.name}/dt: Euler-Lagrange gives {to_string(lhs)}, brackets give {to_string(rhs)}"
            if raise_on_fail:
                raise EquivalenceViolation(msg)
            return CheckResult("hamilton-equivalence", FAIL, msg, {})
    return CheckResult("hamilton-equivalence", PASS, SYMBOLIC_ZERO, {})


# ------------------------------------------------------------ trajectories


def _rk4(f, y0: np.ndarray, dt: float, steps: int) -> np.ndarray:
    out = np.empty((steps + 1, y0.size))
    y = y0.astype(float).copy()
    out[0] = y
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(steps):
            k1 = f(y)
            k2 = f(y + 0.5 * dt * k1)
            k3 = f(y + 0.5 * dt * k2)
            k4 = f(y + dt * k3)
            y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(y)):
                raise StepRejected(f"non-finite state at step {n + 1}")
            out[n + 1] = y
    return out


class FirstOrderEL:
    """Euler-Lagrange equations solved for their highest jets.

    State: every non-algebraic coordinate plus the velocity of every
    coordinate whose acceleration appears.
    """

    def __init__(self, spec: SystemSpec, ps):
        self.ps = ps
        el = euler_lagrange(spec, ps)
        jets = set()
        for e in el.equations:
            jets |= {s for s in e.free_symbols() if s in ps.jet_of}
        for p in ps.momentum_exprs:
            jets |= {s for s in p.free_symbols() if s in ps.jet_of}
        top = {}
        for s in jets:
            c, n = ps.jet_of[s]
            top[c] = max(top.get(c, 0), n)
        unknowns = []
        self.state = []
        for c in ps.coords:
            t = top.get(c, 0)
            if t >= 2:
                unknowns.append(ps.jet(c, 2))
                self.state += [c, ps.jet(c, 1)]
            elif t == 1:
                unknowns.append(ps.jet(c, 1))
                self.state.append(c)
            else:
                unknowns.append(c)
        for c in ps.coords:
            if top.get(c, 0) >= 3:
                raise StepRejected(f"{c.name}: equations above second order are not reduced")
        res = solve_linear(el.equations, unknowns)
        missing = [u for u in unknowns if u not in res.solution]
        if missing or res.residuals or res.deferred:
            raise StepRejected("Euler-Lagrange system cannot be put in explicit first-order form")
        self.solution = res.solution
        self.derivative = []
        for s in self.state:
            c, n = ps.jet_of[s]
            self.derivative.append(self._explicit(ps.jet(c, n + 1)))
        self.params = [p for p, _ in spec.params]

    def _explicit(self, s: Symbol) -> Expr:
        if s in self.solution:
            return self.solution[s]
        return s.as_expr()

    def phase_values(self, ps) -> list:
        """Phase variables as expressions in the state."""
        out = []
        for x in ps.phase:
            if x in ps.coord_of:
                c = ps.coord_of[x]
                p = ps.momentum_exprs[ps.coords.index(c)]
                out.append(substitute(p, {s: self._explicit(s) for s in p.free_symbols() if s in self.solution}))
            else:
                out.append(self._explicit(x))
        return out


def trajectory_check(spec: SystemSpec, table: BracketTable, H: Expr, tsol: TaylorSolution, point: dict | None = None, t_end: float = 1.0, dt: float = 1e-3, constraints: ICConstraintSet | None = None, seed: int = 42, param_values: dict | None = None, tol: float = 1e-6, raise_on_fail: bool = False) -> CheckResult:
    """RK4 on dxi/dt = {xi, H} against RK4 on the Euler-Lagrange system.

    ``point`` maps independent phase variables to numbers; random when
    omitted.  Dependent variables follow through the elimination map.
    """
    ps = tsol.phase
    if any(x.odd for x in table.phase):
        return CheckResult("trajectory", SKIPPED, "graded system", {"dt": dt, "t_end": t_end})
    reduce = constraints.reduce if constraints is not None else (lambda e: e)
    indep = list(table.independent)
    pvars = [p for p, _ in spec.params]
    if param_values is None:
        param_values = {p: 1.0 for p in pvars}
    if point is None:
        rng = np.random.default_rng(seed)
        vals = sample_points(rng, 1, len(indep))[0]
        point = dict(zip(indep, vals))
    y0 = np.array([float(point[x]) for x in indep])
    pv = np.array([float(param_values[p]) for p in pvars])
    steps = int(round(t_end / dt))
    params = {"dt": dt, "t_end": t_end, "steps": steps, "point": {x.name: float(point[x]) for x in indep}}

    # bracket flow over independent variables
    flow_f = compile_exprs([bracket_of(x.as_expr(), H, table) for x in indep], indep + pvars)

    def f_br(y):
        return flow_f(np.concatenate([y, pv])[None, :])[0]

    try:
        el = FirstOrderEL(spec, ps)
    except StepRejected as err:
        return CheckResult("trajectory", SKIPPED, str(err), params)

    # initial EL state from the Taylor solution at the same point
    ic_vars = [ps.ic[x] for x in indep] + pvars
    init = []
    for s in el.state:
        c, n = ps.jet_of[s]
        init.append(reduce(tsol.series[c][n]))
    init_f = compile_exprs(init, ic_vars)
    z0 = init_f(np.concatenate([y0, pv])[None, :])[0]
    el_f = compile_exprs(el.derivative, el.state + pvars)

    def f_el(z):
        return el_f(np.concatenate([z, pv])[None, :])[0]

    out_f = compile_exprs([el.phase_values(ps)[ps.phase.index(x)] for x in indep], el.state + pvars)
    traj_br = _rk4(f_br, y0, dt, steps)
    traj_el = _rk4(f_el, z0, dt, steps)
    mapped = out_f(np.concatenate([traj_el, np.broadcast_to(pv, (traj_el.shape[0], pv.size))], axis=1))
    dev = float(np.max(np.abs(mapped - traj_br)))
    h_f = compile_exprs([H], indep + pvars)
    energy = h_f(np.concatenate([traj_br, np.broadcast_to(pv, (traj_br.shape[0], pv.size))], axis=1))[:, 0]
    params["energy_drift"] = float(np.max(np.abs(energy - energy[0])))
    status = PASS if dev < tol else FAIL
    if status == FAIL and raise_on_fail:
        raise StepRejected(f"trajectory deviation {dev:.3g}")
    return CheckResult("trajectory", status, dev, params)


ALL_CHECKS = ("jacobi", "covariance", "hamilton-equivalence", "trajectory")
