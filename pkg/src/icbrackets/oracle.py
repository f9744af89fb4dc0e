"""Reference Dirac-Bergmann constraint analysis for even systems.

Works on canonical phase space with Poisson brackets {q_i, p_j} = delta_ij.
Nothing here depends on the initial-instant pipeline; the two meet only in
``compare_tables``, which takes any object exposing ``phase`` and ``get``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import GaugeFreedom, NonTerminating, SingularMatrix, UnsolvableConstraint
from .linsolve import isolate, solve_linear
from .mechanics import PhaseSpace, energy_function, momenta
from .numeric import compile_exprs, sample_points
from .symexpr import ONE, ZERO, Expr, Symbol, differentiate, substitute
from .sysparse import SystemSpec

log = logging.getLogger(__name__)

PRIMARY = "primary"
FIRST = "first"
SECOND = "second"
UNDETERMINED = "undetermined"
SYMBOLIC_LIMIT = 6


@dataclass
class ConstraintRecord:
    expression: Expr
    origin: str  # "primary" or "consistency-step n"
    klass: str = UNDETERMINED


class CanonicalSpace:
    """Phase space with canonical Poisson brackets."""

    def __init__(self, spec: SystemSpec):
        if spec.is_graded:
            raise ValueError("the reference constraint analysis handles even systems only")
        self.spec = spec
        self.ps = PhaseSpace(spec)
        self.q = list(self.ps.coords)
        self.p = list(self.ps.momenta)
        self.params = [s for s, _ in spec.params]

    def poisson(self, f: Expr, g: Expr) -> Expr:
        out = ZERO
        fs = f.free_symbols()
        gs = g.free_symbols()
        for q, p in zip(self.q, self.p):
            if q in fs and p in gs:
                out = out + differentiate(f, q) * differentiate(g, p)
            if p in fs and q in gs:
                out = out - differentiate(f, p) * differentiate(g, q)
        return out

    def grad(self, f: Expr) -> tuple[dict, dict]:
        """(dF/dq_i, dF/dp_i) as dicts, nonzero entries only."""
        fs = f.free_symbols()
        dq = {q: differentiate(f, q) for q in self.q if q in fs}
        dp = {p: differentiate(f, p) for p in self.p if p in fs}
        return dq, dp


class _SurfaceMap:
    """Solves constraints for phase variables: momenta first, then the
    coordinate declared last.  Used for weak equality and for drawing
    points on the constraint surface."""

    def __init__(self, space: CanonicalSpace):
        self.space = space
        self.map: dict = {}
        self.order: list = []

    def reduce(self, e: Expr) -> Expr:
        hit = {s: v for s, v in self.map.items() if s in e.free_symbols()}
        return substitute(e, hit) if hit else e

    def add(self, phi: Expr) -> bool:
        r = self.reduce(phi)
        if not r:
            return False
        sp = self.space
        cands = [p for p in reversed(sp.p)] + [q for q in reversed(sp.q)]
        for s in cands:
            if s not in r.free_symbols():
                continue
            v = isolate(r, s)
            if v is None:
                continue
            for t in list(self.map):
                if s in self.map[t].free_symbols():
                    self.map[t] = substitute(self.map[t], {s: v})
            self.map[s] = v
            self.order.append(s)
            return True
        raise UnsolvableConstraint(f"constraint {r} = 0 cannot be solved for a phase variable")

    @property
    def free(self) -> list:
        return [x for x in self.space.q + self.space.p if x not in self.map]


def _normalize_sign(space: CanonicalSpace, phi: Expr) -> Expr:
    """Give the first momentum (or else coordinate) a positive coefficient."""
    for s in space.p + space.q:
        if s in phi.free_symbols():
            d = differentiate(phi, s)
            if d.is_rational and d.as_fraction() < 0:
                return -phi
            return phi
    return phi


@dataclass
class Closure:
    space: CanonicalSpace
    constraints: list  # ConstraintRecord
    hamiltonian: Expr  # canonical Hamiltonian on phase space
    multipliers: dict  # lambda symbol -> fixed value (None if undetermined)
    surface: _SurfaceMap
    inverse: list | None = None  # symbolic C^-1 rows, when small
    matrix: list | None = None  # symbolic C rows
    condition: float | None = None

    @property
    def expressions(self) -> list:
        return [c.expression for c in self.constraints]


def primary_constraints(spec: SystemSpec, space: CanonicalSpace | None = None) -> tuple[list, dict]:
    """Primary constraints and the velocities solved from the momenta."""
    space = space or CanonicalSpace(spec)
    ps = space.ps
    moms = momenta(spec, ps)
    vel = [ps.velocity(q) for q in space.q]
    eqs = [P - p.as_expr() for P, p in zip(moms, space.p)]
    res = solve_linear(eqs, vel)
    if res.deferred:
        raise UnsolvableConstraint("momenta are nonlinear in the velocities")
    records = []
    for r in res.residuals:
        records.append(ConstraintRecord(_normalize_sign(space, r), PRIMARY))
    for r in res.free_rows:
        if not any(v in r.free_symbols() for v in vel):
            records.append(ConstraintRecord(_normalize_sign(space, r), PRIMARY))
    solved = {v: e for v, e in res.solution.items() if not any(u in e.free_symbols() for u in vel)}
    return records, solved


def canonical_hamiltonian(spec: SystemSpec, space: CanonicalSpace, solved: dict) -> Expr:
    ps = space.ps
    e = energy_function(spec, ps)
    e = substitute(e, {v: x for v, x in solved.items() if v in e.free_symbols()})
    left = [s for s in e.free_symbols() if s in ps.jet_of and ps.jet_of[s][1] >= 1]
    if left:
        # remaining velocities multiply primary constraints; fold them into
        # the multipliers by evaluating the energy at zero velocity
        e = substitute(e, {s: ZERO for s in left})
    return e


def consistency_closure(spec: SystemSpec, primaries: list | None = None, max_steps: int = 10) -> Closure:
    """Dirac-Bergmann iteration on H_T = H_c + sum_a lambda_a phi_a."""
    space = CanonicalSpace(spec)
    prim, solved = primary_constraints(spec, space)
    if primaries is None:
        primaries = prim
    Hc = canonical_hamiltonian(spec, space, solved)
    surface = _SurfaceMap(space)
    records = []
    for rec in primaries:
        if surface.add(rec.expression):
            records.append(rec)
    lambdas = [Symbol(f"lambda{i}", False, -3000 - i) for i in range(len(records))]
    HT = Hc
    for lam, rec in zip(lambdas, records):
        HT = HT + lam.as_expr() * rec.expression
    pending = list(records)
    fixed: dict = {}
    step = 0
    while pending:
        step += 1
        if step > max_steps:
            raise NonTerminating(f"constraint algorithm did not close in {max_steps} steps")
        eqs = []
        for rec in records:
            e = surface.reduce(space.poisson(rec.expression, HT))
            if fixed:
                e = surface.reduce(substitute(e, {k: v for k, v in fixed.items() if k in e.free_symbols()}))
            if e:
                eqs.append(e)
        res = solve_linear(eqs, [l for l in lambdas if l not in fixed])
        new_fixed = {k: v for k, v in res.solution.items()}
        fixed.update(new_fixed)
        pending = []
        for r in res.residuals:
            r = surface.reduce(r)
            if r and surface.add(r):
                rec = ConstraintRecord(_normalize_sign(space, r), f"consistency-step {step}")
                records.append(rec)
                pending.append(rec)
        if not pending and not new_fixed:
            break
    multipliers = {l: fixed.get(l) for l in lambdas}
    return Closure(space, records, Hc, multipliers, surface)


# ------------------------------------------------------------ classification


def _symbolic_inverse(M: list) -> list | None:
    """Gauss-Jordan with unit pivots; ``None`` when a pivot is not a unit."""
    n = len(M)
    A = [list(row) + [ONE if i == j else ZERO for j in range(n)] for i, row in enumerate(M)]
    for col in range(n):
        piv = None
        for r in range(col, n):
            a = A[r][col]
            if a and a.is_unit():
                piv = r
                break
        if piv is None:
            return None
        A[col], A[piv] = A[piv], A[col]
        inv = A[col][col].inverse()
        A[col] = [x * inv for x in A[col]]
        for r in range(n):
            if r != col and A[r][col]:
                f = A[r][col]
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
    return [row[n:] for row in A]


def surface_points(closure: Closure, n: int, seed: int) -> tuple[list, np.ndarray]:
    """Random points on the constraint surface; columns follow ``variables``."""
    sp = closure.space
    free = closure.surface.free
    rng = np.random.default_rng(seed)
    pos = [False] * len(free) + [True] * len(sp.params)
    X = sample_points(rng, n, len(free) + len(sp.params), pos)
    variables = sp.q + sp.p + sp.params
    dep = [closure.surface.map.get(x, x.as_expr()) for x in sp.q + sp.p]
    f = compile_exprs(dep + [s.as_expr() for s in sp.params], free + sp.params)
    return variables, f(X)


def classify_and_invert(closure: Closure, samples: int = 20, seed: int = 42) -> Closure:
    sp = closure.space
    phis = closure.expressions
    n = len(phis)
    if n == 0:
        closure.inverse = []
        closure.matrix = []
        return closure
    C = [[sp.poisson(a, b) for b in phis] for a in phis]
    closure.matrix = C
    variables, P = surface_points(closure, samples, seed)
    Cf = compile_exprs([e for row in C for e in row], variables)
    mats = Cf(P).reshape(-1, n, n)
    ranks = [np.linalg.matrix_rank(m, tol=1e-9 * max(1.0, np.abs(m).max())) for m in mats]
    rank = max(ranks)
    if rank < n:
        for i in range(n):
            if np.allclose(mats[:, i, :], 0.0, atol=1e-12):
                closure.constraints[i].klass = FIRST
        raise GaugeFreedom(f"constraint matrix has rank {rank} < {n}: first-class constraints present")
    for rec in closure.constraints:
        rec.klass = SECOND
    bad = [i for i, r in enumerate(ranks) if r < n]
    if bad:
        raise SingularMatrix(f"constraint matrix singular at {len(bad)} sample point(s)")
    closure.condition = float(max(np.linalg.cond(m) for m in mats))
    if n <= SYMBOLIC_LIMIT:
        inv = _symbolic_inverse([[closure.surface.reduce(e) for e in row] for row in C])
        closure.inverse = inv
    return closure


def analyze(spec: SystemSpec, samples: int = 20, seed: int = 42, max_steps: int = 10) -> Closure:
    return classify_and_invert(consistency_closure(spec, max_steps=max_steps), samples, seed)


# ------------------------------------------------------------ Dirac brackets


def dirac_bracket(A: Expr, B: Expr, closure: Closure, points: np.ndarray | None = None):
    """{A,B} - {A,phi_a} (C^-1)_ab {phi_b,B}; symbolic when possible."""
    sp = closure.space
    phis = closure.expressions
    pb = sp.poisson(A, B)
    if not phis:
        return closure.surface.reduce(pb) if points is None else compile_exprs([pb], sp.q + sp.p + sp.params)(points)[:, 0]
    left = [sp.poisson(A, f) for f in phis]
    right = [sp.poisson(f, B) for f in phis]
    if points is None:
        if closure.inverse is None:
            raise ValueError("no symbolic inverse; pass sample points")
        out = pb
        for a, la in enumerate(left):
            if not la:
                continue
            for b, rb in enumerate(right):
                c = closure.inverse[a][b]
                if c and rb:
                    out = out - la * c * rb
        return closure.surface.reduce(out)
    variables = sp.q + sp.p + sp.params
    n = len(phis)
    f = compile_exprs([pb] + left + right + [e for row in closure.matrix for e in row], variables)
    V = f(points)
    pbv = V[:, 0]
    L = V[:, 1:1 + n]
    R = V[:, 1 + n:1 + 2 * n]
    C = V[:, 1 + 2 * n:].reshape(-1, n, n)
    corr = np.einsum("ra,rab,rb->r", L, np.linalg.inv(C), R)
    return pbv - corr


def dirac_table_numeric(closure: Closure, points: np.ndarray) -> np.ndarray:
    """All phase-variable Dirac brackets at ``points``: array (R, 2n, 2n)."""
    sp = closure.space
    xs = sp.q + sp.p
    variables = xs + sp.params
    m = len(xs)
    phis = closure.expressions
    R = points.shape[0]
    P0 = np.zeros((m, m))
    for i in range(len(sp.q)):
        P0[i, len(sp.q) + i] = 1.0
        P0[len(sp.q) + i, i] = -1.0
    if not phis:
        return np.broadcast_to(P0, (R, m, m)).copy()
    n = len(phis)
    exprs = [sp.poisson(x.as_expr(), f) for x in xs for f in phis]
    exprs += [e for row in closure.matrix for e in row]
    V = compile_exprs(exprs, variables)(points)
    PA = V[:, : m * n].reshape(R, m, n)
    C = V[:, m * n:].reshape(R, n, n)
    Cinv = np.linalg.inv(C)
    # {x_i, x_j}_D = P0_ij - {x_i, phi_a} Cinv_ab {phi_b, x_j}, with {phi_b, x_j} = -{x_j, phi_b}
    return P0[None] + np.einsum("ria,rab,rjb->rij", PA, Cinv, PA)


def compare_tables(ci_table, closure: Closure, samples: int = 100, seed: int = 42) -> float:
    """max |CI bracket - Dirac bracket| over surface points and all pairs."""
    sp = closure.space
    xs = sp.q + sp.p
    variables, P = surface_points(closure, samples, seed)
    D = dirac_table_numeric(closure, P)
    by_name = {x.name: i for i, x in enumerate(xs)}
    pairs = []
    exprs = []
    for i, a in enumerate(ci_table.phase):
        for b in ci_table.phase[i + 1:]:
            pairs.append((by_name[a.name], by_name[b.name]))
            exprs.append(_rename(ci_table.get(a, b), sp))
    if not exprs:
        return 0.0
    V = compile_exprs(exprs, variables)(P)
    worst = 0.0
    for k, (i, j) in enumerate(pairs):
        worst = max(worst, float(np.max(np.abs(V[:, k] - D[:, i, j]))))
    return worst


def _rename(e: Expr, sp: CanonicalSpace) -> Expr:
    """Map symbols of another phase-space object onto this one by name."""
    own = {x.name: x for x in sp.q + sp.p + sp.params}
    hit = {}
    for s in e.free_symbols():
        t = own.get(s.name)
        if t is None:
            raise KeyError(s.name)
        if t != s:
            hit[s] = t.as_expr()
    return substitute(e, hit) if hit else e
