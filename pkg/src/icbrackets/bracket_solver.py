"""Identification of brackets among independent initial conditions.

For every phase variable xi, Hamilton's equation at t=0 reads

    xi_1 = sum_{k,l} (d xi_0 / dC_k) {C_k, C_l} (d H / dC_l)

with right derivatives on the left factor and left derivatives on the right
one.  The unknown brackets are expanded over a basis of even functions of
the independent initial conditions and the expansion coefficients are
fixed by least-squares collocation (even systems) or by exact coefficient
matching (systems with odd generators).
"""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BasisInsufficient, NonUniqueBrackets, UnboundSymbol
from .initial_instant import ICConstraintSet, TaylorSolution
from .linsolve import solve_rows
from .mechanics import PhaseSpace
from .numeric import compile_exprs, sample_points
from .symexpr import ONE, ZERO, Expr, Symbol, differentiate, exp_atoms, substitute
from .sysparse import SystemSpec

log = logging.getLogger(__name__)

SOLVED = "solved"
EXTENDED = "extended"
ZERO_BY_PARITY = "zero-by-parity"


def graded_sign(a: Symbol, b: Symbol) -> int:
    """{b, a} = graded_sign(a, b) * {a, b}."""
    return 1 if (a.odd and b.odd) else -1


@dataclass
class Row:
    var: Symbol  # phase variable
    lhs: Expr  # order-1 Taylor coefficient, independent ICs only
    value: Expr  # xi at t=0 in independent ICs
    dxi: dict  # IC -> right derivative of value


@dataclass
class IdentificationSystem:
    phase: PhaseSpace
    ics: list  # independent IC symbols
    params: list  # (Symbol, positive)
    H: Expr
    hgrad: dict  # IC -> left derivative of H
    rows: list

    @property
    def graded(self) -> bool:
        return any(c.odd for c in self.ics)

    @property
    def slots(self) -> list:
        """Unordered IC pairs k<l plus odd-odd diagonals."""
        out = []
        for i, k in enumerate(self.ics):
            for l in self.ics[i:]:
                if k == l and not k.odd:
                    continue
                out.append((k, l))
        return out

    def slot_symbol(self, k: Symbol, l: Symbol) -> Symbol:
        return Symbol(f"B[{k.name},{l.name}]", k.odd != l.odd, -1000)

    def bracket_symbol_expr(self, k: Symbol, l: Symbol) -> Expr:
        """Expression of the unknown {C_k, C_l} in slot symbols."""
        if k == l and not k.odd:
            return ZERO
        ik, il = self.ics.index(k), self.ics.index(l)
        if ik <= il:
            return self.slot_symbol(k, l).as_expr()
        return graded_sign(l, k) * self.slot_symbol(l, k).as_expr()

    def equation(self, row: Row, bracket=None) -> Expr:
        """lhs - sum dxi_k B_kl dH_l, with B given by ``bracket(k, l)``."""
        bracket = bracket or self.bracket_symbol_expr
        rhs = ZERO
        for k, dk in row.dxi.items():
            inner = ZERO
            for l, hl in self.hgrad.items():
                b = bracket(k, l)
                if b:
                    inner = inner + b * hl
            if inner:
                rhs = rhs + dk * inner
        return row.lhs - rhs

    @property
    def even_variables(self) -> list:
        return [c for c in self.ics if not c.odd] + [p for p, _ in self.params]


def build_identification_system(spec: SystemSpec, tsol: TaylorSolution, ics: ICConstraintSet, H: Expr) -> IdentificationSystem:
    ps = tsol.phase
    indep = list(ics.independent)
    hgrad = {}
    for c in indep:
        g = differentiate(H, c, "left")
        if g:
            hgrad[c] = g
    rows = []
    for x in ps.phase:
        value = ics.reduce(tsol.series[x][0])
        lhs = ics.reduce(tsol.series[x][1])
        dxi = {}
        for c in indep:
            d = differentiate(value, c, "right")
            if d:
                dxi[c] = d
        rows.append(Row(x, lhs, value, dxi))
    return IdentificationSystem(ps, indep, list(spec.params), H, hgrad, rows)


def harvest_basis(system: IdentificationSystem, degree: int = 2) -> list:
    """{1} and monomials of degree <= d in the even variables, each also
    multiplied by every exponential atom found in the system."""
    variables = system.even_variables
    monos = [ONE]
    for d in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(variables, d):
            e = ONE
            for s in combo:
                e = e * s.as_expr()
            monos.append(e)
    atoms: dict = {}
    exprs = [system.H] + list(system.hgrad.values())
    for r in system.rows:
        exprs.append(r.lhs)
        exprs.extend(r.dxi.values())
    for e in exprs:
        for a in exp_atoms(e):
            atoms.setdefault(a, None)
    basis = list(monos)
    for a in atoms:
        basis.extend(m * a for m in monos)
    seen = {}
    for b in basis:
        seen.setdefault(b, None)
    return list(seen)


@dataclass
class Identification:
    basis: list
    coefficients: dict  # slot (k, l) -> list of Fraction/complex coefficients per basis element
    residual: float
    nullspace_dim: int
    degree: int | None = None
    method: str = "collocation"
    witness: object = None
    raw: object = None  # numeric least-squares solution (collocation only)


# ------------------------------------------------------------ collocation


def _points(system: IdentificationSystem, rng, n: int) -> np.ndarray:
    flags = [False] * sum(1 for c in system.ics if not c.odd) + [pos for _, pos in system.params]
    return sample_points(rng, n, len(system.even_variables), flags)


def _collocation_matrix(system: IdentificationSystem, basis: list, slots: list, X: np.ndarray):
    variables = system.even_variables
    ics = system.ics
    M = len(ics)
    rows = system.rows
    idx = {c: i for i, c in enumerate(ics)}
    lhs_f = compile_exprs([r.lhs for r in rows], variables)
    d_entries = [(i, idx[c], e) for i, r in enumerate(rows) for c, e in r.dxi.items()]
    d_f = compile_exprs([e for _, _, e in d_entries], variables)
    h_f = compile_exprs([system.hgrad.get(c, ZERO) for c in ics], variables)
    phi_f = compile_exprs(basis, variables)
    R = X.shape[0]
    b = lhs_f(X)  # (R, nEq)
    D = np.zeros((R, len(rows), M))
    dv = d_f(X)
    for j, (i, k, _) in enumerate(d_entries):
        D[:, i, k] = dv[:, j]
    Hg = h_f(X)
    phi = phi_f(X)
    blocks = []
    for k, l in slots:
        ik, il = idx[k], idx[l]
        g = D[:, :, ik] * Hg[:, il, None] - D[:, :, il] * Hg[:, ik, None]  # (R, nEq)
        blocks.append(g[:, :, None] * phi[:, None, :])
    if blocks:
        A = np.concatenate(blocks, axis=2).reshape(R * len(rows), len(slots) * len(basis))
    else:
        A = np.zeros((R * len(rows), 0))
    return A, b.reshape(-1)


def collocation_solve(system: IdentificationSystem, basis: list, samples: int = 200, seed: int = 42, tol: float = 1e-9) -> Identification:
    """Least-squares identification on random points; validated on a fresh set."""
    if system.graded:
        raise ValueError("collocation handles even systems; use graded_match")
    slots = system.slots
    rng = np.random.default_rng(seed)
    X = _points(system, rng, samples)
    Xv = _points(system, rng, samples)
    A, b = _collocation_matrix(system, basis, slots, X)
    ncol = A.shape[1]
    if ncol == 0:
        c = np.zeros(0)
        null = 0
        witness = None
    else:
        scale = np.linalg.norm(A, axis=0)
        scale[scale == 0] = 1.0
        As = A / scale
        U, s, Vt = np.linalg.svd(As, full_matrices=False)
        smax = s[0] if s.size else 0.0
        keep = s > max(smax * 1e-10, 1e-300)
        null = int(ncol - keep.sum())
        cs = Vt[keep].T @ ((U[:, keep].T @ b) / s[keep])
        c = cs / scale
        witness = None
        if null:
            w = Vt[-1] / scale
            witness = {(slots[j // len(basis)], j % len(basis)): float(w[j]) for j in np.flatnonzero(np.abs(w) > 1e-8 * np.abs(w).max())}
    Av, bv = _collocation_matrix(system, basis, slots, Xv)
    resid = float(np.max(np.abs(Av @ c - bv))) if bv.size else 0.0
    coeffs = {}
    nb = len(basis)
    for si, slot in enumerate(slots):
        coeffs[slot] = [float(v) for v in c[si * nb:(si + 1) * nb]]
    return Identification(basis, coeffs, resid, null, method="collocation", witness=witness, raw=c)


# ------------------------------------------------------------ graded matching


def graded_match(system: IdentificationSystem, basis: list) -> Identification:
    """Exact identification: every canonical monomial coefficient must vanish.

    Slot values are sums of basis functions with unknown (complex rational)
    coefficients; odd-valued slots vanish identically with an even basis.
    """
    slots = [s for s in system.slots if s[0].odd == s[1].odd]
    unknown = {}
    value = {}
    for k, l in slots:
        e = ZERO
        for bi, phi in enumerate(basis):
            u = Symbol(f"u[{k.name},{l.name},{bi}]", False, -2000)
            unknown[u] = ((k, l), bi)
            e = e + u.as_expr() * phi
        value[(k, l)] = e
    slot_set = set(value)

    def bracket(k, l):
        if (k, l) in slot_set:
            return value[(k, l)]
        if (l, k) in slot_set:
            return graded_sign(l, k) * value[(l, k)]
        return ZERO

    # index lookup keeps pair orientation consistent with system.slots
    rows = []
    for r in system.rows:
        eq = system.equation(r, bracket)
        groups: dict = {}
        for m, c in eq.terms():
            imag, evens, x, odds = m
            us = [s for s, _ in evens if s in unknown]
            u = us[0] if us else None
            rest_evens = tuple((s, p) for s, p in evens if s not in unknown)
            key = (rest_evens, x, odds)
            coeff = Expr._raw({(imag, (), None, ()): c})
            g = groups.setdefault(key, [{}, ZERO])
            if u is None:
                g[1] = g[1] + coeff
            else:
                g[0][u] = g[0].get(u, ZERO) + coeff
        rows.extend(groups.values())
    order = list(unknown)
    res = solve_rows(rows, order)
    if res.residuals:
        raise BasisInsufficient(f"identification inconsistent with this basis ({len(res.residuals)} residual equations)")
    free = [u for u in order if u not in res.solution]
    coeffs = {s: [Fraction(0)] * len(basis) for s in system.slots}
    for u, v in res.solution.items():
        slot, bi = unknown[u]
        coeffs[slot][bi] = v
    return Identification(basis, coeffs, 0.0, len(free), method="graded", witness=[u.name for u in free[:4]] or None)


# ------------------------------------------------------------ driver


def identify(system: IdentificationSystem, max_degree: int = 2, samples: int = 200, seed: int = 42, tol: float = 1e-9) -> Identification:
    """Smallest basis degree whose identification validates within ``tol``."""
    last = None
    for d in range(max_degree + 1):
        basis = harvest_basis(system, d)
        if system.graded:
            try:
                ident = graded_match(system, basis)
            except BasisInsufficient as err:
                last = err
                continue
        else:
            ident = collocation_solve(system, basis, samples, seed, tol)
            if ident.residual > tol:
                last = BasisInsufficient(f"degree {d}: validation residual {ident.residual:.3g} > {tol:g}")
                continue
        ident.degree = d
        if ident.nullspace_dim:
            raise NonUniqueBrackets(
                f"degree {d}: identification leaves {ident.nullspace_dim} free direction(s)",
                ident.nullspace_dim,
                ident.witness,
            )
        return ident
    raise last or BasisInsufficient("no basis degree succeeded")


def snap(value, max_den: int = 64, tol: float = 1e-9):
    """Nearest rational with small denominator, or the float itself."""
    if isinstance(value, (Fraction, Expr)):
        return value
    f = Fraction(value).limit_denominator(max_den)
    if abs(float(f) - value) <= tol:
        return f
    warnings.warn(f"coefficient {value!r} kept as a float (no rational within {tol:g})")
    return Fraction(value)


# ------------------------------------------------------------ tables


class BracketTable:
    """Graded-antisymmetric bracket table over phase variables."""

    def __init__(self, system: str, phase: list, independent: list, base: dict, dependent: dict | None = None, params=()):
        self.system = system
        self.phase = list(phase)
        self.independent = list(independent)
        self.dependent = dict(dependent or {})
        self.params = [p for p, _ in params] if params and isinstance(next(iter(params)), tuple) else list(params)
        self._pos = {x: i for i, x in enumerate(self.phase)}
        self.base: dict = {}
        for (a, b), v in base.items():
            self._set_base(a, b, v)
        self.entries: dict = {}
        self.provenance: dict = {}
        for a in self.independent:
            for b in self.independent:
                if self._pos[a] <= self._pos[b] and (a != b or a.odd):
                    self._store(a, b, self.base.get(a, {}).get(b, ZERO), SOLVED if a.odd == b.odd else ZERO_BY_PARITY)

    def _set_base(self, a, b, v):
        if not v:
            return
        self.base.setdefault(a, {})[b] = v
        if a != b:
            self.base.setdefault(b, {})[a] = graded_sign(a, b) * v

    def _store(self, a, b, v, prov):
        if self._pos[a] > self._pos[b]:
            a, b = b, a
            v = graded_sign(b, a) * v
        self.entries[(a, b)] = v
        self.provenance[(a, b)] = prov

    def get(self, a: Symbol, b: Symbol) -> Expr:
        if (a, b) in self.entries:
            return self.entries[(a, b)]
        if (b, a) in self.entries:
            return graded_sign(b, a) * self.entries[(b, a)]
        return bracket_of(a.as_expr(), b.as_expr(), self)

    def pairs(self):
        for (a, b), v in self.entries.items():
            yield a, b, v, self.provenance[(a, b)]

    def expand(self, e: Expr) -> Expr:
        """Replace dependent phase variables by their expressions."""
        hit = {s: v for s, v in self.dependent.items() if s in e.free_symbols()}
        return substitute(e, hit) if hit else e

    def copy(self) -> "BracketTable":
        t = BracketTable.__new__(BracketTable)
        t.__dict__.update(self.__dict__)
        t.base = {a: dict(v) for a, v in self.base.items()}
        t.entries = dict(self.entries)
        t.provenance = dict(self.provenance)
        return t

    def override(self, a: Symbol, b: Symbol, value: Expr):
        """Replace one base bracket (used for negative tests)."""
        for x, y in ((a, b), (b, a)):
            self.base.get(x, {}).pop(y, None)
        self._set_base(a, b, value)
        self._store(a, b, value, SOLVED)


def bracket_of(f: Expr, g: Expr, table: BracketTable) -> Expr:
    """sum_{k,l} (f d/dC_k) {C_k, C_l} (d/dC_l g), graded."""
    f = table.expand(f)
    g = table.expand(g)
    allowed = set(table.independent) | set(table.params)
    for s in f.free_symbols() | g.free_symbols():
        if s not in allowed:
            raise UnboundSymbol(s.name)
    fs = {}
    for k in f.free_symbols():
        if k in table.base:
            d = differentiate(f, k, "right")
            if d:
                fs[k] = d
    if not fs:
        return ZERO
    gs = {}
    for l in g.free_symbols():
        if l in table.independent:
            d = differentiate(g, l, "left")
            if d:
                gs[l] = d
    total = ZERO
    for k in sorted(fs, key=lambda s: s.key):
        row = table.base[k]
        for l in sorted(gs, key=lambda s: s.key):
            b = row.get(l)
            if b is not None:
                total = total + fs[k] * b * gs[l]
    return total


def reconstruct_brackets(ident: Identification, system: IdentificationSystem, constraints: ICConstraintSet | None = None, name: str = "") -> BracketTable:
    ps = system.phase
    base = {}
    for (k, l), cs in ident.coefficients.items():
        e = ZERO
        for c, phi in zip(cs, ident.basis):
            c = snap(c)
            if isinstance(c, Expr):
                if c:
                    e = e + c * phi
            elif c:
                e = e + Expr(c) * phi
        if e:
            base[(ps.from_ic[k], ps.from_ic[l])] = ps.to_phase(e)
    dependent = {}
    if constraints is not None:
        for s, v in constraints.constraints:
            dependent[ps.from_ic[s]] = ps.to_phase(v)
    independent = [ps.from_ic[c] for c in system.ics]
    return BracketTable(name, ps.phase, independent, base, dependent, system.params)


def extend_table(table: BracketTable, constraints: ICConstraintSet | None = None, phase: PhaseSpace | None = None) -> BracketTable:
    """Close the table over every coordinate and momentum."""
    t = table.copy()
    if constraints is not None and phase is not None:
        for s, v in constraints.constraints:
            t.dependent[phase.from_ic[s]] = phase.to_phase(v)
    indep = set(t.independent)
    for i, a in enumerate(t.phase):
        for b in t.phase[i:]:
            if a == b and not a.odd:
                continue
            if a in indep and b in indep:
                continue
            v = bracket_of(a.as_expr(), b.as_expr(), t)
            t._store(a, b, v, EXTENDED)
    return t
