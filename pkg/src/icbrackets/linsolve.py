"""Exact Gauss-Jordan elimination over expressions.

Equations are expressions that must vanish.  An equation is usable when it
is linear in the unknowns: every monomial carries at most one unknown, to
the first power.  Pivots must be kernel units (rational * im^f * exp(A)),
so every solved value stays inside the polynomial kernel.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .symexpr import Expr, Symbol, ZERO, differentiate, substitute


@dataclass
class LinearResult:
    solution: dict = field(default_factory=dict)  # determined unknowns
    residuals: list = field(default_factory=list)  # rows with no unknowns left (nonzero)
    undetermined: list = field(default_factory=list)  # unknowns left free or unpivotable
    deferred: list = field(default_factory=list)  # equations nonlinear in the unknowns
    free_rows: list = field(default_factory=list)  # pivot rows still depending on free unknowns


def decompose(eq: Expr, unknowns: set) -> tuple[dict, Expr] | None:
    """Split ``eq`` into ({u: coeff}, rest) with eq = sum u*coeff + rest.

    Returns ``None`` when ``eq`` is nonlinear in the unknowns.
    """
    present = set()
    for m, _ in eq.terms():
        n = 0
        for s, p in m[1]:
            if s in unknowns:
                n += p
        for s in m[3]:
            if s in unknowns:
                n += 1
        if m[2] is not None and not unknowns.isdisjoint(m[2].free_symbols()):
            return None
        if n > 1:
            return None
        if n == 1:
            for s, _ in m[1]:
                if s in unknowns:
                    present.add(s)
            for s in m[3]:
                if s in unknowns:
                    present.add(s)
    if not present:
        return {}, eq
    coeffs = {}
    rest = eq
    for u in present:
        a = differentiate(eq, u, "left")
        coeffs[u] = a
        rest = rest - u.as_expr() * a
    return coeffs, rest


def solve_linear(equations: Iterable[Expr], unknowns: Sequence[Symbol]) -> LinearResult:
    """Gauss-Jordan on the linear equations; ``unknowns`` order = pivot order."""
    uset = set(unknowns)
    rows = []
    res = LinearResult()
    for eq in equations:
        if eq.is_zero:
            continue
        d = decompose(eq, uset)
        if d is None:
            res.deferred.append(eq)
            continue
        rows.append(d)
    return solve_rows(rows, unknowns, res)


def solve_rows(rows, unknowns: Sequence[Symbol], res: LinearResult | None = None) -> LinearResult:
    """Gauss-Jordan on pre-split rows ``(coeffs: {u: Expr}, rest: Expr)``."""
    res = res or LinearResult()
    clean = []
    for coeffs, rest in rows:
        coeffs = {u: a for u, a in coeffs.items() if a}
        if not coeffs:
            if rest:
                res.residuals.append(rest)
            continue
        clean.append([coeffs, rest])
    rows = clean
    by_col: dict = {}
    for ri, (coeffs, _) in enumerate(rows):
        for u in coeffs:
            by_col.setdefault(u, set()).add(ri)

    pivots = {}  # unknown -> row index
    used = set()
    for u in unknowns:
        best = None
        for ri in sorted(by_col.get(u, ())):
            if ri in used:
                continue
            row = rows[ri]
            a = row[0].get(u)
            if a is None or a.parity != 0 or not a.is_unit():
                continue
            size = sum(c.nterms for c in row[0].values()) + row[1].nterms
            if best is None or size < best[0]:
                best = (size, ri)
        if best is None:
            continue
        ri = best[1]
        used.add(ri)
        pivots[u] = ri
        coeffs, rest = rows[ri]
        inv = coeffs[u].inverse()
        coeffs = {v: a * inv for v, a in coeffs.items()}
        coeffs[u] = Expr(1)
        rest = rest * inv
        rows[ri] = [coeffs, rest]
        for rj in sorted(by_col.get(u, ())):
            if rj == ri:
                continue
            other = rows[rj]
            f = other[0].get(u)
            if f is None:
                continue
            oc = other[0]
            for v, a in coeffs.items():
                nv = oc.get(v, ZERO) - a * f
                if nv:
                    if v not in oc:
                        by_col.setdefault(v, set()).add(rj)
                    oc[v] = nv
                else:
                    oc.pop(v, None)
                    by_col.get(v, set()).discard(rj)
            other[1] = other[1] - rest * f

    for ri, (coeffs, rest) in enumerate(rows):
        if ri in used:
            continue
        if not coeffs and rest:
            res.residuals.append(rest)

    pivoted = set(pivots)
    for u, ri in pivots.items():
        coeffs, rest = rows[ri]
        others = [v for v in coeffs if v != u]
        if others:
            res.free_rows.append(sum((v.as_expr() * coeffs[v] for v in others), rest) + u.as_expr())
            continue
        res.solution[u] = -rest
    res.undetermined = [u for u in unknowns if u not in res.solution]
    # rows left unpivoted that still mention unknowns
    for ri, (coeffs, rest) in enumerate(rows):
        if ri not in used and coeffs:
            res.free_rows.append(sum((v.as_expr() * a for v, a in coeffs.items()), rest))
    return res


def isolate(relation: Expr, s: Symbol) -> Expr | None:
    """Solve ``relation == 0`` for ``s`` if it is linear with a unit coefficient."""
    d = decompose(relation, {s})
    if d is None:
        return None
    coeffs, rest = d
    a = coeffs.get(s)
    if a is None or a.parity != 0 or not a.is_unit():
        return None
    return -(rest * a.inverse())
