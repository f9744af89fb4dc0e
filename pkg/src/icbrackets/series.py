"""Truncated exponential-convention power series: sum_n c_n t^n / n!."""
from __future__ import annotations

from math import comb
from typing import Mapping, Sequence

from .symexpr import Expr, Symbol, ONE, ZERO, as_expr, exp


class SeriesPoly:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence):
        if not coeffs:
            raise ValueError("a series needs at least the order-0 coefficient")
        self.coeffs = tuple(as_expr(c) for c in coeffs)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, n: int) -> Expr:
        if n < 0 or n > self.order:
            raise IndexError(f"coefficient {n} beyond truncation order {self.order}")
        return self.coeffs[n]

    def __eq__(self, other):
        return isinstance(other, SeriesPoly) and self.coeffs == other.coeffs

    def __repr__(self):
        return f"SeriesPoly({[str(c) for c in self.coeffs]})"

    @classmethod
    def constant(cls, value, order: int) -> "SeriesPoly":
        return cls([as_expr(value)] + [ZERO] * order)

    def truncate(self, order: int) -> "SeriesPoly":
        if order > self.order:
            raise ValueError("cannot extend a truncated series")
        return SeriesPoly(self.coeffs[: order + 1])

    def __add__(self, other):
        if not isinstance(other, SeriesPoly):
            other = SeriesPoly.constant(other, self.order)
        k = min(self.order, other.order)
        return SeriesPoly([self.coeffs[n] + other.coeffs[n] for n in range(k + 1)])

    __radd__ = __add__

    def __neg__(self):
        return SeriesPoly([-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-other if isinstance(other, SeriesPoly) else -as_expr(other))

    def __mul__(self, other):
        if not isinstance(other, SeriesPoly):
            other = as_expr(other)
            return SeriesPoly([c * other for c in self.coeffs])
        k = min(self.order, other.order)
        out = []
        for n in range(k + 1):
            acc = ZERO
            for j in range(n + 1):
                acc = acc + comb(n, j) * (self.coeffs[j] * other.coeffs[n - j])
            out.append(acc)
        return SeriesPoly(out)

    def __rmul__(self, other):
        other = as_expr(other)
        return SeriesPoly([other * c for c in self.coeffs])

    def __pow__(self, p: int):
        result = SeriesPoly.constant(ONE, self.order)
        for _ in range(p):
            result = result * self
        return result

    def derivative(self) -> "SeriesPoly":
        """d/dt; the order drops by one."""
        if self.order == 0:
            raise ValueError("derivative of an order-0 series is undefined")
        return SeriesPoly(self.coeffs[1:])

    def exp(self) -> "SeriesPoly":
        # E' = s' E  =>  E_{n+1} = sum_k C(n,k) s_{k+1} E_{n-k}
        e = [exp(self.coeffs[0])]
        for n in range(self.order):
            acc = ZERO
            for k in range(n + 1):
                acc = acc + comb(n, k) * (self.coeffs[k + 1] * e[n - k])
            e.append(acc)
        return SeriesPoly(e)


def compose(expr: Expr, bindings: Mapping[Symbol, SeriesPoly], order: int | None = None) -> SeriesPoly:
    """Series of ``expr`` with every bound symbol replaced by its series.

    Unbound symbols are constants.  The result is truncated to the smallest
    order among the series that actually occur.
    """
    expr = as_expr(expr)
    used = [bindings[s].order for s in expr.free_symbols() if s in bindings]
    k = min(used) if used else (order if order is not None else 0)
    if order is not None:
        k = min(k, order)
    total = SeriesPoly.constant(ZERO, k)
    cache: dict = {}

    def sym_series(s):
        if s in bindings:
            return bindings[s].truncate(k)
        return SeriesPoly.constant(s.as_expr(), k)

    def sym_pow(s, p):
        key = (s, p)
        if key not in cache:
            cache[key] = sym_series(s) ** p
        return cache[key]

    for m, c in expr.terms():
        imag, evens, x, odds = m
        bare = Expr._raw({(imag, (), None, ()): c})
        term = SeriesPoly.constant(bare, k)
        for s, p in evens:
            term = term * sym_pow(s, p)
        if x is not None:
            term = term * compose(x, bindings, k).exp()
        for s in odds:
            term = term * sym_series(s)
        total = total + term
    return total
