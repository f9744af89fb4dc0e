"""Grassmann-graded symbolic expressions in canonical normal form.

An :class:`Expr` is a finite sum of monomials with exact rational
coefficients.  A monomial is

    coefficient * im^f * (even symbol powers) * exp(A) * (ordered odd symbols)

where ``im`` is the imaginary unit (``f`` is 0 or 1), at most one exponential
atom carries the sum of all exponents in the monomial, and the odd symbols
are kept sorted by :attr:`Symbol.key` with the permutation sign folded into
the coefficient.  Two expressions are equal iff their term dictionaries are
equal, so structural equality is mathematical equality over the atom set.
"""
from __future__ import annotations

import bisect
import math
from fractions import Fraction
from typing import Iterable, Mapping


class ParityViolation(ValueError):
    """An odd expression was used where an even one is required (or mixed)."""


class OddEvaluation(ValueError):
    pass


class UnboundSymbol(KeyError):
    pass


class Symbol:
    """A named generator.  ``rank`` orders odd generators (declaration order)."""

    __slots__ = ("name", "odd", "rank", "_hash", "key")

    def __init__(self, name: str, odd: bool = False, rank: int = 0):
        self.name = name
        self.odd = bool(odd)
        self.rank = rank
        self.key = (rank, name)
        self._hash = hash((name, self.odd, rank))

    def __eq__(self, other):
        return (
            isinstance(other, Symbol)
            and self.name == other.name
            and self.odd == other.odd
            and self.rank == other.rank
        )

    def __hash__(self):
        return self._hash

    def __lt__(self, other):
        return self.key < other.key

    def __repr__(self):
        return f"Symbol({self.name!r}{', odd' if self.odd else ''})"

    def __str__(self):
        return self.name

    @property
    def parity(self) -> int:
        return 1 if self.odd else 0

    def as_expr(self) -> "Expr":
        return Expr._raw({(0, ((self, 1),), None, ()) if not self.odd else (0, (), None, (self,)): Fraction(1)})


# ---------------------------------------------------------------- monomials
# A monomial is the tuple (imag_flag, evens, exparg, odds).

_ONE_MONO = (0, (), None, ())


def _merge_evens(a, b):
    if not a:
        return b
    if not b:
        return a
    acc = dict(a)
    for s, p in b:
        acc[s] = acc.get(s, 0) + p
    return tuple(sorted(acc.items(), key=lambda sp: sp[0].key))


def _merge_odds(a, b):
    """Return (sorted product, sign) or (None, 0) if a generator repeats."""
    if not b:
        return a, 1
    if not a:
        return b, 1
    akeys = [s.key for s in a]
    sign = 1
    for s in b:
        k = s.key
        pos = bisect.bisect_left(akeys, k)
        if pos < len(akeys) and akeys[pos] == k:
            return None, 0
        if (len(akeys) - pos) % 2:
            sign = -sign
    merged = tuple(sorted(a + b, key=lambda s: s.key))
    return merged, sign


def _mono_mul(m1, m2):
    i1, e1, x1, o1 = m1
    i2, e2, x2, o2 = m2
    odds, sign = _merge_odds(o1, o2)
    if odds is None:
        return None, 0
    imag = i1 + i2
    if imag == 2:
        imag = 0
        sign = -sign
    if x1 is None:
        x = x2
    elif x2 is None:
        x = x1
    else:
        x = x1 + x2
        if not x._terms:
            x = None
    return (imag, _merge_evens(e1, e2), x, odds), sign


def _mono_parity(m) -> int:
    return len(m[3]) % 2


def _expr_key(e: "Expr"):
    k = e._key
    if k is None:
        k = tuple(sorted((_mono_key(m), (c.numerator, c.denominator)) for m, c in e._terms.items()))
        e._key = k
    return k


def _mono_key(m):
    imag, evens, x, odds = m
    deg = sum(p for _, p in evens) + len(odds)
    return (
        len(odds),
        deg,
        tuple((s.key, -p) for s, p in evens),
        imag,
        () if x is None else (1, _expr_key(x)),
        tuple(s.key for s in odds),
    )


class Expr:
    """Immutable canonical expression.  Build with the module helpers."""

    __slots__ = ("_terms", "_hash", "_key", "_parity")

    def __init__(self, value=0):
        e = as_expr(value)
        self._terms = e._terms
        self._hash = None
        self._key = None
        self._parity = e._parity

    @classmethod
    def _raw(cls, terms: dict) -> "Expr":
        obj = object.__new__(cls)
        obj._terms = terms
        obj._hash = None
        obj._key = None
        if terms:
            obj._parity = _mono_parity(next(iter(terms)))
        else:
            obj._parity = None
        return obj

    # -- basic protocol
    def __eq__(self, other):
        if not isinstance(other, Expr):
            try:
                other = as_expr(other)
            except TypeError:
                return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __bool__(self):
        return bool(self._terms)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def parity(self):
        """0 or 1; ``None`` for the zero expression (compatible with both)."""
        return self._parity

    @property
    def nterms(self) -> int:
        return len(self._terms)

    def terms(self):
        return self._terms.items()

    def __repr__(self):
        return f"Expr({to_string(self)!r})"

    def __str__(self):
        return to_string(self)

    # -- arithmetic
    def __add__(self, other):
        other = as_expr(other)
        if not other._terms:
            return self
        if not self._terms:
            return other
        if self._parity != other._parity:
            raise ParityViolation("sum of even and odd expressions")
        terms = dict(self._terms)
        for m, c in other._terms.items():
            v = terms.get(m)
            if v is None:
                terms[m] = c
            else:
                v = v + c
                if v:
                    terms[m] = v
                else:
                    del terms[m]
        return Expr._raw(terms)

    __radd__ = __add__

    def __neg__(self):
        return Expr._raw({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-as_expr(other))

    def __rsub__(self, other):
        return as_expr(other) + (-self)

    def __mul__(self, other):
        other = as_expr(other)
        if not self._terms or not other._terms:
            return ZERO
        terms: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m, sign = _mono_mul(m1, m2)
                if m is None:
                    continue
                c = c1 * c2 if sign > 0 else -(c1 * c2)
                v = terms.get(m)
                if v is None:
                    terms[m] = c
                else:
                    v = v + c
                    if v:
                        terms[m] = v
                    else:
                        del terms[m]
        return Expr._raw(terms)

    def __rmul__(self, other):
        return as_expr(other) * self

    def __truediv__(self, other):
        other = as_expr(other)
        return self * other.inverse()

    def __pow__(self, n):
        if isinstance(n, Expr):
            n = n.as_integer()
        if not isinstance(n, int):
            raise TypeError("integer exponent required")
        if n < 0:
            return self.inverse() ** (-n)
        result = ONE
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    # -- structure queries
    def is_constant(self) -> bool:
        """Rational or Gaussian-rational constant (no symbols, no exp)."""
        return all(m[1] == () and m[2] is None and m[3] == () for m in self._terms)

    def is_rational(self) -> bool:
        return all(m == _ONE_MONO for m in self._terms)

    def as_fraction(self) -> Fraction:
        if not self._terms:
            return Fraction(0)
        if not self.is_rational():
            raise ValueError(f"{self} is not a rational constant")
        return self._terms[_ONE_MONO]

    def as_integer(self) -> int:
        f = self.as_fraction()
        if f.denominator != 1:
            raise ValueError(f"{self} is not an integer")
        return int(f)

    def is_unit(self) -> bool:
        """Invertible inside the kernel: c * im^f * exp(A), no symbols."""
        if len(self._terms) != 1:
            return False
        (m,) = self._terms
        return m[1] == () and m[3] == ()

    def inverse(self) -> "Expr":
        if not self.is_unit():
            raise ZeroDivisionError(f"cannot invert {self} in the polynomial kernel")
        ((m, c),) = self._terms.items()
        imag, _, x, _ = m
        c = 1 / c
        if imag:
            c = -c
        x = None if x is None else -x
        return Expr._raw({(imag, (), x, ()): c})

    def free_symbols(self) -> set:
        out: set = set()
        for m in self._terms:
            for s, _ in m[1]:
                out.add(s)
            out.update(m[3])
            if m[2] is not None:
                out |= m[2].free_symbols()
        return out

    def has_odd(self) -> bool:
        return any(m[3] for m in self._terms)

    def has_imag(self) -> bool:
        return any(m[0] for m in self._terms) or any(
            m[2] is not None and m[2].has_imag() for m in self._terms
        )

    def contains(self, s: Symbol) -> bool:
        return s in self.free_symbols()


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, Symbol):
        return v.as_expr()
    if isinstance(v, bool):
        raise TypeError("bool is not an expression")
    if isinstance(v, (int, Fraction)):
        v = Fraction(v)
        return Expr._raw({_ONE_MONO: v}) if v else ZERO
    if isinstance(v, float):
        # floats only enter through rational snapping fallbacks
        v = Fraction(v)
        return Expr._raw({_ONE_MONO: v}) if v else ZERO
    raise TypeError(f"cannot convert {type(v).__name__} to Expr")


ZERO = Expr._raw({})
ONE = Expr._raw({_ONE_MONO: Fraction(1)})
I = Expr._raw({(1, (), None, ()): Fraction(1)})


def const(v) -> Expr:
    return as_expr(v)


def symbols(names: str, odd: bool = False, start_rank: int = 0) -> list[Symbol]:
    return [Symbol(n, odd, start_rank + i) for i, n in enumerate(names.split())]


def exp(arg) -> Expr:
    """exp of an even expression.

    The nilpotent part (monomials with odd generators) is expanded as a
    finite series; the remaining body becomes a single exponential atom.
    """
    arg = as_expr(arg)
    if arg._parity == 1:
        raise ParityViolation("exp of an odd expression")
    body = {m: c for m, c in arg._terms.items() if not m[3]}
    soul = Expr._raw({m: c for m, c in arg._terms.items() if m[3]})
    out = Expr._raw({(0, (), Expr._raw(body), ()): Fraction(1)}) if body else ONE
    if soul:
        total = ONE
        power = ONE
        k = 1
        while True:
            power = power * soul
            if not power:
                break
            total = total + power * Fraction(1, math.factorial(k))
            k += 1
        out = out * total
    return out


def normalize(e) -> Expr:
    """Canonicalize; expressions are always stored canonically so this is
    the identity on :class:`Expr` and a conversion for numbers/symbols."""
    return as_expr(e)


# ------------------------------------------------------------ calculus


def _mono_expr(m, c) -> Expr:
    return Expr._raw({m: c})


def differentiate(e: Expr, s: Symbol, side: str = "left") -> Expr:
    """Graded derivative of ``e`` with respect to ``s``.

    ``side='left'`` moves ``s`` to the front before stripping it,
    ``side='right'`` to the back; for even ``s`` both coincide.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    e = as_expr(e)
    out: dict = {}

    def acc(m, c):
        v = out.get(m)
        if v is None:
            out[m] = c
        else:
            v = v + c
            if v:
                out[m] = v
            else:
                del out[m]

    extra = ZERO
    for m, c in e._terms.items():
        imag, evens, x, odds = m
        if s.odd:
            if s not in odds:
                continue
            j = odds.index(s)
            n = len(odds)
            flips = j if side == "left" else n - 1 - j
            acc((imag, evens, x, odds[:j] + odds[j + 1:]), -c if flips % 2 else c)
            continue
        for idx, (t, p) in enumerate(evens):
            if t == s:
                if p == 1:
                    ne = evens[:idx] + evens[idx + 1:]
                else:
                    ne = evens[:idx] + ((t, p - 1),) + evens[idx + 1:]
                acc((imag, ne, x, odds), c * p)
                break
        if x is not None and s in x.free_symbols():
            extra = extra + _mono_expr(m, c) * differentiate(x, s)
    result = Expr._raw(out)
    if extra:
        result = result + extra
    return result


def substitute(e: Expr, bindings: Mapping[Symbol, object]) -> Expr:
    """Simultaneous substitution followed by normalization."""
    e = as_expr(e)
    if not bindings:
        return e
    bind = {}
    for s, v in bindings.items():
        v = as_expr(v)
        if v._parity is not None and v._parity != s.parity:
            raise ParityViolation(f"{s.name} ({'odd' if s.odd else 'even'}) bound to {'odd' if v._parity else 'even'} value")
        bind[s] = v
    keys = set(bind)
    powcache: dict = {}

    def power(s, p):
        k = (s, p)
        if k not in powcache:
            powcache[k] = bind[s] ** p
        return powcache[k]

    out = ZERO
    untouched: dict = {}
    for m, c in e._terms.items():
        imag, evens, x, odds = m
        hit_even = any(t in keys for t, _ in evens)
        hit_odd = any(t in keys for t in odds)
        hit_x = x is not None and not keys.isdisjoint(x.free_symbols())
        if not (hit_even or hit_odd or hit_x):
            untouched[m] = c
            continue
        keep = tuple((t, p) for t, p in evens if t not in keys)
        term = Expr._raw({(imag, keep, None, ()): c})
        for t, p in evens:
            if t in keys:
                term = term * power(t, p)
                if not term:
                    break
        if not term:
            continue
        if x is not None:
            term = term * (exp(substitute(x, bind)) if hit_x else Expr._raw({(0, (), x, ()): Fraction(1)}))
        for t in odds:
            term = term * (bind[t] if t in keys else t.as_expr())
            if not term:
                break
        out = out + term
    if untouched:
        out = out + Expr._raw(untouched)
    return out


def eval_numeric(e: Expr, point: Mapping[Symbol, float]):
    """Evaluate an even, generator-free expression.  Returns float, or
    complex when the imaginary unit survives."""
    e = as_expr(e)
    total = 0.0
    for m, c in e._terms.items():
        imag, evens, x, odds = m
        if odds:
            raise OddEvaluation(f"cannot evaluate odd generators in {e}")
        v = float(c)
        for s, p in evens:
            try:
                v *= float(point[s]) ** p
            except KeyError:
                raise UnboundSymbol(s.name) from None
        if x is not None:
            xv = eval_numeric(x, point)
            v *= math.exp(xv) if not isinstance(xv, complex) else complex(math.e) ** xv
        if imag:
            v = v * 1j
        total = total + v
    return total


def harvest_atoms(e: Expr) -> list[Expr]:
    """Symbols (including those inside exponentials) and exp atoms, ordered."""
    e = as_expr(e)
    syms = e.free_symbols()
    atoms = {}
    for m in e._terms:
        if m[2] is not None:
            a = Expr._raw({(0, (), m[2], ()): Fraction(1)})
            atoms[a] = _expr_key(a)
    out = [s.as_expr() for s in sorted(syms, key=lambda s: s.key)]
    out += [a for a, _ in sorted(atoms.items(), key=lambda kv: kv[1])]
    return out


def exp_atoms(e: Expr) -> list[Expr]:
    return [a for a in harvest_atoms(e) if not a.is_zero and next(iter(a._terms))[2] is not None]


def split_odd(e: Expr) -> dict:
    """Group ``e`` by odd-generator product: {odds tuple: even coefficient}."""
    groups: dict = {}
    for m, c in as_expr(e)._terms.items():
        groups.setdefault(m[3], {})[(m[0], m[1], m[2], ())] = c
    return {k: Expr._raw(v) for k, v in groups.items()}


def odd_monomial(odds: tuple) -> Expr:
    return Expr._raw({(0, (), None, tuple(odds)): Fraction(1)}) if odds else ONE


# ------------------------------------------------------------ printing


def _fmt_frac(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _fmt_mono(m, c: Fraction) -> str:
    imag, evens, x, odds = m
    factors = []
    for s, p in evens:
        factors.append(s.name if p == 1 else f"{s.name}^{p}")
    if x is not None:
        factors.append(f"exp({to_string(x)})")
    factors.extend(s.name for s in odds)
    if imag:
        factors.insert(0, "im")
    mag = abs(c)
    if not factors:
        body = _fmt_frac(mag)
    elif mag == 1:
        body = "*".join(factors)
    else:
        body = _fmt_frac(mag) + "*" + "*".join(factors)
    return ("-" if c < 0 else "") + body


def to_string(e: Expr) -> str:
    """Render in the ``.lag`` expression grammar; deterministic term order."""
    e = as_expr(e)
    if not e._terms:
        return "0"
    items = sorted(e._terms.items(), key=lambda mc: _mono_key(mc[0]))
    out = ""
    for k, (m, c) in enumerate(items):
        s = _fmt_mono(m, c)
        if k == 0:
            out = s
        elif s.startswith("-"):
            out += " - " + s[1:]
        else:
            out += " + " + s
    return out
