"""Reader and writer for ``.lag`` system documents.

Grammar (one declaration per line, ``#`` comments, blank lines ignored)::

    system <identifier>
    param <identifier> [positive]        (zero or more)
    coord <identifier> <even|odd>        (one or more)
    L = <expression>                     (last)

Expressions: ``^`` binds tighter than unary minus, which binds tighter than
``*``/``/``, then binary ``+``/``-``.  ``exp(...)`` is the only function,
``im`` the imaginary unit, and division is only by nonzero rational
constants.  Comment lines of the form ``# meta: key = value`` carry
free-form metadata and survive a round trip.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import (
    DslParityViolation,
    DslSyntaxError,
    DuplicateCoord,
    NonAutonomous,
    ParseError,
    UnknownSymbol,
)
from .symexpr import Expr, I, ParityViolation, Symbol, as_expr, exp, to_string

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(\S))")
_RESERVED = {"t", "im", "exp", "L"}
MAX_EXPONENT = 64


@dataclass
class SystemSpec:
    name: str
    params: tuple  # of (Symbol, positive: bool)
    coords: tuple  # of Symbol, declaration order
    lagrangian: Expr
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.coords)

    def coord(self, name: str) -> Symbol:
        for c in self.coords:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def param_symbols(self) -> list:
        return [p for p, _ in self.params]

    @property
    def is_graded(self) -> bool:
        return any(c.odd for c in self.coords)


def velocity_name(name: str) -> str:
    return "d" + name


def generated_names(name: str) -> list:
    """Names derived from a coordinate: velocity, acceleration, momentum, ICs."""
    return ["d" + name, "dd" + name, "p" + name, name + "0", "p" + name + "0"]


# ------------------------------------------------------------ expressions


class _Parser:
    """Pratt parser over one expression line."""

    def __init__(self, text: str, line: int, col0: int, table: dict, coords: dict):
        self.text = text
        self.line = line
        self.col0 = col0
        self.table = table
        self.coords = coords
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                break
            if m.group(0).strip() == "":
                break
            kind = "num" if m.group(1) else "id" if m.group(2) else "op"
            val = m.group(1) or m.group(2) or m.group(3)
            start = m.start(1) if m.group(1) else m.start(2) if m.group(2) else m.start(3)
            if kind == "op" and val not in "+-*/^()":
                self.fail(DslSyntaxError, f"unexpected character {val!r}", start)
            self.tokens.append((kind, val, start))
            pos = m.end()
        self.i = 0

    def fail(self, cls, msg, pos):
        raise cls(msg, self.line, self.col0 + pos + 1)

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("end", None, len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, val):
        kind, v, pos = self.next()
        if v != val:
            self.fail(DslSyntaxError, f"expected {val!r}", pos)

    def parse(self) -> Expr:
        if not self.tokens:
            self.fail(DslSyntaxError, "empty expression", 0)
        e = self.expr(0)
        kind, v, pos = self.peek()
        if kind != "end":
            self.fail(DslSyntaxError, f"unexpected {v!r}", pos)
        return e

    _LBP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}

    def lbp(self, tok):
        kind, v, _ = tok
        return self._LBP.get(v, 0) if kind == "op" else 0

    def expr(self, rbp: int) -> Expr:
        left = self.nud(self.next())
        while rbp < self.lbp(self.peek()):
            left = self.led(self.next(), left)
        return left

    def nud(self, tok) -> Expr:
        kind, v, pos = tok
        if kind == "num":
            return as_expr(int(v))
        if kind == "id":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if v != "exp":
                    self.fail(UnknownSymbol, f"unknown function {v!r}", pos)
                self.next()
                arg = self.expr(0)
                self.expect(")")
                try:
                    return exp(arg)
                except ParityViolation as err:
                    self.fail(DslParityViolation, str(err), pos)
            return self.symbol(v, pos)
        if v == "(":
            e = self.expr(0)
            self.expect(")")
            return e
        if v == "-":
            return -self.expr(30)
        if kind == "end":
            self.fail(DslSyntaxError, "unexpected end of expression", pos)
        self.fail(DslSyntaxError, f"unexpected {v!r}", pos)

    def led(self, tok, left: Expr) -> Expr:
        _, v, pos = tok
        try:
            if v == "+":
                return left + self.expr(10)
            if v == "-":
                return left - self.expr(10)
            if v == "*":
                return left * self.expr(20)
            if v == "/":
                right = self.expr(20)
                if not right.is_rational() or right.is_zero:
                    self.fail(DslSyntaxError, "division only by nonzero rational constants", pos)
                return left * as_expr(1 / right.as_fraction())
            if v == "^":
                right = self.expr(39)
                if not right.is_rational() or right.as_fraction().denominator != 1:
                    self.fail(DslSyntaxError, "exponent must be an integer constant", pos)
                n = right.as_integer()
                if n < 0 and not left.is_unit():
                    self.fail(DslSyntaxError, "negative exponent of a non-invertible expression", pos)
                if abs(n) > MAX_EXPONENT:
                    self.fail(DslSyntaxError, f"exponent larger than {MAX_EXPONENT}", pos)
                return left ** n
        except ParityViolation as err:
            if isinstance(err, ParseError):
                raise
            self.fail(DslParityViolation, str(err), pos)
        self.fail(DslSyntaxError, f"unexpected {v!r}", pos)

    def symbol(self, name: str, pos: int) -> Expr:
        if name == "t":
            self.fail(NonAutonomous, "explicit time dependence is not allowed", pos)
        if name == "im":
            return I
        s = self.table.get(name)
        if s is None:
            if name.startswith("dd") and name[2:] in self.coords:
                self.fail(UnknownSymbol, f"second derivative {name!r} is not allowed", pos)
            self.fail(UnknownSymbol, f"unknown symbol {name!r}", pos)
        return s.as_expr()


def parse_expression(text: str, table: dict, coords: dict | None = None, line: int = 1, col0: int = 0) -> Expr:
    return _Parser(text, line, col0, table, coords or {}).parse()


# ------------------------------------------------------------ documents


def parse_system(text: str) -> SystemSpec:
    """Parse a ``.lag`` document; every failure is a positioned ParseError."""
    try:
        return _parse_system(text)
    except ParseError:
        raise
    except RecursionError:
        raise DslSyntaxError("expression nested too deeply", 0, 0) from None
    except Exception as err:  # totality: never leak an unpositioned crash
        raise DslSyntaxError(f"malformed document: {err}", 0, 0) from None


def _parse_system(text: str) -> SystemSpec:
    name = None
    params: list = []
    coords: list = []
    lagrangian = None
    metadata: dict = {}
    stage = 0  # 0 expect system, 1 params, 2 coords, 3 after L
    names: dict = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        hashpos = raw.find("#")
        if hashpos >= 0:
            comment = raw[hashpos + 1:].strip()
            if comment.startswith("meta:") and "=" in comment:
                k, _, v = comment[5:].partition("=")
                metadata[k.strip()] = v.strip()
            line = raw[:hashpos]
        else:
            line = raw
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        stripped = line.strip()
        if stage == 3:
            raise DslSyntaxError("content after the Lagrangian line", lineno, col)
        if stripped.startswith("L") and stripped[1:].lstrip().startswith("="):
            if not coords:
                raise DslSyntaxError("at least one coord must precede L", lineno, col)
            eqpos = line.index("=")
            table = {}
            for c in coords:
                table[c.name] = c
                table["d" + c.name] = Symbol("d" + c.name, c.odd, c.rank)
            for p, _ in params:
                table[p.name] = p
            cmap = {c.name: c for c in coords}
            lagrangian = parse_expression(line[eqpos + 1:], table, cmap, lineno, eqpos + 1)
            if lagrangian.parity == 1:
                raise DslParityViolation("Lagrangian must be even", lineno, col)
            stage = 3
            continue
        words = stripped.split()
        head = words[0]
        if stage == 0:
            if head != "system" or len(words) != 2 or not _IDENT.match(words[1]):
                raise DslSyntaxError("first line must be 'system <identifier>'", lineno, col)
            name = words[1]
            stage = 1
            continue
        if head == "param":
            if stage != 1:
                raise DslSyntaxError("param declarations must precede coords", lineno, col)
            if len(words) not in (2, 3) or (len(words) == 3 and words[2] != "positive"):
                raise DslSyntaxError("expected 'param <identifier> [positive]'", lineno, col)
            pname = words[1]
            _check_name(pname, names, lineno, col)
            sym = Symbol(pname, False, -1 - len(params))
            names[pname] = sym
            params.append((sym, len(words) == 3))
            continue
        if head == "coord":
            if len(words) != 3 or words[2] not in ("even", "odd"):
                raise DslSyntaxError("expected 'coord <identifier> <even|odd>'", lineno, col)
            cname = words[1]
            if cname.startswith("d"):
                raise DslSyntaxError("coordinate names may not begin with 'd'", lineno, col)
            _check_name(cname, names, lineno, col)
            sym = Symbol(cname, words[2] == "odd", len(coords))
            for g in generated_names(cname):
                if g in names:
                    raise DuplicateCoord(f"derived name {g!r} collides with a declaration", lineno, col)
            names[cname] = sym
            for g in generated_names(cname):
                names[g] = sym
            coords.append(sym)
            stage = 2
            continue
        raise DslSyntaxError(f"unexpected declaration {head!r}", lineno, col)

    if name is None:
        raise DslSyntaxError("missing 'system' line", 1, 1)
    if lagrangian is None:
        raise DslSyntaxError("missing 'L = ...' line", len(text.splitlines()) or 1, 1)
    return SystemSpec(name, tuple(params), tuple(coords), lagrangian, metadata)


def _check_name(nm: str, names: dict, lineno: int, col: int):
    if not _IDENT.match(nm):
        raise DslSyntaxError(f"invalid identifier {nm!r}", lineno, col)
    if nm in _RESERVED:
        raise DslSyntaxError(f"{nm!r} is reserved", lineno, col)
    if nm in names:
        raise DuplicateCoord(f"duplicate name {nm!r}", lineno, col)


def emit_system(spec: SystemSpec) -> str:
    lines = [f"system {spec.name}"]
    for k, v in spec.metadata.items():
        lines.append(f"# meta: {k} = {v}")
    for p, positive in spec.params:
        lines.append(f"param {p.name}" + (" positive" if positive else ""))
    for c in spec.coords:
        lines.append(f"coord {c.name} {'odd' if c.odd else 'even'}")
    lines.append(f"L = {to_string(spec.lagrangian)}")
    return "\n".join(lines) + "\n"


def load_system(path) -> SystemSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_system(fh.read())
