from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import pytest
import sympy

from icbrackets.cli import bundled_fixture
from icbrackets.lattice import LatticeConfig, generate
from icbrackets.pipeline import derive
from icbrackets.symexpr import Expr, to_string
from icbrackets.sysparse import parse_system


def fixture_spec(name: str):
    return parse_system(bundled_fixture(name))


@lru_cache(maxsize=None)
def derived(name: str, order: int = 3, seed: int = 42):
    """Cached derivations keyed by a fixture name or a lattice tuple."""
    if isinstance(name, tuple):
        model, n, a, m = name
        spec = generate(LatticeConfig(model, n, Fraction(a), Fraction(m)))
    else:
        spec = fixture_spec(name)
    return derive(spec, order=order, seed=seed)


def to_sympy(e: Expr):
    """Independent reading of a kernel expression through sympy's parser."""
    text = to_string(e).replace("^", "**")
    names = {s.name: sympy.Symbol(s.name) for s in e.free_symbols()}
    names["im"] = sympy.I
    names["exp"] = sympy.exp
    return sympy.sympify(text, locals=names)


@pytest.fixture(scope="session")
def toy():
    return derived("toy")


@pytest.fixture(scope="session")
def oscillator():
    return derived("oscillator")


# One line per acceptance criterion, printed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
