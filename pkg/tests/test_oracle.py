import ast
import itertools
from pathlib import Path

import numpy as np
import pytest

import icbrackets.oracle as oracle_mod
from icbrackets.errors import GaugeFreedom, NonTerminating
from icbrackets.lattice import LatticeConfig, generate
from icbrackets.oracle import (
    PRIMARY,
    SECOND,
    _symbolic_inverse,
    analyze,
    compare_tables,
    consistency_closure,
    dirac_bracket,
    dirac_table_numeric,
    primary_constraints,
    surface_points,
)
from icbrackets.symexpr import ONE, ZERO, Expr, Symbol, exp
from icbrackets.sysparse import parse_system

from conftest import derived, fixture_spec


def _named(space, *names):
    by = {s.name: s.as_expr() for s in space.q + space.p}
    return [by[n] for n in names]


@pytest.fixture(scope="module")
def toy_closure():
    return analyze(fixture_spec("toy"))


def test_oracle_is_structurally_independent():
    tree = ast.parse(Path(oracle_mod.__file__).read_text())
    imported = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.ImportFrom):
            imported.add(node.module or "")
        elif isinstance(node, ast.Import):
            imported.update(a.name for a in node.names)
    assert not any("initial_instant" in m or "bracket_solver" in m or "pipeline" in m for m in imported)


def test_toy_primaries(toy_closure):
    space = toy_closure.space
    x, z, py, pz = _named(space, "x", "z", "py", "pz")
    prim = [c for c in toy_closure.constraints if c.origin == PRIMARY]
    assert [c.expression for c in prim] == [py - z - exp(-x), pz]


def test_regular_system_has_no_constraints():
    closure = analyze(fixture_spec("oscillator"))
    assert closure.constraints == [] and closure.multipliers == {}


def test_toy_closure_fixes_multipliers(toy_closure):
    assert len(toy_closure.constraints) == 2
    assert all(v is not None for v in toy_closure.multipliers.values())
    assert all(c.klass == SECOND for c in toy_closure.constraints)


def test_toy_constraint_matrix(toy_closure):
    m = toy_closure.matrix
    assert m == [[ZERO, Expr(-1)], [ONE, ZERO]]
    assert toy_closure.inverse == [[ZERO, ONE], [Expr(-1), ZERO]]


def test_two_by_two_inverse():
    f = exp(Symbol("q", False, 0).as_expr())
    inv = _symbolic_inverse([[ZERO, f], [-f, ZERO]])
    assert inv == [[ZERO, -f.inverse()], [f.inverse(), ZERO]]


def test_toy_dirac_brackets(toy_closure):
    x, y, z, px, py, pz = _named(toy_closure.space, "x", "y", "z", "px", "py", "pz")
    assert dirac_bracket(x, px, toy_closure) == ONE
    assert dirac_bracket(z, px, toy_closure) == exp(-x)
    assert dirac_bracket(y, z, toy_closure) == ONE
    for phi in toy_closure.expressions:
        for f in (x, y * z, px * px + exp(-x), py):
            assert dirac_bracket(phi, f, toy_closure) == ZERO


def test_toy_dirac_jacobi_and_antisymmetry(toy_closure):
    xs = _named(toy_closure.space, "x", "y", "z", "px")
    for a, b in itertools.combinations(xs, 2):
        assert dirac_bracket(a, b, toy_closure) + dirac_bracket(b, a, toy_closure) == ZERO
    for a, b, c in itertools.combinations(xs, 3):
        total = (
            dirac_bracket(a, dirac_bracket(b, c, toy_closure), toy_closure)
            + dirac_bracket(b, dirac_bracket(c, a, toy_closure), toy_closure)
            + dirac_bracket(c, dirac_bracket(a, b, toy_closure), toy_closure)
        )
        assert total == ZERO


def test_self_dual_closure():
    cfg = LatticeConfig("sd", 2)
    closure = analyze(generate(cfg))
    n2 = cfg.N ** 2
    prim = [c for c in closure.constraints if c.origin == PRIMARY]
    assert len(prim) == 3 * n2
    assert len(closure.constraints) == 4 * n2
    assert closure.inverse is None  # 16 x 16 stays numeric
    assert closure.condition is not None and np.isfinite(closure.condition)


def test_self_dual_numeric_brackets():
    closure = analyze(generate(LatticeConfig("sd", 2, "1/2", 2)))
    _, P = surface_points(closure, 10, 3)
    D = dirac_table_numeric(closure, P)
    assert np.max(np.abs(D + np.transpose(D, (0, 2, 1)))) < 1e-12
    space = closure.space
    names = [s.name for s in space.q + space.p]
    i, j = names.index("f1_0_0"), names.index("f2_0_0")
    assert np.allclose(D[:, i, j], -2 / 0.25)
    phi = closure.expressions[0]
    vals = dirac_bracket(phi, space.q[3].as_expr() * space.p[1].as_expr(), closure, P)
    assert np.max(np.abs(vals)) < 1e-10


@pytest.mark.parametrize("key", ["toy", ("sd", 2, "1/2", 2), ("sd", 3, 1, 1)], ids=["toy", "sd2", "sd3"])
def test_agrees_with_initial_instant_tables(key):
    d = derived(key)
    closure = analyze(d.spec)
    assert compare_tables(d.table, closure, 100, 42) < 1e-9


def test_oscillator_agreement_is_exact():
    d = derived("oscillator")
    assert compare_tables(d.table, analyze(d.spec)) == 0.0


def test_first_class_constraints_raise():
    spec = parse_system("system gauge\ncoord x even\ncoord y even\nL = 1/2*(dx - y)^2")
    with pytest.raises(GaugeFreedom):
        analyze(spec)


def test_iteration_cap():
    with pytest.raises(NonTerminating):
        consistency_closure(generate(LatticeConfig("sd", 2)), max_steps=1)


def test_graded_systems_rejected():
    with pytest.raises(ValueError):
        analyze(generate(LatticeConfig("dirac", 2)))
