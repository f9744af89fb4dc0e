"""Command-line front end: ``derive``, ``verify``, ``oracle`` and ``lattice``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .errors import (
    BasisInsufficient,
    GaugeFreedom,
    Inconsistent,
    NonConservedHamiltonian,
    NonUniqueBrackets,
    OddHamiltonian,
    ParseError,
    UnsolvableConstraint,
)
from .bracket_solver import extend_table
from .lattice import LatticeConfig, generate
from .symexpr import to_string
from .sysparse import emit_system, parse_system
from .verify import ALL_CHECKS

SCHEMA = "1"
EXIT_OK, EXIT_PARSE, EXIT_GAUGE, EXIT_IDENT, EXIT_VERIFY = 0, 1, 2, 3, 4

log = logging.getLogger("icbrackets")


class UsageError(Exception):
    pass


def bundled_fixture(name: str) -> str | None:
    """Text of a fixture shipped with the package (``toy``, ``oscillator``)."""
    stem = Path(name).name
    if not stem.endswith(".lag"):
        stem += ".lag"
    res = resources.files("icbrackets").joinpath("fixtures", stem)
    return res.read_text(encoding="utf-8") if res.is_file() else None


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="icbrackets", description="Brackets of singular Lagrangian systems from the initial instant.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, lattice_flag=True):
        sp.add_argument("input", nargs="?", help="path to a .lag document (bundled fixtures: toy, oscillator)")
        if lattice_flag:
            sp.add_argument("--lattice", choices=("sd", "dirac"), help="generate a lattice system instead of reading a file")
        sp.add_argument("--n", type=int, default=2, help="lattice sites per dimension (>= 2)")
        sp.add_argument("--a", type=_fraction, default=Fraction(1), help="lattice spacing")
        sp.add_argument("--m", type=_fraction, default=Fraction(1), help="mass")
        sp.add_argument("--order", type=int, default=3, help="Taylor order K")
        sp.add_argument("--degree", type=int, default=2, help="largest basis degree tried")
        sp.add_argument("--samples", type=int, default=200, help="collocation / check sample points")
        sp.add_argument("--seed", type=int, default=42)
        sp.add_argument("--tol", type=float, default=1e-9)
        sp.add_argument("--out", help="write the JSON document here instead of standard output")
        sp.add_argument("--json", action="store_true", help="JSON on standard output (the default for this command)")

    common(sub.add_parser("derive", help="derive the bracket table"))
    v = sub.add_parser("verify", help="derive, then run the verification checks")
    common(v)
    v.add_argument("--checks", default=",".join(ALL_CHECKS), help="comma-separated subset of " + ", ".join(ALL_CHECKS))
    v.add_argument("--inject-test-corruption", action="store_true", help="replace one solved bracket {a,b} by a before checking")
    common(sub.add_parser("oracle", help="compare with the reference Dirac-Bergmann analysis"))
    lat = sub.add_parser("lattice", help="print a generated lattice system")
    lat.add_argument("model", choices=("sd", "dirac"))
    lat.add_argument("--n", type=int, default=2)
    lat.add_argument("--a", type=_fraction, default=Fraction(1))
    lat.add_argument("--m", type=_fraction, default=Fraction(1))
    lat.add_argument("--out")
    lat.add_argument("--json", action="store_true", help="wrap the document in a JSON object")
    return p


def run_config(args) -> dict:
    cfg = {"subcommand": args.command}
    if args.command == "lattice":
        cfg["lattice"] = {"model": args.model, "n": args.n, "a": str(args.a), "m": str(args.m)}
        return cfg
    if args.lattice:
        cfg["lattice"] = {"model": args.lattice, "n": args.n, "a": str(args.a), "m": str(args.m)}
    else:
        cfg["input"] = args.input
    cfg.update(order=args.order, degree=args.degree, samples=args.samples, seed=args.seed, tol=args.tol)
    if args.command == "verify":
        cfg["checks"] = _checks(args)
        cfg["inject_test_corruption"] = bool(args.inject_test_corruption)
    return cfg


def _checks(args) -> list:
    names = [c.strip() for c in args.checks.split(",") if c.strip()]
    for c in names:
        if c not in ALL_CHECKS:
            raise UsageError(f"unknown check {c!r}; choose from {', '.join(ALL_CHECKS)}")
    return names


def _lattice_cfg(model, args) -> LatticeConfig:
    try:
        return LatticeConfig(model, args.n, args.a, args.m)
    except ValueError as err:
        raise UsageError(str(err)) from None


def load_spec(args):
    if getattr(args, "lattice", None):
        if args.input:
            raise UsageError("give either an input file or --lattice, not both")
        return generate(_lattice_cfg(args.lattice, args))
    if not args.input:
        raise UsageError("an input .lag file or --lattice is required")
    path = Path(args.input)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    else:
        text = bundled_fixture(args.input)
        if text is None:
            raise FileNotFoundError(args.input)
    return parse_system(text)


def _emit(doc, args):
    text = json.dumps(doc, indent=2) + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _float(x):
    return x if isinstance(x, str) else float(x)


def derivation_document(d, cfg) -> dict:
    ps = d.tsol.phase
    return {
        "schema": SCHEMA,
        "config": cfg,
        "system": d.spec.name,
        "independent": [ps.from_ic[c].name for c in d.constraints.independent],
        "constraints": [
            {"eliminated": ps.from_ic[s].name, "expression": to_string(ps.to_phase(v))} for s, v in d.constraints.constraints
        ],
        "brackets": [
            {"a": a.name, "b": b.name, "value": to_string(v), "provenance": prov} for a, b, v, prov in d.table.pairs()
        ],
        "residual": _float(d.identification.residual),
        "nullspace_dim": d.identification.nullspace_dim,
        "basis_degree": d.identification.degree,
    }


def corrupt(d):
    """Replace the first nonzero solved even bracket {a,b} by a."""
    t = d.table
    for a, b, v, prov in list(t.pairs()):
        if prov == "solved" and v and not a.odd and not b.odd:
            bad = t.copy()
            bad.override(a, b, a.as_expr())
            return extend_table(bad), (a, b)
    raise UsageError("no solved bracket available to corrupt")


def cmd_derive(args, cfg) -> int:
    from .pipeline import derive

    d = derive(load_spec(args), args.order, args.degree, args.samples, args.seed, args.tol)
    _emit(derivation_document(d, cfg), args)
    return EXIT_OK


def cmd_verify(args, cfg) -> int:
    from .pipeline import derive, verify

    d = derive(load_spec(args), args.order, args.degree, args.samples, args.seed, args.tol)
    table = d.table
    if args.inject_test_corruption:
        table, (a, b) = corrupt(d)
        log.warning("corrupted {%s, %s} -> %s for a negative test", a.name, b.name, a.name)
    report = verify(d, cfg["checks"], min(args.samples, 100), args.seed, args.tol, args.order, table)
    doc = {"schema": SCHEMA, "config": cfg, "system": d.spec.name, "checks": [c.as_dict() for c in report.checks]}
    _emit(doc, args)
    for c in report.checks:
        if not c.passed:
            print(f"check {c.name} failed: {c.detail or c.residual}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_oracle(args, cfg) -> int:
    from .oracle import analyze, compare_tables
    from .pipeline import derive

    spec = load_spec(args)
    if spec.is_graded:
        raise UsageError("the reference constraint analysis handles even systems only")
    closure = analyze(spec, seed=args.seed)
    d = derive(spec, args.order, args.degree, args.samples, args.seed, args.tol)
    dev = compare_tables(d.table, closure, min(args.samples, 100), args.seed)
    doc = {
        "schema": SCHEMA,
        "config": cfg,
        "system": spec.name,
        "constraints": [
            {"expression": to_string(c.expression), "origin": c.origin, "class": c.klass} for c in closure.constraints
        ],
        "condition_number": closure.condition,
        "deviation": dev,
    }
    _emit(doc, args)
    return EXIT_OK if dev < args.tol else EXIT_VERIFY


def cmd_lattice(args, cfg) -> int:
    spec = generate(_lattice_cfg(args.model, args))
    text = emit_system(spec)
    if args.json:
        _emit({"schema": SCHEMA, "config": cfg, "document": text}, args)
    elif args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"derive": cmd_derive, "verify": cmd_verify, "oracle": cmd_oracle, "lattice": cmd_lattice}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = run_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as err:
        parser.error(str(err))  # exits with status 2 per argparse convention
    except FileNotFoundError as err:
        print(f"cannot read input: {err.args[0] if err.args else err}", file=sys.stderr)
        return EXIT_PARSE
    except (ParseError, UnicodeDecodeError) as err:
        print(f"parse error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except GaugeFreedom as err:
        print(f"gauge freedom: {err}", file=sys.stderr)
        return EXIT_GAUGE
    except (BasisInsufficient, NonUniqueBrackets, Inconsistent, UnsolvableConstraint, NonConservedHamiltonian, OddHamiltonian) as err:
        print(f"identification failed: {err}", file=sys.stderr)
        return EXIT_IDENT


if __name__ == "__main__":
    sys.exit(main())
