"""Finite lattice versions of two first-order field theories.

* ``sd``: the 2+1 dimensional self-dual vector model on an N x N periodic
  grid, metric (+,-,-), forward spatial differences.
* ``dirac``: a four-component Dirac field on N periodic sites in one
  spatial dimension, central differences, Dirac representation of gamma.

Masses and spacings are inlined as exact rationals so that the generated
documents contain no parameters.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .bracket_solver import BracketTable
from .linsolve import isolate
from .mechanics import PhaseSpace, euler_lagrange
from .symexpr import I, ONE, ZERO, Expr, Symbol
from .sysparse import SystemSpec

SD = "sd"
DIRAC = "dirac"

METRIC = (1, -1, -1)
GAMMA0 = ((1, 0, 0, 0), (0, 1, 0, 0), (0, 0, -1, 0), (0, 0, 0, -1))
# alpha^1 = gamma^0 gamma^1 in the Dirac representation
ALPHA1 = ((0, 0, 0, 1), (0, 0, 1, 0), (0, 1, 0, 0), (1, 0, 0, 0))


def _rational(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(str(v))


@dataclass(frozen=True)
class LatticeConfig:
    model: str = SD
    N: int = 2
    a: Fraction = Fraction(1)
    m: Fraction = Fraction(1)

    def __post_init__(self):
        if self.model not in (SD, DIRAC):
            raise ValueError(f"unknown lattice model {self.model!r}")
        if not isinstance(self.N, int) or self.N < 2:
            raise ValueError("lattice needs N >= 2 sites per dimension")
        object.__setattr__(self, "a", _rational(self.a))
        object.__setattr__(self, "m", _rational(self.m))
        if self.a <= 0 or self.m <= 0:
            raise ValueError("spacing and mass must be positive")

    @property
    def metadata(self) -> dict:
        return {"model": self.model, "N": str(self.N), "a": str(self.a), "m": str(self.m)}


def levi_civita(*idx) -> int:
    if len(set(idx)) < len(idx):
        return 0
    sign = 1
    p = list(idx)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


# ------------------------------------------------------------ self-dual


def sd_name(mu: int, i: int, j: int) -> str:
    return f"f{mu}_{i}_{j}"


def gen_sd(cfg: LatticeConfig) -> SystemSpec:
    """Self-dual model; coordinates f1, f2 on every site, then f0."""
    if cfg.model != SD:
        raise ValueError("gen_sd needs model 'sd'")
    N, a, m = cfg.N, cfg.a, cfg.m
    sites = list(itertools.product(range(N), range(N)))
    coords = []
    sym = {}
    for mu in (1, 2, 0):
        for i, j in sites:
            s = Symbol(sd_name(mu, i, j), False, len(coords))
            sym[(mu, i, j)] = s
            coords.append(s)
    vel = {k: Symbol("d" + s.name, False, s.rank) for k, s in sym.items()}

    def upper(mu, i, j):
        return sym[(mu, i % N, j % N)].as_expr()

    def lower(mu, i, j):
        return METRIC[mu] * upper(mu, i, j)

    def d_lower(nu, rho, i, j):
        if nu == 0:
            return METRIC[rho] * vel[(rho, i, j)].as_expr()
        di, dj = (1, 0) if nu == 1 else (0, 1)
        return (lower(rho, i + di, j + dj) - lower(rho, i, j)) * Fraction(1) / a

    total = ZERO
    for i, j in sites:
        cs = ZERO
        for mu, nu, rho in itertools.permutations(range(3)):
            cs = cs + levi_civita(mu, nu, rho) * lower(mu, i, j) * d_lower(nu, rho, i, j)
        mass = ZERO
        for mu in range(3):
            mass = mass + upper(mu, i, j) * lower(mu, i, j)
        total = total + cs * (-Fraction(1) / (2 * m)) + mass * Fraction(1, 2)
    L = total * (a * a)
    return SystemSpec(f"sd_lattice_{N}", (), tuple(coords), L, cfg.metadata)


# ------------------------------------------------------------ Dirac


def dirac_names(c: int, n: int) -> tuple[str, str]:
    return f"psi{c}_{n}", f"psic{c}_{n}"


def gen_dirac(cfg: LatticeConfig) -> SystemSpec:
    """a * sum_n [ i psi* psi_t + i psi* alpha1 D psi - m psi* beta psi ]."""
    if cfg.model != DIRAC:
        raise ValueError("gen_dirac needs model 'dirac'")
    N, a, m = cfg.N, cfg.a, cfg.m
    coords = []
    psi = {}
    psic = {}
    for n in range(N):
        for c in range(1, 5):
            s = Symbol(dirac_names(c, n)[0], True, len(coords))
            psi[(c, n)] = s
            coords.append(s)
    for n in range(N):
        for c in range(1, 5):
            s = Symbol(dirac_names(c, n)[1], True, len(coords))
            psic[(c, n)] = s
            coords.append(s)
    dpsi = {k: Symbol("d" + s.name, True, s.rank) for k, s in psi.items()}

    def central(c, n):
        return (psi[(c, (n + 1) % N)].as_expr() - psi[(c, (n - 1) % N)].as_expr()) * (Fraction(1) / (2 * a))

    total = ZERO
    for n in range(N):
        for c in range(1, 5):
            star = psic[(c, n)].as_expr()
            total = total + I * star * dpsi[(c, n)].as_expr()
            for d in range(1, 5):
                if ALPHA1[c - 1][d - 1]:
                    total = total + (ALPHA1[c - 1][d - 1] * I) * star * central(d, n)
                if GAMMA0[c - 1][d - 1]:
                    total = total - (GAMMA0[c - 1][d - 1] * m) * star * psi[(d, n)].as_expr()
    L = total * a
    meta = dict(cfg.metadata)
    meta["gamma"] = "dirac-representation"
    return SystemSpec(f"dirac_lattice_{N}", (), tuple(coords), L, meta)


def generate(cfg: LatticeConfig) -> SystemSpec:
    return gen_sd(cfg) if cfg.model == SD else gen_dirac(cfg)


# ------------------------------------------------------------ closed forms


def expected_table(cfg: LatticeConfig) -> BracketTable:
    """Closed-form lattice brackets.

    sd: {f1_n, f2_k} = -m delta_nk / a^2 with the momenta and f0 slaved to
    f1, f2.  dirac: {psi_{c,n}, psi*_{d,k}} = -i delta_cd delta_nk / a.
    """
    spec = generate(cfg)
    ps = PhaseSpace(spec)
    byname = {x.name: x for x in ps.phase}
    base = {}
    dependent = {}
    if cfg.model == SD:
        N, a, m = cfg.N, cfg.a, cfg.m
        sites = list(itertools.product(range(N), range(N)))
        for i, j in sites:
            f1, f2 = byname[sd_name(1, i, j)], byname[sd_name(2, i, j)]
            base[(f1, f2)] = Expr(-m / (a * a))
            half = a * a / (2 * m)
            dependent[byname["p" + f1.name]] = -half * f2.as_expr()
            dependent[byname["p" + f2.name]] = half * f1.as_expr()
            dependent[byname["p" + sd_name(0, i, j)]] = ZERO
        el = euler_lagrange(spec, ps)
        for c, e, kind in el:
            if c.name.startswith("f0_"):
                dependent[c] = isolate(e, c)
        independent = [byname[sd_name(mu, i, j)] for mu in (1, 2) for i, j in sites]
    else:
        N, a = cfg.N, cfg.a
        for n in range(N):
            for c in range(1, 5):
                p_name, c_name = dirac_names(c, n)
                base[(byname[p_name], byname[c_name])] = -I * (Fraction(1) / a)
        for x in ps.coords:
            # left derivative of i a psi* dpsi with respect to dpsi
            if x.name.startswith("psic"):
                dependent[ps.momentum_of[x]] = ZERO
            else:
                star = byname["psic" + x.name[3:]]
                dependent[ps.momentum_of[x]] = -I * a * star.as_expr()
        independent = list(ps.coords)
    return BracketTable(spec.name, ps.phase, independent, base, dependent)
