"""Compile even expressions into vectorized numpy callables."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .symexpr import Expr, OddEvaluation, Symbol, UnboundSymbol


def _code(e: Expr, index: dict) -> str:
    parts = []
    for m, c in e.terms():
        imag, evens, x, odds = m
        if odds:
            raise OddEvaluation(f"cannot compile odd generators in {e}")
        f = [repr(float(c))]
        if imag:
            f.append("1j")
        for s, p in evens:
            if s not in index:
                raise UnboundSymbol(s.name)
            col = f"X[:, {index[s]}]"
            f.append(col if p == 1 else f"{col}**{p}")
        if x is not None:
            f.append(f"np.exp({_code(x, index)})")
        parts.append("*".join(f))
    if not parts:
        return "Z"
    return "(" + " + ".join(parts) + ")"


def compile_exprs(exprs: Sequence[Expr], variables: Sequence[Symbol]):
    """Return ``f(X) -> array (R, len(exprs))`` for points ``X`` of shape (R, n)."""
    index = {s: i for i, s in enumerate(variables)}
    body = ", ".join(_code(e, index) for e in exprs)
    src = (
        "def _f(X):\n"
        "    Z = np.zeros(X.shape[0])\n"
        f"    cols = [{body}]\n"
        "    return np.stack([np.broadcast_to(c, (X.shape[0],)) for c in cols], axis=1) if cols else np.zeros((X.shape[0], 0))\n"
    )
    ns = {"np": np}
    exec(src, ns)
    return ns["_f"]


def sample_points(rng: np.random.Generator, n_points: int, n_vars: int, positive: Sequence[bool] = ()) -> np.ndarray:
    """Uniform magnitudes in [0.5, 2] with random sign (positive flags force +)."""
    mag = rng.uniform(0.5, 2.0, size=(n_points, n_vars))
    sign = np.where(rng.random((n_points, n_vars)) < 0.5, -1.0, 1.0)
    for j, pos in enumerate(positive):
        if pos:
            sign[:, j] = 1.0
    return mag * sign
