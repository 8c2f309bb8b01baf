"""Central-difference differentiation with Richardson error estimates.

Every numeric derivative is returned as ``(value, error_bound)`` where the
value is the Richardson-improved estimate from steps h and h/2 and the bound
is the standard |D(h/2) - D(h)| / (2^p - 1) comparison for a scheme of
order p = 2.  Steps are relative to the coordinate scale.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import DomainError

DEFAULT_REL_STEP = 1e-5


def _step(x: float, rel_h: float) -> float:
    return rel_h * max(abs(x), 1.0)


_EPS = float(np.finfo(float).eps)


def derivative(f: Callable[[float], float], x: float, rel_h: float = DEFAULT_REL_STEP):
    """First derivative of a scalar function, with an error bound combining
    the Richardson truncation estimate and the cancellation floor."""
    h = _step(x, rel_h)
    if abs(x) > 0 and h >= 0.5 * abs(x):
        raise DomainError(f"finite-difference step {h} too large for coordinate {x}")
    f_p, f_m = f(x + h), f(x - h)
    d_h = (f_p - f_m) / (2.0 * h)
    d_h2 = (f(x + h / 2) - f(x - h / 2)) / h
    value = (4.0 * d_h2 - d_h) / 3.0
    roundoff = _EPS * max(abs(f_p), abs(f_m), 1e-300) / h
    return value, abs(d_h2 - d_h) / 3.0 + 4.0 * roundoff


def partial(f: Callable[[np.ndarray], float], x: Sequence[float], i: int,
            rel_h: float = DEFAULT_REL_STEP):
    """Partial derivative of f at x along coordinate i."""
    x = np.asarray(x, dtype=float)

    def g(xi: float) -> float:
        y = x.copy()
        y[i] = xi
        return f(y)

    return derivative(g, x[i], rel_h)


def gradient(f: Callable[[np.ndarray], float], x: Sequence[float],
             rel_h: float = DEFAULT_REL_STEP):
    """Gradient and per-component error bounds."""
    x = np.asarray(x, dtype=float)
    vals = np.empty_like(x)
    errs = np.empty_like(x)
    for i in range(x.size):
        vals[i], errs[i] = partial(f, x, i, rel_h)
    return vals, errs


DEFAULT_REL_STEP_2ND = 2e-4     # balances truncation against cancellation


def second_partial(f: Callable[[np.ndarray], float], x: Sequence[float], i: int, j: int,
                   rel_h: float = DEFAULT_REL_STEP_2ND):
    """Second partial derivative (order-2 stencils, Richardson-compared).

    Second differences lose ~eps/h^2 to cancellation, so they use a larger
    default step than first derivatives and the bound carries both terms.
    """
    x = np.asarray(x, dtype=float)
    f_scale = max(abs(f(x)), 1e-300)

    def d2(h_i: float, h_j: float) -> float:
        if i == j:
            y_p = x.copy(); y_p[i] += h_i
            y_m = x.copy(); y_m[i] -= h_i
            return (f(y_p) - 2.0 * f(x) + f(y_m)) / (h_i * h_i)
        out = 0.0
        for s_i in (+1.0, -1.0):
            for s_j in (+1.0, -1.0):
                y = x.copy()
                y[i] += s_i * h_i
                y[j] += s_j * h_j
                out += s_i * s_j * f(y)
        return out / (4.0 * h_i * h_j)

    h_i = _step(x[i], rel_h)
    h_j = _step(x[j], rel_h)
    for h in ((h_i, x[i]), (h_j, x[j])):
        if abs(h[1]) > 0 and h[0] >= 0.5 * abs(h[1]):
            raise DomainError("finite-difference step underflow near boundary")
    d_h = d2(h_i, h_j)
    d_h2 = d2(h_i / 2, h_j / 2)
    value = (4.0 * d_h2 - d_h) / 3.0
    roundoff = 16.0 * _EPS * f_scale / (h_i * h_j)
    return value, abs(d_h2 - d_h) / 3.0 + roundoff


def hessian(f: Callable[[np.ndarray], float], x: Sequence[float],
            rel_h: float = DEFAULT_REL_STEP):
    """Full Hessian, symmetrized by averaging with its transpose.

    Returns (H, error_bounds, asymmetry_residual).  The raw mixed stencil is
    already symmetric in exact arithmetic; the residual reports the numeric
    asymmetry before averaging.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    raw = np.empty((n, n))
    err = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            v, e = second_partial(f, x, i, j, rel_h)
            raw[i, j] = v
            raw[j, i] = v
            err[i, j] = e
            err[j, i] = e
    sym = 0.5 * (raw + raw.T)
    residual = float(np.max(np.abs(raw - raw.T)))
    return sym, err, residual
