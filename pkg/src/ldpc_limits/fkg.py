"""Exhaustive checks of the Harris-FKG inequality on {0,1}^n.

Points of the cube are bit masks; x <= y componentwise iff x & ~y == 0.
The measure is the product measure with P(x_i = 1) = eps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MonotonicityError, ParameterError

MAX_N = 12


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.int64)
    out = np.zeros_like(x)
    while np.any(x):
        out += x & 1
        x = x >> 1
    return out


def product_measure(n: int, eps: float) -> np.ndarray:
    k = _popcount(np.arange(2**n))
    return eps**k * (1.0 - eps) ** (n - k)


def monotone_direction(f: np.ndarray, n: int) -> int:
    """+1 if f is non-decreasing, -1 if non-increasing, 0 if constant.

    Raises ``MonotonicityError`` with a violating comparable pair otherwise.
    """
    f = np.asarray(f, dtype=float)
    idx = np.arange(2**n)
    up = down = False
    for i in range(n):
        low = idx[(idx >> i) & 1 == 0]
        high = low | (1 << i)
        diff = f[high] - f[low]
        if np.any(diff > 0):
            up_pair = (int(low[np.argmax(diff > 0)]), int(high[np.argmax(diff > 0)]))
            up = True
        if np.any(diff < 0):
            dn_pair = (int(low[np.argmax(diff < 0)]), int(high[np.argmax(diff < 0)]))
            down = True
        if up and down:
            raise MonotonicityError(
                f"not monotone: f rises on {up_pair} and falls on {dn_pair}", dn_pair
            )
    return 1 if up else -1 if down else 0


def lattice_condition_holds(mu: np.ndarray, n: int, tol: float = 1e-12) -> bool:
    """mu(x) mu(y) <= mu(x | y) mu(x & y) for every pair, checked exhaustively."""
    idx = np.arange(2**n)
    mu = np.asarray(mu, dtype=float)
    for x in idx:
        lhs = mu[x] * mu
        rhs = mu[x | idx] * mu[x & idx]
        if np.any(lhs > rhs * (1 + tol) + tol * 1e-300):
            return False
    return True


@dataclass(frozen=True)
class FKGResult:
    holds: bool
    e_fg: float
    e_f: float
    e_g: float


def fkg_check(n: int, eps: float, f, g) -> FKGResult:
    """Compare E[f g] with E[f] E[g] for tables f, g of length 2^n.

    Both tables must be monotone in the same direction; the inequality
    E[f g] >= E[f] E[g] then holds under any product measure.
    """
    if not 1 <= n <= MAX_N:
        raise ParameterError(f"n must lie in 1..{MAX_N}")
    if not 0.0 <= eps <= 1.0:
        raise ParameterError("eps must lie in [0, 1]")
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != (2**n,) or g.shape != (2**n,):
        raise ParameterError("tables must have length 2^n")
    df, dg = monotone_direction(f, n), monotone_direction(g, n)
    if df * dg < 0:
        raise MonotonicityError("f and g are monotone in opposite directions", (0, 2**n - 1))
    mu = product_measure(n, eps)
    e_fg, e_f, e_g = float(mu @ (f * g)), float(mu @ f), float(mu @ g)
    scale = max(1.0, abs(e_f * e_g))
    return FKGResult(e_fg >= e_f * e_g - 1e-12 * scale, e_fg, e_f, e_g)


def fkg_verify(n: int, eps: float, f, g) -> bool:
    return fkg_check(n, eps, f, g).holds


def random_monotone_table(n: int, rng: np.random.Generator, terms: int = 4, increasing: bool = True) -> np.ndarray:
    """Non-negative combination of up-set indicators [x >= a_j] (or down-sets)."""
    idx = np.arange(2**n)
    out = np.zeros(2**n)
    for _ in range(terms):
        a = int(rng.integers(2**n))
        w = float(rng.random())
        if increasing:
            out += w * ((idx & a) == a)
        else:
            out += w * ((idx & ~a) == 0)
    return out
