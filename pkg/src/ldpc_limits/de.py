"""Density evolution for the BSC.

Scalar recursions track the probability that a variable-to-check message is
wrong.  Messages are taken under the all-one codeword, so "bad" means the
message disagrees with the transmitted bit.  Iteration 1 is the channel
message itself; each further iteration applies one check step and one
variable step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import NonMonotoneError, NumericError, ParameterError

CONVERGED = 1e-12


def _check_degrees(l: int, r: int) -> None:
    if l < 2 or r < 2:
        raise ParameterError("degrees must be at least 2")


@lru_cache(maxsize=None)
def _majority_weights(l: int) -> tuple[tuple[int, float, float], ...]:
    # (k, P(out wrong | flipped bit), P(out wrong | correct bit)) with k wrong
    # inputs among the l-1 other checks, scaled by the binomial coefficient.
    rows = []
    for k in range(l):
        c = math.comb(l - 1, k)
        bad, good = k + 1, l - 1 - k
        w_flip = 1.0 if bad > good else 0.5 if bad == good else 0.0
        bad, good = k, l - k
        w_ok = 1.0 if bad > good else 0.5 if bad == good else 0.0
        rows.append((k, c * w_flip, c * w_ok))
    return tuple(rows)


def _variable_majority(q: float, eps: float, l: int) -> float:
    """P(outgoing variable message is wrong), majority of l-1 checks + channel.

    ``q`` is the probability that an incoming check message is wrong.  Ties
    (possible when l is even) are broken by a fair coin.
    """
    flip = ok = 0.0
    for k, w_flip, w_ok in _majority_weights(l):
        pk = q**k * (1.0 - q) ** (l - 1 - k)
        flip += w_flip * pk
        ok += w_ok * pk
    return eps * flip + (1.0 - eps) * ok


def galb_de_step(x: float, eps: float, l: int, r: int) -> float:
    """One iteration of Gallager B (parity checks, majority variables)."""
    q = 0.5 * (1.0 - (1.0 - 2.0 * x) ** (r - 1))
    return _variable_majority(q, eps, l)


def lgalb_check(x: float, r: int) -> float:
    """Check output of the linearized decoder: wrong if any other input is wrong."""
    if x >= 1.0:
        return 1.0
    # 1 - (1-x)^(r-1) without cancellation for tiny x
    return -math.expm1((r - 1) * math.log1p(-x))


def lgalb_map(x: float, eps: float, l: int, r: int) -> float:
    """Right-hand side of the linearized Gallager B fixed-point equation.

    With y = (1-x)^(r-1) the probability that a check message is correct:
    a flipped bit stays wrong unless a strict majority of the other l-1
    checks are correct, a correct bit turns wrong when a strict majority are
    wrong, and ties (even l) count with weight 1/2.
    """
    if not (0.0 <= x <= 1.0 and 0.0 <= eps <= 1.0):
        raise ParameterError("x and eps must lie in [0, 1]")
    _check_degrees(l, r)
    ybar = lgalb_check(x, r)
    y = 1.0 - ybar
    flip = sum(math.comb(l - 1, k) * y**k * ybar ** (l - 1 - k) for k in range(0, (l - 1) // 2 + 1))
    ok = sum(math.comb(l - 1, k) * ybar ** k * y ** (l - 1 - k) for k in range(l // 2 + 1, l))
    out = eps * flip + (1.0 - eps) * ok
    if l % 2 == 0:
        h = l // 2
        out += 0.5 * math.comb(l - 1, h) * (
            eps * y**h * ybar ** (h - 1) + (1.0 - eps) * ybar ** h * y ** (h - 1)
        )
    return out


def lgalb_de_step(x: float, eps: float, l: int, r: int) -> float:
    """Same recursion as ``lgalb_map``, written as min-check + majority-variable."""
    return _variable_majority(lgalb_check(x, r), eps, l)


# ---------------------------------------------------------------------------
# threshold search


@dataclass(frozen=True)
class ScalarDE:
    """A scalar recursion x -> step(x, eps), started from x = eps."""

    name: str
    l: int
    r: int
    step: Callable[[float, float, int, int], float]

    def converges(self, eps: float, l_max: int = 5000, target: float = CONVERGED) -> bool:
        x = eps
        for _ in range(l_max):
            if x < target:
                return True
            nxt = self.step(x, eps, self.l, self.r)
            if nxt == x:  # stuck at a positive fixed point
                return False
            x = nxt
        return x < target

    def trajectory(self, eps: float, iters: int) -> np.ndarray:
        xs = [eps]
        for _ in range(iters - 1):
            xs.append(self.step(xs[-1], eps, self.l, self.r))
        return np.array(xs)


def galb(l: int, r: int) -> ScalarDE:
    _check_degrees(l, r)
    return ScalarDE("galb", l, r, galb_de_step)


def lgalb(l: int, r: int) -> ScalarDE:
    _check_degrees(l, r)
    return ScalarDE("lgalb", l, r, lgalb_map)


@dataclass(frozen=True)
class ThresholdResult:
    value: float
    lo: float
    hi: float


def find_threshold(
    de,
    tol: float = 1e-6,
    l_max: int = 5000,
    lo: float = 0.0,
    hi: float = 0.5,
    spot_checks: int = 9,
) -> ThresholdResult:
    """Bisection for the largest eps at which ``de.converges(eps)`` holds.

    ``de`` is any object with a ``converges(eps, l_max)`` method.  A coarse
    grid is evaluated first; a True following a False means the predicate is
    not monotone and ``NonMonotoneError`` is raised.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    grid = np.linspace(lo, hi, spot_checks)
    verdicts = [de.converges(float(e), l_max) for e in grid]
    if not verdicts[0]:
        raise NumericError(f"DE does not converge at the lower end eps={lo}")
    if verdicts[-1]:
        return ThresholdResult(hi, hi, hi)
    first_fail = verdicts.index(False)
    if any(verdicts[first_fail:]):
        raise NonMonotoneError(f"convergence verdicts along eps grid not monotone: {verdicts}")
    a, b = float(grid[first_fail - 1]), float(grid[first_fail])
    while b - a > tol:
        mid = 0.5 * (a + b)
        if de.converges(mid, l_max):
            a = mid
        else:
            b = mid
    return ThresholdResult(0.5 * (a + b), a, b)


def lgalb_threshold_fixed_point(l: int, r: int, tol: float = 1e-7, grid: int = 4000) -> float:
    """Smallest eps for which lgalb_map(x, eps) = x has a root in (0, eps].

    Independent of the iteration-based search: scans x on a log grid and
    bisects eps on the sign of max_x (lgalb_map(x, eps) - x).
    """

    def has_root(eps: float) -> bool:
        xs = np.geomspace(eps * 1e-9, eps, grid)
        return max(lgalb_map(float(x), eps, l, r) - float(x) for x in xs) >= 0.0

    a, b = 1e-6, 0.5
    if has_root(a):
        raise NumericError("fixed point already present at the lower end")
    while b - a > tol:
        mid = 0.5 * (a + b)
        if has_root(mid):
            b = mid
        else:
            a = mid
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# quantized min-sum


@dataclass(frozen=True, eq=False)
class DiscreteDensity:
    """pmf on the integers lo, lo+1, ..., lo+len(pmf)-1."""

    lo: int
    pmf: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return np.arange(self.lo, self.lo + self.pmf.size)

    def mass(self, pred) -> float:
        return float(self.pmf[pred(self.values)].sum())

    def clipped(self, M: int) -> np.ndarray:
        """pmf on -M..M after saturating the support."""
        out = np.zeros(2 * M + 1)
        idx = np.clip(self.values, -M, M) + M
        np.add.at(out, idx, self.pmf)
        return out


def ms_initial(eps: float, M: int, l: int) -> DiscreteDensity:
    """Channel messages (+1 correct, -1 flipped) on the variable-output alphabet."""
    lo = -(l - 1) * M - 1
    pmf = np.zeros(2 * ((l - 1) * M + 1) + 1)
    pmf[-1 - lo] = eps
    pmf[1 - lo] = 1.0 - eps
    return DiscreteDensity(lo, pmf)


def _check_pmf(c: np.ndarray, M: int, r: int, variant: str) -> np.ndarray:
    # c: clipped variable pmf on -M..M.  Returns check-output pmf on -M..M.
    k = r - 1
    if variant == "lms":
        tail = np.cumsum(c[::-1])[::-1]  # P(X >= v)
        t = np.append(tail, 0.0) ** k
        return t[:-1] - t[1:]
    if variant != "ms":
        raise ParameterError("variant must be 'ms' or 'lms'")
    pos = np.cumsum(c[::-1])[::-1][M + 1 :]  # P(X >= a), a = 1..M
    neg = np.cumsum(c)[:M][::-1]  # P(X <= -a), a = 1..M
    s, d = pos + neg, pos - neg
    up = np.append(0.5 * (s**k + d**k), 0.0)  # P(min|X| >= a, product positive)
    dn = np.append(0.5 * (s**k - d**k), 0.0)
    out = np.zeros(2 * M + 1)
    out[M + 1 :] = up[:-1] - up[1:]
    out[:M] = (dn[:-1] - dn[1:])[::-1]
    out[M] = max(0.0, 1.0 - out.sum())
    return out


def ms_de_step(d: DiscreteDensity, eps: float, M: int, l: int, r: int, variant: str = "ms") -> DiscreteDensity:
    """One exact DE iteration of MS(M) or its linearized variant LMS(M).

    The check node sees the variable messages saturated to [-M, M]; the
    variable node adds the channel value and l-1 check messages.
    """
    lo = -(l - 1) * M - 1
    if d.lo != lo or d.pmf.size != 2 * ((l - 1) * M + 1) + 1:
        raise ParameterError("density not on the variable-output alphabet")
    chk = _check_pmf(d.clipped(M), M, r, variant)
    acc = np.array([eps, 0.0, 1.0 - eps])  # channel on -1, 0, +1
    for _ in range(l - 1):
        acc = np.convolve(acc, chk)
    acc = np.clip(acc, 0.0, None)
    # Rounding drift would otherwise be amplified by (l-1)(r-1) per iteration.
    return DiscreteDensity(lo, acc / acc.sum())


@dataclass(frozen=True)
class QuantizedDE:
    """MS(M) / LMS(M) density evolution as a threshold-search handle.

    A variable message counts as bad when it is <= 0 (MS) or below M (LMS).
    """

    l: int
    r: int
    M: int
    variant: str = "ms"

    def bad_mass(self, d: DiscreteDensity) -> float:
        if self.variant == "lms":
            return d.mass(lambda v: v < self.M)
        return d.mass(lambda v: v <= 0)

    def converges(self, eps: float, l_max: int = 5000, target: float = CONVERGED) -> bool:
        d = ms_initial(eps, self.M, self.l)
        for _ in range(l_max):
            if self.bad_mass(d) < target:
                return True
            nxt = ms_de_step(d, eps, self.M, self.l, self.r, self.variant)
            if np.max(np.abs(nxt.pmf - d.pmf)) < 1e-16:
                return False
            d = nxt
        return self.bad_mass(d) < target


# ---------------------------------------------------------------------------
# witness-size augmented DE (l = 3)


@dataclass(frozen=True)
class WitnessDEState:
    """Value and derivative at x = 1 of the witness generating functions.

    p_val is the probability that a variable-to-check message is wrong and
    p_der the expected size (in variables) of its witness, counted only on
    the event that the message is wrong.  q_* are the check-side analogues.
    """

    p_val: float
    p_der: float
    q_val: float = 0.0
    q_der: float = 0.0
    iteration: int = 1


def witness_de_init(eps: float) -> WitnessDEState:
    return WitnessDEState(eps, eps, 0.0, 0.0, 1)


def witness_de_step(s: WitnessDEState, eps: float, r: int) -> WitnessDEState:
    """Propagate (value, derivative) one iteration; p_val = 0 is absorbing."""
    if s.p_val <= 0.0:
        return WitnessDEState(0.0, 0.0, 0.0, 0.0, s.iteration + 1)
    qv = lgalb_check(s.p_val, r)
    qd = s.p_der / s.p_val * qv
    pv = eps * (2.0 - qv) * qv + (1.0 - eps) * qv * qv
    pd = eps * (2.0 - qv) * (qd + qv) + (1.0 - eps) * (2.0 * qv * qd + qv * qv)
    return WitnessDEState(pv, pd, qv, qd, s.iteration + 1)


def witness_de_bound(p_der_prev: float, x_prev: float, eps: float, r: int) -> float:
    """Linear upper bound on the next p_der from (p_der, x) of the previous iteration."""
    a = r - 1
    return (
        2.0 * eps * a * p_der_prev
        + 2.0 * eps * a * x_prev
        + (1.0 - eps) * a * a * x_prev**2
        + 2.0 * (1.0 - eps) * a * a * x_prev * p_der_prev
    )


def witness_trajectory(eps: float, r: int, iters: int) -> list[dict]:
    """Rows (iteration, x, expected witness size) for iterations 1..iters."""
    s = witness_de_init(eps)
    rows = []
    for _ in range(iters):
        rows.append({"iteration": s.iteration, "x": s.p_val, "witness_size": s.p_der})
        s = witness_de_step(s, eps, r)
    return rows


MS2_VALUES = (-2, -1, 0, 1, 2)


@dataclass(frozen=True, eq=False)
class MS2WitnessState:
    """Per-message-value (value, derivative) pairs for LMS(2) with l = 3.

    Arrays are indexed by mu + 2 for mu in -2..2.  Messages equal to +2 are
    never part of a witness, so only their value is tracked.
    """

    p_val: np.ndarray
    p_der: np.ndarray
    q_val: np.ndarray
    q_der: np.ndarray
    iteration: int = 1

    def bad_witness_size(self) -> float:
        return float(self.p_der[:4].sum())


def ms2_witness_de_init(eps: float) -> MS2WitnessState:
    v = np.zeros(5)
    v[1], v[3] = eps, 1.0 - eps
    return MS2WitnessState(v.copy(), v.copy(), np.zeros(5), np.zeros(5), 1)


def ms2_witness_de_step(s: MS2WitnessState, eps: float, r: int) -> MS2WitnessState:
    """One iteration of the LMS(2) witness system.

    The check output equals mu when the minimum of r-1 inputs is mu; its
    witness is inherited from one input carrying mu.  The variable output is
    the saturated sum of the channel value and two check messages.
    """
    p, pd = s.p_val, s.p_der
    below = np.concatenate(([0.0], np.cumsum(p)))  # below[i] = P(X < mu_i)
    t = np.clip(1.0 - below, 0.0, 1.0) ** (r - 1)
    q = t[:-1] - t[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        qd = np.where(p > 0.0, pd / p * q, 0.0)
    qd[4] = 0.0

    m2, m1, z0, p1, p2 = (float(v) for v in q)
    dm2, dm1, dz0, dp1 = (float(v) for v in qd[:4])

    def poly(terms):
        # terms: list of (coef, a, b) meaning coef * A * B; derivative of x*A*B
        val = sum(c * a[0] * b[0] for c, a, b in terms)
        der = sum(c * (a[0] * b[0] + a[1] * b[0] + a[0] * b[1]) for c, a, b in terms)
        return val, der

    M2, M1, Z0, P1 = (m2, dm2), (m1, dm1), (z0, dz0), (p1, dp1)
    P2 = (p2, 0.0)
    e, ebar = eps, 1.0 - eps
    # channel -1 needs a + b = mu + 1, channel +1 needs a + b = mu - 1
    plus1 = poly([(e, P1, P1), (2 * e, P2, Z0), (2 * ebar, P2, M2), (2 * ebar, P1, M1), (ebar, Z0, Z0)])
    zero = poly([(2 * e, P2, M1), (2 * e, P1, Z0), (2 * ebar, P1, M2), (2 * ebar, Z0, M1)])
    minus1 = poly([(ebar, M1, M1), (2 * ebar, M2, Z0), (2 * e, P2, M2), (2 * e, P1, M1), (e, Z0, Z0)])
    minus2 = poly(
        [
            (2 * e, M2, P1),
            (2 * e, M2, Z0),
            (2 * e, M2, M1),
            (2 * e, Z0, M1),
            (e, M1, M1),
            (e, M2, M2),
            (2 * ebar, M1, M2),
            (ebar, M2, M2),
        ]
    )
    vals = np.array([minus2[0], minus1[0], zero[0], plus1[0], 0.0])
    vals[4] = max(0.0, 1.0 - vals[:4].sum())
    ders = np.array([minus2[1], minus1[1], zero[1], plus1[1], 0.0])
    return MS2WitnessState(vals, ders, q, qd, s.iteration + 1)
