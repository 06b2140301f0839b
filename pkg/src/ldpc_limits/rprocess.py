"""Reduced counting process for the growth of the marked set.

State (C, S, B, I): checks reached, surviving edges still to be explored,
boundary variables, internal variables.  With slack
S + B + I - gamma*r*C, where gamma*r = r - 1 - delta, the transitions are

    extend   (2, 2r-3, 0, 1)   w.p. eps   (regular step, flipped variable)
    prune    (0, -1, 1, 0)     w.p. 1-eps (regular step, correct variable)
    boundary (1, r-2, -1, 1)   only while the slack stays >= 0 afterwards

Regular steps never lower the slack; a boundary step lowers it by 1-delta.
The process stops when S reaches 0.  Also here: the birth-death tail bound
used to control the number of internal variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True, order=False)
class RState:
    C: int
    S: int
    B: int
    I: int

    def __add__(self, d):
        return RState(self.C + d[0], self.S + d[1], self.B + d[2], self.I + d[3])

    def slack(self, gamma_r) -> Fraction:
        return Fraction(self.S + self.B + self.I) - gamma_r * self.C

    def as_tuple(self) -> tuple:
        return (self.C, self.S, self.B, self.I)


def transitions(r: int) -> dict:
    """Increments used by the process, plus dominated alternatives.

    The ``alt_*`` rows are increments a finer accounting could produce
    (repeated checks or variables); each is dominated by the row it replaces.
    """
    return {
        "extend": (2, 2 * r - 3, 0, 1),
        "prune": (0, -1, 1, 0),
        "boundary": (1, r - 2, -1, 1),
        "alt_extend_shared_check": (1, r - 3, 0, 1),
        "alt_extend_repeat": (0, -3, 0, 1),
        "alt_boundary_repeat": (0, -2, -1, 1),
    }


def _as_fraction(delta) -> Fraction:
    return delta if isinstance(delta, Fraction) else Fraction(delta).limit_denominator(10**9)


def gamma_r(r: int, delta) -> Fraction:
    """gamma * r with gamma = 1 - (1 + delta)/r."""
    return r - 1 - _as_fraction(delta)


def check_delta(r: int, delta) -> Fraction:
    d = _as_fraction(delta)
    if not 0 < d < Fraction(1, 2 * (r - 1)):
        raise ParameterError(f"delta must lie in (0, 1/(2(r-1))) = (0, {1 / (2 * (r - 1)):.6g})")
    return d


def boundary_admissible(s: RState, r: int, delta) -> bool:
    """A boundary step keeps gamma*r*C <= S + B + I."""
    d = _as_fraction(delta)
    return s.slack(gamma_r(r, d)) >= 1 - d


def dominates(u: RState, v: RState, r: int, delta) -> bool:
    """Partial order: u >= v when u has at least v's S, I and slack."""
    gr = gamma_r(r, delta)
    return u.S >= v.S and u.I >= v.I and u.slack(gr) >= v.slack(gr)


def r_step(
    s: RState,
    kind: str,
    r: int,
    *,
    eps: float | None = None,
    rng: np.random.Generator | None = None,
    delta=None,
    enforce: bool = False,
) -> RState:
    """Apply one transition.

    ``kind`` is "extend", "prune", "boundary" or "regular" (extend w.p. eps,
    else prune, drawn from ``rng``).  With ``enforce`` a boundary step that
    would break the slack constraint raises ``ParameterError``.
    """
    t = transitions(r)
    if kind == "regular":
        if eps is None or rng is None:
            raise ParameterError("regular steps need eps and rng")
        kind = "extend" if rng.random() < eps else "prune"
    if kind not in t:
        raise ParameterError(f"unknown step {kind!r}")
    if kind == "boundary" and enforce:
        if delta is None:
            raise ParameterError("enforcing admissibility needs delta")
        if not boundary_admissible(s, r, delta):
            raise ParameterError("boundary step would violate the slack constraint")
    return s + t[kind]


# ---------------------------------------------------------------------------
# strategies and runs

Strategy = Callable[[RState, bool, np.random.Generator], bool]


def greedy(_s: RState, admissible: bool, _rng) -> bool:
    return admissible


def never_boundary(_s: RState, _admissible: bool, _rng) -> bool:
    return False


def random_admissible(_s: RState, admissible: bool, rng) -> bool:
    return admissible and rng.random() < 0.5


STRATEGIES = {"greedy": greedy, "never": never_boundary, "random": random_admissible}


@dataclass(frozen=True, eq=False)
class RunResult:
    final: RState
    steps: int
    regular_steps: int
    extends: int
    boundary_steps: int
    initial_boundary_steps: int
    stopped: bool  # S reached 0 before the step cap
    trajectory: list | None = None

    @property
    def internal(self) -> int:
        return self.final.I


def run_strategy(
    start: RState,
    outcomes: Sequence[bool],
    r: int,
    delta,
    strategy: Strategy = greedy,
    strategy_rng: np.random.Generator | None = None,
    max_steps: int | None = None,
    keep_trajectory: bool = False,
    switch: tuple | None = None,
) -> RunResult:
    """Run from ``start`` with the i-th regular step drawn from ``outcomes[i]``.

    Sharing ``outcomes`` couples runs under different strategies.  ``switch``
    = (pseudo_start, pseudo_strategy) makes the run mimic the choices the
    pseudo strategy takes on the pseudo state until the pseudo state's S hits
    0, and continue greedily afterwards.
    """
    d = check_delta(r, delta)
    t = transitions(r)
    s = start
    pseudo, pseudo_strategy = switch if switch is not None else (None, None)
    traj = [s] if keep_trajectory else None
    steps = regular = ext = nb = nb_init = 0
    in_initial = True
    cap = max_steps if max_steps is not None else 10**9
    while s.S > 0 and steps < cap:
        if pseudo is not None and pseudo.S > 0:
            take_b = pseudo_strategy(pseudo, boundary_admissible(pseudo, r, d), strategy_rng)
            take_b = take_b and boundary_admissible(s, r, d)
        else:
            pseudo = None
            take_b = strategy(s, boundary_admissible(s, r, d), strategy_rng)
        if take_b:
            inc = t["boundary"]
            nb += 1
            nb_init += in_initial
        else:
            in_initial = False
            if regular >= len(outcomes):
                break
            flip = bool(outcomes[regular])
            inc = t["extend"] if flip else t["prune"]
            regular += 1
            ext += flip
        s = s + inc
        if pseudo is not None:
            pseudo = pseudo + inc
        steps += 1
        if keep_trajectory:
            traj.append(s)
    return RunResult(s, steps, regular, ext, nb, nb_init, s.S == 0, traj)


def greedy_run(
    S0: int,
    eps: float,
    delta,
    r: int,
    seed: int,
    max_steps: int = 10**6,
    keep_trajectory: bool = False,
) -> RunResult:
    """Greedy schedule from (0, S0, 0, 0): a boundary step whenever admissible."""
    if S0 < 1:
        raise ParameterError("S0 must be positive")
    if not 0.0 <= eps < 1.0 / (2 * (r - 1)):
        raise ParameterError("eps must lie in [0, 1/(2(r-1)))")
    rng = np.random.default_rng(seed)
    outcomes = rng.random(max_steps) < eps
    return run_strategy(RState(0, S0, 0, 0), outcomes, r, delta, greedy, None, max_steps, keep_trajectory)


@dataclass(frozen=True, eq=False)
class GreedyBatch:
    internal: np.ndarray
    steps: np.ndarray
    stopped: np.ndarray


def greedy_batch(
    S0: int,
    eps: float,
    delta,
    r: int,
    trials: int,
    seed: int = 0,
    max_regular: int | None = None,
    outcomes: np.ndarray | None = None,
) -> GreedyBatch:
    """Vectorized greedy runs.

    Under the greedy schedule the boundary steps are a deterministic
    function of the number of extends: floor(S0/(1-delta)) at the start,
    then one more each time the accumulated 2*delta per extend covers
    another 1-delta of slack.  The stopping time is the first regular step
    at which S hits 0.
    """
    d = check_delta(r, delta)
    if outcomes is not None:
        return _greedy_rows(S0, d, r, np.asarray(outcomes, dtype=bool))
    extend = max_regular is None
    if extend:
        max_regular = 25 * S0 + 500
    rng = np.random.default_rng(seed)
    chunk = max(1, 2**23 // max_regular)
    parts = []
    for lo in range(0, trials, chunk):
        k = min(chunk, trials - lo)
        out = rng.random((k, max_regular)) < eps
        b = _greedy_rows(S0, d, r, out)
        # rows that hit the cap get more outcomes until they stop (cap 64x)
        todo = np.arange(k)
        while extend and not b.stopped[todo].all() and out.shape[1] < 64 * max_regular:
            keep = ~b.stopped[todo]
            todo, out = todo[keep], out[keep]
            out = np.concatenate([out, rng.random(out.shape) < eps], axis=1)
            sub = _greedy_rows(S0, d, r, out)
            for f in ("internal", "steps", "stopped"):
                getattr(b, f)[todo] = getattr(sub, f)
        parts.append(b)
    return GreedyBatch(*(np.concatenate([getattr(b, f) for b in parts]) for f in ("internal", "steps", "stopped")))


def _greedy_rows(S0: int, d: Fraction, r: int, outcomes: np.ndarray) -> GreedyBatch:
    trials, max_regular = outcomes.shape
    p, q = d.numerator, d.denominator
    k0 = (S0 * q) // (q - p)  # initial boundary steps
    slack0 = S0 * q - k0 * (q - p)  # in units of 1/q
    ext = np.cumsum(outcomes, axis=1, dtype=np.int64)
    regular = np.arange(1, max_regular + 1, dtype=np.int64)
    bnd = (slack0 + 2 * p * ext) // (q - p)
    S = S0 + k0 * (r - 2) + ext * (2 * r - 3) - (regular - ext) + bnd * (r - 2)
    hit = S <= 0
    stopped = hit.any(axis=1)
    first = np.where(stopped, hit.argmax(axis=1), max_regular - 1)
    rows = np.arange(trials)
    e_at, b_at = ext[rows, first], bnd[rows, first]
    return GreedyBatch(k0 + e_at + b_at, k0 + first + 1 + b_at, stopped)


def subcritical_drift(eps: float, r: int, delta) -> float:
    """Mean S increment per regular step under greedy, boundary steps included."""
    d = float(_as_fraction(delta))
    return eps * (2 * r - 3 + (r - 2) * 2 * d / (1 - d)) - (1 - eps)


def drift_bound_quantity(eps: float, r: int, delta) -> float:
    """eps * (2r - 3 + (r-2) 2 delta/(1-delta)); below 1 for eps, delta < 1/(2(r-1))."""
    d = float(_as_fraction(delta))
    return eps * (2 * r - 3 + (r - 2) * 2 * d / (1 - d))


@dataclass(frozen=True)
class DominationReport:
    pairs: int
    violations: int
    greedy_internal: np.ndarray
    other_internal: np.ndarray


def strategy_domination_check(
    start: RState,
    strategy: str,
    trials: int,
    seed: int,
    eps: float,
    r: int,
    delta,
    max_steps: int = 10**5,
) -> DominationReport:
    """Couple greedy with another strategy on shared regular outcomes."""
    if strategy not in STRATEGIES:
        raise ParameterError(f"strategy must be one of {sorted(STRATEGIES)}")
    rng = np.random.default_rng(seed)
    g_int = np.zeros(trials, dtype=np.int64)
    o_int = np.zeros(trials, dtype=np.int64)
    for i in range(trials):
        outcomes = rng.random(max_steps) < eps
        coin = np.random.default_rng(rng.integers(2**63))
        a = run_strategy(start, outcomes, r, delta, greedy, None, max_steps)
        b = run_strategy(start, outcomes, r, delta, STRATEGIES[strategy], coin, max_steps)
        g_int[i], o_int[i] = a.internal, b.internal
    return DominationReport(trials, int(np.sum(g_int < o_int)), g_int, o_int)


# ---------------------------------------------------------------------------
# tail of the number of internal variables


@dataclass(frozen=True)
class TailFit:
    S0: tuple
    c: float
    probs: tuple
    slope: float
    intercept: float


def fit_internal_tail(
    S0_values: Sequence[int],
    eps: float,
    delta,
    r: int,
    trials: int,
    seed: int,
    c: float | None = None,
) -> TailFit:
    """Fit log P(I_inf >= c S0) = intercept + slope * S0 by least squares.

    ``c`` defaults to 1.1 times the pooled mean of I_inf / S0.
    """
    batches = [greedy_batch(s, eps, delta, r, trials, seed=seed + k) for k, s in enumerate(S0_values)]
    for b in batches:
        if not b.stopped.all():
            raise ParameterError("some runs hit the step cap; increase max_regular")
    if c is None:
        c = 1.1 * float(np.mean([np.mean(b.internal / s) for b, s in zip(batches, S0_values)]))
    probs = tuple(float(np.mean(b.internal >= c * s)) for b, s in zip(batches, S0_values))
    if min(probs) <= 0.0:
        raise ParameterError("an empirical tail probability is 0; use more trials or a smaller c")
    slope, intercept = np.polyfit(np.asarray(S0_values, dtype=float), np.log(probs), 1)
    return TailFit(tuple(S0_values), c, probs, float(slope), float(intercept))


@dataclass(frozen=True)
class BDTail:
    b: int  # beta * a, the horizon
    exact: float
    empirical: float
    stderr: float
    chernoff: float


def _jump(mu: float, p: float) -> Fraction:
    return Fraction(mu).limit_denominator(10**6) / Fraction(p).limit_denominator(10**6)


def bd_survival_exact(a: int, p: float, mu: float, b: int) -> float:
    """P(T > b) for X_t = X_{t-1} - 1 + Y_t, Y = mu/p w.p. p, T = min{t: X_t < 1}.

    Dynamic program over the number of jumps; positions are compared in
    exact rational arithmetic.
    """
    J = _jump(mu, p)
    num, den = J.numerator, J.denominator
    alive = np.array([1.0])
    for t in range(1, b + 1):
        nxt = np.zeros(t + 1)
        nxt[:-1] += alive * (1.0 - p)
        nxt[1:] += alive * p
        k = np.arange(t + 1)
        ok = (a - t) * den + num * k >= den
        alive = np.where(ok, nxt, 0.0)
    return float(alive.sum())


def bd_chernoff(a: int, p: float, mu: float, beta: float) -> float:
    """Chernoff bound on P(T > beta a); exactly 0 when mu < p and beta >= p/(p-mu)."""
    if mu < p and beta >= p / (p - mu):
        return 0.0
    if beta <= 1.0 / (1.0 - mu) or p >= 1.0:
        return 1.0
    s = (p / mu) * math.log((beta - 1.0) * (1.0 - p) / (p + beta * (mu - p)))
    log_val = a * s + beta * a * math.log((1.0 - p) * math.exp(-s) + p * math.exp((mu / p - 1.0) * s))
    return min(1.0, math.exp(log_val))


def bd_tail(a: int, p: float, mu: float, beta: float, trials: int, seed: int) -> BDTail:
    """Survival probability of the birth-death walk past beta*a steps.

    Returns the exact value, a Monte Carlo estimate with its standard error,
    and the Chernoff bound.
    """
    if a < 1 or not 0.0 < p <= 1.0 or not 0.0 < mu < 1.0:
        raise ParameterError("need a >= 1, p in (0, 1], mu in (0, 1)")
    b = int(round(beta * a))
    J = _jump(mu, p)
    num, den = J.numerator, J.denominator
    rng = np.random.default_rng(seed)
    alive_total = 0
    chunk = max(1, min(trials, 2**22 // max(b, 1)))
    done = 0
    t = np.arange(1, b + 1)
    while done < trials:
        k = min(chunk, trials - done)
        jumps = np.cumsum(rng.random((k, b)) < p, axis=1)
        pos_ok = (a - t) * den + num * jumps >= den
        alive_total += int(pos_ok.all(axis=1).sum())
        done += k
    emp = alive_total / trials
    return BDTail(
        b=b,
        exact=bd_survival_exact(a, p, mu, b),
        empirical=emp,
        stderr=math.sqrt(max(emp * (1.0 - emp), 1.0 / trials) / trials),
        chernoff=bd_chernoff(a, p, mu, beta),
    )
