"""Regular Tanner graphs from the configuration model, and expansion checks.

Edges are numbered by variable socket: edge ``e`` belongs to variable
``e // l``.  The check side of each socket is a uniform random matching, so
repeated (variable, check) pairs can occur; they are kept as distinct edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import brentq

from .errors import BudgetExceeded, DomainError, NumericError, ParameterError

DEFAULT_BUDGET = 2**24


@dataclass(frozen=True, eq=False)
class TannerGraph:
    n: int
    l: int
    r: int
    edge_chk: np.ndarray  # check of each edge, shape (n*l,)
    m: int = field(init=False)
    edge_var: np.ndarray = field(init=False)
    var_edges: np.ndarray = field(init=False)  # (n, l)
    chk_edges: np.ndarray = field(init=False)  # (m, r), ascending edge index

    def __post_init__(self):
        n, l, r = self.n, self.l, self.r
        if (n * l) % r:
            raise ParameterError(f"n*l={n * l} not divisible by r={r}")
        chk = np.asarray(self.edge_chk, dtype=np.int64)
        m = n * l // r
        if chk.shape != (n * l,):
            raise ParameterError("edge_chk must have one entry per edge")
        if np.any(np.bincount(chk, minlength=m) != r) or chk.min(initial=0) < 0:
            raise ParameterError("every check must have degree r")
        edges = np.arange(n * l, dtype=np.int64)
        order = np.argsort(chk, kind="stable")
        object.__setattr__(self, "edge_chk", chk)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "edge_var", edges // l)
        object.__setattr__(self, "var_edges", edges.reshape(n, l))
        object.__setattr__(self, "chk_edges", order.reshape(m, r))

    @property
    def n_edges(self) -> int:
        return self.n * self.l

    @property
    def rate(self) -> float:
        return 1.0 - self.l / self.r

    def multi_edge_count(self) -> int:
        """Number of edges that repeat an earlier (variable, check) pair."""
        pairs = self.edge_var * self.m + self.edge_chk
        return int(pairs.size - np.unique(pairs).size)

    def var_neighbors(self, v: int) -> np.ndarray:
        return self.edge_chk[self.var_edges[v]]

    def chk_neighbors(self, c: int) -> np.ndarray:
        return self.edge_var[self.chk_edges[c]]

    def to_text(self) -> str:
        lines = [f"{self.n} {self.m} {self.l} {self.r}"]
        lines += [f"{e} {v} {c}" for e, (v, c) in enumerate(zip(self.edge_var, self.edge_chk))]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TannerGraph":
        rows = [ln.split() for ln in text.strip().splitlines()]
        n, m, l, r = (int(x) for x in rows[0])
        body = np.array(rows[1:], dtype=np.int64).reshape(-1, 3)
        if body.shape[0] != n * l or m != n * l // r:
            raise ParameterError("edge list does not match header")
        if np.any(body[:, 0] != np.arange(n * l)) or np.any(body[:, 1] != body[:, 0] // l):
            raise ParameterError("edges must be listed in socket order")
        return cls(n, l, r, body[:, 2])

    def __eq__(self, other):
        if not isinstance(other, TannerGraph):
            return NotImplemented
        return (self.n, self.l, self.r) == (other.n, other.l, other.r) and bool(
            np.array_equal(self.edge_chk, other.edge_chk)
        )

    __hash__ = None


def sample_graph(n: int, l: int, r: int, seed: int) -> TannerGraph:
    """Draw a graph from the (l, r) configuration-model ensemble with n variables."""
    if l < 2 or r < 2:
        raise ParameterError("degrees must be at least 2")
    if n < r:
        raise ParameterError(f"need n >= r, got n={n}, r={r}")
    if (n * l) % r:
        raise ParameterError(f"n*l={n * l} not divisible by r={r}")
    rng = np.random.default_rng(seed)
    sockets = rng.permutation(n * l)
    return TannerGraph(n, l, r, sockets // r)


# ---------------------------------------------------------------------------
# expansion


@dataclass(frozen=True)
class ExpansionSpec:
    alpha: float
    gamma: float
    side: str = "left"

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError("alpha must lie in (0, 1]")
        if not 0.0 < self.gamma < 1.0:
            raise ParameterError("gamma must lie in (0, 1)")
        if self.side not in ("left", "right"):
            raise ParameterError("side must be 'left' or 'right'")


def _subset_count(size: int, kmax: int) -> int:
    return sum(math.comb(size, s) for s in range(1, kmax + 1))


def check_expander(g: TannerGraph, spec: ExpansionSpec, budget: int = DEFAULT_BUDGET) -> bool:
    """Exhaustively test (alpha, gamma) expansion on the chosen side.

    Every node subset S with |S| <= alpha * size must have at least
    gamma * deg * |S| distinct neighbors.  Raises ``BudgetExceeded`` when the
    number of subsets is above ``budget``.
    """
    if spec.side == "left":
        size, deg, nbrs = g.n, g.l, [g.var_neighbors(v) for v in range(g.n)]
    else:
        size, deg, nbrs = g.m, g.r, [g.chk_neighbors(c) for c in range(g.m)]
    kmax = int(math.floor(spec.alpha * size + 1e-12))
    work = _subset_count(size, kmax)
    if work > budget:
        raise BudgetExceeded(f"{work} subsets exceed budget {budget}")
    masks = [sum(1 << int(u) for u in set(nb.tolist())) for nb in nbrs]
    for s in range(1, kmax + 1):
        need = spec.gamma * deg * s - 1e-9
        for combo in combinations(masks, s):
            acc = 0
            for mk in combo:
                acc |= mk
            if acc.bit_count() < need:
                return False
    return True


def binary_entropy(x):
    """Binary entropy in bits; accepts scalars or arrays, h(0) = h(1) = 0."""
    x = np.asarray(x, dtype=float)
    if np.any((x < 0.0) | (x > 1.0)) or np.any(np.isnan(x)):
        raise ParameterError("entropy argument must lie in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -x * np.log2(x) - (1.0 - x) * np.log1p(-x) / np.log(2.0)
    h = np.where((x <= 0.0) | (x >= 1.0), 0.0, h)
    return float(h) if h.ndim == 0 else h


def shannon_threshold(rate: float, tol: float = 1e-12) -> float:
    """Crossover probability eps in [0, 1/2] with 1 - h(eps) = rate."""
    if not 0.0 <= rate <= 1.0:
        raise ParameterError("rate must lie in [0, 1]")
    if rate == 1.0:
        return 0.0
    if rate == 0.0:
        return 0.5
    return float(brentq(lambda e: 1.0 - binary_entropy(e) - rate, 0.0, 0.5, xtol=tol))


def _expansion_exponent(a, l, r, gamma):
    # First-moment exponent (bits per variable) of the expected number of
    # variable sets of size a*n whose neighborhood has size a*gamma*l*n.
    # Positive near 0 exactly when gamma < 1 - 1/l.
    t = a * gamma * r
    return (l - 1) / l * binary_entropy(a) - binary_entropy(t) / r - t * binary_entropy(1.0 / (gamma * r))


def alpha_max(l: int, r: int, gamma: float, side: str = "left", grid: int = 1024) -> float:
    """Largest alpha for which random (l, r) graphs are (alpha, gamma) expanders.

    Returns the smallest positive root of the first-moment exponent.  The
    root sits extremely close to 0 as gamma approaches 1 - 1/l, so brackets
    are searched on a log-spaced grid down to 1e-300.
    """
    if side == "right":
        l, r = r, l
    elif side != "left":
        raise ParameterError("side must be 'left' or 'right'")
    if not 0.0 < gamma < 1.0 - 1.0 / l - 1e-12:
        raise DomainError(f"gamma must lie in (0, 1 - 1/l) = (0, {1 - 1 / l:.6g})")
    if gamma * r <= 1.0:
        raise DomainError("gamma * r must exceed 1 for the neighborhood-count term")
    hi = min(1.0, 1.0 / (gamma * r))
    xs = np.geomspace(1e-300, hi, grid + 1)
    fs = np.array([_expansion_exponent(x, l, r, gamma) for x in xs])
    if fs[0] <= 0.0:
        raise NumericError("exponent not positive at the smallest grid point")
    idx = np.flatnonzero(fs <= 0.0)
    if idx.size == 0:
        raise NumericError(f"no sign change on (0, {hi:.6g}); exponent at hi = {fs[-1]:.3g}")
    # bisect in log(alpha) so roots near 1e-100 keep full relative precision
    u = brentq(
        lambda v: _expansion_exponent(math.exp(v), l, r, gamma),
        math.log(xs[idx[0] - 1]),
        math.log(xs[idx[0]]),
        xtol=1e-13,
    )
    return math.exp(u)
