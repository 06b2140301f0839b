"""Marking process and witnesses for the linearized Gallager B decoder.

Marking grows a set of directed edges from an initial set of bad
variable-to-check edges until it contains every message that could still
turn bad.  It is computed as a least fixpoint, so the result does not depend
on the order in which pending edges are processed:

* a marked variable-to-check edge (v, c) marks every other edge of c in the
  direction c -> v';
* a variable v emits a marked edge (v, c) once it has received marks on at
  least k other edges, where k is the smallest number of bad extrinsic
  inputs that can make the outgoing message bad (1 for a flipped bit and
  2 for a correct bit when l = 3).  A variable touched by the initial set
  with a correct bit starts with one mark of credit.

The marked variables bound the bit errors of every later round.

A witness (l = 3 only) is the part of the computation tree that explains a
bad variable-to-check message: a flipped variable needs one bad incoming
check message, a correct one both, and a bad check message needs one bad
input.  Among several candidates the edge with the smallest index is kept.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .decoders import DecoderSpec, NoiseRealization, lgalb_history_batch, run_decoder
from .errors import BudgetExceeded, ParameterError
from .graph import TannerGraph

ORDERS = ("fifo", "lifo", "random")


def fire_counts(l: int) -> tuple[int, int]:
    """Bad extrinsic inputs needed for a bad output: (flipped bit, correct bit).

    Ties count as bad because the tie coin may go either way.
    """
    k_flip = next(k for k in range(l) if k + 1 >= l - 1 - k)
    k_ok = next(k for k in range(l) if k >= l - k)
    return k_flip, k_ok


@dataclass(frozen=True, eq=False)
class MarkingResult:
    marked_vars: np.ndarray  # bool (n,)
    marked_vc: np.ndarray  # bool (E,)
    marked_cv: np.ndarray  # bool (E,)

    @property
    def size(self) -> int:
        return int(self.marked_vars.sum())


def run_marking(
    g: TannerGraph,
    flipped: np.ndarray,
    initial_edges,
    order: str = "fifo",
    seed: int = 0,
) -> MarkingResult:
    """Close ``initial_edges`` (variable-to-check edge indices) under marking."""
    if order not in ORDERS:
        raise ParameterError(f"order must be one of {ORDERS}")
    flipped = np.asarray(flipped, dtype=bool)
    k_flip, k_ok = fire_counts(g.l)
    E = g.n_edges
    vc = np.zeros(E, dtype=bool)
    cv = np.zeros(E, dtype=bool)
    credit = np.zeros(g.n, dtype=np.int64)
    marked = np.zeros(g.n, dtype=bool)
    pending: list = []
    rng = np.random.default_rng(seed)

    def push(e: int, is_vc: bool):
        arr = vc if is_vc else cv
        if not arr[e]:
            arr[e] = True
            pending.append((e, is_vc))

    initial = np.unique(np.asarray(list(initial_edges), dtype=np.int64))
    for e in initial:
        v = int(g.edge_var[e])
        if not marked[v]:
            marked[v] = True
            credit[v] = 0 if flipped[v] else 1
        push(int(e), True)

    queue = deque(pending)
    pending = []

    def take():
        if order == "fifo":
            return queue.popleft()
        if order == "lifo":
            return queue.pop()
        i = int(rng.integers(len(queue)))
        queue[i], queue[-1] = queue[-1], queue[i]
        return queue.pop()

    while queue:
        e, is_vc = take()
        if is_vc:
            c = g.edge_chk[e]
            for e2 in g.chk_edges[c]:
                if e2 != e:
                    push(int(e2), False)
        else:
            v = int(g.edge_var[e])
            marked[v] = True
            need = k_flip if flipped[v] else k_ok
            edges = g.var_edges[v]
            hits = cv[edges]
            total = int(hits.sum()) + int(credit[v])
            for e3, h in zip(edges, hits):
                if total - int(h) >= need:
                    push(int(e3), True)
        queue.extend(pending)
        pending = []
    return MarkingResult(marked, vc, cv)


def marking_fixpoint_batch(g: TannerGraph, flipped: np.ndarray, initial_vc: np.ndarray) -> np.ndarray:
    """Marked-variable sets for a batch by synchronous fixpoint iteration.

    ``flipped`` (B, n), ``initial_vc`` (B, E) or (E,).  Returns bool (B, n).
    Computes the same closure as ``run_marking``.
    """
    flipped = np.atleast_2d(np.asarray(flipped, dtype=bool))
    B = flipped.shape[0]
    init = np.broadcast_to(np.asarray(initial_vc, dtype=bool), (B, g.n_edges))
    k_flip, k_ok = fire_counts(g.l)
    touched = init.reshape(B, g.n, g.l).any(axis=-1)
    credit = (touched & ~flipped).astype(np.int64)
    need = np.where(flipped, k_flip, k_ok)[..., None]
    vc = init.copy()
    while True:
        rows = vc[:, g.chk_edges]
        cv = np.empty_like(vc)
        cv[:, g.chk_edges] = (rows.sum(axis=-1, keepdims=True) - rows) > 0
        hits = cv.reshape(B, g.n, g.l)
        total = hits.sum(axis=-1, keepdims=True) + credit[..., None]
        new_vc = vc | ((total - hits) >= need).reshape(B, -1)
        if np.array_equal(new_vc, vc):
            break
        vc = new_vc
    hits = cv.reshape(B, g.n, g.l).any(axis=-1)
    return touched | hits


def marking_from_round(g: TannerGraph, noise: NoiseRealization, vc_bad: np.ndarray, order: str = "fifo") -> MarkingResult:
    """Marking started from the bad variable-to-check edges of one round."""
    return run_marking(g, noise.bad, np.flatnonzero(vc_bad), order=order)


# ---------------------------------------------------------------------------
# witnesses


@dataclass(frozen=True)
class Witness:
    """Union of the witnesses of all bad edges at one depth.

    ``edges`` holds (edge, variable, check, direction) with direction "cv"
    for edges grown from a check toward a variable and "vc" otherwise.
    ``values`` maps each witness variable to its channel value (True =
    flipped).  Depth 1 explains the channel messages themselves.
    """

    depth: int
    roots: tuple
    edges: frozenset
    values: tuple  # sorted (variable, flipped) pairs

    @property
    def variables(self) -> tuple:
        return tuple(v for v, _ in self.values)

    @property
    def size(self) -> int:
        return len(self.values)

    def to_json(self) -> str:
        return json.dumps(
            {
                "depth": self.depth,
                "roots": list(self.roots),
                "edges": sorted([list(e) for e in self.edges]),
                "values": [[v, bool(f)] for v, f in self.values],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Witness":
        d = json.loads(text)
        return cls(
            d["depth"],
            tuple(d["roots"]),
            frozenset(tuple(e) for e in d["edges"]),
            tuple((int(v), bool(f)) for v, f in d["values"]),
        )


def _build(g: TannerGraph, flipped, vc_hist, cv_hist, depth: int) -> Witness:
    if g.l != 3:
        raise ParameterError("witness construction is defined for l = 3")
    t_root = depth - 1
    roots = tuple(int(e) for e in np.flatnonzero(vc_hist[t_root]))
    edges: set = set()
    values: dict = {}
    seen: set = set()
    stack = [(e, t_root) for e in roots]
    while stack:
        e, t = stack.pop()
        if (e, t) in seen:
            continue
        seen.add((e, t))
        v = int(g.edge_var[e])
        edges.add((e, v, int(g.edge_chk[e]), "cv"))
        values[v] = bool(flipped[v])
        if t == 0:
            continue
        others = [int(x) for x in g.var_edges[v] if x != e and cv_hist[t][x]]
        chosen = others[:1] if flipped[v] else others
        for e1 in chosen:
            c = int(g.edge_chk[e1])
            edges.add((e1, v, c, "vc"))
            e2 = next(int(x) for x in g.chk_edges[c] if x != e1 and vc_hist[t - 1][x])
            stack.append((e2, t - 1))
    return Witness(depth, roots, frozenset(edges), tuple(sorted(values.items())))


def build_witness(g: TannerGraph, noise: NoiseRealization, depth: int, trace=None) -> Witness:
    """Witness of all bad variable-to-check edges after ``depth - 1`` rounds.

    ``trace`` may be a recorded LGalB ``DecodeTrace``; otherwise LGalB is run
    for the required number of rounds.
    """
    if depth < 1:
        raise ParameterError("depth must be at least 1")
    if trace is None:
        if depth == 1:
            vc_hist = [noise.bad[g.edge_var]]
            cv_hist = [None]
        else:
            trace = run_decoder(g, noise, DecoderSpec("lgalb"), depth - 1, record=True)
    if trace is not None:
        if trace.vc_bad is None:
            raise ParameterError("trace was not recorded")
        if len(trace.vc_bad) < depth:
            raise ParameterError(f"depth {depth} exceeds the {trace.iters} recorded rounds")
        vc_hist, cv_hist = trace.vc_bad, trace.cv_bad
    return _build(g, noise.bad, vc_hist, cv_hist, depth)


def witness_seed_edges(g: TannerGraph, w: Witness) -> np.ndarray:
    """All variable-to-check edges of witness variables (start set for marking)."""
    if not w.values:
        return np.zeros(0, dtype=np.int64)
    return g.var_edges[np.array(w.variables)].ravel()


def witness_fits(g: TannerGraph, w: Witness) -> bool:
    """True when every witness edge exists in ``g`` with the recorded endpoints."""
    for e, v, c, _ in w.edges:
        if not (0 <= e < g.n_edges) or g.edge_var[e] != v or g.edge_chk[e] != c:
            return False
    return all(0 <= v < g.n for v in w.variables)


@dataclass(frozen=True, eq=False)
class ErrorSets:
    """Channel patterns outside a witness that reproduce it exactly.

    ``free`` lists the variables outside the witness; row i of ``patterns``
    gives their flips (True = flipped) for the i-th reproducing pattern.
    """

    free: np.ndarray
    patterns: np.ndarray

    def as_masks(self) -> set:
        weights = 1 << np.arange(self.free.size, dtype=np.int64)
        return set(int(x) for x in (self.patterns.astype(np.int64) @ weights))


def _all_patterns(k: int) -> np.ndarray:
    idx = np.arange(2**k, dtype=np.int64)[:, None]
    return ((idx >> np.arange(k)) & 1).astype(bool)


def error_sets_for_witness(g: TannerGraph, w: Witness, max_free: int = 20) -> ErrorSets:
    """Enumerate every completion E' of the witness values with W(G,(W,E')) = W."""
    free = np.setdiff1d(np.arange(g.n), np.array(w.variables, dtype=np.int64))
    if free.size > max_free:
        raise BudgetExceeded(f"{free.size} free variables exceed the limit {max_free}")
    if not witness_fits(g, w):
        return ErrorSets(free, np.zeros((0, free.size), dtype=bool))
    pats = _all_patterns(free.size)
    flips = np.zeros((pats.shape[0], g.n), dtype=bool)
    for v, f in w.values:
        flips[:, v] = f
    flips[:, free] = pats
    rounds = w.depth - 1
    vc, cv = lgalb_history_batch(g, flips, rounds)
    root_mask = np.zeros(g.n_edges, dtype=bool)
    root_mask[list(w.roots)] = True
    candidates = np.flatnonzero(np.all(vc[rounds] == root_mask, axis=1))
    keep = [
        i
        for i in candidates
        if _build(g, flips[i], vc[:, i], cv[:, i], w.depth) == w
    ]
    return ErrorSets(free, pats[keep])


# ---------------------------------------------------------------------------
# exhaustive checks on tiny graphs


def _prob(flips: np.ndarray, eps: float) -> np.ndarray:
    k = flips.sum(axis=-1)
    return eps**k * (1.0 - eps) ** (flips.shape[-1] - k)


def witness_correlation(g: TannerGraph, w: Witness, eps: float, max_free: int = 20) -> tuple[float, float, float]:
    """(E[f g], E[f], E[g]) over the free variables.

    f indicates that the completion reproduces the witness and g is the
    number of variables marked from the witness.  f is decreasing and g
    increasing in the flips, so E[f g] <= E[f] E[g] is expected.
    """
    sets = error_sets_for_witness(g, w, max_free)
    free = sets.free
    pats = _all_patterns(free.size)
    flips = np.zeros((pats.shape[0], g.n), dtype=bool)
    for v, f in w.values:
        flips[:, v] = f
    flips[:, free] = pats
    seeds = np.zeros(g.n_edges, dtype=bool)
    seeds[witness_seed_edges(g, w)] = True
    gvals = marking_fixpoint_batch(g, flips, seeds).sum(axis=1).astype(float)
    weights = 1 << np.arange(free.size, dtype=np.int64)
    fvals = np.zeros(pats.shape[0])
    fvals[(sets.patterns.astype(np.int64) @ weights)] = 1.0
    p = _prob(pats, eps)
    return float(p @ (fvals * gvals)), float(p @ fvals), float(p @ gvals)


@dataclass(frozen=True)
class MarkingBoundCheck:
    lhs: float  # E[M(G, E, depth)]
    witness_bound: float  # sum over witnesses of P(values) P(E') E[M from W]
    theta: float
    markov_bound: float  # small-witness part plus theta * n
    mean_witness: float


def marking_bound_check(g: TannerGraph, eps: float, depth: int) -> MarkingBoundCheck:
    """Exhaustive version of the chain E[M] <= sum_W ... <= ... + theta n.

    Enumerates all 2^n channel patterns, so n must be small (<= 14).
    theta is chosen as sqrt(E|W| / n), the smallest value the Markov step
    allows.
    """
    if g.n > 14:
        raise BudgetExceeded("exhaustive check limited to n <= 14")
    pats = _all_patterns(g.n)
    probs = _prob(pats, eps)
    vc, cv = lgalb_history_batch(g, pats, depth - 1)
    root_sets = vc[depth - 1]
    marks = marking_fixpoint_batch(g, pats, root_sets).sum(axis=1)
    lhs = float(probs @ marks)
    groups: dict = {}
    sizes = np.zeros(pats.shape[0])
    for i in range(pats.shape[0]):
        w = _build(g, pats[i], vc[:, i], cv[:, i], depth)
        sizes[i] = w.size
        groups.setdefault(w, []).append(i)
    mean_w = float(probs @ sizes)
    theta = math.sqrt(mean_w / g.n) if mean_w > 0 else 0.0
    total = small = 0.0
    for w, members in groups.items():
        idx = np.array(members)
        pw = float(probs[idx].sum())
        seeds = np.zeros(g.n_edges, dtype=bool)
        seeds[witness_seed_edges(g, w)] = True
        # every pattern agreeing with W's values, reproducing W or not
        free = np.setdiff1d(np.arange(g.n), np.array(w.variables, dtype=np.int64))
        fp = _all_patterns(free.size)
        flips = np.zeros((fp.shape[0], g.n), dtype=bool)
        for v, f in w.values:
            flips[:, v] = f
        flips[:, free] = fp
        p_free = _prob(fp, eps)
        mean_m = float(p_free @ marking_fixpoint_batch(g, flips, seeds).sum(axis=1))
        total += pw * mean_m
        if w.size <= theta * g.n:
            pv = math.prod(eps if f else 1.0 - eps for _, f in w.values)
            small += pv * mean_m
    markov = small + theta * g.n
    return MarkingBoundCheck(lhs, total, theta, markov, mean_w)
