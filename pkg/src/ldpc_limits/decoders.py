"""Message-passing decoders on Tanner graphs, vectorized over edges.

All decoders assume the all-one codeword, so a message is "bad" when it
points to the wrong bit.  One round is a check step followed by a variable
step; round 0 holds the channel messages.  Bit decisions at round t use the
channel value and all l check messages of round t.

Random tie breaking uses one coin per (edge, round) and one per
(variable, round), derived from the decoding seed; GalB and LGalB runs with
the same seed therefore see identical coins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _seeding
from .errors import DomainError, ParameterError
from .graph import TannerGraph

KINDS = ("galb", "lgalb", "ms", "lms", "bp", "bec")
MS_SATURATION = 2**40
DEFAULT_LLR_CAP = 30.0
_BP_CHECK_CAP = 60.0


@dataclass(frozen=True, eq=False)
class NoiseRealization:
    """Which bits the channel corrupted: flipped (BSC) or erased (BEC)."""

    channel: str
    eps: float
    bad: np.ndarray

    @property
    def n(self) -> int:
        return int(self.bad.size)


def sample_noise(n: int, channel: str, eps: float, seed: int) -> NoiseRealization:
    if channel not in ("bsc", "bec"):
        raise ParameterError("channel must be 'bsc' or 'bec'")
    if not 0.0 <= eps <= 1.0:
        raise ParameterError("eps must lie in [0, 1]")
    bad = np.random.default_rng(seed).random(n) < eps
    return NoiseRealization(channel, float(eps), bad)


@dataclass(frozen=True)
class DecoderSpec:
    """Decoder selection.

    kind: one of galb, lgalb, ms, lms, bp, bec.  ``M`` bounds check-output
    reliabilities (MS(M), BP(M), LMS(M)); ``llr_bound`` saturates channel LLRs
    for bp.
    """

    kind: str
    M: float | None = None
    llr_bound: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown decoder {self.kind!r}; expected one of {KINDS}")
        if self.kind == "lms" and self.M is None:
            raise ParameterError("lms requires a bound M")
        if self.M is not None and self.M <= 0:
            raise ParameterError("M must be positive")
        if self.kind in ("ms", "lms") and self.M is not None and int(self.M) != self.M:
            raise ParameterError("integer decoders need an integer M")

    @property
    def channel(self) -> str:
        return "bec" if self.kind == "bec" else "bsc"

    @property
    def label(self) -> str:
        return self.kind if self.M is None else f"{self.kind}({self.M:g})"

    @classmethod
    def parse(cls, text: str, llr_bound: float | None = None) -> "DecoderSpec":
        """Parse labels such as ``galb``, ``ms(2)``, ``bp(10)``."""
        text = text.strip().lower()
        if "(" in text:
            kind, arg = text.rstrip(")").split("(", 1)
            return cls(kind, float(arg), llr_bound)
        return cls(text, None, llr_bound)


@dataclass(eq=False)
class DecodeTrace:
    """Per-round metrics for rounds 1..iters, optionally with bad-edge history.

    ``vc_bad[t]`` marks bad variable-to-check messages after round t
    (t = 0 is the channel); ``cv_bad[t]`` marks bad check-to-variable
    messages of round t (``cv_bad[0]`` is None).
    """

    bit_errors: np.ndarray
    bad_edge_fraction: np.ndarray
    n: int
    vc_bad: list | None = None
    cv_bad: list | None = None
    decision_bad: list | None = None

    @property
    def iters(self) -> int:
        return int(self.bit_errors.size)

    @property
    def ber(self) -> np.ndarray:
        return self.bit_errors / self.n

    @property
    def bler(self) -> np.ndarray:
        return (self.bit_errors > 0).astype(float)


# ---------------------------------------------------------------------------
# node rules; arrays carry an optional leading batch axis


def _extrinsic_count(bad_rows: np.ndarray) -> np.ndarray:
    return bad_rows.sum(axis=-1, keepdims=True, dtype=np.int64) - bad_rows


def _binary_check(g: TannerGraph, vc_bad: np.ndarray, kind: str) -> np.ndarray:
    rows = vc_bad[..., g.chk_edges]
    others = _extrinsic_count(rows)
    out_rows = (others % 2 == 1) if kind == "galb" else (others > 0)
    out = np.empty_like(vc_bad)
    out[..., g.chk_edges] = out_rows
    return out


def _majority(bad_votes, good_votes, coins):
    return (bad_votes > good_votes) | ((bad_votes == good_votes) & coins)


def _coins(seed: int, tag: int, rnd: int, size: int) -> np.ndarray:
    return _seeding.rng_for(seed, tag, rnd).random(size) < 0.5


def _binary_variable(g, cv_bad, ch_bad, kind, edge_coins, dec_coins):
    shape = cv_bad.shape[:-1] + (g.n, g.l)
    inc = cv_bad.reshape(shape)
    tot = inc.sum(axis=-1, keepdims=True, dtype=np.int64)
    others = tot - inc
    ch = ch_bad[..., None].astype(np.int64)
    if kind == "bec":
        out = (ch == 1) & (others == g.l - 1)
        dec = (ch[..., 0] == 1) & (tot[..., 0] == g.l)
    else:
        l = g.l
        ec = edge_coins.reshape(g.n, l) if edge_coins is not None else False
        out = _majority(others + ch, (l - 1 - others) + (1 - ch), ec)
        dec = _majority(tot[..., 0] + ch[..., 0], l - tot[..., 0] + 1 - ch[..., 0], dec_coins if dec_coins is not None else False)
    return out.reshape(cv_bad.shape), dec


def _ms_check(g, vc, M, kind):
    rows = vc[..., g.chk_edges]
    if kind == "lms":
        src = rows
    else:
        src = np.abs(rows)
    order = np.argsort(src, axis=-1, kind="stable")
    first = np.take_along_axis(src, order[..., :1], axis=-1)
    second = np.take_along_axis(src, order[..., 1:2], axis=-1)
    is_first = np.zeros(src.shape, dtype=bool)
    np.put_along_axis(is_first, order[..., :1], True, axis=-1)
    mins = np.where(is_first, second, first)
    if kind == "ms":
        neg = rows < 0
        zero = rows == 0
        neg_other = (_extrinsic_count(neg) % 2) == 1
        zero_other = _extrinsic_count(zero) > 0
        mins = np.where(zero_other, 0, np.where(neg_other, -mins, mins))
    if M is not None:
        mins = np.clip(mins, -M, M)
    out = np.empty_like(vc)
    out[..., g.chk_edges] = mins
    return out


def _bp_check(g, vc, M):
    t = np.tanh(vc[..., g.chk_edges] / 2.0)
    ones = np.ones(t.shape[:-1] + (1,))
    pre = np.cumprod(np.concatenate([ones, t[..., :-1]], axis=-1), axis=-1)
    suf = np.cumprod(np.concatenate([ones, t[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    prod = np.clip(pre * suf, -1.0 + 1e-16, 1.0 - 1e-16)
    msg = 2.0 * np.arctanh(prod)
    cap = _BP_CHECK_CAP if M is None else M
    out = np.empty_like(vc)
    out[..., g.chk_edges] = np.clip(msg, -cap, cap)
    return out


def _soft_variable(g, cv, ch, dec_coins, saturate=None):
    inc = cv.reshape(cv.shape[:-1] + (g.n, g.l))
    tot = inc.sum(axis=-1, keepdims=True) + ch[..., None]
    out = tot - inc
    if saturate is not None:
        out = np.clip(out, -saturate, saturate)
    total = tot[..., 0]
    dec = (total < 0) | ((total == 0) & dec_coins)
    return out.reshape(cv.shape), dec


def run_decoder(
    g: TannerGraph,
    noise: NoiseRealization,
    spec: DecoderSpec,
    iters: int,
    seed: int = 0,
    record: bool = False,
) -> DecodeTrace:
    """Run ``iters`` parallel rounds and collect per-round error metrics."""
    if noise.n != g.n:
        raise ParameterError("noise length does not match the graph")
    if noise.channel != spec.channel:
        raise ParameterError(f"{spec.kind} expects channel {spec.channel}, got {noise.channel}")
    if iters < 1:
        raise ParameterError("iters must be at least 1")
    kind = spec.kind
    ch_bad = noise.bad
    E = g.n_edges
    errs = np.zeros(iters, dtype=np.int64)
    frac = np.zeros(iters)
    hist_vc, hist_cv, hist_dec = ([], [None], [None]) if record else (None, None, None)

    if kind in ("galb", "lgalb", "bec"):
        vc_bad = ch_bad[g.edge_var].copy()
        if record:
            hist_vc.append(vc_bad.copy())
        for t in range(1, iters + 1):
            cv_bad = _binary_check(g, vc_bad, "galb" if kind == "galb" else "lgalb")
            edge_coins = _coins(seed, _seeding.TIES, t, E) if g.l % 2 == 0 else None
            dec_coins = _coins(seed, _seeding.DECISION_TIES, t, g.n) if g.l % 2 == 1 else None
            vc_bad, dec = _binary_variable(g, cv_bad, ch_bad, kind, edge_coins, dec_coins)
            errs[t - 1], frac[t - 1] = int(dec.sum()), float(vc_bad.mean())
            if record:
                hist_vc.append(vc_bad.copy())
                hist_cv.append(cv_bad.copy())
                hist_dec.append(dec.copy())
        return DecodeTrace(errs, frac, g.n, hist_vc, hist_cv, hist_dec)

    if kind in ("ms", "lms"):
        ch = np.where(ch_bad, -1, 1).astype(np.int64)
        M = None if spec.M is None else int(spec.M)
        # LMS(M) counts anything short of +M as bad; MS uses the sign
        bad_level = M if kind == "lms" else 1
        sat = MS_SATURATION
    else:
        cap = DEFAULT_LLR_CAP if spec.llr_bound is None else float(spec.llr_bound)
        with np.errstate(divide="ignore"):
            mag = min(cap, math.log((1.0 - noise.eps) / noise.eps)) if 0.0 < noise.eps < 1.0 else cap
        if noise.eps > 0.5:
            mag = -mag
        ch = np.where(ch_bad, -mag, mag)
        M = spec.M
        bad_level = None
        sat = None
    vc = ch[g.edge_var].copy()

    def bad_of(msgs):
        return msgs < bad_level if bad_level is not None else msgs <= 0

    if record:
        hist_vc.append(bad_of(vc))
    for t in range(1, iters + 1):
        cv = _bp_check(g, vc, M) if kind == "bp" else _ms_check(g, vc, M, kind)
        dec_coins = _coins(seed, _seeding.DECISION_TIES, t, g.n)
        vc, dec = _soft_variable(g, cv, ch, dec_coins, sat)
        vb = bad_of(vc)
        errs[t - 1], frac[t - 1] = int(dec.sum()), float(vb.mean())
        if record:
            hist_vc.append(vb)
            hist_cv.append(bad_of(cv) if bad_level is not None else cv <= 0)
            hist_dec.append(dec.copy())
    return DecodeTrace(errs, frac, g.n, hist_vc, hist_cv, hist_dec)


def lgalb_history_batch(g: TannerGraph, flips: np.ndarray, rounds: int):
    """LGalB bad-edge history for a batch of channel realizations.

    ``flips`` has shape (B, n).  Returns (vc, cv) of shapes
    (rounds+1, B, E) and (rounds+1, B, E); cv[0] is all False.  Only valid
    for odd l, where outgoing messages never tie.
    """
    if g.l % 2 == 0:
        raise ParameterError("batched history needs odd l (no outgoing ties)")
    flips = np.asarray(flips, dtype=bool)
    vc = np.zeros((rounds + 1, flips.shape[0], g.n_edges), dtype=bool)
    cv = np.zeros_like(vc)
    vc[0] = flips[:, g.edge_var]
    for t in range(1, rounds + 1):
        cv[t] = _binary_check(g, vc[t - 1], "lgalb")
        vc[t], _ = _binary_variable(g, cv[t], flips, "lgalb", None, None)
    return vc, cv


# ---------------------------------------------------------------------------
# good message sets and the conditions for exchanging limits


@dataclass(frozen=True)
class GoodSet:
    """Good check-output set G_v, good variable-output set G_c, and strength.

    A variable whose channel is arbitrary and whose incoming messages contain
    at least beta*(l-1) elements of G_v emits a message in G_c.
    """

    decoder: str
    l: int
    G_v: tuple
    G_c: tuple
    beta: Fraction


def _smallest_count(l: int, ok) -> int:
    for k in range(l):
        if ok(k):
            return k
    raise DomainError("no admissible count of good inputs; the decoder has no good set here")


def good_set_for(decoder: str, l: int, r: int | None = None, M: float | None = None, llr_bound: float = 1.0) -> GoodSet:
    """Good message subsets and their strength for the cataloged decoders.

    bec: the known value.  galb: the correct value; a flipped channel must be
    outvoted strictly.  ms(M), bp(M): G_v = [M-1, M] with the worst-case
    channel LLR ``llr_bound``; bp also needs the check degree r.
    """
    if l < 2:
        raise ParameterError("l must be at least 2")
    if decoder == "bec":
        return GoodSet("bec", l, ("known",), ("known",), Fraction(1, l - 1))
    if decoder == "galb":
        k = _smallest_count(l, lambda k: k > (l - 1 - k) + 1)
        return GoodSet("galb", l, ("correct",), ("correct",), Fraction(k, l - 1))
    if decoder in ("ms", "bp"):
        if M is None:
            raise ParameterError("bounded decoders need M")
        a = M - 1
        lower = lambda k: a * k - M * (l - 1 - k) - llr_bound  # noqa: E731
        if decoder == "ms":
            k = _smallest_count(l, lambda k: lower(k) >= a)
        else:
            if r is None:
                raise ParameterError("bp good set needs r")

            def check_ok(k):
                x = lower(k)
                if x <= 0:
                    return False
                return 2.0 * math.atanh(math.tanh(x / 2.0) ** (r - 1)) >= a

            k = _smallest_count(l, check_ok)
        if a * l - llr_bound <= 0:
            raise DomainError("all-good inputs do not force a correct decision")
        top = M * (l - 1) + llr_bound
        return GoodSet(f"{decoder}({M:g})", l, (a, M), (lower(k), top), Fraction(k, l - 1))
    raise ParameterError(f"no good-set entry for {decoder!r}")


@dataclass(frozen=True)
class ExchangeConditions:
    bit_ok: bool
    block_ok: bool
    gamma_bit: float
    gamma_block: float
    p_bit: float
    p_block: float


def exchange_conditions(beta: float, l: int, r: int, alpha: float = 1.0) -> ExchangeConditions:
    """Sufficient conditions for exchanging limits, given a good-set strength.

    Bit errors need beta < 1, block errors beta < (l-2)/(l-1).  The gamma
    values are the expansion factors used in the arguments and the p values
    the DE error levels to reach, as functions of the expansion size alpha.
    """
    if l < 3:
        raise ParameterError("need l >= 3")
    b = float(beta)
    return ExchangeConditions(
        bit_ok=Fraction(beta) < 1,
        block_ok=Fraction(beta) < Fraction(l - 2, l - 1),
        gamma_bit=(1.0 - 1.0 / l) * (1.0 + b) / 2.0,
        gamma_block=(1.0 - 1.0 / l) * (3.0 + b) / 4.0,
        p_bit=alpha * (1.0 - b) * (l - 1) / 4.0,
        p_block=alpha * (l - b * (l - 1)) / (2.0 * l * r),
    )
