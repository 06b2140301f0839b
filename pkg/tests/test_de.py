from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldpc_limits.de import (
    DiscreteDensity,
    QuantizedDE,
    find_threshold,
    galb,
    galb_de_step,
    lgalb,
    lgalb_de_step,
    lgalb_map,
    lgalb_threshold_fixed_point,
    ms2_witness_de_init,
    ms2_witness_de_step,
    ms_de_step,
    ms_initial,
    witness_de_bound,
    witness_de_init,
    witness_de_step,
)
from ldpc_limits.errors import NonMonotoneError, NumericError, ParameterError

probs = st.floats(0.0, 1.0)
small_probs = st.floats(0.0, 0.3)


# ---------------------------------------------------------------------------
# oracles


def lgalb_tree_level_mc(x, eps, l, r, samples, seed, chunk=500_000):
    """One level of the linearized decoder on a tree, by direct sampling."""
    rng = np.random.default_rng(seed)
    bad_total = 0
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        inputs = rng.random((k, l - 1, r - 1)) < x
        check_bad = inputs.any(axis=2)
        flipped = rng.random(k) < eps
        votes_bad = check_bad.sum(axis=1) + flipped
        votes_good = l - votes_bad
        coin = rng.random(k) < 0.5
        out = (votes_bad > votes_good) | ((votes_bad == votes_good) & coin)
        bad_total += int(out.sum())
        done += k
    return bad_total / samples


def galb_exhaustive(x, eps, l, r):
    """Gallager B one level, summing over every input pattern of the tree."""
    total = 0.0
    n_in = (l - 1) * (r - 1)
    for pattern in itertools.product((0, 1), repeat=n_in):
        k = sum(pattern)
        p = x**k * (1 - x) ** (n_in - k)
        rows = [pattern[i * (r - 1) : (i + 1) * (r - 1)] for i in range(l - 1)]
        bad_checks = sum(sum(row) % 2 for row in rows)
        for flipped, pc in ((1, eps), (0, 1 - eps)):
            b = bad_checks + flipped
            g = l - b
            out = 1.0 if b > g else 0.5 if b == g else 0.0
            total += p * pc * out
    return total


def check_output_enumeration(c, M, r, variant):
    """Exact check-output pmf on -M..M by enumerating all (r-1)-tuples."""
    vals = range(-M, M + 1)
    out = np.zeros(2 * M + 1)
    for combo in itertools.product(vals, repeat=r - 1):
        p = math.prod(c[v + M] for v in combo)
        if variant == "lms":
            o = min(combo)
        else:
            mag = min(abs(v) for v in combo)
            sign = -1 if sum(v < 0 for v in combo) % 2 else 1
            o = 0 if mag == 0 else sign * mag
        out[o + M] += p
    return out


def witness_tree_mc(eps, r, depth, samples, seed):
    """E[|witness| * 1{bad}] and P(bad) for a depth-`depth` message on a tree."""
    rng = np.random.default_rng(seed)

    def message(d, k):
        flipped = rng.random(k) < eps
        if d == 1:
            return flipped, flipped.astype(float)
        sub_bad, sub_size = message(d - 1, k * 2 * (r - 1))
        sub_bad = sub_bad.reshape(k, 2, r - 1)
        sub_size = sub_size.reshape(k, 2, r - 1)
        chk_bad = sub_bad.any(axis=2)
        first = sub_bad.argmax(axis=2)
        chk_size = np.take_along_axis(sub_size, first[..., None], axis=2)[..., 0] * chk_bad
        nb = chk_bad.sum(axis=1)
        bad = np.where(flipped, nb >= 1, nb == 2)
        first_chk = chk_bad.argmax(axis=1)
        one = np.take_along_axis(chk_size, first_chk[:, None], axis=1)[:, 0]
        size = 1.0 + np.where(flipped, one, chk_size.sum(axis=1))
        return bad, np.where(bad, size, 0.0)

    bad, size = message(depth, samples)
    return float(size.mean()), float(size.std() / math.sqrt(samples)), float(bad.mean())


# ---------------------------------------------------------------------------
# scalar maps


def test_lgalb_map_fixed_points():
    assert lgalb_map(0.0, 0.03, 3, 6) == 0.0
    assert lgalb_map(1.0, 0.03, 3, 6) == 1.0


def test_lgalb_map_matches_tree_monte_carlo():
    samples = 10**7
    est = lgalb_tree_level_mc(0.02, 0.03, 3, 6, samples, seed=11)
    exact = lgalb_map(0.02, 0.03, 3, 6)
    sigma = math.sqrt(exact * (1 - exact) / samples)
    assert abs(est - exact) < 3 * sigma


@pytest.mark.parametrize("l,r,x,eps", [(4, 6, 0.03, 0.05), (5, 8, 0.05, 0.1), (6, 9, 0.02, 0.2)])
def test_general_l_map_matches_tree_monte_carlo(l, r, x, eps):
    samples = 2 * 10**6
    est = lgalb_tree_level_mc(x, eps, l, r, samples, seed=l * 100 + r)
    exact = lgalb_map(x, eps, l, r)
    sigma = math.sqrt(exact * (1 - exact) / samples)
    assert abs(est - exact) < 3 * sigma


@pytest.mark.parametrize("l", range(3, 9))
def test_lgalb_display_equals_majority_form(l):
    for x in np.linspace(0, 1, 41):
        for eps in (0.0, 0.01, 0.1, 0.5, 1.0):
            assert lgalb_map(float(x), eps, l, 2 * l) == pytest.approx(lgalb_de_step(float(x), eps, l, 2 * l), abs=1e-14)


def test_galb_zero_is_fixed():
    for eps in (0.0, 0.03, 0.3):
        assert galb_de_step(0.0, eps, 3, 6) == 0.0


def test_galb_matches_exhaustive_enumeration():
    assert galb_de_step(0.01, 0.05, 4, 5) == pytest.approx(galb_exhaustive(0.01, 0.05, 4, 5), abs=1e-13)
    assert galb_de_step(0.2, 0.1, 3, 6) == pytest.approx(galb_exhaustive(0.2, 0.1, 3, 6), abs=1e-13)


def test_galb_fixed_point_scan_near_table_value():
    assert galb(3, 6).converges(0.039)
    assert not galb(3, 6).converges(0.040)
    traj = galb(3, 6).trajectory(0.040, 3000)
    assert traj[-1] > 1e-3


@given(st.sampled_from([3, 4, 5]), st.sampled_from([4, 6, 8]), probs, probs)
def test_maps_stay_in_unit_interval(l, r, x, eps):
    for step in (lgalb_map, galb_de_step):
        y = step(x, eps, l, r)
        assert 0.0 <= y <= 1.0 + 1e-15


@given(st.sampled_from([3, 4, 5]), st.sampled_from([4, 6, 8]), probs, small_probs, small_probs)
def test_maps_non_decreasing_in_eps(l, r, x, e1, e2):
    lo, hi = sorted((e1, e2))
    for step in (lgalb_map, galb_de_step):
        assert step(x, lo, l, r) <= step(x, hi, l, r) + 1e-15


@given(st.sampled_from([4, 5, 6, 8, 10]), st.floats(0.0, 0.5), small_probs)
def test_lgalb_dominates_galb(r, x, eps):
    assert lgalb_map(x, eps, 3, r) >= galb_de_step(x, eps, 3, r) - 1e-15


@pytest.mark.parametrize(
    "handle,expected",
    [(lgalb(3, 6), 0.0336), (lgalb(4, 6), 0.0258), (galb(3, 4), 0.1068)],
)
def test_threshold_examples(handle, expected):
    res = find_threshold(handle)
    assert res.lo <= res.value <= res.hi
    assert res.hi - res.lo <= 1e-6
    assert res.value == pytest.approx(expected, abs=5e-4)


@pytest.mark.parametrize("l,r", [(3, 6), (4, 6), (3, 4), (4, 8)])
def test_fixed_point_scan_agrees_with_iteration(l, r):
    it = find_threshold(lgalb(l, r), tol=1e-7).value
    fp = lgalb_threshold_fixed_point(l, r)
    assert fp == pytest.approx(it, abs=2e-6)


class _Flaky:
    def converges(self, eps, l_max=0):
        return eps < 0.1 or 0.3 < eps < 0.35


def test_non_monotone_predicate_detected():
    with pytest.raises(NonMonotoneError):
        find_threshold(_Flaky())


class _Never:
    def converges(self, eps, l_max=0):
        return False


def test_threshold_requires_convergence_at_lower_end():
    with pytest.raises(NumericError):
        find_threshold(_Never())
    with pytest.raises(ParameterError):
        find_threshold(lgalb(3, 6), tol=0)


# ---------------------------------------------------------------------------
# quantized min-sum


def test_lms_point_mass_propagation():
    M, l, r, eps = 2, 3, 6, 0.07
    lo = -(l - 1) * M - 1
    pmf = np.zeros(2 * ((l - 1) * M + 1) + 1)
    pmf[M - lo] = 1.0
    out = ms_de_step(DiscreteDensity(lo, pmf), eps, M, l, r, "lms")
    top = (l - 1) * M
    assert out.mass(lambda v: v == top + 1) == pytest.approx(1 - eps, abs=1e-15)
    assert out.mass(lambda v: v == top - 1) == pytest.approx(eps, abs=1e-15)
    assert out.mass(lambda v: (v != top + 1) & (v != top - 1)) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("variant", ["ms", "lms"])
@pytest.mark.parametrize("M,r", [(1, 4), (2, 4), (3, 3), (2, 5)])
def test_check_step_matches_enumeration(variant, M, r):
    from ldpc_limits.de import _check_pmf

    rng = np.random.default_rng(M * 10 + r)
    c = rng.random(2 * M + 1)
    c /= c.sum()
    assert np.allclose(_check_pmf(c, M, r, variant), check_output_enumeration(c, M, r, variant), atol=1e-14)


@given(st.floats(0.0, 0.5), st.sampled_from([1, 2, 3]), st.sampled_from(["ms", "lms"]), st.integers(1, 30))
def test_discrete_density_stays_a_pmf(eps, M, variant, iters):
    d = ms_initial(eps, M, 3)
    for _ in range(iters):
        d = ms_de_step(d, eps, M, 3, 6, variant)
        assert np.all(d.pmf >= 0.0)
        assert abs(d.pmf.sum() - 1.0) < 1e-12


def test_lms2_all_plus_two_boundary():
    q = QuantizedDE(3, 6, 2, "lms")
    assert q.converges(0.030)
    assert not q.converges(0.032)


def test_ms_step_rejects_wrong_alphabet():
    with pytest.raises(ParameterError):
        ms_de_step(DiscreteDensity(0, np.ones(3) / 3), 0.1, 2, 3, 6)


# ---------------------------------------------------------------------------
# witness-size DE


def test_witness_init():
    s = witness_de_init(0.03)
    assert (s.p_val, s.p_der) == (0.03, 0.03)


@pytest.mark.parametrize("eps", [0.01, 0.03, 0.0336, 0.04, 0.08])
def test_witness_value_track_is_scalar_de(eps):
    s = witness_de_init(eps)
    x = eps
    for ell in range(1, 201):
        assert abs(s.p_val - x) <= 1e-12
        assert s.p_der >= ell * s.p_val * (1 - 1e-12)
        x = lgalb_map(x, eps, 3, 6)
        s = witness_de_step(s, eps, 6)


def test_witness_size_decays_below_threshold():
    s = witness_de_init(0.03)
    ders = [s.p_der]
    for _ in range(199):
        s = witness_de_step(s, 0.03, 6)
        ders.append(s.p_der)
    d = np.array(ders)
    peak = int(np.argmax(d))
    assert peak < 20
    pos = d[peak:][d[peak:] > 0]
    assert np.all(np.diff(pos) < 0)
    assert d[199] < 1e-6


@pytest.mark.parametrize("depth,eps", [(2, 0.1), (3, 0.05), (3, 0.1), (4, 0.03)])
def test_witness_size_matches_tree_monte_carlo(depth, eps):
    s = witness_de_init(eps)
    for _ in range(depth - 1):
        s = witness_de_step(s, eps, 6)
    samples = 40_000 if depth < 4 else 4_000
    mean, se, pbad = witness_tree_mc(eps, 6, depth, samples, seed=depth)
    assert abs(mean - s.p_der) < 4 * se + 1e-12
    assert abs(pbad - s.p_val) < 4 * math.sqrt(s.p_val * (1 - s.p_val) / samples) + 1e-12


@given(st.floats(0.001, 0.09), st.integers(1, 60))
def test_witness_linear_bound_dominates(eps, iters):
    s = witness_de_init(eps)
    for _ in range(iters):
        nxt = witness_de_step(s, eps, 6)
        assert nxt.p_der <= witness_de_bound(s.p_der, s.p_val, eps, 6) * (1 + 1e-12)
        s = nxt


def test_witness_zero_is_absorbing():
    s = witness_de_step(witness_de_init(0.0), 0.0, 6)
    assert s.p_val == 0.0 and s.p_der == 0.0


def test_ms2_witness_init():
    s = ms2_witness_de_init(0.03)
    assert s.p_val[1] == 0.03 and s.p_der[1] == 0.03
    assert s.p_val[3] == 0.97 and s.p_der[3] == 0.97
    assert s.p_val[[0, 2, 4]].sum() == 0.0


@pytest.mark.parametrize("eps", [0.01, 0.025, 0.031, 0.05])
def test_ms2_witness_values_follow_lms_de(eps):
    s = ms2_witness_de_init(eps)
    d = ms_initial(eps, 2, 3)
    for _ in range(60):
        assert abs(s.p_val.sum() - 1.0) < 1e-12
        assert np.allclose(s.p_val, d.clipped(2), atol=1e-12)
        assert np.all(s.p_der >= -1e-15)
        s = ms2_witness_de_step(s, eps, 6)
        d = ms_de_step(d, eps, 2, 3, 6, "lms")


def test_ms2_witness_vanishes_below_threshold():
    s = ms2_witness_de_init(0.025)
    for _ in range(400):
        s = ms2_witness_de_step(s, 0.025, 6)
    assert s.bad_witness_size() < 1e-9
