import random
from fractions import Fraction as Q

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algdnc.curve import Curve, burst_delay, canonical, rate_latency, token_bucket, zero_curve
from algdnc.errors import UnboundedResult, UnsupportedShape
from algdnc.minplus import (
    OpCounter,
    aggregate,
    convolve,
    counting,
    deconvolve,
    horizontal_deviation,
    minimum,
    output_bound,
    pmoo_left_over,
    subtract_and_close,
    vertical_deviation,
)
from oracles import (
    DELTA,
    curve_fn,
    grid_convolve,
    grid_deconvolve,
    grid_hdev,
    grid_subtract_close,
    grid_vdev,
)
import minplus_suite


# --- documented examples ------------------------------------------------------


def test_aggregate_examples():
    assert aggregate(token_bucket(2.5, 5), token_bucket(2.5, 5)) == token_bucket(5, 10)
    f = token_bucket(3, 7)
    assert aggregate(f, zero_curve()) == f
    mixed = aggregate(token_bucket(5, 5), rate_latency(25, 5))
    assert mixed(10) == 180


def test_convolve_examples():
    assert convolve(rate_latency(10, 1), rate_latency(10, 1)) == rate_latency(10, 2)
    f = token_bucket(2, 4)
    assert convolve(f, burst_delay(0)) == f
    assert convolve(burst_delay(0), rate_latency(3, 2)) == rate_latency(3, 2)
    g = convolve(token_bucket(2, 4), token_bucket(3, 1))
    assert g == minimum(token_bucket(2, 4), token_bucket(3, 1))
    for t in [Q(1, 2), 1, 3, 10]:
        assert g(t) == min(4 + 2 * Q(t), 1 + 3 * Q(t))


def test_deconvolve_examples():
    assert deconvolve(token_bucket(2.5, 5), rate_latency(25, 5)) == token_bucket(2.5, 17.5)
    assert deconvolve(token_bucket(3, 2), rate_latency(5, 0)) == token_bucket(3, 2)
    assert deconvolve(token_bucket(2, 4), rate_latency(10, 2)) == token_bucket(2, 8)
    with pytest.raises(UnboundedResult):
        deconvolve(token_bucket(11, 1), rate_latency(10, 1))


def test_subtract_and_close_examples():
    assert subtract_and_close(rate_latency(25, 5), token_bucket(5, 10)) == rate_latency(20, Q(27, 4))
    assert subtract_and_close(rate_latency(7, 3), zero_curve()) == rate_latency(7, 3)
    assert subtract_and_close(rate_latency(10, 2), token_bucket(2, 4)) == rate_latency(8, 3)
    with pytest.raises(UnboundedResult):
        subtract_and_close(rate_latency(5, 1), token_bucket(5, 1))


def test_deviation_examples():
    assert horizontal_deviation(token_bucket(5, 5), rate_latency(25, 5)) == Q(26, 5)
    assert horizontal_deviation(zero_curve(), rate_latency(4, 3)) == 0
    assert horizontal_deviation(token_bucket(1, 2), rate_latency(8, Q(23, 6))) == Q(49, 12)
    assert vertical_deviation(token_bucket(5, 5), rate_latency(25, 5)) == 30
    assert vertical_deviation(zero_curve(), rate_latency(3, 1)) == 0
    assert vertical_deviation(token_bucket(2, 4), rate_latency(10, 2)) == 8
    with pytest.raises(UnboundedResult):
        horizontal_deviation(token_bucket(3, 1), rate_latency(2, 1))


def test_output_bound_examples():
    a, b = token_bucket(2, 4), rate_latency(8, 3)
    assert output_bound(a, b) == token_bucket(2, 10)
    assert output_bound(a, b, 10) == token_bucket(2, 10)
    capped = output_bound(a, b, 7)
    assert capped == token_bucket(2, 7)
    for t in [0, Q(1, 3), 2, 50]:
        assert capped(t) <= output_bound(a, b)(t)


def test_minimum_examples():
    m = minimum(token_bucket(2, 10), token_bucket(3, 4))
    assert m.segments == ((0, 0, 0), (0, 4, 3), (6, 22, 2))
    assert m.is_concave()
    f = token_bucket(2, 5)
    assert minimum(f, f) == f
    assert minimum(token_bucket(2, 10), token_bucket(2, 7)) == token_bucket(2, 7)


def test_pmoo_left_over_examples():
    two = [rate_latency(10, 1), rate_latency(10, 1)]
    assert pmoo_left_over(two, [(token_bucket(2, 4), (0, 1))]) == rate_latency(8, 3)
    # full-span aggregate equals (beta ⊗ beta) ⊖ alpha
    assert pmoo_left_over(two, [(token_bucket(2, 4), (0, 1))]) == subtract_and_close(
        convolve(*two), token_bucket(2, 4)
    )
    one = [rate_latency(25, 5)]
    aggs = [(token_bucket(2.5, 5), (0, 0)), (token_bucket(2.5, 5), (0, 0))]
    assert pmoo_left_over(one, aggs) == rate_latency(20, Q(27, 4))
    assert pmoo_left_over(two, []) == rate_latency(10, 2)


def test_counter_counts_public_calls():
    c = OpCounter()
    with counting(c):
        x = aggregate(token_bucket(1, 1), token_bucket(1, 1))
        y = subtract_and_close(rate_latency(10, 1), x)
        horizontal_deviation(token_bucket(1, 1), y)
    assert c.counts["aggregate"] == 1
    assert c.counts["subtractAndClose"] == 1
    assert c.counts["hdev"] == 1
    assert c.total == 3
    # outside the context nothing is recorded
    aggregate(token_bucket(1, 1), token_bucket(1, 1))
    assert c.total == 3


# --- generic piecewise-linear paths against the grid oracle -----------------------


def _random_concave(rng):
    parts = [token_bucket(Q(rng.randint(1, 40), 10), Q(rng.randint(0, 40), 10)) for _ in range(rng.randint(2, 3))]
    c = parts[0]
    for p in parts[1:]:
        c = minimum(c, p)
    return c


def _random_convex(rng):
    t = Q(rng.randint(0, 20), 10)
    segs = [(Q(0), Q(0), Q(0))] if t > 0 else []
    v = Q(0)
    slope = Q(0)
    for k in range(rng.randint(1, 3)):
        slope += Q(rng.randint(5, 30), 10)
        segs.append((t, v, slope))
        step = Q(rng.randint(5, 20), 10)
        v += slope * step
        t += step
    return canonical(segs)


GENERAL_CASES = 60


@pytest.mark.parametrize("seed", range(GENERAL_CASES))
def test_general_shapes_match_grid(seed):
    rng = random.Random(seed)
    alpha = _random_concave(rng)
    beta = _random_convex(rng)
    # keep the server stable
    if alpha.long_term_rate >= beta.long_term_rate:
        beta = canonical(list(beta.segments[:-1]) + [(beta.segments[-1][0], beta.segments[-1][1], alpha.long_term_rate + 1)])
    fa, fb = curve_fn(alpha), curve_fn(beta)
    slopes = [float(s) for _, _, s in alpha.segments + beta.segments]
    tol = 2 * DELTA * max(slopes + [1.0])
    horizon = 8.0
    pts = np.linspace(0.05, horizon, 9)

    conv = curve_fn(convolve(alpha, beta))
    for x in pts:
        assert abs(float(conv(x)) - grid_convolve(fa, fb, x)) <= tol

    dec = curve_fn(deconvolve(alpha, beta))
    for x in pts:
        assert abs(float(dec(x)) - grid_deconvolve(fa, fb, x, 3 * horizon)) <= tol

    lo = curve_fn(subtract_and_close(beta, alpha))
    for x in pts:
        assert abs(float(lo(x)) - grid_subtract_close(fb, fa, x)) <= tol

    h = float(horizontal_deviation(alpha, beta))
    assert abs(h - grid_hdev(fa, fb, 4 * horizon)) <= tol

    v = float(vertical_deviation(alpha, beta))
    assert abs(v - grid_vdev(fa, fb, 4 * horizon)) <= tol


def test_general_convolution_of_rate_latency_and_token_bucket():
    # gamma ⊗ beta = shifted min(lambda_R, gamma) : 0 up to T then min(R(d-T), b + r(d-T))
    c = convolve(token_bucket(1, 3), rate_latency(4, 2))
    for d in [Q(1), Q(2), Q(3), Q(5, 2), Q(10)]:
        x = max(Q(0), d - 2)
        expected = min(4 * x, 3 + x) if x > 0 else 0
        assert c(d) == expected


def test_deconvolution_rejects_jumps_in_the_service_curve():
    with pytest.raises(UnsupportedShape):
        deconvolve(minimum(token_bucket(1, 2), token_bucket(3, 0)), token_bucket(5, 1))


def test_burst_cap_on_concave_curve_keeps_long_term_rate():
    a = minimum(token_bucket(1, 10), token_bucket(4, 2))
    from algdnc.minplus import cap_burst

    capped = cap_burst(a, 1)
    assert capped.long_term_rate == 1
    assert capped.burst() == 1
    for d in [Q(1, 2), 1, 3, 8]:
        assert capped(d) <= a(d)


# --- invariants (randomised) --------------------------------------------------------

rates = st.integers(min_value=1, max_value=60).map(lambda n: Q(n, 10))
amounts = st.integers(min_value=0, max_value=60).map(lambda n: Q(n, 10))
tb_curves = st.builds(token_bucket, rates, amounts)
rl_curves = st.builds(rate_latency, rates, amounts)
curves = st.one_of(tb_curves, rl_curves)
points = [Q(k, 7) for k in range(0, 80)]


@settings(max_examples=150, deadline=None)
@given(curves, curves)
def test_convolution_is_commutative(f, g):
    assert convolve(f, g) == convolve(g, f)


@settings(max_examples=100, deadline=None)
@given(curves, curves, curves)
def test_convolution_is_associative(f, g, h):
    left = convolve(convolve(f, g), h)
    right = convolve(f, convolve(g, h))
    for x in points:
        assert left(x) == right(x)


@settings(max_examples=150, deadline=None)
@given(curves, curves)
def test_convolution_below_minimum(f, g):
    c = convolve(f, g)
    m = minimum(f, g)
    for x in points:
        assert c(x) <= m(x)
    if f.is_concave() and g.is_concave():
        assert c == m


@settings(max_examples=150, deadline=None)
@given(rl_curves, tb_curves)
def test_left_over_is_increasing_and_nonnegative(beta, alpha):
    if alpha.long_term_rate >= beta.long_term_rate:
        with pytest.raises(UnboundedResult):
            subtract_and_close(beta, alpha)
        return
    lo = subtract_and_close(beta, alpha)
    vals = [lo(x) for x in points]
    assert all(v >= 0 for v in vals)
    assert all(a <= b for a, b in zip(vals, vals[1:]))


@settings(max_examples=150, deadline=None)
@given(rates, amounts, rates, amounts)
def test_hdev_closed_form(r, b, R, T):
    if r > R:
        return
    assert horizontal_deviation(token_bucket(r, b), rate_latency(R, T)) == T + b / R


@settings(max_examples=150, deadline=None)
@given(rates, amounts, rates, amounts, amounts)
def test_output_bound_cap_properties(r, b, R, T, cap):
    if r > R:
        return
    a, beta = token_bucket(r, b), rate_latency(R, T)
    free = output_bound(a, beta)
    capped = output_bound(a, beta, cap)
    for x in points:
        assert capped(x) <= free(x)
    if cap >= free.burst():
        assert capped == free


@settings(max_examples=100, deadline=None)
@given(curves, curves)
def test_results_satisfy_curve_invariants(f, g):
    for c in (aggregate(f, g), convolve(f, g), minimum(f, g)):
        Curve(c.segments, c.infinite_tail).validate()


def test_oracle_suite_smoke():
    for op in minplus_suite.OPS:
        n, worst = minplus_suite.run(op, 100, seed=1)
        assert n == 100 and worst <= 0, op
