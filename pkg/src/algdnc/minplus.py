"""(min,+) operations on :class:`~algdnc.curve.Curve`.

Token-bucket / rate-latency operands take O(1) closed forms. Other
piecewise-linear operands go through a generic piece-wise construction:
each curve is cut into closed affine pieces, the operation is applied to
every pair of pieces and the lower (or upper) envelope is taken.

Every public operation increments the active :class:`OpCounter`, if any,
under one of the keys in :data:`OP_NAMES`.
"""

from __future__ import annotations

import contextvars
from bisect import bisect_right
from contextlib import contextmanager
from math import inf

from algdnc.curve import ZERO, Curve, canonical, rate_latency, to_fraction, token_bucket
from algdnc.errors import UnboundedResult, UnsupportedShape

OP_NAMES = ("aggregate", "convolve", "deconvolve", "subtractAndClose", "hdev", "vdev")

_active_counter = contextvars.ContextVar("algdnc_active_counter", default=None)


class OpCounter:
    """Per-operation invocation counts."""

    def __init__(self):
        self.counts = dict.fromkeys(OP_NAMES, 0)

    def add(self, name, n=1):
        self.counts[name] += n

    def merge(self, other):
        for k, v in other.counts.items():
            self.counts[k] += v

    @property
    def total(self):
        return sum(self.counts.values())

    def __repr__(self):
        return "OpCounter(%s)" % ", ".join("%s=%d" % kv for kv in self.counts.items())


@contextmanager
def counting(counter=None):
    """Route operation counts to ``counter`` (``None`` disables counting)."""
    token = _active_counter.set(counter)
    try:
        yield counter
    finally:
        _active_counter.reset(token)


def count_op(name):
    c = _active_counter.get()
    if c is not None:
        c.counts[name] += 1


# --- generic piece machinery ---------------------------------------------------
# A piece is (a, b, va, s): the affine function va + s*(x - a) on the closed
# interval [a, b]; b is None for an unbounded piece.


def _pieces(c):
    segs = c.segments
    out = []
    n = len(segs)
    last = n - 1 if c.infinite_tail else n
    for i in range(last):
        t, v, s = segs[i]
        end = segs[i + 1][0] if i + 1 < n else None
        out.append((t, end, v, s if end != t else ZERO))
    if c.infinite_tail:
        # the last finite point before the tail, so that delta_T shifts work
        t = segs[-1][0]
        if n == 1:
            out.append((t, t, ZERO, ZERO))
        else:
            pt, pv, ps = segs[-2]
            out.append((t, t, pv + ps * (t - pt), ZERO))
    return out


def _at(piece, x):
    a, _, va, s = piece
    return va + s * (x - a)


def _covers(piece, lo, hi):
    a, b, _, _ = piece
    if a > lo:
        return False
    if b is None:
        return True
    return hi is not None and b >= hi


def _envelope(pieces, lower):
    """Lower/upper envelope of closed pieces over [0, inf) as a Curve.

    The region after the last covered point becomes an infinite tail when
    nothing covers it (only meaningful for lower envelopes).
    """
    better = (lambda x, y: x < y) if lower else (lambda x, y: x > y)
    pieces = [p for p in pieces if p[1] is None or p[1] >= 0]
    clipped = []
    for a, b, va, s in pieces:
        if a < 0:
            va = va + s * (ZERO - a)
            a = ZERO
        clipped.append((a, b, va, s))
    pieces = clipped
    points = sorted({ZERO} | {p[0] for p in pieces} | {p[1] for p in pieces if p[1] is not None})
    segs = []
    tail_from = None
    for k, lo in enumerate(points):
        hi = points[k + 1] if k + 1 < len(points) else None
        lines = [p for p in pieces if _covers(p, lo, hi) and (p[1] is None or p[1] > lo)]
        if not lines:
            if hi is None:
                tail_from = lo
                break
            raise UnsupportedShape("envelope has a gap on (%s, %s)" % (lo, hi))
        # affine functions on (lo, hi): (value at lo, slope)
        affs = [(_at(p, lo), p[3]) for p in lines]
        cuts = set()
        for i in range(len(affs)):
            for j in range(i + 1, len(affs)):
                (y1, s1), (y2, s2) = affs[i], affs[j]
                if s1 != s2:
                    x = lo + (y2 - y1) / (s1 - s2)
                    if x > lo and (hi is None or x < hi):
                        cuts.add(x)
        bounds = [lo] + sorted(cuts) + [hi]
        for m in range(len(bounds) - 1):
            x0, x1 = bounds[m], bounds[m + 1]
            probe = x0 + 1 if x1 is None else (x0 + x1) / 2
            best = None
            for y, s in affs:
                val = y + s * (probe - lo)
                if best is None or better(val, best[0]):
                    best = (val, y, s)
            _, y, s = best
            segs.append((x0, y + s * (x0 - lo), s))
    if not segs:
        return Curve([(ZERO, ZERO, ZERO)], infinite_tail=True)
    if tail_from is not None:
        segs.append((tail_from, ZERO, ZERO))
    return canonical(segs, infinite_tail=tail_from is not None)


def _slope_after(c, x):
    return c.segments[bisect_right(c._times, x) - 1][2]


def _combine(f, g, sign):
    """Pointwise f + sign*g for finite curves (jumps preserved)."""
    points = sorted(set(f.breakpoints()) | set(g.breakpoints()))
    segs = []
    for p in points:
        v = f.right_limit(p) + sign * g.right_limit(p)
        s = _slope_after(f, p) + sign * _slope_after(g, p)
        segs.append((p, v, s))
    return segs


# --- public operations -----------------------------------------------------------


def aggregate(f, g):
    """Pointwise sum ``f + g``.

    >>> aggregate(token_bucket(2.5, 5), token_bucket(2.5, 5)) == token_bucket(5, 10)
    True
    """
    count_op("aggregate")
    return _aggregate(f, g)


def aggregate_all(curves):
    """Sum of one or more curves; counted as ``len(curves) - 1`` aggregations.

    >>> aggregate_all([token_bucket(1, 2)] * 3) == token_bucket(3, 6)
    True
    """
    curves = list(curves)
    c = _active_counter.get()
    if c is not None:
        c.counts["aggregate"] += len(curves) - 1
    r = b = ZERO
    for x in curves:
        tb = x.as_token_bucket()
        if tb is None:
            break
        r += tb[0]
        b += tb[1]
    else:
        return token_bucket(r, b)
    acc = curves[0]
    for x in curves[1:]:
        acc = _aggregate(acc, x)
    return acc


def _aggregate(f, g):
    tf, tg = f.as_token_bucket(), g.as_token_bucket()
    if tf is not None and tg is not None:
        return token_bucket(tf[0] + tg[0], tf[1] + tg[1])
    if f.infinite_tail or g.infinite_tail:
        ends = [c.segments[-1][0] for c in (f, g) if c.infinite_tail]
        cut = min(ends)
        fin_f = _truncate(f, cut)
        fin_g = _truncate(g, cut)
        segs = _combine(fin_f, fin_g, 1)
        segs = [s for s in segs if s[0] <= cut]
        segs.append((cut, ZERO, ZERO))
        return canonical(segs, infinite_tail=True)
    return canonical(_combine(f, g, 1))


def _truncate(c, cut):
    # finite version of c that agrees with it on [0, cut]
    if not c.infinite_tail:
        return c
    segs = list(c.finite_segments())
    if not segs:
        segs = [(ZERO, ZERO, ZERO)]
    return Curve(segs, validate=False)


def minimum(f, g):
    """Pointwise minimum; combines alternative arrival bounds.

    Counted as a convolution: for concave curves through the origin the
    two coincide.

    >>> minimum(token_bucket(2, 10), token_bucket(2, 7)) == token_bucket(2, 7)
    True
    """
    count_op("convolve")
    return _minimum(f, g)


def _minimum(f, g):
    tf, tg = f.as_token_bucket(), g.as_token_bucket()
    if tf is not None and tg is not None:
        if tf[0] <= tg[0] and tf[1] <= tg[1]:
            return f
        if tg[0] <= tf[0] and tg[1] <= tf[1]:
            return g
    if f == g:
        return f
    return _envelope(_pieces(f) + _pieces(g), lower=True)


def convolve(f, g):
    """(min,+) convolution ``inf_{0<=u<=t} f(t-u) + g(u)``.

    >>> convolve(rate_latency(10, 1), rate_latency(10, 1)) == rate_latency(10, 2)
    True
    """
    count_op("convolve")
    return _convolve(f, g)


def _convolve(f, g):
    rf, rg = f.as_rate_latency(), g.as_rate_latency()
    if rf is not None and rg is not None:
        return rate_latency(min(rf[0], rg[0]), rf[1] + rg[1])
    if f.is_concave() and g.is_concave():
        return _minimum(f, g)
    pieces = []
    for p in _pieces(f):
        for q in _pieces(g):
            pieces.extend(_conv_pair(p, q))
    return _envelope(pieces, lower=True)


def _conv_pair(p, q):
    a1, b1, v1, s1 = p
    a2, b2, v2, s2 = q
    start, val = a1 + a2, v1 + v2
    l1 = None if b1 is None else b1 - a1
    l2 = None if b2 is None else b2 - a2
    (sa, la), (sb, lb) = sorted([(s1, l1), (s2, l2)], key=lambda z: z[0])
    if la is None:
        return [(start, None, val, sa)]
    out = [(start, start + la, val, sa)]
    mid = start + la
    out.append((mid, None if lb is None else mid + lb, val + sa * la, sb))
    return out


def deconvolve(f, g):
    """(min,+) deconvolution ``sup_{u>=0} f(d+u) - g(u)``, re-anchored to 0 at d = 0.

    >>> deconvolve(token_bucket(2.5, 5), rate_latency(25, 5)) == token_bucket(2.5, 17.5)
    True
    """
    count_op("deconvolve")
    return _deconvolve(f, g)


def _deconvolve(f, g):
    if f.infinite_tail or f.long_term_rate > g.long_term_rate:
        raise UnboundedResult("deconvolution diverges: arrival rate exceeds service rate")
    tf, rg = f.as_token_bucket(), g.as_rate_latency()
    if tf is not None and rg is not None:
        r, b = tf
        R, T = rg
        return token_bucket(r, b + r * T)
    if not g.is_continuous():
        raise UnsupportedShape("deconvolution needs a continuous subtrahend curve")
    pieces = []
    for p in _pieces(f):
        for q in _pieces(g):
            pieces.extend(_dec_pair(p, q))
    # the envelope is built from right limits, so its value at the origin is
    # re-anchored to 0 and any positive sup there becomes the burst
    return _envelope(pieces, lower=False)


def _dec_pair(p, q):
    a, b, vf, sf = p
    c, e, vg, sg = q
    lo = None if e is None else a - e
    hi = None if b is None else b - c
    if hi is not None and hi < 0:
        return []
    if lo is None or lo < 0:
        lo = ZERO
    if hi is not None and hi < lo:
        return []

    def value(d, u):
        return vf + sf * (d + u - a) - vg - sg * (u - c)

    out = []
    if sf >= sg and not (b is None and e is None):
        # take u as large as allowed: u = min(e, b - d)
        x = None if (b is None or e is None) else b - e
        if e is None:
            regions = [(lo, hi, lambda d: b - d, sg)]
        elif b is None:
            regions = [(lo, hi, lambda d: e, sf)]
        else:
            regions = [(lo, min(x, hi), lambda d: e, sf), (max(x, lo), hi, lambda d: b - d, sg)]
    else:
        # take u as small as allowed: u = max(c, a - d)
        y = a - c
        regions = [(lo, y if hi is None else min(y, hi), lambda d: a - d, sg),
                   (max(y, lo), hi, lambda d: c, sf)]
    for r0, r1, u_of, slope in regions:
        if r1 is not None and r1 < r0:
            continue
        out.append((r0, r1, value(r0, u_of(r0)), slope))
    return out


def subtract_and_close(beta, alpha):
    """Left-over service: non-decreasing upper closure of ``beta - alpha``, clipped at 0.

    >>> subtract_and_close(rate_latency(10, 2), token_bucket(2, 4)) == rate_latency(8, 3)
    True
    """
    count_op("subtractAndClose")
    return _subtract_and_close(beta, alpha)


def _subtract_and_close(beta, alpha):
    if alpha.long_term_rate >= beta.long_term_rate:
        raise UnboundedResult("residual service rate is not positive")
    rb, ta = beta.as_rate_latency(), alpha.as_token_bucket()
    if rb is not None and ta is not None:
        R, T = rb
        r, b = ta
        return rate_latency(R - r, (b + R * T) / (R - r))
    if beta.infinite_tail:
        raise UnsupportedShape("left-over of an infinite service curve")
    diff = _combine(beta, alpha, -1)
    return _upper_closure(diff)


def _upper_closure(segs):
    """max(0, running sup) of the left-continuous curve given by ``segs``."""
    out = [(ZERO, ZERO, ZERO)]
    m = ZERO
    for i, (t, v, s) in enumerate(segs):
        end = segs[i + 1][0] if i + 1 < len(segs) else None
        if end is not None and end == t:
            continue
        if s <= 0:
            m = max(m, v)
            out.append((t, m, ZERO))
            if end is not None:
                m = max(m, v + s * (end - t))
            continue
        if v >= m:
            out.append((t, v, s))
        else:
            x = t + (m - v) / s
            out.append((t, m, ZERO))
            if end is None or x < end:
                out.append((x, m, s))
        if end is not None:
            m = max(m, v + s * (end - t))
    return canonical(out)


def horizontal_deviation(alpha, beta):
    """Delay bound ``sup_d inf{tau >= 0 : alpha(d) <= beta(d + tau)}``.

    >>> horizontal_deviation(token_bucket(5, 5), rate_latency(25, 5))
    mpq(26,5)
    """
    count_op("hdev")
    return _hdev(alpha, beta)


def _hdev(alpha, beta):
    ta, rb = alpha.as_token_bucket(), beta.as_rate_latency()
    if ta is not None and rb is not None:
        r, b = ta
        R, T = rb
        if r == 0 and b == 0:
            return ZERO
        if r > R or R == 0:
            raise UnboundedResult("delay unbounded: arrival rate exceeds service rate")
        return T + b / R
    if alpha.infinite_tail or alpha.long_term_rate > beta.long_term_rate:
        raise UnboundedResult("delay unbounded: arrival rate exceeds service rate")
    return _hdev_general(alpha, beta)


def _inverse(beta, y):
    """inf{t >= 0 : beta(t) >= y} (``inf`` when never reached)."""
    if y <= 0:
        return ZERO
    segs = beta.segments
    n = len(segs)
    for i, (t, v, s) in enumerate(segs):
        if beta.infinite_tail and i == n - 1:
            return t
        end = segs[i + 1][0] if i + 1 < n else None
        if end is not None and end == t:
            continue
        if y <= v:
            return t
        if s > 0 and (end is None or y <= v + s * (end - t)):
            return t + (y - v) / s
    return inf


def _hdev_general(alpha, beta):
    levels = set()
    for i, (t, v, s) in enumerate(beta.segments):
        levels.add(v)
        if i + 1 < len(beta.segments):
            levels.add(v + s * (beta.segments[i + 1][0] - t))
    cand = set(alpha.breakpoints())
    segs = alpha.segments
    for i, (t, v, s) in enumerate(segs):
        end = segs[i + 1][0] if i + 1 < len(segs) else None
        if s <= 0:
            continue
        for y in levels:
            x = t + (y - v) / s
            if x > t and (end is None or x < end):
                cand.add(x)
    cand = sorted(cand)

    # g(d) = inverse(alpha(d)) - d is affine between consecutive candidates;
    # the delay is max(0, g), so the sup is reached at (limits of) candidates
    def g(d):
        t = _inverse(beta, alpha(d))
        if t == inf:
            raise UnboundedResult("delay unbounded: service curve never catches up")
        return t - d

    best = ZERO
    for k, x0 in enumerate(cand):
        best = max(best, g(x0))
        x1 = cand[k + 1] if k + 1 < len(cand) else None
        if x1 is None:
            p, q = x0 + 1, x0 + 2
        else:
            p, q = x0 + (x1 - x0) / 3, x0 + 2 * (x1 - x0) / 3
        gp, gq = g(p), g(q)
        slope = (gq - gp) / (q - p)
        best = max(best, gp - slope * (p - x0))
        if x1 is None:
            if slope > 0:
                raise UnboundedResult("delay grows without bound")
        else:
            best = max(best, gp + slope * (x1 - p))
    return best


def vertical_deviation(alpha, beta):
    """Backlog bound ``sup_d alpha(d) - beta(d)``.

    >>> vertical_deviation(token_bucket(5, 5), rate_latency(25, 5))
    mpq(30,1)
    """
    count_op("vdev")
    return _vdev(alpha, beta)


def _vdev(alpha, beta):
    ta, rb = alpha.as_token_bucket(), beta.as_rate_latency()
    if ta is not None and rb is not None:
        r, b = ta
        R, T = rb
        if r > R:
            raise UnboundedResult("backlog unbounded: arrival rate exceeds service rate")
        return b + r * T
    if alpha.infinite_tail or alpha.long_term_rate > beta.long_term_rate:
        raise UnboundedResult("backlog unbounded: arrival rate exceeds service rate")
    limit = beta.segments[-1][0] if beta.infinite_tail else None
    points = sorted(set(alpha.breakpoints()) | set(beta.breakpoints()))
    best = ZERO
    for p in points:
        if limit is not None and p > limit:
            break
        vals = [alpha(p) - beta(p)]
        if limit is None or p < limit:
            vals.append(alpha.right_limit(p) - beta.right_limit(p))
        best = max(best, *vals)
    if limit is not None:
        best = max(best, alpha(limit) - beta(limit))
    return best


def output_bound(alpha, beta_lo, burst_cap=None):
    """Output arrival curve ``alpha ⊘ beta_lo``; optionally clip its burst at ``burst_cap``.

    The cap lowers intercepts and keeps slopes: the result is
    ``min(alpha', gamma_{r, cap})`` with ``r`` the long-term rate.

    >>> output_bound(token_bucket(2, 4), rate_latency(8, 3), 7) == token_bucket(2, 7)
    True
    """
    out = deconvolve(alpha, beta_lo)
    if burst_cap is None:
        return out
    return cap_burst(out, burst_cap)


def cap_burst(alpha, burst_cap):
    """Clip the burst of an arrival curve at ``burst_cap`` (not counted as an operation)."""
    cap = to_fraction(burst_cap)
    if cap < 0:
        raise ValueError("burst cap must be >= 0")
    tb = alpha.as_token_bucket()
    if tb is not None:
        return token_bucket(tb[0], min(tb[1], cap))
    if alpha.infinite_tail:
        raise UnsupportedShape("cannot cap an infinite curve")
    return _minimum(alpha, token_bucket(alpha.long_term_rate, cap))


def pmoo_left_over(servers, aggregates):
    """Left-over service of a tandem under the PMOO principle.

    ``servers`` is a sequence of rate-latency curves; ``aggregates`` holds
    ``(token_bucket_curve, (first, last))`` pairs, the positions being the
    inclusive index range the aggregate occupies on the tandem. Returns
    ``beta_{R,T}`` with ``R = min_s (R_s - sum of crossing rates)`` and
    ``T = sum T_s + sum_agg (b + r * sum of its T_s) / R``.

    Counted as one left-over operation.

    >>> pmoo_left_over([rate_latency(10, 1)] * 2, [(token_bucket(2, 4), (0, 1))])
    Curve(RL(8,3))
    """
    count_op("subtractAndClose")
    return _pmoo_left_over(servers, aggregates)


def _pmoo_left_over(servers, aggregates):
    rls = []
    for s in servers:
        rl = s.as_rate_latency()
        if rl is None:
            raise UnsupportedShape("PMOO left-over needs rate-latency servers")
        rls.append(rl)
    tbs = []
    for a, (i, j) in aggregates:
        tb = a.as_token_bucket()
        if tb is None:
            raise UnsupportedShape("PMOO left-over needs token-bucket arrivals")
        tbs.append((tb, i, j))
    load = [ZERO] * len(rls)
    for (r, _), i, j in tbs:
        for k in range(i, j + 1):
            load[k] += r
    R = min(rl[0] - ld for rl, ld in zip(rls, load))
    if R <= 0:
        raise UnboundedResult("residual service rate is not positive")
    prefix = [ZERO]
    for _, T in rls:
        prefix.append(prefix[-1] + T)
    burst_terms = sum(((b + r * (prefix[j + 1] - prefix[i])) for (r, b), i, j in tbs), ZERO)
    return rate_latency(R, prefix[-1] + burst_terms / R)


__all__ = [
    "OP_NAMES",
    "OpCounter",
    "aggregate",
    "aggregate_all",
    "cap_burst",
    "convolve",
    "count_op",
    "counting",
    "deconvolve",
    "horizontal_deviation",
    "minimum",
    "output_bound",
    "pmoo_left_over",
    "subtract_and_close",
    "vertical_deviation",
]
