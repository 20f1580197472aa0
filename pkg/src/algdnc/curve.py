"""Piecewise-linear curves through the origin.

A curve is stored as an ordered tuple of segments ``(t, v, s)``: on the
interval ``(t_i, t_{i+1}]`` the curve equals ``v_i + s_i * (d - t_i)``.
Curves are left-continuous for ``d > 0`` and always pass through the origin.
A jump at ``d = 0`` (the token bucket burst) is encoded as a zero-length
first segment ``(0, 0, 0)`` followed by a segment starting at ``(0, b)``.

When ``infinite_tail`` is set the last segment is only a marker: the curve
is ``+inf`` for every ``d`` strictly greater than its start time.

All numbers are exact rationals (``gmpy2.mpq``). They compare and hash
equal to :class:`fractions.Fraction` values, which are accepted everywhere.
"""

from __future__ import annotations

import re
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import inf

from gmpy2 import mpq

from algdnc.errors import ParseError, ValidationError

ZERO = mpq(0)


def to_fraction(x):
    """Convert ``x`` to an exact rational.

    Floats go through their shortest decimal representation so that
    ``to_fraction(0.1) == Fraction(1, 10)``.

    >>> to_fraction("2.5") == Fraction(5, 2)
    True
    >>> to_fraction(0.1) == Fraction(1, 10)
    True
    """
    if type(x) is mpq:
        return x
    if isinstance(x, int):
        return mpq(x)
    if isinstance(x, float):
        if x != x or x in (inf, -inf):
            raise ValueError("not a finite number: %r" % x)
        return mpq(Fraction(repr(x)))
    if isinstance(x, str):
        return mpq(Fraction(x.strip()))
    return mpq(Fraction(x))


def format_fraction(x):
    """Exact text for a rational: a terminating decimal when possible, else ``p/q``.

    >>> format_fraction(Fraction(5, 2))
    '2.5'
    >>> format_fraction(Fraction(1, 3))
    '1/3'
    """
    x = to_fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    den = x.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return "%d/%d" % (x.numerator, x.denominator)
    digits = max(twos, fives)
    scaled = x * 10 ** digits
    sign = "-" if scaled < 0 else ""
    n = abs(scaled.numerator)
    whole, frac = divmod(n, 10 ** digits)
    return "%s%d.%s" % (sign, whole, str(frac).rjust(digits, "0"))


_UNSET = object()


class Curve:
    """Immutable, ultimately affine, wide-sense increasing curve in F_0."""

    __slots__ = ("segments", "infinite_tail", "_times", "_hash", "_tb", "_rl")

    def __init__(self, segments, infinite_tail=False, validate=True):
        segs = tuple((to_fraction(t), to_fraction(v), to_fraction(s)) for t, v, s in segments)
        if infinite_tail:
            # the marker segment carries no shape information
            segs = segs[:-1] + ((segs[-1][0], segs[-1][1], ZERO),)
        self.segments = segs
        self.infinite_tail = bool(infinite_tail)
        self._times = [seg[0] for seg in segs]
        self._hash = None
        self._tb = self._rl = _UNSET
        if validate:
            self.validate()

    @classmethod
    def _trusted(cls, segments, infinite_tail=False):
        # for constructors whose output is known valid and already exact
        self = object.__new__(cls)
        self.segments = segments
        self.infinite_tail = infinite_tail
        self._times = [seg[0] for seg in segments]
        self._hash = None
        self._tb = self._rl = _UNSET
        return self

    # --- invariants -----------------------------------------------------

    def validate(self):
        """Raise :class:`ValidationError` unless every curve invariant holds."""
        segs = self.segments
        if not segs:
            raise ValidationError("non-empty", "a curve needs at least one segment")
        t0, v0, _ = segs[0]
        if t0 != 0:
            raise ValidationError("starts-at-zero", "first segment must start at 0")
        if v0 != 0:
            raise ValidationError("passes-origin", "value at 0 must be 0, got %s" % v0)
        for i, (t, v, s) in enumerate(segs):
            if s < 0:
                raise ValidationError("increasing", "negative slope %s" % s)
            if i == 0:
                continue
            pt, pv, ps = segs[i - 1]
            if t < pt or (t == pt and i != 1):
                raise ValidationError("ordered", "segment start times must increase")
            if v < pv + ps * (t - pt):
                raise ValidationError("increasing", "downward jump at t=%s" % t)
        return self

    # --- evaluation -------------------------------------------------------

    def _index(self, d):
        # largest i with t_i < d, for d > 0
        return bisect_left(self._times, d) - 1

    def __call__(self, d):
        """Value at ``d``; returns ``math.inf`` inside an infinite tail."""
        d = to_fraction(d)
        if d < 0:
            raise ValueError("curves are defined for d >= 0")
        if d == 0:
            return self.segments[0][1]
        i = self._index(d)
        if self.infinite_tail and i == len(self.segments) - 1:
            return inf
        t, v, s = self.segments[i]
        return v + s * (d - t)

    def right_limit(self, d):
        """Limit of the curve as its argument decreases to ``d``."""
        d = to_fraction(d)
        i = bisect_right(self._times, d) - 1
        if self.infinite_tail and i == len(self.segments) - 1:
            return inf
        t, v, s = self.segments[i]
        return v + s * (d - t)

    # --- shape queries ----------------------------------------------------

    @property
    def long_term_rate(self):
        """Slope of the final segment (``math.inf`` for an infinite tail)."""
        if self.infinite_tail:
            return inf
        return self.segments[-1][2]

    def finite_segments(self):
        """Segments excluding the infinite-tail marker."""
        if self.infinite_tail:
            return self.segments[:-1]
        return self.segments

    def breakpoints(self):
        return list(dict.fromkeys(self._times))

    def burst(self):
        """Right limit at 0."""
        return self.right_limit(ZERO)

    def is_zero(self):
        return not self.infinite_tail and len(self.segments) == 1 and self.segments[0][2] == 0

    def as_token_bucket(self):
        """``(r, b)`` when this is a token bucket curve, else ``None``."""
        if self._tb is _UNSET:
            self._tb = self._token_bucket_params()
        return self._tb

    def _token_bucket_params(self):
        segs = self.segments
        if self.infinite_tail:
            return None
        if len(segs) == 1:
            return (segs[0][2], ZERO)
        if len(segs) == 2 and segs[1][0] == 0 and segs[0][2] == 0:
            return (segs[1][2], segs[1][1])
        return None

    def as_rate_latency(self):
        """``(R, T)`` when this is a rate-latency curve, else ``None``."""
        if self._rl is _UNSET:
            self._rl = self._rate_latency_params()
        return self._rl

    def _rate_latency_params(self):
        segs = self.segments
        if self.infinite_tail:
            return None
        if len(segs) == 1:
            return (segs[0][2], ZERO)
        if len(segs) == 2 and segs[0][2] == 0 and segs[1][1] == 0 and segs[1][0] > 0:
            return (segs[1][2], segs[1][0])
        return None

    def has_jump_after_zero(self):
        segs = self.segments
        for i in range(1, len(segs)):
            pt, pv, ps = segs[i - 1]
            t, v, _ = segs[i]
            if t == 0:
                continue
            if v != pv + ps * (t - pt):
                if self.infinite_tail and i == len(segs) - 1:
                    continue
                return True
        return False

    def is_continuous(self):
        """No jump anywhere, including at 0 (the infinite tail excepted)."""
        segs = self.segments
        if len(segs) > 1 and segs[1][0] == 0 and segs[1][1] != 0:
            return False
        return not self.has_jump_after_zero()

    def is_concave(self):
        """Concave on (0, inf) and continuous there; a jump at 0 is allowed."""
        if self.infinite_tail or self.has_jump_after_zero():
            return False
        segs = self.segments
        start = 1 if len(segs) > 1 and segs[1][0] == 0 else 0
        slopes = [s for _, _, s in segs[start:]]
        return all(a >= b for a, b in zip(slopes, slopes[1:]))

    def is_convex(self):
        """Continuous, with non-decreasing slopes (an infinite tail counts as +inf slope)."""
        if not self.is_continuous():
            return False
        slopes = [s for _, _, s in self.finite_segments()]
        return all(a <= b for a, b in zip(slopes, slopes[1:]))

    # --- value semantics ----------------------------------------------------

    def _key(self):
        return (self.segments, self.infinite_tail)

    def __eq__(self, other):
        if not isinstance(other, Curve):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._key())
        return self._hash

    def sort_key(self):
        return (self.infinite_tail, self.segments)

    def __repr__(self):
        return "Curve(%s)" % format_curve(self)


def canonical(segments, infinite_tail=False):
    """Build a Curve after dropping empty pieces and merging collinear neighbours.

    Zero-length pieces at ``t > 0`` carry no information for a left-continuous
    curve and are removed; a non-zero start value becomes a jump at 0.
    """
    segs = [(to_fraction(t), to_fraction(v), to_fraction(s)) for t, v, s in segments]
    marker = segs.pop() if infinite_tail else None
    kept = []
    for i, seg in enumerate(segs):
        nxt = segs[i + 1][0] if i + 1 < len(segs) else (marker[0] if marker else None)
        if nxt is not None and nxt == seg[0]:
            continue
        kept.append(seg)
    if not kept:
        kept = [(ZERO, ZERO, ZERO)]
    if kept[0][1] != 0:
        kept.insert(0, (ZERO, ZERO, ZERO))
    out = [kept[0]]
    for t, v, s in kept[1:]:
        pt, pv, ps = out[-1]
        if t > 0 and s == ps and v == pv + ps * (t - pt):
            continue
        out.append((t, v, s))
    if marker is not None:
        pt, pv, ps = out[-1]
        if not (len(out) == 1 and pt == marker[0]):
            out.append((marker[0], pv + ps * (marker[0] - pt), ZERO))
    return Curve(out, infinite_tail=infinite_tail)


# --- constructors -------------------------------------------------------------


def token_bucket(rate, burst):
    """gamma_{r,b}: 0 at d = 0 and ``b + r * d`` for d > 0.

    >>> token_bucket(2, 4)(0), token_bucket(2, 4)(1)
    (mpq(0,1), mpq(6,1))
    """
    r, b = to_fraction(rate), to_fraction(burst)
    if r < 0 or b < 0:
        raise ValidationError("non-negative", "token bucket needs r >= 0 and b >= 0")
    if b == 0:
        c = Curve._trusted(((ZERO, ZERO, r),))
    else:
        c = Curve._trusted(((ZERO, ZERO, ZERO), (ZERO, b, r)))
    c._tb = (r, b)
    return c


def rate_latency(rate, latency):
    """beta_{R,T} = max(0, R * (d - T)).

    >>> rate_latency(10, 1)(3)
    mpq(20,1)
    """
    R, T = to_fraction(rate), to_fraction(latency)
    if R < 0 or T < 0:
        raise ValidationError("non-negative", "rate-latency needs R >= 0 and T >= 0")
    if T == 0 or R == 0:
        return Curve._trusted(((ZERO, ZERO, R),))
    c = Curve._trusted(((ZERO, ZERO, ZERO), (T, ZERO, R)))
    c._rl = (R, T)
    return c


def zero_curve():
    return Curve([(ZERO, ZERO, ZERO)])


def burst_delay(latency=0):
    """delta_T: 0 on [0, T], +inf afterwards (the convolution identity for T = 0)."""
    T = to_fraction(latency)
    if T == 0:
        return Curve([(ZERO, ZERO, ZERO)], infinite_tail=True)
    return Curve([(ZERO, ZERO, ZERO), (T, ZERO, ZERO)], infinite_tail=True)


@dataclass(frozen=True)
class TokenBucketParams:
    rate: mpq
    burst: mpq

    def __post_init__(self):
        object.__setattr__(self, "rate", to_fraction(self.rate))
        object.__setattr__(self, "burst", to_fraction(self.burst))
        if self.rate < 0 or self.burst < 0:
            raise ValidationError("non-negative", "token bucket parameters must be >= 0")

    @cached_property
    def curve_value(self):
        return token_bucket(self.rate, self.burst)

    def curve(self):
        return self.curve_value


@dataclass(frozen=True)
class RateLatencyParams:
    rate: mpq
    latency: mpq

    def __post_init__(self):
        object.__setattr__(self, "rate", to_fraction(self.rate))
        object.__setattr__(self, "latency", to_fraction(self.latency))
        if self.rate < 0 or self.latency < 0:
            raise ValidationError("non-negative", "rate-latency parameters must be >= 0")

    @cached_property
    def curve_value(self):
        return rate_latency(self.rate, self.latency)

    def curve(self):
        return self.curve_value


# --- text form ------------------------------------------------------------------


def format_curve(c):
    """Text form: ``TB(r,b)``, ``RL(R,T)`` or ``PWL[(t,v,s);...]``.

    >>> format_curve(token_bucket(2.5, 5))
    'TB(2.5,5)'
    >>> format_curve(rate_latency(8, Fraction(23, 6)))
    'RL(8,23/6)'
    """
    tb = c.as_token_bucket()
    if tb is not None and (tb[1] != 0 or c.is_zero()):
        return "TB(%s,%s)" % (format_fraction(tb[0]), format_fraction(tb[1]))
    rl = c.as_rate_latency()
    if rl is not None:
        return "RL(%s,%s)" % (format_fraction(rl[0]), format_fraction(rl[1]))
    parts = []
    for i, (t, v, s) in enumerate(c.segments):
        if c.infinite_tail and i == len(c.segments) - 1:
            parts.append("(%s,inf)" % format_fraction(t))
        else:
            parts.append("(%s,%s,%s)" % (format_fraction(t), format_fraction(v), format_fraction(s)))
    return "PWL[%s]" % ";".join(parts)


_NUM = r"\s*([-+]?[0-9./eE+-]+)\s*"
_TB_RE = re.compile(r"^\s*TB\(" + _NUM + "," + _NUM + r"\)\s*$")
_RL_RE = re.compile(r"^\s*RL\(" + _NUM + "," + _NUM + r"\)\s*$")


def parse_curve(text):
    """Inverse of :func:`format_curve`.

    >>> parse_curve("RL(8,23/6)") == rate_latency(8, Fraction(23, 6))
    True
    """
    try:
        m = _TB_RE.match(text)
        if m:
            return token_bucket(Fraction(m.group(1)), Fraction(m.group(2)))
        m = _RL_RE.match(text)
        if m:
            return rate_latency(Fraction(m.group(1)), Fraction(m.group(2)))
        body = text.strip()
        if not (body.startswith("PWL[") and body.endswith("]")):
            raise ParseError("unknown curve syntax: %r" % text)
        segs = []
        tail = False
        for item in body[4:-1].split(";"):
            item = item.strip()
            if not (item.startswith("(") and item.endswith(")")):
                raise ParseError("bad segment %r" % item)
            fields = [f.strip() for f in item[1:-1].split(",")]
            if len(fields) == 2 and fields[1] == "inf":
                segs.append((Fraction(fields[0]), segs[-1][1] if segs else ZERO, ZERO))
                tail = True
            elif len(fields) == 3:
                segs.append(tuple(Fraction(f) for f in fields))
            else:
                raise ParseError("bad segment %r" % item)
        return Curve(segs, infinite_tail=tail)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError("bad number in curve %r: %s" % (text, exc)) from exc
