"""Delay-bound analyses for feed-forward networks.

All three analyses share one compositional recursion and differ only in
the tandem decompositions they consider:

* SFA cuts every link, so each server yields its own left-over curve;
* PMOO never cuts, so the whole tandem is one PMOO left-over;
* the exhaustive analysis tries all ``2**(n-1)`` decompositions and keeps
  every resulting left-over curve as an alternative.

Cross traffic on a (sub-)tandem is grouped by where it enters, where it
leaves and through which link it arrives. Each group's arrival curve is
obtained by backtracking the tandem its members share upstream,
recursively bounding their left-over service there, and pushing the
arrivals at that tandem's source through it.
"""

import time
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import product

from algdnc.analysis.tfa import tfa_backlog_bounds
from algdnc.errors import UnboundedResult
from algdnc.minplus import (
    OpCounter,
    aggregate_all,
    cap_burst,
    convolve,
    counting,
    deconvolve,
    horizontal_deviation,
    pmoo_left_over,
)


class AnalysisKind(Enum):
    SFA = "sfa"
    PMOO = "pmoo"
    EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True)
class AnalysisOptions:
    """Analysis choice plus the efficiency and accuracy toggles.

    The burst cap only affects the exhaustive analysis; SFA and PMOO are
    always computed in their classic form.
    """

    kind: AnalysisKind = AnalysisKind.EXHAUSTIVE
    use_cache: bool = True
    use_convolution_of_alternatives: bool = True
    use_burst_cap: bool = True
    # bound cross traffic as if the flow of interest were cross traffic too
    include_foi_in_cross_bounds: bool = False


@dataclass
class AnalysisResult:
    flow: int
    kind: AnalysisKind
    delay: object  # Fraction, or None when unbounded
    ops: OpCounter = field(default_factory=OpCounter)
    structural_ops: int = 0
    wall_ns: int = 0
    best_mask: object = None

    @property
    def bounded(self):
        return self.delay is not None


@dataclass(frozen=True)
class FlowAggregate:
    """Cross flows that occupy positions ``first..last`` of a tandem and
    reach position ``first`` from server ``inlink`` (None: they start there)."""

    flows: frozenset
    first: int
    last: int
    inlink: object


def get_decompositions(tandem):
    """All ways to cut a tandem into consecutive sub-tandems.

    Bit ``i`` of the enumeration index means "cut after position ``i``".

    >>> get_decompositions(("a", "b", "c"))
    [(('a', 'b', 'c'),), (('a',), ('b', 'c')), (('a', 'b'), ('c',)), (('a',), ('b',), ('c',))]
    """
    return [_decomposition(tandem, mask) for mask in range(1 << (len(tandem) - 1))]


def _decomposition(tandem, mask):
    parts, start = [], 0
    for i in range(len(tandem) - 1):
        if mask >> i & 1:
            parts.append(tuple(tandem[start:i + 1]))
            start = i + 1
    parts.append(tuple(tandem[start:]))
    return tuple(parts)


def _masks(kind, n):
    if kind is AnalysisKind.SFA:
        return [(1 << (n - 1)) - 1]
    if kind is AnalysisKind.PMOO:
        return [0]
    return range(1 << (n - 1))


def _runs(tandem, path):
    """Maximal stretches of ``path`` inside ``tandem`` as (first, last, inlink)."""
    pos = {s: i for i, s in enumerate(tandem)}
    out = []
    k = 0
    while k < len(path):
        if path[k] in pos:
            first = pos[path[k]]
            inlink = path[k - 1] if k > 0 else None
            last = first
            k += 1
            while k < len(path) and path[k] in pos and pos[path[k]] == last + 1:
                last += 1
                k += 1
            out.append((first, last, inlink))
        else:
            k += 1
    return out


def xtx_segregation(net, tandem, excluded):
    """Group the flows crossing ``tandem`` (other than ``excluded``) into aggregates.

    >>> from algdnc.network import tandem_network
    >>> from algdnc.curve import RateLatencyParams as RL, TokenBucketParams as TB
    >>> net = tandem_network([RL(10, 0)] * 2, [(TB(1, 1), 0, 1), (TB(1, 1), 0, 1), (TB(1, 1), 1, 1)])
    >>> [sorted(a.flows) for a in xtx_segregation(net, (0, 1), {0})]
    [[1], [2]]
    """
    groups = {}
    seen = set()
    for s in tandem:
        for fid in net.flows_at(s):
            if fid in excluded or fid in seen:
                continue
            seen.add(fid)
            for run in _runs(tandem, net.flow(fid).path):
                groups.setdefault(run, set()).add(fid)
    keyed = sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1], -1 if kv[0][2] is None else kv[0][2]))
    return [FlowAggregate(frozenset(fl), a, b, p) for (a, b, p), fl in keyed]


def shared_tandem(net, inlink, members):
    """Longest tandem ending at ``inlink`` that all members traverse in order."""
    paths = [net.flow(f).path for f in members]
    hops = [net.hop(f, inlink) for f in members]
    shared = [inlink]
    k = 1
    while all(h - k >= 0 for h in hops):
        nxt = {p[h - k] for p, h in zip(paths, hops)}
        if len(nxt) != 1:
            break
        shared.append(nxt.pop())
        k += 1
    return tuple(reversed(shared))


def _dedupe(curves):
    if len(curves) < 2:
        return curves
    return list(dict.fromkeys(curves))


class _Engine:
    def __init__(self, net, foi, opts, backlog):
        self.net = net
        self.foi = foi
        self.opts = opts
        self.kind = opts.kind
        self.cap = opts.use_burst_cap and opts.kind is AnalysisKind.EXHAUSTIVE
        self.backlog = backlog
        self.cache = {}
        # structural memos: topology only, never curve values
        self.segregation = {}
        self.backtrack = {}
        self.services = {}
        self.sources = {}
        self.structural = 0
        self.best_mask = None
        self.excluded_base = frozenset() if opts.include_foi_in_cross_bounds else frozenset([foi])

    # --- left-over service ---------------------------------------------------

    def left_over_set(self, tandem, members, depth):
        """Alternative left-over curves of ``tandem`` for the aggregate ``members``."""
        excluded = self.excluded_base | members
        services = self.services.get(tandem)
        if services is None:
            services = self.services[tandem] = [self.net.graph.service(s).curve() for s in tandem]
        found = {}
        for mask in _masks(self.kind, len(tandem)):
            parts = _decomposition(tandem, mask)
            offset = 0
            acc = None
            for part in parts:
                n = len(part)
                los = self._part_left_overs(part, services[offset:offset + n], excluded, depth)
                offset += n
                if not los:
                    acc = []
                    break
                if acc is None:
                    acc = los
                else:
                    combined = []
                    for a, b in product(acc, los):
                        combined.append(convolve(a, b))
                        if depth == 0:
                            self.structural += 1
                    acc = _dedupe(combined)
            for c in acc:
                found.setdefault(c, mask)
        if depth == 0:
            self.masks = found
        return list(found)

    def _part_left_overs(self, part, services, excluded, depth):
        key = (part, excluded)
        aggs = self.segregation.get(key)
        if aggs is None:
            aggs = self.segregation[key] = xtx_segregation(self.net, part, excluded)
        options = []
        for agg in aggs:
            try:
                alts = self.arrival_bound(part[agg.first], agg.inlink, agg.flows)
            except UnboundedResult:
                return []
            options.append([(a, (agg.first, agg.last)) for a in alts])
        out = []
        for combo in product(*options):
            if depth == 0:
                self.structural += 1
            try:
                out.append(pmoo_left_over(services, list(combo)))
            except UnboundedResult:
                pass
        return _dedupe(out)

    # --- arrival bounds ------------------------------------------------------

    def arrival_bound(self, server, inlink, members):
        """Alternative arrival curves of ``members`` entering ``server`` from ``inlink``.

        Raises UnboundedResult when no alternative is finite.
        """
        key = (server if inlink is None else inlink, inlink is None, members)
        if self.opts.use_cache and key in self.cache:
            hit = self.cache[key]
            if isinstance(hit, UnboundedResult):
                raise hit
            return hit
        if inlink is None:
            result = [self._source_arrivals(members)]
            if self.opts.use_cache:
                self.cache[key] = result
            return result
        try:
            result = self._arrival_bound(inlink, members)
        except UnboundedResult as exc:
            if self.opts.use_cache:
                self.cache[key] = exc
            raise
        if self.opts.use_cache:
            self.cache[key] = result
        return result

    def _source_arrivals(self, members):
        curves = self.sources.get(members)
        if curves is None:
            curves = self.sources[members] = [self.net.flow(fid).arrival.curve() for fid in sorted(members)]
        return aggregate_all(curves)

    def _backtrack(self, inlink, members):
        # shared tandem plus the members split by the link they reach its source from
        key = (inlink, members)
        hit = self.backtrack.get(key)
        if hit is None:
            shared = shared_tandem(self.net, inlink, members)
            src = shared[0]
            by_pred = {}
            for fid in members:
                h = self.net.hop(fid, src)
                pred = self.net.flow(fid).path[h - 1] if h > 0 else None
                by_pred.setdefault(pred, set()).add(fid)
            order = sorted(by_pred, key=lambda p: -1 if p is None else p)
            hit = self.backtrack[key] = (shared, [(pred, frozenset(by_pred[pred])) for pred in order])
        return hit

    def _arrival_bound(self, inlink, members):
        shared, split = self._backtrack(inlink, members)
        src = shared[0]
        los = self.left_over_set(shared, members, 1)
        if not los:
            raise UnboundedResult("every left-over alternative upstream is unbounded")
        parts = [self.arrival_bound(src, pred, group) for pred, group in split]
        sums = []
        for combo in product(*parts):
            sums.append(aggregate_all(combo))
        sums = _dedupe(sums)
        alts = []
        for a in sums:
            for lo in los:
                try:
                    alts.append(deconvolve(a, lo))
                except UnboundedResult:
                    pass
        alts = _dedupe(alts)
        if not alts:
            raise UnboundedResult("arrival bound diverges on every alternative")
        if self.opts.use_convolution_of_alternatives and len(alts) > 1:
            acc = alts[0]
            for c in alts[1:]:
                acc = convolve(acc, c)
            alts = [acc]
        if self.cap:
            bmax = self.backlog.get(inlink)
            if bmax is not None:
                alts = _dedupe([cap_burst(a, bmax) for a in alts])
        return alts

    # --- delay ---------------------------------------------------------------

    def delay(self):
        flow = self.net.flow(self.foi)
        los = self.left_over_set(flow.path, frozenset([self.foi]), 0)
        self.structural += 1
        alpha = flow.arrival.curve()
        best = None
        for lo in los:
            try:
                d = horizontal_deviation(alpha, lo)
            except UnboundedResult:
                continue
            if best is None or d < best[0] or (d == best[0] and self.masks[lo] < best[1]):
                best = (d, self.masks[lo])
        return best


def analyze_flow(net, foi, opts=None, backlog=None):
    """Delay bound of flow ``foi`` under ``opts`` (EXHAUSTIVE by default)."""
    opts = opts or AnalysisOptions()
    if backlog is None:
        backlog = {}
        if opts.use_burst_cap and opts.kind is AnalysisKind.EXHAUSTIVE:
            backlog = tfa_backlog_bounds(net)
    counter = OpCounter()
    engine = _Engine(net, foi, opts, backlog)
    start = time.perf_counter_ns()
    with counting(counter):
        best = engine.delay()
    wall = time.perf_counter_ns() - start
    return AnalysisResult(
        flow=foi,
        kind=opts.kind,
        delay=None if best is None else best[0],
        ops=counter,
        structural_ops=engine.structural,
        wall_ns=wall,
        best_mask=None if best is None else best[1],
    )


def sfa_delay_bound(net, foi, opts=None):
    opts = opts or AnalysisOptions()
    return analyze_flow(net, foi, _with_kind(opts, AnalysisKind.SFA))


def pmoo_delay_bound(net, foi, opts=None):
    opts = opts or AnalysisOptions()
    return analyze_flow(net, foi, _with_kind(opts, AnalysisKind.PMOO))


def exhaustive_delay_bound(net, foi, opts=None):
    opts = opts or AnalysisOptions()
    return analyze_flow(net, foi, _with_kind(opts, AnalysisKind.EXHAUSTIVE))


def _with_kind(opts, kind):
    return replace(opts, kind=kind)


def exhaustive_left_over_set(net, tandem, members, foi, opts=None):
    """The set of left-over curves of ``tandem`` for aggregate ``members``."""
    opts = _with_kind(opts or AnalysisOptions(use_burst_cap=False), AnalysisKind.EXHAUSTIVE)
    backlog = {}
    if opts.use_burst_cap:
        backlog = tfa_backlog_bounds(net)
    return _Engine(net, foi, opts, backlog).left_over_set(tuple(tandem), frozenset(members), 1)


def arrival_bound(net, server, inlink, members, foi, opts=None):
    """Alternative arrival curves of ``members`` at ``server`` via ``inlink``."""
    opts = opts or AnalysisOptions(use_burst_cap=False)
    backlog = {}
    if opts.use_burst_cap and opts.kind is AnalysisKind.EXHAUSTIVE:
        backlog = tfa_backlog_bounds(net)
    return _Engine(net, foi, opts, backlog).arrival_bound(server, inlink, frozenset(members))
