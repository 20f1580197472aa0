"""Per-server backlog bounds from a total-flow style pass.

Servers are visited in topological order. The arrivals at a server are
summed per inlink; the traffic on one inlink is bounded by the smaller of
(a) the upstream server's whole output bound and (b) the sum of per-flow
bounds, each flow's burst grown by its rate times the delay bounds of the
servers it already crossed. The backlog bound is the vertical deviation
between the server's total arrivals and its service curve.
"""

from algdnc.curve import token_bucket, zero_curve
from algdnc.errors import UnboundedResult
from algdnc.minplus import (
    aggregate,
    counting,
    deconvolve,
    horizontal_deviation,
    minimum,
    vertical_deviation,
)


def tfa_backlog_bounds(net):
    """Backlog bound per server; None where the pass finds no finite bound.

    Runs with operation counting suspended: it is shared by all flows of
    an analysis run rather than charged to any of them.

    >>> from algdnc.network import tandem_network
    >>> from algdnc.curve import RateLatencyParams as RL, TokenBucketParams as TB
    >>> net = tandem_network([RL(25, 5)], [(TB(5, 5), 0, 0), (TB(5, 5), 0, 0)])
    >>> tfa_backlog_bounds(net)
    {0: mpq(60,1)}
    """
    with counting(None):
        return _pass(net)


def tfa_backlog_bound(net, server):
    return tfa_backlog_bounds(net)[server]


def _pass(net):
    g = net.graph
    delay = {}
    output = {}
    backlog = {}
    for s in g.topological_order():
        beta = g.service(s).curve()
        by_pred = {}
        for fid in net.flows_at(s):
            f = net.flow(fid)
            h = net.hop(fid, s)
            by_pred.setdefault(f.path[h - 1] if h > 0 else None, []).append(fid)
        total = zero_curve()
        for pred in sorted(by_pred, key=lambda p: -1 if p is None else p):
            part = _inlink_bound(net, pred, by_pred[pred], s, delay, output)
            if part is None:
                total = None
                break
            total = aggregate(total, part)
        if total is None:
            delay[s] = output[s] = backlog[s] = None
            continue
        try:
            delay[s] = horizontal_deviation(total, beta)
            backlog[s] = vertical_deviation(total, beta)
            output[s] = deconvolve(total, beta)
        except UnboundedResult:
            delay[s] = output[s] = backlog[s] = None
    return backlog


def _inlink_bound(net, pred, fids, s, delay, output):
    if pred is None:
        total = zero_curve()
        for fid in fids:
            total = aggregate(total, net.flow(fid).arrival.curve())
        return total
    per_flow = zero_curve()
    for fid in fids:
        f = net.flow(fid)
        upstream = f.path[: net.hop(fid, s)]
        ds = [delay[u] for u in upstream]
        if any(d is None for d in ds):
            per_flow = None
            break
        per_flow = aggregate(per_flow, token_bucket(f.arrival.rate, f.arrival.burst + f.arrival.rate * sum(ds)))
    upstream_out = output.get(pred)
    if per_flow is None:
        return upstream_out
    if upstream_out is None:
        return per_flow
    return minimum(per_flow, upstream_out)
