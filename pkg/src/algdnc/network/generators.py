"""Topology and flow generators.

Pipeline: a device graph (GLP or AFDX-like) becomes a server graph with one
server per output port, cyclic dependencies are broken by up/down turn
prohibition, and flows are routed on shortest server paths.
"""

import random
from collections import deque
from dataclasses import dataclass, field

from algdnc.curve import RateLatencyParams, TokenBucketParams, to_fraction
from algdnc.errors import ConnectivityLost, NoRoutableFlows
from algdnc.network.model import DeviceGraph, Flow, Network, ServerGraph

GLP_SERVICE = RateLatencyParams(10**10, 0)
GLP_ARRIVAL = TokenBucketParams(5 * 10**6, 5 * 10**6)


@dataclass(frozen=True)
class GlpParams:
    """Generalized linear preference growth; ``devices`` is the final node count."""

    devices: int = 20
    m0: int = 20
    m: int = 1
    p: float = 0.4695
    beta_glp: float = 0.6447
    seed: int = 0

    def __post_init__(self):
        if self.devices < 1:
            raise ValueError("devices must be >= 1")
        if not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")
        if self.beta_glp >= 1:
            raise ValueError("beta_glp must be < 1")
        if self.m < 1 or self.m0 < self.m:
            raise ValueError("need m >= 1 and m0 >= m")


@dataclass(frozen=True)
class AfdxParams:
    core_switches: int = 16
    end_systems: int = 125
    server_rate: float = 10**8
    server_latency: float = 0
    flow_count: int = 500
    flow_arrival: TokenBucketParams = field(default_factory=lambda: TokenBucketParams(10**6, 10**6))
    core_density: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.core_switches < 1 or self.end_systems < 1 or self.flow_count < 0:
            raise ValueError("counts must be positive")
        if not 0 < self.core_density <= 1:
            raise ValueError("core_density must lie in (0, 1]")


def _random_tree(nodes, rng):
    order = list(nodes)
    rng.shuffle(order)
    return [(order[i], order[rng.randrange(i)]) for i in range(1, len(order))]


def _weighted_pick(cands, weight, rng):
    total = sum(weight(c) for c in cands)
    x = rng.random() * total
    for c in cands:
        x -= weight(c)
        if x < 0:
            return c
    return cands[-1]


def glp_generate(params):
    """Grow a connected device graph by generalized linear preference.

    >>> g = glp_generate(GlpParams(devices=20, seed=3))
    >>> len(g.devices), g.is_connected()
    (20, True)
    """
    rng = random.Random(params.seed)
    n0 = min(params.m0, params.devices)
    nodes = list(range(n0))
    adj = {v: set() for v in nodes}
    for u, v in _random_tree(nodes, rng):
        adj[u].add(v)
        adj[v].add(u)

    def weight(v):
        return len(adj[v]) - params.beta_glp

    while len(nodes) < params.devices:
        if rng.random() < params.p:
            for _ in range(params.m):
                pairs_left = len(nodes) * (len(nodes) - 1) // 2 - sum(len(a) for a in adj.values()) // 2
                if pairs_left == 0:
                    break
                u = _weighted_pick([v for v in nodes if len(adj[v]) < len(nodes) - 1], weight, rng)
                v = _weighted_pick([w for w in nodes if w != u and w not in adj[u]], weight, rng)
                adj[u].add(v)
                adj[v].add(u)
        else:
            new = len(nodes)
            targets = set()
            while len(targets) < min(params.m, len(nodes)):
                targets.add(_weighted_pick([v for v in nodes if v not in targets], weight, rng))
            adj[new] = set()
            for t in targets:
                adj[new].add(t)
                adj[t].add(new)
            nodes.append(new)
    edges = {(u, v) for u in adj for v in adj[u] if u < v}
    return DeviceGraph(nodes, edges)


def device_to_server_graph(g, service):
    """One server per directed device edge; links follow non-reversing turns.

    >>> sg = device_to_server_graph(DeviceGraph("abc", [("a", "b"), ("b", "c")]), RateLatencyParams(1, 0))
    >>> sorted((sg.origin[x], sg.origin[y]) for x, y in sg.links)
    [(('a', 'b'), ('b', 'c')), (('c', 'b'), ('b', 'a'))]
    """
    directed = sorted([(u, v) for u, v in g.edges] + [(v, u) for u, v in g.edges])
    sid = {e: i for i, e in enumerate(directed)}
    links = set()
    for u, v in directed:
        for w in g.neighbors(v):
            if w != u:
                links.add((sid[u, v], sid[v, w]))
    return ServerGraph({i: service for i in sid.values()}, links, {i: e for e, i in sid.items()})


def _device_graph_of(sg):
    devices = sg.devices()
    return DeviceGraph(devices, {tuple(e) for e in sg.origin.values()})


def device_ranks(g):
    """Total order for up/down routing: BFS level from the best-connected device,
    then higher degree, then id. Every non-root device has a lower-ranked neighbour."""
    root = min(g.devices, key=lambda d: (-g.degree(d), d))
    level = {root: 0}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for w in g.neighbors(u):
            if w not in level:
                level[w] = level[u] + 1
                queue.append(w)
    far = len(g.devices) + 1
    order = sorted(g.devices, key=lambda d: (level.get(d, far), -g.degree(d), d))
    return {d: i for i, d in enumerate(order)}


def feed_forwardize(sg):
    """Remove turns until the server graph is acyclic, keeping device reachability.

    A turn u->v->w is prohibited when v ranks after both u and w (descending
    and then climbing again); this is up/down routing on ``device_ranks``.
    Acyclic inputs come back unchanged.
    """
    if sg.is_acyclic():
        return sg
    g = _device_graph_of(sg)
    rank = device_ranks(g)
    removed = []
    for a, b in sg.links:
        u, v = sg.origin[a]
        _, w = sg.origin[b]
        if rank[v] > rank[u] and rank[v] > rank[w]:
            removed.append((a, b))
    out = sg.without_links(removed)
    check_device_reachability(sg, out)
    return out


def _reachable_devices(sg, src):
    start = [s for s, (u, _) in sg.origin.items() if u == src]
    seen = set(start)
    queue = deque(start)
    while queue:
        s = queue.popleft()
        for t in sg.successors(s):
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return {sg.origin[s][1] for s in seen} - {src}


def check_device_reachability(before, after):
    for d in before.devices():
        lost = _reachable_devices(before, d) - _reachable_devices(after, d)
        if lost:
            raise ConnectivityLost(f"device {d} can no longer reach {sorted(lost)[:5]}")


def shortest_server_path(sg, src, dst):
    """Lexicographically smallest among the shortest server paths from device
    ``src`` to device ``dst``, or None."""
    targets = [s for s, (_, v) in sg.origin.items() if v == dst]
    dist = {s: 0 for s in targets}
    queue = deque(targets)
    while queue:
        s = queue.popleft()
        for p in sg.predecessors(s):
            if p not in dist:
                dist[p] = dist[s] + 1
                queue.append(p)
    starts = [s for s, (u, _) in sg.origin.items() if u == src and s in dist]
    if not starts:
        return None
    best = min(dist[s] for s in starts)
    cur = min(s for s in starts if dist[s] == best)
    path = [cur]
    while dist[cur] > 0:
        cur = min(t for t in sg.successors(cur) if dist.get(t) == dist[cur] - 1)
        path.append(cur)
    return tuple(path)


def route_flows(sg, count, arrival, seed, endpoints=None, first_id=0):
    """Route ``count`` flows between random distinct reachable device pairs.

    ``endpoints`` restricts sources and sinks to a subset of devices.
    """
    if count == 0:
        return []
    rng = random.Random(seed)
    devices = sorted(endpoints) if endpoints is not None else sg.devices()
    pool = set(devices)
    reach = {d: _reachable_devices(sg, d) & pool for d in devices}
    if not any(reach.values()):
        raise NoRoutableFlows("no pair of devices is connected by a server path")
    flows = []
    while len(flows) < count:
        src = rng.choice(devices)
        dst = rng.choice(devices)
        if src == dst or dst not in reach[src]:
            continue
        path = shortest_server_path(sg, src, dst)
        flows.append(Flow(first_id + len(flows), arrival, path))
    return flows


def glp_network(params, flows_per_server=4, service=GLP_SERVICE, arrival=GLP_ARRIVAL):
    """GLP device graph -> feed-forward server graph -> 1:``flows_per_server`` flows.

    >>> net = glp_network(GlpParams(devices=20, seed=1))
    >>> len(net.graph.servers), len(net.flows)
    (38, 152)
    """
    g = glp_generate(params)
    sg = feed_forwardize(device_to_server_graph(g, service))
    flows = route_flows(sg, flows_per_server * len(sg.servers), arrival, f"flows-{params.seed}")
    return Network(sg, flows)


def afdx_device_graph(params):
    rng = random.Random(params.seed)
    n = params.core_switches
    switches = list(range(n))
    edges = {tuple(sorted(e)) for e in _random_tree(switches, rng)}
    for u in switches:
        for v in switches[u + 1:]:
            if rng.random() < params.core_density:
                edges.add((u, v))
    perm = switches[:]
    rng.shuffle(perm)
    ends = list(range(n, n + params.end_systems))
    for i, e in enumerate(ends):
        edges.add((perm[i % n], e))
    return DeviceGraph(switches + ends, edges), ends


def afdx_generate(params):
    """A dense switch core with end systems at the periphery and unicast flows
    between end systems.

    >>> net = afdx_generate(AfdxParams(core_switches=4, end_systems=6, flow_count=3, seed=2))
    >>> len(net.flows), len({f.id for f in net.flows})
    (3, 3)
    """
    g, ends = afdx_device_graph(params)
    service = RateLatencyParams(to_fraction(params.server_rate), to_fraction(params.server_latency))
    sg = feed_forwardize(device_to_server_graph(g, service))
    flows = route_flows(sg, params.flow_count, params.flow_arrival, f"flows-{params.seed}", endpoints=ends)
    return Network(sg, flows)
