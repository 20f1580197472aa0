"""Device graphs, server graphs, flows and the validated network bundle."""

from dataclasses import dataclass

import networkx as nx

from algdnc.curve import RateLatencyParams, TokenBucketParams
from algdnc.errors import ValidationError


def _edge(u, v):
    return (u, v) if u <= v else (v, u)


class DeviceGraph:
    """Undirected simple graph of devices.

    >>> g = DeviceGraph([0, 1, 2], [(1, 0), (1, 2)])
    >>> sorted(g.edges), g.degree(1), g.is_connected()
    ([(0, 1), (1, 2)], 2, True)
    """

    def __init__(self, devices, edges):
        self.devices = frozenset(devices)
        norm = set()
        for u, v in edges:
            if u == v:
                raise ValidationError("simple-graph", f"self-loop at device {u}")
            if u not in self.devices or v not in self.devices:
                raise ValidationError("simple-graph", f"edge {u}-{v} uses an unknown device")
            norm.add(_edge(u, v))
        self.edges = frozenset(norm)
        self._adj = {d: set() for d in self.devices}
        for u, v in self.edges:
            self._adj[u].add(v)
            self._adj[v].add(u)

    def neighbors(self, d):
        return sorted(self._adj[d])

    def degree(self, d):
        return len(self._adj[d])

    def to_networkx(self):
        g = nx.Graph()
        g.add_nodes_from(self.devices)
        g.add_edges_from(self.edges)
        return g

    def is_connected(self):
        return len(self.devices) <= 1 or nx.is_connected(self.to_networkx())

    def __eq__(self, other):
        return isinstance(other, DeviceGraph) and (self.devices, self.edges) == (other.devices, other.edges)

    def __hash__(self):
        return hash((self.devices, self.edges))

    def __repr__(self):
        return f"DeviceGraph({len(self.devices)} devices, {len(self.edges)} edges)"


class ServerGraph:
    """Directed graph of servers, each with a rate-latency service curve.

    ``origin`` maps a server to the directed device edge whose output port it
    models; it is empty for graphs read from disk.
    """

    def __init__(self, servers, links, origin=None):
        self.servers = dict(sorted(servers.items()))
        self.links = frozenset(links)
        self.origin = dict(origin or {})
        for a, b in self.links:
            if a == b:
                raise ValidationError("link-distinct", f"link {a}->{b} is a self-loop")
            if a not in self.servers or b not in self.servers:
                raise ValidationError("link-endpoints", f"link {a}->{b} names an unknown server")
        self._succ = {s: [] for s in self.servers}
        self._pred = {s: [] for s in self.servers}
        for a, b in sorted(self.links):
            self._succ[a].append(b)
            self._pred[b].append(a)

    def successors(self, s):
        return self._succ[s]

    def predecessors(self, s):
        return self._pred[s]

    def service(self, s):
        return self.servers[s]

    def to_networkx(self):
        g = nx.DiGraph()
        g.add_nodes_from(self.servers)
        g.add_edges_from(self.links)
        return g

    def is_acyclic(self):
        return nx.is_directed_acyclic_graph(self.to_networkx())

    def topological_order(self):
        """Servers in a deterministic topological order (smallest id first)."""
        return list(nx.lexicographical_topological_sort(self.to_networkx()))

    def devices(self):
        return sorted({d for e in self.origin.values() for d in e})

    def without_links(self, removed):
        return ServerGraph(self.servers, self.links - set(removed), self.origin)

    def __eq__(self, other):
        return isinstance(other, ServerGraph) and (self.servers, self.links) == (other.servers, other.links)

    def __repr__(self):
        return f"ServerGraph({len(self.servers)} servers, {len(self.links)} links)"


@dataclass(frozen=True)
class Flow:
    """A unicast flow: token-bucket arrivals along a fixed server path."""

    id: int
    arrival: TokenBucketParams
    path: tuple

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(self.path))

    @property
    def source(self):
        return self.path[0]

    @property
    def sink(self):
        return self.path[-1]


class Network:
    """A server graph together with its flows; validated on construction.

    Besides the raw data it keeps a few lookups the analyses rely on:
    the flows crossing each server and each flow's hop index.
    """

    def __init__(self, graph, flows, feed_forward=True):
        self.graph = graph
        self.flows = tuple(sorted(flows, key=lambda f: f.id))
        self.feed_forward = feed_forward
        self.validate()
        self._by_id = {f.id: f for f in self.flows}
        self._at = {s: [] for s in graph.servers}
        self._hop = {}
        for f in self.flows:
            for i, s in enumerate(f.path):
                self._at[s].append(f.id)
                self._hop[f.id, s] = i

    def validate(self):
        seen = set()
        for f in self.flows:
            if f.id in seen:
                raise ValidationError("flow-ids-unique", f"flow id {f.id} repeats")
            seen.add(f.id)
            if not f.path:
                raise ValidationError("flow-path-nonempty", f"flow {f.id} has no servers")
            if len(set(f.path)) != len(f.path):
                raise ValidationError("flow-path-repetition-free", f"flow {f.id} revisits a server")
            for s in f.path:
                if s not in self.graph.servers:
                    raise ValidationError("flow-path-servers", f"flow {f.id} uses unknown server {s}")
            for a, b in zip(f.path, f.path[1:]):
                if (a, b) not in self.graph.links:
                    raise ValidationError("flow-path-links", f"flow {f.id} hops {a}->{b} without a link")
        if self.feed_forward and not self.graph.is_acyclic():
            raise ValidationError("feed-forward", "server links contain a cycle")

    def flow(self, fid):
        return self._by_id[fid]

    def flows_at(self, server):
        return self._at[server]

    def hop(self, fid, server):
        """Index of ``server`` on the flow's path, or None."""
        return self._hop.get((fid, server))

    def __eq__(self, other):
        return isinstance(other, Network) and (self.graph, self.flows) == (other.graph, other.flows)

    def __repr__(self):
        return f"Network({len(self.graph.servers)} servers, {len(self.flows)} flows)"


def tandem_network(services, flows):
    """Chain network ``0 -> 1 -> ... -> n-1`` for tests and examples.

    ``flows`` holds ``(TokenBucketParams, first, last)`` with inclusive hop
    indices; flow ids follow list order.

    >>> net = tandem_network([RateLatencyParams(10, 1)] * 2, [(TokenBucketParams(1, 2), 0, 1)])
    >>> net.flow(0).path
    (0, 1)
    """
    servers = {i: s for i, s in enumerate(services)}
    links = [(i, i + 1) for i in range(len(services) - 1)]
    fl = [Flow(k, a, tuple(range(lo, hi + 1))) for k, (a, lo, hi) in enumerate(flows)]
    return Network(ServerGraph(servers, links), fl)
