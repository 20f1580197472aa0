"""Counting: linear extensions, decompositions, permissible equations and
closed-form operation-count bounds.

Linear extensions are enumerated with the Varol-Rotem / Knuth "Algorithm V"
adjacent-transposition scheme, compiled with numba; rooted forests can
also be counted by the hook-length formula.
"""

from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial, log2

import numba
import numpy as np

from algdnc.errors import TooLarge

ENUMERATION_LIMIT = 15
EXTENSION_BUDGET = 10**8


@dataclass(frozen=True)
class Poset:
    """Elements plus cover pairs ``(lesser, greater)``."""

    elements: tuple
    covers: frozenset

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "covers", frozenset(self.covers))
        known = set(self.elements)
        if len(known) != len(self.elements):
            raise ValueError("duplicate poset elements")
        for a, b in self.covers:
            if a not in known or b not in known or a == b:
                raise ValueError(f"bad cover pair {(a, b)!r}")
        if self.topological_order() is None:
            raise ValueError("cover relation has a cycle")

    def topological_order(self):
        below = {e: 0 for e in self.elements}
        up = {e: [] for e in self.elements}
        for a, b in self.covers:
            below[b] += 1
            up[a].append(b)
        ready = [e for e in self.elements if below[e] == 0]
        out = []
        while ready:
            e = ready.pop(0)
            out.append(e)
            for b in up[e]:
                below[b] -= 1
                if below[b] == 0:
                    ready.append(b)
        return out if len(out) == len(self.elements) else None

    @classmethod
    def chain(cls, n):
        return cls(range(n), {(i, i + 1) for i in range(n - 1)})

    @classmethod
    def antichain(cls, n):
        return cls(range(n), ())


@dataclass(frozen=True)
class KaryTreeSpec:
    k: int
    h: int

    def __post_init__(self):
        if self.k < 1 or self.h < 0:
            raise ValueError("need k >= 1 and h >= 0")

    @property
    def nodes(self):
        if self.k == 1:
            return self.h + 1
        return (self.k ** (self.h + 1) - 1) // (self.k - 1)


def kary_tree_poset(spec):
    """Full k-ary sink tree: node 0 is the sink, every child precedes its parent.

    >>> p = kary_tree_poset(KaryTreeSpec(2, 1))
    >>> len(p.elements), sorted(p.covers)
    (3, [(1, 0), (2, 0)])
    """
    covers = set()
    for child in range(1, spec.nodes):
        covers.add((child, (child - 1) // spec.k))
    return Poset(range(spec.nodes), covers)


@numba.njit(cache=True)
def _varol_rotem(prec, budget):
    # prec[l, k]: l must stay left of k; index 0 is a sentinel before everyone
    n = prec.shape[0] - 1
    a = np.arange(n + 1)
    inv = np.arange(n + 1)
    count = 0
    while True:
        count += 1
        if count > budget:
            return -1
        k = n
        moved = False
        while k > 0:
            j = inv[k]
            left = a[j - 1]
            if not prec[left, k]:
                a[j - 1] = k
                a[j] = left
                inv[k] = j - 1
                inv[left] = j
                moved = True
                break
            while j < k:
                nxt = a[j + 1]
                a[j] = nxt
                inv[nxt] = j
                j += 1
            a[k] = k
            inv[k] = k
            k -= 1
        if not moved:
            return count


def _precedence_matrix(p):
    order = p.topological_order()
    idx = {e: i + 1 for i, e in enumerate(order)}
    n = len(order)
    prec = np.zeros((n + 1, n + 1), dtype=np.bool_)
    prec[0, :] = True
    for a, b in p.covers:
        prec[idx[a], idx[b]] = True
    # transitive closure in base order (predecessors have smaller labels)
    for v in range(1, n + 1):
        for u in range(1, v):
            if prec[u, v]:
                prec[1:, v] |= prec[1:, u]
    return prec


def varol_rotem_count(p, limit=ENUMERATION_LIMIT, budget=EXTENSION_BUDGET):
    """Count linear extensions by enumerating them one transposition at a time.

    >>> varol_rotem_count(Poset.antichain(4))
    24
    """
    n = len(p.elements)
    if n > limit:
        raise TooLarge(f"{n} elements exceed the enumeration limit of {limit}")
    if n == 0:
        return 1
    got = _varol_rotem(_precedence_matrix(p), budget)
    if got < 0:
        raise TooLarge(f"more than {budget} linear extensions")
    return int(got)


def _forest_parents(p):
    parent = {}
    for a, b in p.covers:
        if a in parent:
            return None
        parent[a] = b
    return parent


def hook_length_count(p):
    """``n! / prod(subtree sizes)`` when every element has at most one upper cover.

    >>> hook_length_count(kary_tree_poset(KaryTreeSpec(2, 2)))
    80
    """
    parent = _forest_parents(p)
    if parent is None:
        raise ValueError("not a rooted forest (some element has two upper covers)")
    size = {e: 1 for e in p.elements}
    for e in p.topological_order():
        if e in parent:
            size[parent[e]] += size[e]
    denom = 1
    for s in size.values():
        denom *= s
    return factorial(len(p.elements)) // denom


def count_linear_extensions(p, method="auto", limit=ENUMERATION_LIMIT, budget=EXTENSION_BUDGET):
    """Exact linear-extension count.

    ``varol_rotem`` always enumerates; ``auto`` uses the hook-length formula
    for rooted forests and enumerates otherwise.

    >>> count_linear_extensions(Poset.chain(5), method="varol_rotem")
    1
    """
    if method == "varol_rotem":
        return varol_rotem_count(p, limit, budget)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    if _forest_parents(p) is not None:
        return hook_length_count(p)
    return varol_rotem_count(p, limit, budget)


def count_decompositions(n):
    """Number of ways to cut a tandem of ``n`` servers: ``2**(n-1)``."""
    if n < 1:
        raise ValueError("tandem length must be >= 1")
    return 1 << (n - 1)


def avg_subtandems(h):
    """Mean sub-tandem count over all decompositions of an ``h``-server tandem.

    Computed by summing binomial counts rather than quoting the closed form.

    >>> avg_subtandems(7)
    Fraction(4, 1)
    """
    if h < 1:
        raise ValueError("tandem length must be >= 1")
    total = sum(comb(h - 1, c) * (c + 1) for c in range(h))
    return Fraction(total, count_decompositions(h))


def count_permissible_equations(net, foi, include_foi_in_cross_bounds=False):
    """Leaf count of the exhaustive search tree for ``foi`` (no curve is evaluated).

    Mirrors the exhaustive recursion with caching and convolution of
    alternatives disabled: decompositions add up, sub-tandems and the
    aggregates inside them multiply.
    """
    from algdnc.analysis.engine import _decomposition, shared_tandem, xtx_segregation

    base = frozenset() if include_foi_in_cross_bounds else frozenset([foi])
    memo = {}

    def tandem_count(tandem, members):
        excluded = base | members
        total = 0
        for mask in range(1 << (len(tandem) - 1)):
            prod = 1
            for part in _decomposition(tandem, mask):
                for agg in xtx_segregation(net, part, excluded):
                    prod *= arrival_count(agg.inlink, agg.flows)
            total += prod
        return total

    def arrival_count(inlink, members):
        if inlink is None:
            return 1
        key = (inlink, members)
        if key not in memo:
            shared = shared_tandem(net, inlink, members)
            src = shared[0]
            n = tandem_count(shared, members)
            by_pred = {}
            for fid in members:
                h = net.hop(fid, src)
                by_pred.setdefault(net.flow(fid).path[h - 1] if h > 0 else None, set()).add(fid)
            for pred, group in by_pred.items():
                n *= arrival_count(pred, frozenset(group))
            memo[key] = n
        return memo[key]

    return tandem_count(net.flow(foi).path, frozenset([foi]))


def op_count_bound(kind, *params):
    """Closed-form operation-count upper bounds.

    * ``sfa_tandem h m`` and ``algdnc_tandem h`` for a tandem of ``h`` servers;
    * ``sfa_sinktree k h m`` and ``algdnc_sinktree n`` for full sink trees.

    Results are exact Fractions when rational, floats otherwise.

    >>> op_count_bound("algdnc_tandem", 3)
    25
    """
    if any(p < 1 for p in params):
        raise ValueError("parameters must be >= 1")
    if kind == "algdnc_tandem":
        (h,) = params
        return h * 2**h + 1
    if kind == "sfa_tandem":
        h, m = params
        m = Fraction(m)
        inner = sum(
            (m ** (2 - d * (d + 1)) * sum((m ** ((i - 1) * i) for i in range(d + 1, h)), Fraction(0)) for d in range(h)),
            Fraction(0),
        )
        return h * m * inner
    if kind == "sfa_sinktree":
        k, h, m = params
        return _sfa_sinktree(k, h, m)
    if kind == "algdnc_sinktree":
        (n,) = params
        if n & (n - 1) == 0:
            return 2 * n * (1 + 2 * (n.bit_length() - 1)) + 9
        return 2 * n * (1 + 2 * log2(n)) + 9
    raise ValueError(f"unknown bound kind {kind!r}")


def _sfa_sinktree(k, h, m):
    kf = Fraction(k)
    exact = True
    total = Fraction(0)
    approx = 0.0
    for d in range(h + 1):
        inner = 2 * sum((kf ** (-(i * (i - 3) // 2)) for i in range(d + 1, h + 1)), Fraction(0))
        twice = 3 * (-h * h - 8 * h + d * d + 3 * d - 2)
        if twice % 2 == 0:
            tail = kf ** (twice // 2)
            term = kf ** (-3 * d) * (inner + tail)
            total += term
            approx += float(term)
        else:
            exact = False
            approx += float(kf ** (-3 * d)) * (float(inner) + float(k) ** (twice / 2))
    scale = (h + 1) * m * 8 * kf ** (4 * h)
    if exact:
        return scale * total
    return float(scale) * approx
