"""Line-oriented text format for networks.

::

    dnc-network v1 feed-forward
    server <id> <rate> <latency>
    link <src> <dst>
    flow <id> <rate> <burst> <server> [<server> ...]

``#`` starts a comment. Numbers are exact decimals (``p/q`` is also read).
The ``feed-forward`` header token makes the loader reject cyclic links.
"""

import os
import tempfile
from fractions import Fraction

from algdnc.curve import RateLatencyParams, TokenBucketParams, format_fraction
from algdnc.errors import ParseError
from algdnc.network.model import Flow, Network, ServerGraph

MAGIC = "dnc-network"
VERSION = "v1"


def dumps(net):
    lines = [f"{MAGIC} {VERSION}" + (" feed-forward" if net.feed_forward else "")]
    for s, svc in net.graph.servers.items():
        lines.append(f"server {s} {format_fraction(svc.rate)} {format_fraction(svc.latency)}")
    for a, b in sorted(net.graph.links):
        lines.append(f"link {a} {b}")
    for f in net.flows:
        path = " ".join(str(s) for s in f.path)
        lines.append(f"flow {f.id} {format_fraction(f.arrival.rate)} {format_fraction(f.arrival.burst)} {path}")
    return "\n".join(lines) + "\n"


def _uint(tok, lineno):
    if not tok.isdigit():
        raise ParseError(f"expected an unsigned integer id, got {tok!r}", lineno)
    return int(tok)


def _num(tok, lineno):
    try:
        x = Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"expected a number, got {tok!r}", lineno) from None
    if x < 0:
        raise ParseError(f"negative value {tok!r}", lineno)
    return x


def loads(text):
    """Parse and validate a network; see the module docstring for the format.

    >>> net = loads("dnc-network v1\\nserver 0 10 1\\nflow 7 1 2 0\\n")
    >>> net.flow(7).arrival
    TokenBucketParams(rate=mpq(1,1), burst=mpq(2,1))
    """
    header = None
    servers, links, flows = {}, [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if header is None:
            if toks[:2] != [MAGIC, VERSION] or any(t != "feed-forward" for t in toks[2:]):
                raise ParseError(f"expected header '{MAGIC} {VERSION} [feed-forward]'", lineno)
            header = toks
            continue
        kind, args = toks[0], toks[1:]
        if kind == "server":
            if len(args) != 3:
                raise ParseError("server takes <id> <rate> <latency>", lineno)
            sid = _uint(args[0], lineno)
            if sid in servers:
                raise ParseError(f"duplicate server {sid}", lineno)
            servers[sid] = RateLatencyParams(_num(args[1], lineno), _num(args[2], lineno))
        elif kind == "link":
            if len(args) != 2:
                raise ParseError("link takes <src> <dst>", lineno)
            links.append((_uint(args[0], lineno), _uint(args[1], lineno)))
        elif kind == "flow":
            if len(args) < 4:
                raise ParseError("flow takes <id> <rate> <burst> <server> ...", lineno)
            fid = _uint(args[0], lineno)
            arrival = TokenBucketParams(_num(args[1], lineno), _num(args[2], lineno))
            flows.append(Flow(fid, arrival, tuple(_uint(t, lineno) for t in args[3:])))
        else:
            raise ParseError(f"unknown declaration {kind!r}", lineno)
    if header is None:
        raise ParseError("empty network file", 1)
    return Network(ServerGraph(servers, links), flows, feed_forward="feed-forward" in header)


def save_network(net, path):
    """Write atomically: a temporary file in the target directory is renamed."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=".dnc")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(dumps(net))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_network(path):
    with open(path) as fh:
        return loads(fh.read())
