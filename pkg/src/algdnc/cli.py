"""Command-line front end.

Subcommands::

    algdnc gen      --model glp|afdx [--devices N] [--seed S] [--flows-per-server K] [-o FILE]
    algdnc analyze  FILE --analysis sfa|pmoo|exhaustive [toggles] [--flows 1,2] [--threads N] [-o CSV]
    algdnc compare  A.csv B.csv [-o CSV]
    algdnc count    --linext K H | --decompositions N | --equations FILE [--foi ID] | --bound KIND P...
    algdnc bench    FILE --analysis sfa,exhaustive [toggles] [--repeat R] [--threads N] [-o CSV]

Exit codes: 0 success, 2 bad arguments, 3 generation failure, 4 unreadable
or invalid network file. Output files are written to a temporary file and
renamed, so a failed run never leaves a partial CSV behind.
"""

import argparse
import csv
import io
import math
import os
import statistics
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path

from gmpy2 import mpq

from algdnc.analysis import AnalysisKind, AnalysisOptions, analyze_flow, tfa_backlog_bounds
from algdnc.combinatorics import (
    ENUMERATION_LIMIT,
    KaryTreeSpec,
    avg_subtandems,
    count_decompositions,
    count_permissible_equations,
    hook_length_count,
    kary_tree_poset,
    op_count_bound,
    varol_rotem_count,
)
from algdnc.errors import ConnectivityLost, DncError, NoRoutableFlows, TooLarge
from algdnc.network import (
    AfdxParams,
    GlpParams,
    afdx_generate,
    dumps,
    glp_network,
    load_network,
    save_network,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_GENERATION = 3
EXIT_INPUT = 4

RUN_HEADER = [
    "network", "flow", "analysis", "cache", "convolution", "burst_cap",
    "delay_s", "ops_total", "wall_ns", "delay_exact",
]
UNBOUNDED = "unbounded"


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, f"{self.prog}: {message}")


# --- formatting -----------------------------------------------------------------


def format_delay(x, digits=12):
    """Decimal text with ``digits`` significant digits.

    >>> format_delay(Fraction(13, 4))
    '3.25'
    >>> format_delay(Fraction(2, 3))
    '0.666666666667'
    """
    if x is None:
        return UNBOUNDED
    with localcontext() as ctx:
        ctx.prec = digits
        d = Decimal(int(x.numerator)) / Decimal(int(x.denominator))
    return format(d.normalize(), "f")


def format_exact(x):
    if x is None:
        return UNBOUNDED
    return f"{x.numerator}/{x.denominator}"


def format_number(x):
    if isinstance(x, (Fraction, mpq)):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_output(text, path):
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(rows, header=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _onoff(flag):
    return "on" if flag else "off"


# --- shared argument handling ----------------------------------------------------


def _seed(args):
    env = os.environ.get("DNC_SEED")
    if env is None:
        return args.seed
    try:
        return int(env)
    except ValueError:
        raise CliError(EXIT_USAGE, f"DNC_SEED must be an integer, got {env!r}") from None


def _load(path):
    try:
        return load_network(path)
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read {path}: {exc.strerror or exc}") from None
    except DncError as exc:
        raise CliError(EXIT_INPUT, f"{path}: {exc}") from None


def _kinds(text):
    kinds = []
    for part in text.split(","):
        try:
            kinds.append(AnalysisKind(part.strip().lower()))
        except ValueError:
            raise CliError(EXIT_USAGE, f"unknown analysis {part!r}") from None
    return kinds


def _options(args, kind):
    return AnalysisOptions(
        kind=kind,
        use_cache=not args.no_cache,
        use_convolution_of_alternatives=not args.no_convolution,
        use_burst_cap=not args.no_burst_cap,
    )


def _flow_ids(net, text):
    if text is None:
        return [f.id for f in net.flows]
    known = {f.id for f in net.flows}
    ids = []
    for part in text.split(","):
        part = part.strip()
        if not part.isdigit() or int(part) not in known:
            raise CliError(EXIT_USAGE, f"unknown flow id {part!r}")
        ids.append(int(part))
    return ids


def _positive(name, value):
    if value < 1:
        raise CliError(EXIT_USAGE, f"{name} must be >= 1")
    return value


# --- analysis runs ---------------------------------------------------------------


def _analyze_one(task):
    net, fid, opts, backlog = task
    return analyze_flow(net, fid, opts, backlog=backlog)


def _run_flows(net, fids, opts, threads):
    """AnalysisResults in ``fids`` order; worker processes when ``threads`` > 1."""
    backlog = {}
    if opts.use_burst_cap and opts.kind is AnalysisKind.EXHAUSTIVE:
        backlog = tfa_backlog_bounds(net)
    tasks = [(net, fid, opts, backlog) for fid in fids]
    if threads <= 1 or len(tasks) <= 1:
        return [_analyze_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_analyze_one, tasks, chunksize=max(1, len(tasks) // (4 * threads))))


def _record(network, opts, result, wall_ns=None):
    return [
        network,
        result.flow,
        opts.kind.value,
        _onoff(opts.use_cache),
        _onoff(opts.use_convolution_of_alternatives),
        _onoff(opts.use_burst_cap),
        format_delay(result.delay),
        result.ops.total,
        result.wall_ns if wall_ns is None else wall_ns,
        format_exact(result.delay),
    ]


# --- subcommands -------------------------------------------------------------------


def cmd_gen(args):
    seed = _seed(args)
    try:
        if args.model == "glp":
            if args.devices is None:
                raise CliError(EXIT_USAGE, "--devices is required for the glp model")
            _positive("--devices", args.devices)
            _positive("--flows-per-server", args.flows_per_server)
            params = GlpParams(devices=args.devices, m0=min(GlpParams.m0, args.devices), seed=seed)
            net = glp_network(params, flows_per_server=args.flows_per_server)
        else:
            net = afdx_generate(AfdxParams(seed=seed))
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    except (ConnectivityLost, NoRoutableFlows, DncError) as exc:
        raise CliError(EXIT_GENERATION, f"generation failed: {exc}") from None
    if not net.graph.servers:
        raise CliError(EXIT_GENERATION, "generation failed: the device graph has no links")
    if args.output is None:
        sys.stdout.write(dumps(net))
    else:
        save_network(net, args.output)
    summary = _csv_text(
        [[args.model, len(net.graph.devices()), len(net.graph.servers), len(net.flows), seed]],
        ["model", "devices", "servers", "flows", "seed"],
    )
    (sys.stderr if args.output is None else sys.stdout).write(summary)
    return EXIT_OK


def cmd_analyze(args):
    (kind,) = _single_kind(args.analysis)
    _positive("--threads", args.threads)
    net = _load(args.file)
    fids = _flow_ids(net, args.flows)
    opts = _options(args, kind)
    results = _run_flows(net, fids, opts, args.threads)
    network = Path(args.file).stem
    _write_output(_csv_text([_record(network, opts, r) for r in results], RUN_HEADER), args.output)
    return EXIT_OK


def _single_kind(text):
    kinds = _kinds(text)
    if len(kinds) != 1:
        raise CliError(EXIT_USAGE, "analyze takes exactly one analysis")
    return kinds


def cmd_bench(args):
    kinds = _kinds(args.analysis)
    if args.repeat < 1:
        raise CliError(EXIT_USAGE, "--repeat must be >= 1")
    _positive("--threads", args.threads)
    net = _load(args.file)
    fids = _flow_ids(net, args.flows)
    network = Path(args.file).stem
    rows = []
    for kind in kinds:
        opts = _options(args, kind)
        per_flow = {fid: [] for fid in fids}
        totals = []
        last = None
        for _ in range(args.repeat):
            start = time.perf_counter_ns()
            results = _run_flows(net, fids, opts, args.threads)
            totals.append(time.perf_counter_ns() - start)
            for r in results:
                per_flow[r.flow].append(r.wall_ns)
            if last is not None and [r.delay for r in results] != [r.delay for r in last]:
                raise RuntimeError("delay bounds differ between repeats")
            last = results
        for r in last:
            rows.append(_record(network, opts, r, wall_ns=int(statistics.median(per_flow[r.flow]))))
        ops = sum(r.ops.total for r in last)
        rows.append([
            network, "ALL", kind.value, _onoff(opts.use_cache), _onoff(opts.use_convolution_of_alternatives),
            _onoff(opts.use_burst_cap), "", ops, int(statistics.median(totals)), "",
        ])
    _write_output(_csv_text(rows, RUN_HEADER), args.output)
    return EXIT_OK


def _read_runs(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read {path}: {exc.strerror or exc}") from None
    out = {}
    for row in rows:
        if row.get("flow") in (None, "ALL"):
            continue
        try:
            out[row["flow"]] = _parse_delay(row)
        except (KeyError, ValueError, ZeroDivisionError):
            raise CliError(EXIT_INPUT, f"{path}: malformed row {row!r}") from None
    return out


def _parse_delay(row):
    exact = row.get("delay_exact")
    text = exact if exact else row["delay_s"]
    if text == UNBOUNDED:
        return None
    return Fraction(text)


def _percentile(values, q):
    # nearest-rank percentile
    ordered = sorted(values)
    return ordered[max(0, math.ceil(q * len(ordered)) - 1)]


def cmd_compare(args):
    a = _read_runs(args.a)
    b = _read_runs(args.b)
    if set(a) != set(b):
        only = sorted(set(a) ^ set(b), key=_flow_sort_key)
        raise CliError(EXIT_USAGE, f"flow ids differ between inputs (e.g. {', '.join(only[:5])})")
    rows = []
    devs = []
    for fid in sorted(a, key=_flow_sort_key):
        x, y = a[fid], b[fid]
        if x is None or y is None:
            dev = None
        elif y == 0:
            dev = Fraction(0) if x == 0 else None
        else:
            dev = (x - y) / y
        if dev is not None:
            devs.append(dev)
        rows.append([fid, format_delay(x), format_delay(y), "undefined" if dev is None else format_delay(dev)])
    if devs:
        summary = [
            ("mean", sum(devs) / len(devs)),
            ("max", max(devs)),
            ("p99", _percentile(devs, Fraction(99, 100))),
        ]
        for name, v in summary:
            rows.append([name, "", "", format_delay(v)])
    _write_output(_csv_text(rows, ["flow", "delay_a", "delay_b", "deviation"]), args.output)
    return EXIT_OK


def _flow_sort_key(fid):
    return (0, int(fid)) if fid.isdigit() else (1, fid)


def cmd_count(args):
    if args.linext is not None:
        k, h = args.linext
        try:
            spec = KaryTreeSpec(k, h)
        except ValueError as exc:
            raise CliError(EXIT_USAGE, str(exc)) from None
        p = kary_tree_poset(spec)
        try:
            value, method = varol_rotem_count(p, limit=ENUMERATION_LIMIT), "enumerated"
        except TooLarge:
            value, method = hook_length_count(p), "closed_form"
        text = _csv_text([[k, h, spec.nodes, value, method]], ["k", "h", "nodes", "count", "method"])
    elif args.decompositions is not None:
        n = _positive("--decompositions", args.decompositions)
        text = _csv_text(
            [[n, count_decompositions(n), format_number(avg_subtandems(n))]],
            ["n", "decompositions", "avg_subtandems"],
        )
    elif args.equations is not None:
        net = _load(args.equations)
        fids = _flow_ids(net, None if args.foi is None else str(args.foi))
        text = _csv_text([[fid, count_permissible_equations(net, fid)] for fid in fids], ["flow", "equations"])
    else:
        kind, *raw = args.bound
        try:
            params = [int(x) for x in raw]
            value = op_count_bound(kind, *params)
        except (ValueError, TypeError) as exc:
            raise CliError(EXIT_USAGE, f"--bound: {exc}") from None
        text = _csv_text([[kind, " ".join(raw), format_number(value)]], ["kind", "params", "value"])
    _write_output(text, args.output)
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def _add_toggles(p):
    p.add_argument("--no-cache", action="store_true", help="disable arrival-bound caching")
    p.add_argument("--no-convolution", action="store_true", help="keep alternative arrival bounds separate")
    p.add_argument("--no-burst-cap", action="store_true", help="do not cap bursts at backlog bounds")
    p.add_argument("--flows", help="comma-separated flow ids (default: all)")
    p.add_argument("--threads", type=int, default=1, help="worker processes across flows")
    p.add_argument("-o", "--output", help="CSV file (default: stdout)")


def build_parser():
    parser = _Parser(prog="algdnc", description="Network calculus delay bounds for feed-forward networks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a network file")
    g.add_argument("--model", choices=["glp", "afdx"], required=True)
    g.add_argument("--devices", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--flows-per-server", type=int, default=4)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    a = sub.add_parser("analyze", help="per-flow delay bounds as CSV")
    a.add_argument("file")
    a.add_argument("--analysis", default="exhaustive")
    _add_toggles(a)
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("compare", help="relative deviation (a-b)/b per flow")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_compare)

    n = sub.add_parser("count", help="combinatorial counts and operation-count bounds")
    which = n.add_mutually_exclusive_group(required=True)
    which.add_argument("--linext", nargs=2, type=int, metavar=("K", "H"))
    which.add_argument("--decompositions", type=int, metavar="N")
    which.add_argument("--equations", metavar="FILE")
    which.add_argument("--bound", nargs="+", metavar=("KIND", "P"))
    n.add_argument("--foi", type=int)
    n.add_argument("-o", "--output")
    n.set_defaults(func=cmd_count)

    b = sub.add_parser("bench", help="median wall times over repeated runs")
    b.add_argument("file")
    b.add_argument("--analysis", default="exhaustive", help="comma-separated analyses")
    b.add_argument("--repeat", type=int, default=3)
    _add_toggles(b)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
