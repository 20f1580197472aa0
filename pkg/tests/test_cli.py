import csv
import io
import subprocess
import sys
from fractions import Fraction

import pytest

from algdnc.cli import format_delay, main

TWO_SERVER = """dnc-network v1 feed-forward
server 0 10 1
server 1 10 1
link 0 1
flow 0 1 2 0 1
flow 1 2 4 0 1
"""


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def two_server(tmp_path):
    path = tmp_path / "two.dnc"
    path.write_text(TWO_SERVER)
    return path


@pytest.fixture(scope="module")
def small_glp(tmp_path_factory):
    path = tmp_path_factory.mktemp("nets") / "glp8.dnc"
    assert main(["gen", "--model", "glp", "--devices", "8", "--seed", "3", "-o", str(path)]) == 0
    return path


def test_format_delay():
    assert format_delay(Fraction(13, 4)) == "3.25"
    assert format_delay(Fraction(1, 3)) == "0.333333333333"
    assert format_delay(Fraction(123456789012345)) == "123456789012000"
    assert format_delay(None) == "unbounded"


# --- gen ---------------------------------------------------------------------


def test_gen_glp(capsys, tmp_path):
    out = tmp_path / "g.dnc"
    code, text, _ = run(capsys, "gen", "--model", "glp", "--devices", "20", "--seed", "1", "-o", str(out))
    assert code == 0
    (summary,) = rows(text)
    assert summary["devices"] == "20"
    assert int(summary["flows"]) == 4 * int(summary["servers"])
    assert out.read_text().startswith("dnc-network v1 feed-forward")


def test_gen_afdx(capsys, tmp_path):
    code, text, _ = run(capsys, "gen", "--model", "afdx", "--seed", "1", "-o", str(tmp_path / "a.dnc"))
    assert code == 0
    (summary,) = rows(text)
    assert (summary["devices"], summary["flows"]) == ("141", "500")


def test_gen_errors(capsys, tmp_path):
    assert run(capsys, "gen", "--model", "glp", "--devices", "0")[0] == 2
    assert run(capsys, "gen", "--model", "glp")[0] == 2
    assert run(capsys, "gen", "--model", "ring", "--devices", "4")[0] == 2
    assert run(capsys, "gen", "--model", "glp", "--devices", "1")[0] == 3


def test_gen_seed_from_environment(capsys, tmp_path, monkeypatch):
    a, b = tmp_path / "a.dnc", tmp_path / "b.dnc"
    run(capsys, "gen", "--model", "glp", "--devices", "12", "--seed", "5", "-o", str(a))
    monkeypatch.setenv("DNC_SEED", "5")
    run(capsys, "gen", "--model", "glp", "--devices", "12", "--seed", "99", "-o", str(b))
    assert a.read_text() == b.read_text()


# --- analyze -----------------------------------------------------------------


def test_analyze_two_server_example(capsys, two_server):
    code, text, _ = run(capsys, "analyze", str(two_server), "--analysis", "exhaustive")
    assert code == 0
    assert text.splitlines()[0] == "network,flow,analysis,cache,convolution,burst_cap,delay_s,ops_total,wall_ns,delay_exact"
    by_flow = {r["flow"]: r for r in rows(text)}
    assert by_flow["0"]["delay_s"] == "3.25" and by_flow["0"]["delay_exact"] == "13/4"
    _, again, _ = run(capsys, "analyze", str(two_server), "--analysis", "exhaustive", "--no-cache")
    assert [r["delay_s"] for r in rows(again)] == [r["delay_s"] for r in rows(text)]


def test_analyze_errors(capsys, two_server, tmp_path):
    assert run(capsys, "analyze", str(tmp_path / "missing.dnc"))[0] == 4
    bad = tmp_path / "bad.dnc"
    bad.write_text("dnc-network v1\nserver x\n")
    assert run(capsys, "analyze", str(bad))[0] == 4
    assert run(capsys, "analyze", str(two_server), "--analysis", "ulp")[0] == 2
    assert run(capsys, "analyze", str(two_server), "--flows", "7")[0] == 2
    assert run(capsys, "analyze", str(two_server), "--threads", "0")[0] == 2


def test_analyze_no_partial_output(capsys, tmp_path):
    out = tmp_path / "out.csv"
    assert run(capsys, "analyze", str(tmp_path / "missing.dnc"), "-o", str(out))[0] == 4
    assert not out.exists()
    assert list(tmp_path.iterdir()) == []


def test_analyze_unbounded_is_data(capsys, tmp_path):
    path = tmp_path / "hot.dnc"
    path.write_text("dnc-network v1\nserver 0 2 1\nflow 0 1 2 0\nflow 1 2 4 0\n")
    code, text, _ = run(capsys, "analyze", str(path))
    assert code == 0
    assert {r["delay_s"] for r in rows(text)} == {"unbounded"}


def test_analyze_threads_do_not_change_bounds(capsys, small_glp):
    _, one, _ = run(capsys, "analyze", str(small_glp), "--threads", "1")
    _, two, _ = run(capsys, "analyze", str(small_glp), "--threads", "2")
    assert [(r["flow"], r["delay_exact"]) for r in rows(one)] == [(r["flow"], r["delay_exact"]) for r in rows(two)]


# --- compare -----------------------------------------------------------------


def test_compare(capsys, small_glp, tmp_path):
    sfa, ex = tmp_path / "sfa.csv", tmp_path / "ex.csv"
    run(capsys, "analyze", str(small_glp), "--analysis", "sfa", "-o", str(sfa))
    run(capsys, "analyze", str(small_glp), "--analysis", "exhaustive", "-o", str(ex))
    code, text, _ = run(capsys, "compare", str(ex), str(ex))
    assert code == 0
    assert {r["deviation"] for r in rows(text)} == {"0"}
    code, text, _ = run(capsys, "compare", str(sfa), str(ex))
    got = rows(text)
    assert code == 0 and [r["flow"] for r in got[-3:]] == ["mean", "max", "p99"]
    assert all(Fraction(r["deviation"]) >= 0 for r in got)


def test_compare_disjoint_ids(capsys, two_server, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "analyze", str(two_server), "--flows", "0", "-o", str(a))
    run(capsys, "analyze", str(two_server), "--flows", "1", "-o", str(b))
    assert run(capsys, "compare", str(a), str(b))[0] == 2


# --- count -------------------------------------------------------------------


def test_count(capsys, two_server):
    code, text, _ = run(capsys, "count", "--linext", "2", "2")
    (r,) = rows(text)
    assert code == 0 and (r["count"], r["method"]) == ("80", "enumerated")
    (r,) = rows(run(capsys, "count", "--linext", "3", "3")[1])
    assert r["method"] == "closed_form"
    (r,) = rows(run(capsys, "count", "--decompositions", "6")[1])
    assert r["decompositions"] == "32"
    (r,) = rows(run(capsys, "count", "--bound", "algdnc_tandem", "3")[1])
    assert r["value"] == "25"
    (r,) = rows(run(capsys, "count", "--equations", str(two_server), "--foi", "0")[1])
    assert r["equations"] == "2"


def test_count_errors(capsys):
    assert run(capsys, "count")[0] == 2
    assert run(capsys, "count", "--decompositions", "0")[0] == 2
    assert run(capsys, "count", "--bound", "nope", "3")[0] == 2
    assert run(capsys, "count", "--linext", "0", "1")[0] == 2


# --- bench -------------------------------------------------------------------


def test_bench(capsys, small_glp):
    code, text, _ = run(capsys, "bench", str(small_glp), "--analysis", "sfa,exhaustive", "--repeat", "2")
    assert code == 0
    got = rows(text)
    assert {(r["analysis"], r["flow"]) for r in got if r["flow"] == "ALL"} == {("sfa", "ALL"), ("exhaustive", "ALL")}
    _, ex, _ = run(capsys, "analyze", str(small_glp), "--analysis", "exhaustive")
    bench_ex = [r["delay_exact"] for r in got if r["analysis"] == "exhaustive" and r["flow"] != "ALL"]
    assert bench_ex == [r["delay_exact"] for r in rows(ex)]
    assert run(capsys, "bench", str(small_glp), "--repeat", "0")[0] == 2


def test_console_entry_point(two_server):
    proc = subprocess.run(
        [sys.executable, "-m", "algdnc.cli", "analyze", str(two_server)], capture_output=True, text=True
    )
    assert proc.returncode == 0 and "13/4" in proc.stdout
