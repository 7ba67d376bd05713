import csv
import hashlib

import numpy as np
import pytest

from krongraph.cli import main, read_manifest, replay
from krongraph.core import read_initiator
from krongraph.graph import load_edge_list

FAST_FIT = ["--samples", "300", "--burn-in", "20", "--chains", "2", "--chain-steps", "200",
            "--record-every", "10", "--max-lag", "20"]


def digest(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def graph_file(tmp_path):
    path = tmp_path / "g.txt"
    assert main(["generate", "--theta", "0.9 0.6; 0.5 0.1", "-k", "7", "--seed", "1",
                 "--out", str(path)]) == 0
    return path


def test_generate_reports_expected_edges(tmp_path, capsys):
    out = tmp_path / "g.txt"
    assert main(["generate", "--theta", "0.9 0.6; 0.5 0.1", "-k", "10", "--seed", "3",
                 "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "expected_e=1668.0" in printed
    m = read_manifest(f"{out}.manifest")
    assert m["subcommand"] == "generate" and m["seed"] == "3" and m["mode"] == "fast"
    assert int(m["e"]) == load_edge_list(out).e


def test_generate_same_seed_byte_identical(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for path in (a, b):
        assert main(["generate", "--theta", "0.8 0.6; 0.5 0.3", "-k", "9", "--seed", "5",
                     "--out", str(path)]) == 0
    assert digest(a) == digest(b)


def test_generate_deterministic(tmp_path):
    out = tmp_path / "d.txt"
    assert main(["generate", "--theta", "1 1; 1 0", "-k", "5", "--mode", "deterministic",
                 "--out", str(out)]) == 0
    assert load_edge_list(out).e == 3**5


def test_generate_naive_and_theta_file(tmp_path):
    theta = tmp_path / "theta.txt"
    theta.write_text("# initiator\n2\n0.8 0.6\n0.5 0.3\n")
    out = tmp_path / "n.txt"
    assert main(["generate", "--theta-file", str(theta), "-k", "6", "--mode", "naive",
                 "--out", str(out)]) == 0


@pytest.mark.parametrize("argv", [
    ["generate", "--theta", "0.9 0.6; 0.5 0.1", "-k", "4", "--mode", "deterministic"],
    ["generate", "-k", "4"],
    ["generate", "--theta", "0.9 0.6; 0.5", "-k", "4"],
    ["generate", "--theta", "0.9 1.6; 0.5 0.1", "-k", "4"],
    ["generate", "--theta", "0.9 0.6; 0.5 0.1", "-k", "x"],
    ["generate", "--theta", "0.9 0.6; 0.5 0.1", "-k", "4", "--mode", "other"],
    ["bogus"],
    [],
])
def test_usage_errors_exit_two(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path / "x")] if argv else argv) == 2


def test_runtime_failures_exit_one(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\n1 two\n")
    assert main(["fit", str(bad), "--out", str(tmp_path / "f")]) == 1
    assert main(["stats", str(tmp_path / "missing.txt"), "--out", str(tmp_path / "s")]) == 1
    # the naive generator refuses sizes beyond its cap
    assert main(["generate", "--theta", "0.9 0.6; 0.5 0.1", "-k", "20", "--mode", "naive",
                 "--out", str(tmp_path / "z.txt")]) == 1


def test_fit_zero_iterations(tmp_path, graph_file):
    prefix = tmp_path / "fit" / "run"
    before = digest(graph_file)
    assert main(["fit", str(graph_file), "--iterations", "0", "--init", "0.5 0.5; 0.5 0.0",
                 "--out", str(prefix), *FAST_FIT]) == 0
    theta = read_initiator(f"{prefix}.theta.txt")
    np.testing.assert_array_equal(theta.values, [[0.5, 0.5], [0.5, 0.001]])
    trace = rows(f"{prefix}.trace.csv")
    assert trace[0] == ["step", "loglik", "theta_00", "theta_01", "theta_10", "theta_11"]
    assert len(trace) == 2
    assert rows(f"{prefix}.acf.csv")[0] == ["lag", "autocorrelation"]
    psr = rows(f"{prefix}.psr.csv")
    assert psr[0] == ["length", "psr"] and len(psr) > 2
    assert all(float(r[1]) >= 1.0 for r in psr[1:])
    m = read_manifest(f"{prefix}.manifest")
    assert m["status"] == "ok" and m["iterations"] == "0"
    assert digest(graph_file) == before


def test_fit_replay_is_byte_identical(tmp_path, graph_file):
    prefix = tmp_path / "run"
    assert main(["fit", str(graph_file), "--iterations", "2", "--seed", "4",
                 "--out", str(prefix), *FAST_FIT]) == 0
    first = {ext: digest(f"{prefix}.{ext}") for ext in ("theta.txt", "trace.csv", "acf.csv", "psr.csv")}
    assert replay(f"{prefix}.manifest") == 0
    again = {ext: digest(f"{prefix}.{ext}") for ext in first}
    assert first == again


def test_stats_outputs(tmp_path, graph_file, capsys):
    out = tmp_path / "stats"
    assert main(["stats", str(graph_file), "--out", str(out)]) == 0
    for kind in ("degree-in", "degree-out", "scree", "network-value",
                 "triangle-participation", "hop-plot"):
        assert rows(out / f"{kind}.csv")[0] == ["x", "y"]
    summary = dict(rows(out / "summary.csv")[1:])
    g = load_edge_list(graph_file)
    assert summary["n"] == "128" and summary["e"] == str(g.e)
    assert "effective_diameter=" in capsys.readouterr().out


def test_stats_selected_kinds(tmp_path, graph_file):
    out = tmp_path / "stats"
    assert main(["stats", str(graph_file), "--stat", "degree-in", "--out", str(out)]) == 0
    assert (out / "degree-in.csv").exists()
    assert not (out / "scree.csv").exists()


def test_stats_empty_graph(tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("# nodes: 5\n# edges: 0\n")
    out = tmp_path / "stats"
    assert main(["stats", str(empty), "--out", str(out)]) == 0
    for kind in ("degree-in", "degree-out", "scree", "network-value",
                 "triangle-participation", "hop-plot"):
        assert rows(out / f"{kind}.csv") == [["x", "y"]]
    summary = dict(rows(out / "summary.csv")[1:])
    assert summary["effective_diameter"] == "undefined"
    assert summary["avg_clustering"] == "undefined"


def test_compare_self_is_zero(tmp_path, graph_file):
    out = tmp_path / "cmp"
    assert main(["compare", str(graph_file), str(graph_file), "--out", str(out)]) == 0
    div = dict(rows(out / "divergence.csv")[1:])
    assert all(float(v) == 0.0 for v in div.values() if v != "undefined")
    assert rows(out / "overlay-degree-out.csv")[0] == ["x", "y_a", "y_b"]


def test_compare_mismatched_selection(tmp_path, graph_file):
    assert main(["compare", str(graph_file), str(graph_file), "--stat-a", "scree",
                 "--stat-b", "hop-plot", "--out", str(tmp_path / "c")]) == 2


def test_select_single_size_reproducible(tmp_path, graph_file, capsys):
    outs = []
    for name in ("a", "b"):
        prefix = tmp_path / name
        assert main(["select", str(graph_file), "--sizes", "2", "--iterations", "2",
                     "--samples", "300", "--burn-in", "20", "--out", str(prefix)]) == 0
        outs.append(rows(f"{prefix}.select.csv"))
    assert outs[0] == outs[1]
    assert outs[0][1][0] == "2" and outs[0][1][5] == "1"
    assert main(["select", str(graph_file), "--sizes", "12", "--out",
                 str(tmp_path / "c")]) == 2
