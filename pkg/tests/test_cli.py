import json
import subprocess
import sys

import numpy as np
import pytest

from quadsketch.cli import main
from quadsketch.graph import save_graph
from quadsketch.psdsdd import format_matrix

from conftest import gnp_connected


@pytest.fixture
def tri(tmp_path):
    p = tmp_path / "tri.txt"
    p.write_text("3 3\n0 1 1.0\n1 2 1.0\n0 2 1.0\n")
    return str(p)


@pytest.fixture
def rand_graph(tmp_path):
    g = gnp_connected(20, 0.4, seed=3)
    p = tmp_path / "g.txt"
    save_graph(g, p)
    return str(p)


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_oracle_cutweight_triangle(tri, capsys):
    code, out, _ = run_cli(["oracle", "cutweight", tri, "0"], capsys)
    assert code == 0 and out.strip() == "2"


def test_oracle_mincut_and_lambda1(tri, capsys):
    code, out, _ = run_cli(["oracle", "mincut", tri], capsys)
    assert code == 0 and float(out.strip()) == 2.0
    code, out, _ = run_cli(["oracle", "lambda1", tri], capsys)
    assert code == 0 and float(out.strip()) == pytest.approx(1.5)


def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as e:
        main(["definitely-not-a-command"])
    assert e.value.code == 2


def test_missing_file_exit_1(capsys):
    code, _, err = run_cli(["oracle", "mincut", "/nonexistent/g.txt"], capsys)
    assert code == 1 and "error" in err


def test_malformed_graph_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.txt"
    p.write_text("2 1\n0 0 1.0\n")
    code, _, err = run_cli(["oracle", "mincut", str(p)], capsys)
    assert code == 1 and "line 2" in err


def test_build_is_deterministic(rand_graph, tmp_path, capsys):
    out1 = tmp_path / "a.qsk"
    out2 = tmp_path / "b.qsk"
    for out in (out1, out2):
        code, _, _ = run_cli(
            ["cut-sketch", "build", rand_graph, "--epsilon", "0.1", "--seed", "7",
             "--mode", "pipeline", "-o", str(out)],
            capsys,
        )
        assert code == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_build_query_roundtrip_matches_library(rand_graph, tmp_path, capsys):
    out = tmp_path / "g.qsk"
    run_cli(["cut-sketch", "build", rand_graph, "-e", "0.15", "--seed", "3",
             "--mode", "pipeline", "-o", str(out)], capsys)
    code, text, _ = run_cli(["cut-sketch", "query", str(out), "0,1,2"], capsys)
    assert code == 0
    from quadsketch.cutsketch import cut_sketch_build
    from quadsketch.graph import load_graph, members_from_vertices

    g = load_graph(rand_graph)
    sk = cut_sketch_build(g, 0.15, 3, mode="pipeline")
    expected = sk.estimate(members_from_vertices(20, [0, 1, 2]))
    assert float(text.strip()) == pytest.approx(expected, rel=1e-15)


def test_cut_sketch_size(rand_graph, tmp_path, capsys):
    out = tmp_path / "g.qsk"
    run_cli(["cut-sketch", "build", rand_graph, "-e", "0.2", "-o", str(out)], capsys)
    code, text, _ = run_cli(["cut-sketch", "size", str(out)], capsys)
    assert code == 0
    assert text.startswith("# quadsketch v1")
    header, row = text.strip().splitlines()[1:]
    n_bytes, words = (int(tok) for tok in row.split(","))
    assert n_bytes == out.stat().st_size


def test_spectral_roundtrip(rand_graph, tmp_path, capsys):
    out = tmp_path / "s.qsk"
    code, _, _ = run_cli(
        ["spectral-sketch", "build", rand_graph, "--variant", "improved",
         "-e", "0.25", "--seed", "5", "-o", str(out)],
        capsys,
    )
    assert code == 0
    q = ",".join(str(float(i % 3 - 1)) for i in range(20))
    code, text, _ = run_cli(["spectral-sketch", "query", str(out), "--", q], capsys)
    assert code == 0
    float(text.strip())


def test_sparsify_command(rand_graph, capsys):
    code, text, _ = run_cli(["sparsify", rand_graph, "-e", "0.25", "--kind", "cut"], capsys)
    assert code == 0
    assert text.splitlines()[0].split()[0] == "20"


def test_partition_csv(rand_graph, capsys):
    code, text, _ = run_cli(["partition", rand_graph, "--mode", "spectral", "--h", "0.2"], capsys)
    assert code == 0
    lines = text.strip().splitlines()
    assert lines[0] == "# quadsketch v1"
    assert lines[1].startswith("mode,")


def test_partition_json_format(rand_graph, capsys):
    code, text, _ = run_cli(
        ["partition", rand_graph, "--mode", "degree", "-e", "0.25", "--format", "json"],
        capsys,
    )
    assert code == 0
    rows = json.loads(text)
    assert isinstance(rows, list) and rows


def test_psd_and_sdd_commands(tmp_path, capsys):
    rng = np.random.default_rng(0)
    b = rng.normal(size=(6, 6))
    a = (b + b.T) / 2
    np.fill_diagonal(a, np.abs(a).sum(axis=1))
    mp = tmp_path / "m.txt"
    mp.write_text(format_matrix(a))
    skp = tmp_path / "m.qsk"
    code, _, _ = run_cli(["sdd", "build", str(mp), "-e", "0.3", "--seed", "2", "-o", str(skp)], capsys)
    assert code == 0
    x = rng.normal(size=6)
    q = ",".join(repr(float(v)) for v in x)
    code, text, _ = run_cli(["sdd", "query", str(skp), "--", q], capsys)
    assert code == 0
    est = float(text.strip())
    exact = float(x @ a @ x)
    assert est == pytest.approx(exact, rel=0.5)

    psd = a @ a
    mp2 = tmp_path / "p.txt"
    mp2.write_text(format_matrix(psd))
    skp2 = tmp_path / "p.qsk"
    code, _, _ = run_cli(["psd", "jl-build", str(mp2), "-e", "0.5", "--delta", "0.1",
                          "--seed", "4", "-o", str(skp2)], capsys)
    assert code == 0
    code, text, _ = run_cli(["psd", "jl-query", str(skp2), "--", q], capsys)
    assert code == 0
    float(text.strip())

    code, text, _ = run_cli(["sdd", "reduce", str(mp)], capsys)
    assert code == 0 and text.startswith("# diag")


def test_mincut_csv(tmp_path, capsys):
    g = gnp_connected(14, 0.5, seed=9)
    p = tmp_path / "g.txt"
    save_graph(g, p)
    code, text, _ = run_cli(
        ["mincut", str(p), "--servers", "2", "-e", "0.1", "--reps", "3", "--seed", "5"],
        capsys,
    )
    assert code == 0
    lines = text.strip().splitlines()
    assert lines[1].split(",")[0] == "n"
    row = dict(zip(lines[1].split(","), lines[2].split(",")))
    assert float(row["rel_err"]) <= 0.5


def test_bench_cut_size_monotone(capsys):
    code, text, _ = run_cli(
        ["bench", "--suite", "cut-size", "--eps", "0.25,0.125,0.0625",
         "--n", "24", "--p", "0.4", "--seed", "1"],
        capsys,
    )
    assert code == 0
    rows = text.strip().splitlines()[2:]
    sizes = [int(r.split(",")[3]) for r in rows]
    assert sizes == sorted(sizes)


def test_bench_deterministic(capsys):
    args = ["bench", "--suite", "cut-size", "--eps", "0.25,0.125", "--n", "16",
            "--p", "0.5", "--seed", "3"]
    _, a, _ = run_cli(args, capsys)
    _, b, _ = run_cli(args, capsys)
    assert a == b


def test_console_script_installed():
    out = subprocess.run(
        [sys.executable, "-m", "quadsketch.cli", "--version"],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0 or "quadsketch" in out.stdout + out.stderr
