import json

from instances import e2e_instance, pa_like_instance
from ptforcing.cli import main, parse_bits, parse_pairs
from ptforcing.oracle import make_registry
from ptforcing.ptree import PartitionTree


def _write_e2e(tmp_path):
    grounds, reg, pairs = e2e_instance()
    (tmp_path / "e2e.reg").write_text(reg.dumps())
    return grounds, pairs


def test_parse_helpers():
    assert parse_pairs("0,1; 2,3") == ((0, 1), (2, 3))
    assert parse_bits("random:5", 12, "A") == parse_bits("random:5", 12, "A")
    assert str(parse_bits("0110", 4, "A")) == "0110"


def test_run_check_round_trip(tmp_path, capsys):
    grounds, pairs = _write_e2e(tmp_path)
    trace = tmp_path / "run.jsonl"
    argv = [
        "run", "--universe", "64", "--a", str(grounds.A), "--c", str(grounds.C),
        "--registry", str(tmp_path / "e2e.reg"), "--pairs", "0,1;2,3;4,5",
        "--trace", str(trace),
    ]
    assert main(argv) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "complete" and out["problems"] == []
    assert main(["check", "--trace", str(trace)]) == 0


def test_config_file(tmp_path, capsys):
    grounds, _ = _write_e2e(tmp_path)
    cfg = tmp_path / "run.ini"
    cfg.write_text(
        "[run]\nuniverse = 64\n"
        f"a = {grounds.A}\nc = {grounds.C}\nregistry = {tmp_path / 'e2e.reg'}\n"
        "pairs = 0,1;2,3;4,5\nstages = 4\n"
    )
    assert main(["run", "--config", str(cfg)]) == 0
    assert json.loads(capsys.readouterr().out)["status"] == "complete"


def test_violation_exit_code(tmp_path, capsys):
    grounds, reg = pa_like_instance()
    (tmp_path / "pa.reg").write_text(reg.dumps())
    argv = ["run", "--universe", "16", "--a", str(grounds.A), "--c", str(grounds.C),
            "--registry", str(tmp_path / "pa.reg"), "--pairs", "0,1"]
    assert main(argv) == 3
    out = json.loads(capsys.readouterr().out)
    assert out["outcome"]["tag"] == "HypothesisViolated"


def test_unresolved_exit_code(tmp_path, capsys):
    reg = make_registry({0: [], 1: []}, {}, 4, 8)
    (tmp_path / "r.reg").write_text(reg.dumps())
    argv = ["run", "--universe", "8", "--registry", str(tmp_path / "r.reg"), "--depth", "0"]
    assert main(argv) == 2


def test_errors_exit_one(tmp_path, capsys):
    assert main(["run", "--universe", "8", "--registry", str(tmp_path / "missing.reg")]) == 1
    (tmp_path / "bad.reg").write_text("S 2\nF 0 0 1 0 1:G:1\nF 0 0 1 1 2:G:1\n")
    assert main(["run", "--universe", "8", "--registry", str(tmp_path / "bad.reg")]) == 1
    assert "conflict" in capsys.readouterr().err


def test_cohesive_command(tmp_path, capsys):
    reg = make_registry({0: [], 1: []}, {}, 4, 8)
    (tmp_path / "r.reg").write_text(reg.dumps())
    (tmp_path / "sets.txt").write_text("11110000\n10101010\n")
    assert main(["cohesive", "--sets", str(tmp_path / "sets.txt"), "--registry", str(tmp_path / "r.reg")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["problems"] == []


def test_cross_command(tmp_path, capsys):
    full = PartitionTree.full(2, 2)
    for name in "abc":
        (tmp_path / f"{name}.tree").write_text(full.dumps())
    files = [str(tmp_path / f"{n}.tree") for n in "abc"]
    assert main(["cross", "--trees", *files, "--out", str(tmp_path / "out.tree")]) == 0
    crossed = PartitionTree.loads((tmp_path / "out.tree").read_text())
    assert crossed.k == 6 and crossed.depth == 2
