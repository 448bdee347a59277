import json
import subprocess
import sys

import pytest

from coopmotion.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_evolve_one_step_csv(tmp_path, capsys):
    target = tmp_path / "law.csv"
    code, _, _ = run(["evolve", "--m", "1", "--q", "0.5", "--init", "0:1",
                      "--n", "2", "--out", str(target)], capsys)
    assert code == 0
    lines = target.read_text().splitlines()
    assert lines[0] == "site,mass"
    got = {int(k): float(v) for k, v in (ln.split(",") for ln in lines[1:])}
    # two steps from a point mass: {0: .5, 1: .5}, then p'_0 = .5 - .5 * .25,
    # p'_1 = .5 - .5 * (.25 - .25), p'_2 = .5 * .25
    assert got == pytest.approx({0: 0.375, 1: 0.5, 2: 0.125}, abs=1e-15)
    assert not list(tmp_path.glob(".tmp-*"))


def test_evolve_keeps_extended_atoms(capsys):
    code, out, _ = run(["evolve", "--m", "1", "--init=-inf:0.25,0:0.5,+inf:0.25", "--n", "3"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[1] == "-inf,0.25" and lines[-1].startswith("+inf,")


def test_reference_beta(capsys):
    code, out, _ = run(["reference", "--kind", "beta", "--m", "1", "--q", "0.5", "--x", "1"], capsys)
    assert code == 0 and float(out) == 0.5


def test_counterexample_found_and_not_found(capsys):
    code, out, _ = run(["counterexample", "--step", "0:0.5,2:0.5", "--m", "1", "--seed", "1"], capsys)
    assert code == 0
    first, second = out.splitlines()[:2]
    assert "site=" in first
    lhs, rhs = second.split(" > ")
    assert float(lhs.split("=")[1]) > float(rhs.split("=")[1])
    code, out, _ = run(["counterexample", "--m", "1", "--q", "0.5", "--step", "0:0.5,1:0.5",
                        "--trials", "500"], capsys)
    assert code == 0 and out.startswith("no violation")


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    [],
    ["evolve", "--m", "1", "--q", "2"],
    ["evolve", "--m", "0.5"],
    ["evolve", "--m", "1", "--init", "0:0.5,1:0.4"],
    ["dirac", "--m", "1", "--n-list", "ten"],
    ["--config", "/nonexistent/file.cfg", "evolve"],
])
def test_usage_errors_exit_two(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2 and err


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# exact law\ncommand = evolve\nm = 1\nq = 0.5\ninit = 0:1\nn = 1\n")
    code, out, _ = run(["--config", str(cfg)], capsys)
    assert code == 0 and out.splitlines()[1:] == ["0,0.5", "1,0.5"]
    code, out, _ = run(["--config", str(cfg), "--n", "0"], capsys)
    assert code == 0 and out.splitlines()[1:] == ["0,1.0"]
    bad = tmp_path / "bad.cfg"
    bad.write_text("m 1\n")
    assert run(["--config", str(bad), "evolve"], capsys)[0] == 2


def test_experiment_writes_report(tmp_path, capsys):
    code, out, _ = run(["extended", "--m", "1", "--q", "0.5", "--outdir", str(tmp_path)], capsys)
    assert code == 0 and "PASS" in out
    data = json.loads((tmp_path / "extended_limit.json").read_text())
    assert data["verdict"] == "PASS"
    assert (tmp_path / "extended_limit.csv").read_text().startswith("n,sup_error\n")


def test_failing_experiment_exits_one(capsys):
    code, out, _ = run(["extended", "--m", "1", "--n", "50", "--tol", "1e-9"], capsys)
    assert code == 1 and "FAIL" in out


def test_simulate_is_reproducible(capsys):
    argv = ["simulate", "--m", "2", "--q", "0.5", "--n", "20", "--trajectories", "5000", "--seed", "3"]
    code_a, a, _ = run(argv, capsys)
    code_b, b, _ = run(argv, capsys)
    assert code_a == code_b == 0 and a == b
    total = sum(float(ln.split(",")[1]) for ln in a.splitlines()[1:])
    assert total == pytest.approx(1.0)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "coopmotion", "reference", "--m", "1", "--x", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and float(proc.stdout) == 0.5
