import json
import os
import subprocess
import sys

import pytest

from rwre.cli import cli_main, config_hash


def run(capsys, *argv):
    code = cli_main(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out.strip() else None), out.err


def test_p0(capsys):
    code, rep, _ = run(capsys, "p0")
    assert code == 0
    assert abs(rep["value"] - 7.06025) < 1e-4
    assert rep["version"] and len(rep["config_hash"]) == 16


def test_validate_backward_jump(capsys, tmp_path):
    law = {"dim": 1, "u_hat": [1], "atoms": [{"weight": 1.0, "jumps": [[[-1], 0.5], [[1], 0.5]]}]}
    f = tmp_path / "law.json"
    f.write_text(json.dumps(law))
    code, rep, _ = run(capsys, "validate", "--law", str(f))
    assert code == 2
    assert rep["valid"] is False
    assert "0" in json.dumps(rep)


def test_validate_preset(capsys):
    code, rep, _ = run(capsys, "validate", "--law", "one-two-jump")
    assert code == 0 and rep["valid"]


def test_malformed_config(capsys, tmp_path):
    bad = tmp_path / "c.json"
    bad.write_text("{not json")
    assert cli_main(["velocity", "--config", str(bad)]) == 1
    assert cli_main(["velocity", "--law", "no-such-preset"]) == 1
    assert cli_main(["frobnicate"]) == 1
    assert cli_main(["p0", "--seed", "-3"]) in (0, 1)
    assert cli_main(["simulate", "--seed", str(2**64)]) == 1
    capsys.readouterr()


def test_byte_identical_across_runs_and_threads(tmp_path):
    a, b, c = (tmp_path / n for n in ("a.json", "b.json", "c.json"))
    base = ["velocity", "--law", "one-two-jump", "--replicates", "3000", "--seed", "9"]
    assert cli_main(base + ["--out", str(a)]) == 0
    assert cli_main(base + ["--out", str(b)]) == 0
    assert cli_main(base + ["--out", str(c), "--threads", "3"]) == 0
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()


def test_seed_env_override(tmp_path, monkeypatch):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    monkeypatch.setenv("RWRE_SEED", "5")
    cli_main(["simulate", "--n", "50", "--seed", "1", "--out", str(a)])
    monkeypatch.delenv("RWRE_SEED")
    cli_main(["simulate", "--n", "50", "--seed", "5", "--out", str(b)])
    assert json.loads(a.read_text())["final"] == json.loads(b.read_text())["final"]


@pytest.mark.parametrize("argv", [
    ["simulate", "--n", "20"],
    ["blocks", "--replicates", "200"],
    ["velocity", "--replicates", "500"],
    ["diffusion", "--replicates", "500", "--exact-v"],
    ["kappas", "--law", "one-two-jump"],
    ["pinfty", "--replicates", "500"],
    ["qmean", "--n", "100", "--replicates", "20"],
    ["restricted", "--law", "restricted-2d"],
    ["renewal", "--pmf", '{"1": 0.5, "2": 0.5}', "--p", "2", "--n", "30"],
    ["diagnose", "--test", "tightness", "--n", "200"],
    ["diagnose", "--test", "blocks", "--replicates", "2000"],
])
def test_subcommands_emit_json(capsys, argv):
    code, rep, _ = run(capsys, *argv)
    assert code == 0, rep
    assert rep["command"] == argv[0]
    assert "config_hash" in rep and "version" in rep


def test_restricted_rejects_non_restricted(capsys):
    code, rep, _ = run(capsys, "restricted", "--law", "one-two-jump")
    assert code == 2


def test_csv_output(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert cli_main(["renewal", "--pmf", '{"1": 0.5, "2": 0.5}', "--p", "1", "--n", "10", "--csv", str(out)]) == 0
    capsys.readouterr()
    lines = out.read_bytes().split(b"\r\n")
    assert lines[0].startswith(b"j,")
    assert len([x for x in lines if x]) == 11


def test_examples_quick_two_jump(capsys):
    code, rep, _ = run(capsys, "examples", "--name", "two-jump-homogeneous", "--quick")
    assert code == 0 and rep["pass"]


def test_config_hash_stable():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "rwre.cli", "p0"], capture_output=True, text=True,
                       env={**os.environ, "RWRE_SEED": ""})
    assert r.returncode == 0
    assert json.loads(r.stdout)["command"] == "p0"
