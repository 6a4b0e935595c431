import csv
import json
import re
from dataclasses import replace

import pytest

from seqreveal.allocation import Contract
from seqreveal.cli import build_parser, run
from seqreveal.environment import Environment
from seqreveal.stationary import build_stationary

SUBCOMMANDS = ["classify", "condition-curve", "threshold", "reward-plan", "build-stationary", "verify",
               "optimize", "lifecycle", "punishment"]


@pytest.fixture
def cfg(tmp_path):
    def make(theta_L, **extra):
        p = tmp_path / f"env_{theta_L}.cfg"
        lines = ["value = sqrt2", f"theta_L = {theta_L}", "theta_H = 3", "q_bar = 1"]
        lines += [f"{k} = {v}" for k, v in extra.items()]
        p.write_text("\n".join(lines) + "\n")
        return str(p)
    return make


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_classify(capsys, cfg):
    code, out, _ = call(capsys, "classify", "--config", cfg(2.0))
    assert code == 0 and json.loads(out)["classification"] == "Revealing"
    code, out, _ = call(capsys, "classify", "--config", cfg(2.5))
    assert json.loads(out)["classification"] == "NonRevealing"


def test_condition_curve_nonrevealing(capsys, cfg, tmp_path):
    path = tmp_path / "curve.csv"
    assert call(capsys, "condition-curve", "--config", cfg(2.5), "--csv", str(path))[0] == 0
    rows = list(csv.DictReader(path.open()))
    assert list(rows[0]) == ["q_tilde", "rhs", "lhs"]
    assert min(float(r["rhs"]) for r in rows) > max(float(r["lhs"]) for r in rows)


def test_verify_reports_ich_violation(capsys, tmp_path):
    env = Environment.linear()
    a = build_stationary(env, 0.999, 0.33)
    t = a.template
    bad = replace(t, reward=(Contract(t.reward[0].q, t.reward[0].x + 0.05),) + t.reward[1:])
    path = tmp_path / "bad.json"
    path.write_text(replace(a, cohorts={0: bad}, cohort_template=bad).to_json())
    code, out, _ = call(capsys, "verify", "--alloc", str(path))
    assert code == 2
    viol = json.loads(out)["violations"]
    assert any(v["constraint"] == "ICH" and v["period"] == 0 for v in viol)


def test_verify_csv_and_good_file(capsys, tmp_path):
    path = tmp_path / "good.json"
    assert call(capsys, "build-stationary", "--rho", "0.999", "--qtilde", "0.33", "--alloc-out", str(path))[0] == 0
    code, out, _ = call(capsys, "verify", "--alloc", str(path), "--format", "csv")
    assert code == 0 and out.splitlines()[0] == "t,constraint,slack"
    code, out, _ = call(capsys, "verify", "--alloc", str(path), "--delta", "0.5")
    assert code == 2


def test_reward_plan(capsys):
    code, out, _ = call(capsys, "reward-plan", "--delta", "0.9", "--qtilde", "0.5")
    d = json.loads(out)
    assert code == 0 and d["m"] == 3 and abs(d["beta"] - 0.397805) < 1e-5
    code, out, _ = call(capsys, "reward-plan", "--delta", "0.9", "--qtilde", "0.5", "--format", "csv")
    assert out.splitlines()[1] == "k,q,x"


def test_threshold_and_punishment(capsys):
    code, out, _ = call(capsys, "threshold")
    assert code == 0 and 2.0 < json.loads(out)["theta_bar"] < 2.5
    code, out, _ = call(capsys, "punishment", "--R", "0.3")
    d = json.loads(out)
    assert code == 0 and d["conditions"]["valid"]


def test_optimize_and_lifecycle(capsys, tmp_path):
    alloc = tmp_path / "alloc.json"
    code, out, _ = call(capsys, "optimize", "--N", "10", "--budget", "300", "--out", str(alloc))
    assert code == 0 and json.loads(out)["revealing"]
    path = tmp_path / "life.csv"
    assert call(capsys, "lifecycle", "--alloc", str(alloc), "--reveal", "3", "--csv", str(path))[0] == 0
    assert path.read_text().splitlines()[0] == "t,q_H,x_H,q_L,x_L"


def test_optimize_nonrevealing_exit_code(capsys, cfg):
    code, out, _ = call(capsys, "optimize", "--config", cfg(2.5), "--N", "5", "--budget", "100")
    assert code == 2 and not json.loads(out)["revealing"]


def test_deterministic_output(capsys):
    outs = [call(capsys, "build-stationary", "--rho", "0.999", "--qtilde", "0.33")[1] for _ in range(2)]
    assert outs[0] == outs[1]


def test_twelve_significant_digits(capsys):
    _, out, _ = call(capsys, "classify")
    for num in re.findall(r"-?\d+\.\d+(?:e-?\d+)?", out):
        mantissa = num.lstrip("-").split("e")[0].replace(".", "").lstrip("0")
        assert len(mantissa) <= 12


@pytest.mark.parametrize("argv", [["bogus"], ["classify", "--nope"], ["verify"], []])
def test_usage_errors(capsys, argv):
    assert run(argv) == 1


def test_bad_inputs_exit_1(capsys, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("gamma = 1\n")
    assert call(capsys, "classify", "--config", str(bad))[0] == 1
    assert call(capsys, "verify", "--alloc", str(tmp_path / "missing.json"))[0] == 1


@pytest.mark.parametrize("name", SUBCOMMANDS)
def test_help_names_construct(capsys, name):
    assert run([name, "--help"]) == 0
    text = capsys.readouterr().out
    assert len(text.split("\n\n")[1].split()) >= 8
