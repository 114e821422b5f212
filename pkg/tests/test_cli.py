import io
import json
import subprocess
import sys

import pytest

from circuitdca import analysis, cli
from circuitdca.errors import InvariantViolation
from conftest import MODELS


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def model(name):
    return MODELS / f"{name}.lagr"


def test_analyze_gauge_x1():
    code, out, _ = run("analyze", model("loop_gauge_x1"), "--json", "-")
    assert code == 0
    rep = json.loads(out)
    assert rep["schema"] == 1
    assert rep["reduction"]["hamiltonian"] == "1/6*x3^2 - 5*cos(3*P3)"
    assert rep["dof"]["phase"] == 2
    assert rep["dof"]["n_scc_after_gauge"] == 6


def test_analyze_noncommutative():
    code, out, _ = run("analyze", model("noncommutative"), "--json", "-")
    rep = json.loads(out)
    assert code == 0
    assert (rep["dof"]["n_scc"], rep["dof"]["n_fcc"], rep["dof"]["phase"]) == (4, 0, 4)
    table = {(e["a"], e["b"]): e["c"] for e in rep["quantum"]["entries"]}
    assert table[("x1", "x2")] == "1/3"


def test_text_report():
    code, out, _ = run("analyze", model("loop"))
    assert code == 0
    assert "first class psi1 = P1 + P2 + P3" in out
    assert "reduced Hamiltonian: -1/3*x1*x3 + 1/6*x1^2 + 1/6*x3^2 - 5*cos(3*P3)" in out


def test_reports_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("analyze", model("noncommutative"), "--json", a)[0] == 0
    assert run("analyze", model("noncommutative"), "--json", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_report_expressions_reparse():
    from circuitdca.parser import parse_expression

    _, out, _ = run("analyze", model("noncommutative"), "--json", "-")
    rep = json.loads(out)
    for c in rep["constraints"]:
        assert str(parse_expression(c["body"])) == c["body"]
    assert str(parse_expression(rep["canonical_chart"]["hamiltonian"])) == rep["canonical_chart"]["hamiltonian"]


def test_empty_file_is_a_syntax_error(tmp_path):
    f = tmp_path / "empty.lagr"
    f.write_text("")
    code, _, err = run("analyze", f)
    assert code == 1
    assert json.loads(err)["error"]["type"] == "DSLSyntaxError"


def test_missing_file():
    code, _, err = run("analyze", "/nonexistent/model.lagr")
    assert code == 1
    assert json.loads(err)["error"]["type"] == "FlagError"


def test_zero_step_is_rejected():
    code, _, err = run("simulate", model("oscillator"), "--dt", "0")
    assert code == 1
    assert "--dt" in json.loads(err)["error"]["message"]


def test_unknown_flag_is_exit_one():
    assert run("analyze", model("loop"), "--frobnicate")[0] == 1


def test_oscillator_returns_after_one_period(tmp_path):
    csv_path = tmp_path / "osc.csv"
    code, out, _ = run("simulate", model("oscillator"), "--init", "x=1", "--t-end", "6.2832", "--csv", csv_path)
    assert code == 0
    last = csv_path.read_text().strip().splitlines()[-1].split(",")
    assert float(last[0]) == pytest.approx(6.2832)
    assert float(last[1]) == pytest.approx(1.0, abs=1e-6)


def test_gauge_compare():
    code, out, _ = run(
        "simulate", model("loop"), "--gauge-compare", "1,0", "2,3", "--init", "x3=0.3", "P3=0.1", "--json", "-"
    )
    assert code == 0
    summary = json.loads(out)["gauge_compare"]
    assert summary["max_deviation"] <= 1e-6


def test_keep_and_gauge_flags():
    code, out, _ = run("analyze", model("loop"), "--gauge", "2*x1 + 3*x3", "--json", "-")
    rep = json.loads(out)
    assert rep["reduction"]["kept"] == ["x3", "P3"]
    assert {"a": "x3", "b": "P3", "value": "2/5"} in rep["dirac_brackets"]
    code, out, _ = run("analyze", model("loop"), "--keep", "x1,x3", "--json", "-")
    assert json.loads(out)["reduction"]["kept"] == ["x1", "x3", "P1", "P3"]


def test_scc_choice_flag():
    code, out, _ = run("analyze", model("loop"), "--scc-choice", "chi2,chi3,chi4,chi5", "--json", "-")
    assert code == 0
    assert json.loads(out)["second_class"] == ["chi2", "chi3", "chi4", "chi5"]
    code, _, err = run("analyze", model("loop"), "--scc-choice", "chi1")
    assert code == 1 and json.loads(err)["error"]["type"] == "InvalidSCCChoice"


def test_analysis_failure_carries_diagnostics(tmp_path):
    f = tmp_path / "degenerate.lagr"
    f.write_text(model("noncommutative").read_text().replace("l2=5", "l2=2"))
    code, _, err = run("analyze", f)
    payload = json.loads(err)
    assert code == 1
    assert payload["diagnostics"]["hard"] is True


def test_quantize_subcommand():
    code, out, _ = run("quantize", model("noncommutative"))
    assert code == 0
    assert "[x1, x2] = i*hbar*1/3" in out


def test_invariant_violation_is_exit_two(monkeypatch):
    def broken(a):
        raise InvariantViolation("simulated")

    monkeypatch.setattr(analysis, "check_invariants", broken)
    assert run("analyze", model("loop"))[0] == 2


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "circuitdca", "quantize", str(model("oscillator"))],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert "[x, p] = i*hbar*1" in proc.stdout
