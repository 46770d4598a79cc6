import json
from pathlib import Path

import pytest

from rokhlin.cli import emit_report, main, parse_element, run_scenario
from rokhlin.dynsys import load_system

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def write_system(tmp_path, name="sys.json", lengths=(3, 10)):
    import rokhlin as rk

    sys = rk.make_cycle_system(list(lengths))
    doc = {
        "points": list(sys.labels),
        "map": {sys.labels[i]: sys.labels[int(sys.perm[i])] for i in range(sys.n)},
        "dimension": 0,
    }
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


class TestOrbitsCommand:
    def test_reports_lengths(self, tmp_path, capsys):
        spath = write_system(tmp_path)
        rc = main(["orbits", "--system", str(spath)])
        out = capsys.readouterr().out
        assert rc == 0
        rep = json.loads(out)
        assert rep["orbits"]["lengths"] == [3, 10]
        assert all(a["pass"] for a in rep["assertions"])

    def test_missing_file_structured_error(self, capsys):
        rc = main(["orbits", "--system", "/definitely/not/here.json"])
        out = capsys.readouterr().out
        assert rc == 2
        rep = json.loads(out)
        assert rep["error"]["type"] == "ScenarioError"
        assert not rep["assertions"][0]["pass"]


class TestDeterminism:
    def test_byte_identical_reports(self, tmp_path):
        spath = write_system(tmp_path)
        out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
        assert main(["orbits", "--system", str(spath), "--out", str(out1)]) == 0
        assert main(["orbits", "--system", str(spath), "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_seeded_periodic_deterministic(self, tmp_path):
        spath = write_system(tmp_path, lengths=(2, 3))
        out1, out2 = tmp_path / "p1.json", tmp_path / "p2.json"
        for out in (out1, out2):
            assert main(["periodic", "--system", str(spath), "--out", str(out),
                         "--seed", "7"]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_float_formatting_round_trips(self, tmp_path):
        report = {"x": 0.1, "y": [1e-17, 2.0], "flag": True, "none": None}
        text = emit_report(report, tmp_path / "f.json")
        parsed = json.loads(text)
        assert parsed["x"] == 0.1 and parsed["y"][0] == 1e-17

    def test_keys_sorted(self):
        text = emit_report({"b": 1, "a": 2, "c": {"z": 1, "y": 2}}, None)
        assert text.index('"a"') < text.index('"b"') < text.index('"c"')
        assert text.index('"y"') < text.index('"z"')


class TestScenarios:
    def test_shipped_suite_passes(self, capsys):
        rc = main(["verify-all", "--suite", str(SCENARIOS / "suite.json")])
        captured = capsys.readouterr()
        assert rc == 0
        rep = json.loads(captured.out)
        assert rep["summary"] and all(row["pass"] for row in rep["summary"])
        assert "scenario" in captured.err  # summary table on stderr

    def test_empty_suite_exits_zero(self, tmp_path, capsys):
        suite = tmp_path / "suite.json"
        suite.write_text(json.dumps({"scenarios": []}))
        assert main(["verify-all", "--suite", str(suite)]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["summary"] == []

    def test_forced_failure_propagates(self, tmp_path, capsys):
        spath = write_system(tmp_path, lengths=(3, 10))
        scen = tmp_path / "bad_norm.json"
        scen.write_text(json.dumps({
            "command": "norm", "system": spath.name,
            "element": [{"power": 1, "constant": [1.0, 0.0]}],
            "tol": 1e-3, "expect": {"value_at_most": 0.5},
        }))
        suite = tmp_path / "suite.json"
        suite.write_text(json.dumps({"scenarios": ["bad_norm.json"]}))
        rc = main(["verify-all", "--suite", str(suite)])
        out = json.loads(capsys.readouterr().out)
        assert rc == 1
        assert not out["summary"][0]["pass"]

    def test_norm_scenario_round_trip(self, tmp_path, capsys):
        rc = main(["norm", "--scenario", str(SCENARIOS / "norm_unitary.json")])
        rep = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert rep["norm"]["value"] == pytest.approx(1.0, abs=1e-6)
        assert json.loads(emit_report(rep, None)) == rep

    def test_wrong_command_in_scenario(self, tmp_path):
        scen = tmp_path / "s.json"
        scen.write_text(json.dumps({"command": "towers"}))
        rc = main(["norm", "--scenario", str(scen)])
        assert rc == 2


class TestElementLiterals:
    def test_sparse_coefficients(self, tmp_path):
        spath = write_system(tmp_path)
        sys = load_system(spath.read_text())
        el = parse_element(sys, [
            {"power": 1, "coefficients": {"c0p0": [1.0, 0.5]}},
            {"power": -2, "constant": [0.0, 1.0]},
        ])
        assert el.support == (-2, 1)
        assert el.coefficient(1)[sys.index["c0p0"]] == 1.0 + 0.5j
        assert el.coefficient(-2)[0] == 1j

    def test_unknown_label_rejected(self, tmp_path):
        from rokhlin.cli import ScenarioError

        spath = write_system(tmp_path)
        sys = load_system(spath.read_text())
        with pytest.raises(ScenarioError, match="unknown point label"):
            parse_element(sys, [{"power": 0, "coefficients": {"nope": [1, 0]}}])

    def test_malformed_band_rejected(self, tmp_path):
        from rokhlin.cli import ScenarioError

        spath = write_system(tmp_path)
        sys = load_system(spath.read_text())
        with pytest.raises(ScenarioError):
            parse_element(sys, [{"coefficients": {}}])


class TestApproxScenario:
    def test_small_scenario_assertion_rows(self):
        rep = run_scenario(SCENARIOS / "approx_small.json")
        names = {a["name"] for a in rep["assertions"]}
        assert {"quotient_corner", "ideal_corner", "final_assembly", "sqrt_step"} <= names
        assert all(a["pass"] for a in rep["assertions"])
        assert rep["ledger"]["closed_form_bound"] == 4
        assert rep["ledger"]["total_declared"] == 5
