import json
import math
import subprocess
import sys

import pytest

from qkdsec import NumericalError, cli
from qkdsec.report import MetricReport, emit_report, parse_report


def run(args, capsys):
    code = cli.main(args)
    return code, capsys.readouterr().out


def test_risk_scenario_reports_expected_leaks(capsys):
    code, out = run(["risk"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["expected_leaks_1sf"]["value"] == 3e-5
    assert "FLAGGED" in doc["printed_log10_exponent"]["provenance"]
    assert all(v["provenance"] for v in doc.values())


def test_helstrom_identical_states(capsys):
    params = json.dumps({"priors": [0.5, 0.5], "states": [[[0.5, 0.5], [0.5, 0.5]]] * 2})
    code, out = run(["helstrom", "--params", params], capsys)
    assert code == 0
    assert json.loads(out)["p_guess"]["value"] == pytest.approx(0.5, abs=1e-15)


def test_bb84_scenario(capsys):
    code, out = run(["bb84", "--params", '{"rounds": 1, "intercept_prob": 1}'], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["qber"]["value"] == 0.25
    assert doc["best_guess_exact_enum"]["value"] == 0.75


@pytest.mark.parametrize("kind", cli.KINDS)
def test_every_kind_is_deterministic(kind, capsys):
    _, first = run([kind, "--seed", "3"], capsys)
    _, second = run([kind, "--seed", "3"], capsys)
    assert first == second and first


def test_csv_output_round_trips(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code, _ = run(["metrics", "--format", "csv", "--output", str(out)], capsys)
    assert code == 0
    data = out.read_bytes()
    assert data.startswith(b"name,value,provenance\n")
    back = parse_report(data, "csv")
    code, text = run(["metrics"], capsys)
    ref = parse_report(text.encode(), "json")
    assert back.as_dict() == ref.as_dict()


def test_batch_to_directory(tmp_path, capsys):
    batch = {"version": "v1", "scenarios": [
        {"kind": "averaging", "params": {"layers": [1, 2]}},
        {"kind": "coupling", "params": {"P": [0.75, 0.25]}, "output": {"format": "csv"}},
    ]}
    spec = tmp_path / "batch.json"
    spec.write_text(json.dumps(batch))
    code, _ = run(["--scenario", str(spec), "--output", str(tmp_path / "out")], capsys)
    assert code == 0
    first = json.loads((tmp_path / "out" / "000_averaging.json").read_text())
    assert first["layers1_bound"]["value"] == pytest.approx(2e-3, rel=1e-12)
    assert first["layers2_bound"]["value"] == pytest.approx(3e-2, rel=1e-12)
    rows = (tmp_path / "out" / "001_coupling.csv").read_text().splitlines()
    assert rows[0] == "name,value,provenance"


def test_exit_codes(tmp_path, caplog, monkeypatch):
    # validation: unknown kind names the field
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"version": "v1", "kind": "teleport"}))
    assert cli.main(["--scenario", str(bad)]) == 2
    assert "field 'kind'" in caplog.text
    bad.write_text(json.dumps({"version": "v0", "kind": "risk"}))
    assert cli.main(["--scenario", str(bad)]) == 2
    assert cli.main(["risk", "--params", "{not json"]) == 2
    assert cli.main(["coupling", "--params", '{"P": [0.5, 0.6]}']) == 2
    # resource: the Eve register of six rounds exceeds the default cap
    assert cli.main(["bb84", "--params", '{"rounds": 6}']) == 4
    assert cli.main(["metrics", "--dim-cap", "4"]) == 4
    # I/O: unreadable input and unwritable output
    assert cli.main(["--scenario", str(tmp_path / "missing.json")]) == 5
    assert cli.main(["risk", "--output", str(tmp_path / "no" / "such" / "dir.json")]) == 5

    def broken(params, seed):
        raise NumericalError("eigensolver did not converge")

    monkeypatch.setitem(cli._DISPATCH, "risk", broken)
    assert cli.main(["risk"]) == 3


def test_scenario_doc_run_scenario(tmp_path):
    path = tmp_path / "x.json"
    report, code = cli.run_scenario({"version": "v1", "kind": "helstrom", "seed": 0,
                                     "output": {"path": str(path), "format": "json"}})
    assert code == 0
    assert parse_report(path.read_bytes()).as_dict() == report.as_dict()
    _, code = cli.run_scenario({"version": "v1", "kind": "risk", "seed": -1})
    assert code == 2


def test_emit_report_examples():
    assert emit_report(MetricReport()).strip() == b"{}"
    assert emit_report(MetricReport(), "csv") == b"name,value,provenance\n"
    one = MetricReport().add("x", 0.1, "test")
    assert emit_report(one, "csv").decode().splitlines()[1:] == ["x,0.1,test"]


def test_report_round_trip_bit_exact():
    r = MetricReport()
    vals = [math.pi, 1 / 3, 2.0 ** -1070, 1e308, -0.0, 0.1 + 0.2]
    for i, v in enumerate(vals):
        r.add(f"v{i}", v, "test")
    for fmt in ("json", "csv"):
        back = parse_report(emit_report(r, fmt), fmt)
        assert [e.value for e in back] == vals
        assert all(math.copysign(1, a) == math.copysign(1, b.value) for a, b in zip(vals, back))


def test_report_names_unique():
    r = MetricReport().add("a", 1, "x")
    with pytest.raises(Exception):
        r.add("a", 2, "x")


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "qkdsec.cli", "averaging"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["layers0_bound"]["value"] == 1e-6
