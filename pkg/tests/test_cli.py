from __future__ import annotations

import csv
import io
import json
import math

import jsonschema
import pytest

from timebin_bsa.bell import BellKind, all_outcomes, outcome_distribution, bell_state
from timebin_bsa.cli import main, schema


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_table1_passes_and_validates(capsys):
    code, out, _ = run(capsys, "table1")
    summary = json.loads(out)
    assert code == 0 and summary["passed"] is True
    jsonschema.validate(summary, schema())
    assert len(summary["results"]["matrix"]["phi+"]) == 21


def test_table1_rotated_delta(capsys):
    code, out, _ = run(capsys, "table1", "--delta", "1.3")
    assert code == 0 and json.loads(out)["results"]["mismatches"] == []


def test_table1_csv_round_trips_full_precision(capsys):
    code, out, _ = run(capsys, "table1", "--delta", "0.4", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    header, body = rows[0], rows[1:]
    assert len(header) == 22 and len(body) == 4
    exact = {k.value: outcome_distribution(bell_state(k, 0.4), 0.4) for k in BellKind}
    labels = {o.label: o for o in all_outcomes()}
    for row in body:
        for label, text in zip(header[1:], row[1:]):
            assert float(text) == exact[row[0]][labels[label]]


def test_bad_output_path(capsys):
    code, _, err = run(capsys, "table1", "--output", "/nonexistent/dir/x.json")
    assert code == 2 and "cannot write" in err


def test_output_file(tmp_path, capsys):
    target = tmp_path / "t.json"
    assert main(["table1", "--output", str(target)]) == 0
    assert json.loads(target.read_text())["experiment"] == "table1"


def test_success_modes(capsys):
    code, out, _ = run(capsys, "success", "--mode", "ideal")
    rates = json.loads(out)["results"]["rates"]
    interf = [r for r in rates if r["analyzer"] == "interferometer"][0]
    assert code == 0 and interf["average"] == pytest.approx(0.5, abs=1e-12)
    code, out, _ = run(capsys, "success", "--mode", "deadtime")
    rates = json.loads(out)["results"]["rates"]
    avg = {r["analyzer"]: r["average"] for r in rates}
    assert code == 0
    assert avg["interferometer"] == pytest.approx(0.3125, abs=1e-12)
    assert avg["beamsplitter"] == pytest.approx(0.25, abs=1e-12)


def test_fringes_phi_offset(capsys):
    code, out, _ = run(capsys, "fringes", "--delta", "0.6")
    res = json.loads(out)["results"]
    assert code == 0
    assert abs(res["phi_plus_minus_psi_plus_offset"]) == pytest.approx(1.2, abs=1e-9)
    assert abs(res["psi_plus_minus_offset"]) == pytest.approx(math.pi, abs=1e-9)


def test_fringes_csv(capsys):
    code, out, _ = run(capsys, "fringes", "--points", "8", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["alpha", "psi+", "psi-", "phi+"] and len(rows) == 9


def test_antidip(capsys):
    code, out, _ = run(capsys, "antidip", "--points", "5")
    res = json.loads(out)["results"]
    assert code == 0
    assert res["visibility"]["00"] == pytest.approx(1 / 3, rel=1e-9)


def test_simulate_bsa_deterministic(capsys):
    args = ("simulate", "--shots", "5000", "--seed", "3", "--format", "csv")
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args, "--workers", "4")
    assert a == b


def test_simulate_fringes_has_note(capsys):
    code, out, _ = run(capsys, "simulate", "--target", "fringes", "--shots", "2000", "--points", "6",
                       "--efficiency", "0.5", "--dark-count", "1e-3")
    summary = json.loads(out)
    assert code == 0 and summary["notes"]


def test_zero_shots_is_usage_error(capsys):
    code, _, err = run(capsys, "simulate", "--shots", "0")
    assert code == 2 and "shots" in err


def test_invalid_grid_and_domain_errors(capsys):
    assert run(capsys, "fringes", "--points", "3")[0] == 2
    assert run(capsys, "antidip", "--chi", "1.5")[0] == 2
    assert run(capsys, "antidip", "--chi", "0")[0] == 2


def test_unknown_flag(capsys):
    assert run(capsys, "table1", "--bogus")[0] == 2


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# fringe run\ndelta = 0.6\npoints = 8\nformat = json\n")
    _, out, _ = run(capsys, "fringes", "--config", str(cfg))
    res = json.loads(out)
    assert res["config"]["delta"] == 0.6 and res["config"]["points"] == 8
    _, out, _ = run(capsys, "fringes", "--config", str(cfg), "--delta", "0.2")
    res = json.loads(out)
    assert res["config"]["delta"] == 0.2
    assert abs(res["results"]["phi_plus_minus_psi_plus_offset"]) == pytest.approx(0.4, abs=1e-9)


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense_key = 1\n")
    assert run(capsys, "table1", "--config", str(bad))[0] == 2
    bad.write_text("delta = abc\n")
    assert run(capsys, "table1", "--config", str(bad))[0] == 2
    bad.write_text("just words\n")
    assert run(capsys, "table1", "--config", str(bad))[0] == 2
    assert run(capsys, "table1", "--config", str(tmp_path / "missing.cfg"))[0] == 2


def test_schema_rejects_malformed_summary():
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"experiment": "table1", "version": "x", "config": {}, "results": {}, "passed": True}, schema())
