import csv
import json
import shutil

import pytest

from hjsplit.cli import REQUIRED, ConfigError, emit_json, emit_report, main, parse_report, validate
from tests.conftest import CONFIGS


def write_config(tmp_path, **changes):
    for f in ("pendulum.json", "arnold_perturbation.json"):
        shutil.copy(CONFIGS / f, tmp_path / f)
    raw = json.loads((CONFIGS / "arnold.json").read_text())
    raw.update(changes)
    p = tmp_path / "experiment.json"
    p.write_text(json.dumps(raw))
    return p


def test_empty_config_lists_every_missing_field():
    with pytest.raises(ConfigError) as exc:
        validate({})
    missing = {p.split(":")[0] for p in exc.value.problems}
    assert missing == set(REQUIRED)


def test_unknown_field_and_unsorted_eps(tmp_path):
    raw = json.loads((CONFIGS / "arnold.json").read_text())
    with pytest.raises(ConfigError) as exc:
        validate(dict(raw, colour="blue", eps_list=[2e-3, 1e-3]), CONFIGS)
    text = " ".join(exc.value.problems)
    assert "colour: unknown field" in text
    assert "eps_list: must be sorted ascending" in text


def test_tolerances_must_be_positive():
    raw = json.loads((CONFIGS / "arnold.json").read_text())
    raw["tolerances"] = {"residual": 0.0, "exactness": 1e-6}
    with pytest.raises(ConfigError) as exc:
        validate(raw, CONFIGS)
    text = " ".join(exc.value.problems)
    assert "tolerances.residual" in text and "tolerances.decay_slack" in text


def test_resonant_frequency_exit_2(tmp_path, capsys):
    p = write_config(tmp_path, omega0=[0.0])
    assert main(["validate", "--config", str(p)]) == 2
    assert "higher-multiplicity resonance" in capsys.readouterr().err


def test_schema_error_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{}")
    assert main(["split", "--config", str(p)]) == 2
    assert "stage config" in capsys.readouterr().err


def test_pipeline_failure_names_stage(tmp_path, capsys):
    p = write_config(tmp_path, delta0=1e-12)
    assert main(["normalform", "--config", str(p), "--out", str(tmp_path / "h.json")]) == 1
    assert "stage normalform" in capsys.readouterr().err


def test_emit_parse_round_trip():
    rep = {"b": [0.1, 1e-300, 2.5e17], "a": {"z": 1, "y": True, "x": None}, "c": "text"}
    text = emit_json(rep)
    assert parse_report(text) == rep
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')


def test_csv_report_format():
    out = emit_report({"columns": ["a", "b"], "rows": [{"a": 0.1, "b": 2}]}, "csv")
    assert out == "a,b\n0.10000000000000001,2\n"


def test_timemap_csv(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["timemap", "--potential", str(CONFIGS / "pendulum.json"), "--samples", "9",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 9 and set(rows[0]) == {"x", "s", "chi", "psi"}


def test_homological_domega(tmp_path, capsys):
    v = tmp_path / "v.json"
    v.write_text(json.dumps({"dims": 1, "cutoffs": [1], "entries": [[1, 0.5, 0]]}))
    f = tmp_path / "f.json"
    f.write_text(json.dumps({"omega": [1.0], "K_max": 4}))
    out = tmp_path / "u.json"
    assert main(["homological", "--op", "domega", "--in", str(v), "--freq", str(f), "--out", str(out),
                 "--residual"]) == 0
    u = json.loads(out.read_text())
    assert u["entries"] == [[1, 0, -0.5]]
    assert "residual" in capsys.readouterr().err


def test_zero_perturbation_split(tmp_path):
    p = write_config(tmp_path, mu=0.0, eps_list=[1e-3])
    out = tmp_path / "run" / "report.json"
    assert main(["split", "--config", str(p), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["coeffs"] == {"+": {}, "-": {}}
    assert all(v["passed"] for v in rep["checks"].values())
    assert (out.parent / "manifold.json").exists() and (out.parent / "diag.csv").exists()


@pytest.mark.slow
def test_arnold_sweep_row(tmp_path):
    p = write_config(tmp_path, eps_list=[1e-3])
    out = tmp_path / "sweep.csv"
    assert main(["sweep-eps", "--config", str(p), "--out", str(out), "--threads", "2"]) == 0
    rows = list(csv.DictReader(out.open()))
    assert rows and rows[0]["mode_k1"] == "1" and float(rows[0]["abs_coeff"]) > 0
    assert int(rows[0]["n_critical"]) >= 4
