import json

import pytest

from hjb_eigen.cli import ConfigError, ExperimentConfig, emit_report, main, run_experiment


def test_defaults_validate():
    cfg = ExperimentConfig.from_dict({})
    assert cfg.pipeline == "full-suite" and cfg.spec().p == 3.0


@pytest.mark.parametrize("raw,path", [
    ({"pipeline": "eigencurve", "lagrangian": {"p": 2.0}}, "$.lagrangian.p"),
    ({"pipeline": "hopf-cole", "lagrangian": {"p": 3.0}}, "$.lagrangian.p"),
    ({"lagrangian": {"f": {"kind": "sawtooth"}}}, "$.lagrangian.f.kind"),
    ({"lagrangian": {"epsilon": -1}}, "$.lagrangian.epsilon"),
    ({"grid": {"h": 5.0}}, "$.grid.h"),
    ({"schedule": {"deltas": [0.1, 0.2]}}, "$.schedule.deltas"),
    ({"schedule": {"lambdas": [0.1, 0.2]}}, "$.schedule.lambdas"),
    ({"formats": ["xml"]}, "$.formats[0]"),
    ({"domain": {"kind": "disk", "params": {"R": -1}}}, "$.domain"),
    ({"colour": "blue"}, "$.colour"),
])
def test_schema_errors_name_field(raw, path):
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_dict(raw)
    assert exc.value.path == path


def _hc_config(out):
    return ExperimentConfig.from_dict({"pipeline": "hopf-cole", "lagrangian": {"p": 2.0, "epsilon": 1.0},
                                       "grid": {"h": 2 / 256}, "output": str(out),
                                       "formats": ["csv", "json", "plot-data"]})


def test_hopf_cole_pipeline_closed_forms(tmp_path):
    rep = run_experiment(_hc_config(tmp_path))
    names = {c.name for c in rep.checks}
    assert {"closed_form_eigenvalue", "closed_form_shape"} <= names
    assert rep.passed
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["passed"] is True
    assert all(isinstance(c["passed"], bool) for c in summary["checks"])
    assert "wall_time" not in json.dumps(summary)
    dat = (tmp_path / "eigencurve_p2.dat").read_text().splitlines()
    assert dat[0].startswith("# ") and len(dat[1].split()) == 2


def test_repeat_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_experiment(_hc_config(a))
    run_experiment(_hc_config(b))
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_derivatives_pipeline_ledger(tmp_path):
    cfg = ExperimentConfig.from_dict({"pipeline": "derivatives", "grid": {"h": 0.01}, "output": str(tmp_path)})
    rep = run_experiment(cfg)
    assert {"duality_gap", "derivative_identity"} <= {c.name for c in rep.checks}
    assert rep.passed
    header = (tmp_path / "eigenvalue.csv").read_text().splitlines()[0]
    assert header == "c_h,c_primal,c_dual,duality_gap,stationarity,cprime_minus,cprime_plus"


def test_pipeline_failure_gives_partial_report(tmp_path):
    cfg = ExperimentConfig.from_dict({"pipeline": "discounted", "grid": {"h": 0.3}, "output": str(tmp_path)})
    rep = run_experiment(cfg)
    assert "discounted" in rep.failures and not rep.passed
    assert json.loads((tmp_path / "summary.json").read_text())["failures"]


def test_csv_quoting(tmp_path):
    from hjb_eigen.cli import RunReport, Table
    rep = RunReport(ExperimentConfig.from_dict({"output": str(tmp_path), "formats": ["csv"]}))
    rep.tables["t"] = Table(["name", "value"], [("a,b", 1.0), ('say "hi"', 2.5)])
    emit_report(rep)
    assert (tmp_path / "t.csv").read_text() == 'name,value\n"a,b",1\n"say ""hi""",2.5\n'


def test_main_exit_codes_and_env_override(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("HJB_EIGEN_OUT", str(tmp_path / "env"))
    assert main(["hopf-cole", "--h", str(2 / 256), "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "env" / "summary.json").exists()
    assert not (tmp_path / "flag").exists()
    assert main(["eigencurve", "--p", "2"]) == 2
    assert "$.lagrangian.p" in capsys.readouterr().err


def test_config_file(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"lagrangian": {"epsilon": 0.5, "f": "cosine"}, "grid": {"h": 2 / 256}}))
    assert main(["hopf-cole", "--config", str(cfg_path), "--out", str(tmp_path / "o"), "--p", "2"]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["config"]["lagrangian"]["epsilon"] == 0.5
