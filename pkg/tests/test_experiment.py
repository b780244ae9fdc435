import csv
import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from onebit_hankel import experiment as ex
from onebit_hankel.cli import main
from onebit_hankel.errors import ConfigError, StageError
from onebit_hankel.experiment import (
    ExperimentConfig,
    emit_outputs,
    load_config,
    run_experiment,
    run_monte_carlo,
    save_config,
)
from onebit_hankel.spectrum import read_spectrum_csv

SCHEMA = json.loads(resources.files("onebit_hankel").joinpath("schemas/report.schema.json").read_text())


@pytest.fixture(scope="module")
def default_report():
    return run_experiment(ExperimentConfig())


def test_defaults_describe_the_radar_scene():
    cfg = ExperimentConfig()
    assert cfg.geometry.tx == [1, 19, 37, 55, 79, 91]
    assert cfg.geometry.rx == [12, 22, 25, 39, 58, 62, 70, 73]
    assert cfg.scene.angles_deg == [-57.0, -34.0]
    assert cfg.scene.snr_db == 20.0
    assert cfg.scene.range_m == 100.0 and cfg.scene.velocity_mps == -10.0
    assert cfg.quantization.mode == "auto"
    packaged = json.loads(resources.files("onebit_hankel").joinpath("configs/default.json").read_text())
    assert ExperimentConfig.from_dict(packaged) == cfg


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig().replace(**{"scene.snr_db": 13.37, "solver.tau": 0.1 + 0.2, "seed": 2 ** 64 - 1})
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again == cfg
    assert again.to_json() == cfg.to_json()
    p = tmp_path / "c.json"
    save_config(cfg, p)
    assert load_config(p) == cfg
    assert load_config(None) == ExperimentConfig()


@pytest.mark.parametrize("change", [
    {"scene.angles_deg": []},
    {"scene.angles_deg": [95.0]},
    {"quantization.mode": "two-bit"},
    {"quantization.mode": "explicit"},
    {"solver.tol": 0.0},
    {"spectrum.n_fft": 3000},
    {"trials": 0},
    {"seed": -1},
    {"geometry.tx": []},
])
def test_config_validation(change):
    with pytest.raises(ConfigError):
        ExperimentConfig().replace(**change)


def test_config_rejects_unknown_keys_and_bad_json(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"solver": {"learning_rate": 1}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("{not json")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_default_run(default_report):
    r = default_report
    assert r.detected
    found = sorted(p["angle_deg"] for p in r.peaks_completed["peaks"])
    assert abs(found[0] + 57) <= 1 and abs(found[1] + 34) <= 1
    assert r.geometry["M"] == 152 and r.geometry["n_virtual"] == 44
    assert r.geometry["hankel_dims"] == [76, 77] and r.geometry["m_prime"] == 1943
    assert r.theory["m_prime"] == 1943
    assert r.delta > 0 and r.completed.shape == (152,)
    assert r.svt["stop_reason"] in ("tol", "max_iters")
    assert r.pslr_gain_db == pytest.approx(r.peaks_completed["pslr_db"] - r.peaks_sparse["pslr_db"])


def test_normalizer_is_first_observed_element():
    cfg = ExperimentConfig().replace(**{"geometry.tx": [2, 5], "geometry.rx": [0, 1, 7]})
    r = run_experiment(cfg)
    assert r.completed.shape == (r.geometry["M"],)
    cfg0 = ExperimentConfig().replace(**{"quantization.mode": "none", "scene.snr_db": None,
                                         "solver.tol": 1e-6, "solver.max_iters": 3000})
    r0 = run_experiment(cfg0)
    # noiseless: the first element is exactly 1 after normalization
    assert r0.normalizer == pytest.approx(2.0)


def test_noiseless_unquantized_debug_mode():
    cfg = ExperimentConfig().replace(**{"quantization.mode": "none", "scene.snr_db": None,
                                        "solver.tol": 1e-6, "solver.max_iters": 3000})
    r = run_experiment(cfg)
    assert r.error_metrics["relative_error"] < 1e-3
    assert r.svt["converged"]


def test_square_mode_and_explicit_delta():
    cfg = ExperimentConfig().replace(**{"hankel.square": True, "quantization.mode": "explicit",
                                        "quantization.delta": 4.2})
    r = run_experiment(cfg)
    assert r.geometry["hankel_dims"] == [76, 76] and r.geometry["m_prime"] == 1918
    assert r.delta == 4.2
    assert r.completed.shape == (152,)


def test_residual_trend_non_increasing():
    cfg = ExperimentConfig()
    histories = [run_experiment(cfg, seed).residuals for seed in range(10)]
    n = min(len(h) for h in histories)
    med = np.median([h[:n] for h in histories], axis=0)
    assert np.all(np.diff(med) <= 1e-12)


def test_stage_errors_are_labelled(monkeypatch):
    def boom(*a, **k):
        raise np.linalg.LinAlgError("SVD did not converge")

    monkeypatch.setattr(ex, "svt_complete", boom)
    with pytest.raises(StageError) as info:
        run_experiment(ExperimentConfig())
    assert info.value.stage == "svt"


def test_emit_outputs(tmp_path, default_report):
    manifest = emit_outputs(default_report, tmp_path)
    assert set(manifest) == {"spectrum_sparse.csv", "spectrum_completed.csv", "residuals.csv", "report.json"}
    body = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(body, SCHEMA)
    assert body["residuals_path"] == "residuals.csv"
    back = read_spectrum_csv(tmp_path / "spectrum_completed.csv")
    np.testing.assert_array_equal(back.angles_deg, default_report.spectrum_completed.angles_deg)
    np.testing.assert_array_equal(back.magnitudes_db, default_report.spectrum_completed.magnitudes_db)
    with open(tmp_path / "residuals.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iteration", "relative_residual"]
    assert [float(r[1]) for r in rows[1:]] == default_report.residuals


def test_schema_rejects_incomplete_report(default_report):
    body = json.loads(default_report.to_json())
    del body["theory"]["satisfied"]
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(body, SCHEMA)


def test_emit_outputs_reports_path_on_failure(tmp_path, default_report):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        emit_outputs(default_report, blocker / "sub")


def test_report_deterministic(tmp_path):
    a = run_experiment(ExperimentConfig(), 5).to_json()
    b = run_experiment(ExperimentConfig(), 5).to_json()
    c = run_experiment(ExperimentConfig(), 6).to_json()
    assert a == b and a != c


def test_monte_carlo_single_trial_matches_run(default_report):
    mc = run_monte_carlo(ExperimentConfig(), trials=1)
    assert mc.reports[0].to_json() == default_report.to_json()
    agg = mc.aggregate()
    assert agg["relative_error"]["median"] == default_report.error_metrics["relative_error"]
    assert agg["detection_rate"] == float(default_report.detected)


def test_monte_carlo_records_failures(monkeypatch):
    real = ex.run_experiment

    def flaky(cfg, seed=None):
        if seed == 1:
            raise StageError("svt", RuntimeError("synthetic failure"))
        return real(cfg, seed)

    monkeypatch.setattr(ex, "run_experiment", flaky)
    mc = run_monte_carlo(ExperimentConfig(), trials=3)
    assert mc.reports[1] is None and mc.failures == [{"seed": 1, "stage": "svt", "error": "synthetic failure"}]
    agg = mc.aggregate()
    assert agg["completed_trials"] == 2 and agg["failed_trials"] == 1
    assert agg["detection_rate"] <= 2 / 3
    json.loads(mc.to_json())


def test_monte_carlo_parallel_matches_serial():
    cfg = ExperimentConfig().replace(seed=40)
    a = run_monte_carlo(cfg, trials=4, workers=1).to_json()
    b = run_monte_carlo(cfg, trials=4, workers=2).to_json()
    assert a == b


def test_cli_run_and_exit_codes(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path / "a"), "--seed", "3"]) == 0
    body = json.loads((tmp_path / "a" / "report.json").read_text())
    assert body["seed"] == 3
    jsonschema.validate(body, SCHEMA)

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"scene": {"angles_deg": []}}))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "b")]) == 1
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 1

    diverge = tmp_path / "div.json"
    diverge.write_text(json.dumps({"solver": {"tau": 0.0, "step": 50.0, "tol": 1e-9}}))
    assert main(["run", "--config", str(diverge), "--out", str(tmp_path / "c")]) == 2
    assert "numerical failure" in capsys.readouterr().err


def test_cli_other_verbs(tmp_path):
    assert main(["rank-check", "--out", str(tmp_path)]) == 0
    rc = json.loads((tmp_path / "rank_check.json").read_text())
    assert rc["rank"] == 2 and rc["ratio_next"] < 1e-8
    assert main(["montecarlo", "--out", str(tmp_path), "--trials", "2"]) == 0
    mc = json.loads((tmp_path / "montecarlo.json").read_text())
    assert mc["trials"] == 2 and len(mc["per_trial"]) == 2
    cfg = tmp_path / "th.json"
    cfg.write_text(json.dumps({"theory": {"n1": 10, "n2": 10, "epsilon": 0.8, "max_iters": 100}}))
    assert main(["validate-theory", "--config", str(cfg), "--out", str(tmp_path), "--trials", "3"]) == 0
    th = json.loads((tmp_path / "theory.json").read_text())
    assert th["trials"] == 3 and th["m_prime"] == 35
    assert main(["montecarlo", "--out", str(tmp_path), "--trials", "0"]) == 1
