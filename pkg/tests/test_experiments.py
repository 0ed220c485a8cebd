import copy
import csv
import json
import math

import numpy as np
import pytest

from truncgauss import cli
from truncgauss.errors import LowMassError, SizeError, ValidationError
from truncgauss.experiments import (
    ExperimentConfig,
    apply_overrides,
    birthday_probability,
    cmd_estimate,
    cmd_fig1,
    cmd_lower_bound,
    cmd_moment_check,
    cmd_recover_set,
    cmd_tournament,
    default_tournament_config,
    parse_value,
)
from truncgauss.presets import FIG1_PRESETS, calibrate_halfspace, fig1_config, halfspace_with_mass, mills_ratio
from truncgauss.gaussian import GaussianParams, TruncatedGaussian, conditional_moments, truncated_sample
from truncgauss.rng import substream

SMALL_SGD = {"T": 400, "K": 1, "eval_points": 100}


def small_estimate_config(**extra):
    cfg = fig1_config("A")
    cfg.update(seed=3, k=2, n_psi=2000, n_moments=2000, n_eval=2000, sgd=dict(SMALL_SGD))
    cfg.update(extra)
    return cfg


def without_timings(obj):
    obj = copy.deepcopy(obj)
    obj.pop("timings", None)
    return obj


def test_config_validation():
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict(small_estimate_config(n_psi=0))
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict(small_estimate_config(bogus=1))
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict(small_estimate_config(seed=None))
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict(small_estimate_config(sgd={"K": 2}))
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict(small_estimate_config(transform="rotate"))
    cfg = ExperimentConfig.from_dict(small_estimate_config())
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_overrides_and_values():
    cfg = apply_overrides({"sgd": {"T": 5}}, {"sgd.T": 7, "a.b": "x"})
    assert cfg == {"sgd": {"T": 7}, "a": {"b": "x"}}
    assert parse_value("3") == 3 and parse_value("[1, 2]") == [1, 2] and parse_value("abc") == "abc"


def test_presets_reproduce_conditional_means():
    for name, p in FIG1_PRESETS.items():
        s = calibrate_halfspace(p["mean"], p["conditional_mean"])
        tg = TruncatedGaussian(GaussianParams(p["mean"], np.eye(2)), s)
        x, _ = truncated_sample(tg, substream(60, ord(name)), 2 * 10**5)
        mu, _ = conditional_moments(x)
        assert np.allclose(mu, p["conditional_mean"], atol=0.01)
    assert mills_ratio(0.0) == pytest.approx(math.sqrt(2 / math.pi))
    h = halfspace_with_mass([0.1, 0.78], [1.0, -1.0], 0.3)
    assert h.exact_mass(GaussianParams([0.1, 0.78], np.eye(2))) == pytest.approx(0.3)
    with pytest.raises(ValidationError):
        fig1_config("C")


def test_estimate_report_and_files(tmp_path):
    rep = cmd_estimate(small_estimate_config(), out=tmp_path)
    saved = json.loads((tmp_path / "report.json").read_text())
    assert saved["mu_hat"] == rep.mu_hat and saved["trace_file"] == "trace.csv"
    rows = list(csv.reader((tmp_path / "trace.csv").open()))
    assert rows[0] == ["run", "iteration", "objective", "clamp_count"]
    assert len(rows) == 1 + 101
    assert [r["degree"] for r in rep.per_degree] == [0, 1, 2]
    assert 0 <= rep.symdiff["value"] <= 1
    stage_sum = sum(v for k, v in rep.timings.items() if k != "total")
    assert stage_sum <= rep.timings["total"] + 1e-9


def test_estimate_deterministic():
    a = cmd_estimate(small_estimate_config()).to_json()
    b = cmd_estimate(small_estimate_config()).to_json()
    assert without_timings(a) == without_timings(b)
    c = cmd_estimate(small_estimate_config(seed=4)).to_json()
    assert c["mu_hat"] != a["mu_hat"]


def test_estimate_whiten_mode_untruncated():
    cfg = {"dim": 2, "mean": [0.3, -0.2], "covariance": [[1.2, 0.3], [0.3, 0.8]],
           "set": {"kind": "FullSpace", "dim": 2}, "seed": 1, "k": 2, "n_psi": 20000, "n_moments": 20000,
           "n_eval": 1000, "sgd": {"T": 5000}}
    rep = cmd_estimate(cfg)
    assert rep.mean_error < 0.1 and rep.cov_error < 0.2


def test_estimate_low_mass_is_tagged():
    cfg = small_estimate_config(set={"kind": "AxisBox", "lo": [8.0, 8.0], "hi": [9.0, 9.0]}, max_attempts=200)
    with pytest.raises(LowMassError) as info:
        cmd_estimate(cfg)
    assert info.value.stage == "sampling"


def test_fig1_outputs(tmp_path):
    rep = cmd_fig1({"seed": 2, "degrees": [1, 2], "n_psi": 3000, "n_moments": 3000, "sgd": SMALL_SGD,
                    "n_points": 50}, out=tmp_path)
    assert [d["k"] for d in rep["degrees"]] == [1, 2]
    summary = list(csv.reader((tmp_path / "summary.csv").open()))
    assert summary[0] == ["k", "mu_hat0", "mu_hat1", "mean_error"] and len(summary) == 3
    points = list(csv.reader((tmp_path / "points.csv").open()))
    kinds = {r[0] for r in points[1:]}
    assert kinds == {"sample", "true_mean", "conditional_mean", "estimate"}
    assert rep["mu_star"] == FIG1_PRESETS["A"]["mean"]


def test_lower_bound_small(tmp_path):
    rep = cmd_lower_bound({"seed": 5, "d": 3, "sizes": [4, 64], "trials": 4, "sgd": {"T": 300, "eval_points": 50}},
                          out=tmp_path)
    assert [r["m"] for r in rep["sizes"]] == [4, 64]
    assert rep["sizes"][1]["collision_fraction"] == 1.0
    header = next(csv.reader((tmp_path / "summary.csv").open()))
    assert "birthday_probability" in header and "mean_error" in header
    with pytest.raises(SizeError):
        cmd_lower_bound({"seed": 1, "d": 15})


def test_birthday_probability():
    assert birthday_probability(1, 16) == 0.0
    assert birthday_probability(2, 16) == pytest.approx(1 / 16)
    assert birthday_probability(17, 16) == 1.0
    exact = 1 - np.prod([1 - i / 256 for i in range(8)])
    assert birthday_probability(8, 256) == pytest.approx(exact)


def interval(lo, hi, mean=0.0):
    return {"mean": [mean], "covariance": [[1.0]], "set": {"kind": "AxisBox", "lo": [lo], "hi": [hi]}}


def test_moment_check_verdicts(tmp_path):
    same = cmd_moment_check({"seed": 1, "first": interval(0, 1), "second": interval(0, 1), "n": 20000, "n_tv": 2000})
    assert same["verdict"] == "same" and same["max_gap_in_stderr"] <= 3.0
    assert same["distance_in_stderr"] <= same["max_gap_in_stderr"]
    diff = cmd_moment_check({"seed": 1, "first": interval(0, 1), "second": interval(-1, 0), "n": 20000,
                             "n_tv": 2000}, out=tmp_path)
    assert diff["verdict"] == "different" and diff["moment_distance"] >= 1e-3
    assert (tmp_path / "summary.csv").exists()
    zero = cmd_moment_check({"seed": 1, "first": interval(0, 1), "second": interval(-1, 0), "k": 0, "n": 1000,
                             "n_tv": 1000})
    assert zero["verdict"] == "inconclusive" and zero["moment_distance"] == 0.0


def test_recover_set_outputs(tmp_path):
    res = cmd_recover_set(dict(small_estimate_config(), grid=11), out=tmp_path)
    rows = list(csv.reader((tmp_path / "points.csv").open()))
    assert rows[0] == ["x0", "x1", "recovered", "truth"] and len(rows) == 1 + 121
    assert 0.0 <= res["grid_agreement"] <= 1.0
    assert json.loads((tmp_path / "report.json").read_text())["recovered_set"]["kind"] == "RecoveredSet"


def test_tournament_command(tmp_path):
    cfg = default_tournament_config()
    assert len(cfg["hypotheses"]) == 20
    rep = cmd_tournament(dict(cfg, seed=3, eps=0.3, n_tv=2000), out=tmp_path)
    assert rep["winner"] is not None and len(rep["tv_to_target"]) == 20
    assert rep["tv_to_target"][0] < 0.05
    assert (tmp_path / "summary.csv").exists()


def test_cli_success_and_stdout(tmp_path, capsys):
    assert cli.run(["moment-check", "--seed", "1", "--n", "2000", "--n_tv", "500"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["verdict"] == "different"
    assert cli.run(["moment-check", "--seed", "1", "--n", "2000", "--n_tv", "500", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "report.json").exists()


def test_cli_exit_codes(tmp_path):
    assert cli.run(["estimate"]) == 2  # missing seed
    assert cli.run(["estimate", "--seed", "1", "--n_psi", "0"]) == 2
    assert cli.run(["estimate", "--seed", "1", "--config", str(tmp_path / "missing.json")]) == 2
    assert cli.run(["nonsense"]) == 2
    assert cli.run(["estimate", "--seed", "1", "--sgd.T"]) == 2
    bad = small_estimate_config(set={"kind": "AxisBox", "lo": [8.0, 8.0], "hi": [9.0, 9.0]}, max_attempts=200)
    path = tmp_path / "low.json"
    path.write_text(json.dumps(bad))
    assert cli.run(["estimate", "--config", str(path)]) == 3


def test_cli_config_file_and_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(small_estimate_config()))
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.run(["estimate", "--config", str(path), "--out", str(out1)]) == 0
    assert cli.run(["estimate", "--config", str(path), "--out", str(out2), "--sgd.T", "300"]) == 0
    r1 = json.loads((out1 / "report.json").read_text())
    r2 = json.loads((out2 / "report.json").read_text())
    assert r1["config"]["sgd"]["T"] == 400 and r2["config"]["sgd"]["T"] == 300
