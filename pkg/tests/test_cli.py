"""Config parsing, experiment runners, CSV determinism, exit codes."""

import math

import pytest

from srlab.cli import main, run
from srlab.config import parse_config
from srlab.errors import OutOfRange, ParseError, UnknownKey

MINIMAL_RISK = """
experiment.kind = risk
model.name = ar1-gauss
model.a0 = 0.0
model.a1 = 0.5
detector.kind = sr
detector.beta = 0.05
risk.functional = lpfa
mc.reps = 2000
run.seed = 3
"""


def test_parse_minimal_config_fills_reference_defaults():
    cfg = parse_config(MINIMAL_RISK)
    assert cfg.kind == "risk"
    assert cfg.model_name == "ar1-gauss"
    assert cfg.model_params == {"a0": 0.0, "a1": 0.5}
    assert cfg.detector["beta"] == 0.05
    # window defaults resolve through the calibration sheet at run time
    from srlab.calibration import calibrate_for_beta
    sheet = calibrate_for_beta(0.05)
    assert sheet.m_star == 1 + math.floor((1 + abs(math.log(0.05))) ** 2)
    assert sheet.k_star == 2 * sheet.m_star


def test_duplicate_key_is_parse_error():
    text = MINIMAL_RISK + "model.a0 = 0.1\n"
    with pytest.raises(ParseError, match="duplicate"):
        parse_config(text)


def test_unknown_key_rejected():
    with pytest.raises(UnknownKey, match="unknown key"):
        parse_config(MINIMAL_RISK + "risk.bogus = 1\n")
    with pytest.raises(UnknownKey):
        parse_config("model.name = ar1-gauss\n")  # missing experiment.kind


def test_out_of_range_values_rejected():
    with pytest.raises(OutOfRange):
        parse_config(MINIMAL_RISK.replace("detector.beta = 0.05",
                                          "detector.beta = 1.5"))
    with pytest.raises(OutOfRange):
        parse_config(MINIMAL_RISK.replace("experiment.kind = risk",
                                          "experiment.kind = nonsense"))
    with pytest.raises(ParseError):
        parse_config("experiment.kind risk\n")


def test_list_values_and_comments():
    cfg = parse_config(
        "experiment.kind = sweep\n"
        "model.name = ar1-gauss\n"
        "model.a0 = 0.0  # pre-change\n"
        "model.a1 = 0.5\n"
        "sweep.h_grid = [100.0, 1000.0, 10000.0]\n"
        "sweep.nu = [0, 10]\n"
        "mc.reps = 100\n")
    assert cfg.extra["h_grid"] == [100.0, 1000.0, 10000.0]
    assert cfg.extra["nu"] == [0, 10]


def _run_cli(tmp_path, text, name, seed=None):
    tmp_path.mkdir(parents=True, exist_ok=True)
    cfg_path = tmp_path / "exp.conf"
    cfg_path.write_text(text)
    out = tmp_path / "out"
    argv = [name, "--config", str(cfg_path), "--out", str(out)]
    if seed is not None:
        argv += ["--seed", str(seed)]
    code = main(argv)
    return code, out


def test_risk_experiment_writes_schema_and_is_deterministic(tmp_path):
    text = MINIMAL_RISK + "run.threads = 1\n"
    code, out = _run_cli(tmp_path, text, "risk")
    assert code == 0
    risk_csv = (out / "risk.csv").read_bytes()
    manifest = (out / "manifest.txt").read_text()
    assert "seed: 3" in manifest and "experiment: risk" in manifest
    header = risk_csv.decode().splitlines()[0]
    assert header == "functional,nu,estimate,se,reps,censored"
    # identical config, different worker count: identical bytes
    code2, out2 = _run_cli(tmp_path / "again", text.replace(
        "run.threads = 1", "run.threads = 3"), "risk")
    assert code2 == 0
    assert (out2 / "risk.csv").read_bytes() == risk_csv


def test_risk_delay_rows_include_conditional_and_grid_max(tmp_path):
    text = (
        "experiment.kind = risk\n"
        "model.name = ar1-gauss\n"
        "model.a0 = 0.0\n"
        "model.a1 = 0.5\n"
        "detector.threshold = 50.0\n"
        "risk.functional = delay\n"
        "risk.nu = [0, 5]\n"
        "mc.reps = 1000\n"
        "mc.n_max = 800\n")
    code, out = _run_cli(tmp_path, text, "risk")
    assert code == 0
    lines = (out / "risk.csv").read_text().splitlines()
    functionals = [line.split(",")[0] for line in lines[1:]]
    assert functionals == ["Rnu", "RnuStar", "Rnu", "RnuStar", "RnuGridMax"]


def test_sweep_experiment_summary_schema(tmp_path):
    text = (
        "experiment.kind = sweep\n"
        "model.name = ar1-gauss\n"
        "model.a0 = 0.0\n"
        "model.a1 = 0.5\n"
        "sweep.h_grid = [100.0, 1000.0, 10000.0]\n"
        "mc.reps = 500\n"
        "mc.n_max = 1500\n")
    code, out = _run_cli(tmp_path, text, "sweep")
    assert code == 0
    lines = (out / "sweep_summary.csv").read_text().splitlines()
    assert lines[0] == "slope,ci_lo,ci_hi,one_over_I"
    values = lines[1].split(",")
    assert float(values[3]) == pytest.approx(6.0)
    # 17-significant-digit floats round-trip
    assert float(values[0]) == float(repr(float(values[0])))


def test_calibrate_experiment_membership_pass(tmp_path):
    text = (
        "experiment.kind = calibrate\n"
        "calibrate.beta = 0.1\n"
        "model.name = ar1-gauss\n"
        "model.a0 = 0.0\n"
        "model.a1 = 0.5\n"
        "mc.reps = 20000\n")
    code, out = _run_cli(tmp_path, text, "calibrate")
    assert code == 0
    cal = (out / "calibration.csv").read_text().splitlines()
    assert cal[0].startswith("beta,m_star,k_star,rho1,rho2")
    memb = (out / "membership.csv").read_text()
    assert "PASS" in memb and "FAIL" not in memb


def test_calibrate_without_model_skips_membership(tmp_path):
    text = "experiment.kind = calibrate\ncalibrate.beta = 0.05\n"
    code, out = _run_cli(tmp_path, text, "calibrate")
    assert code == 0
    assert not (out / "membership.csv").exists()


def test_exit_code_two_on_failed_verdict(tmp_path, monkeypatch):
    import srlab.cli as cli_mod

    class FailingReport:
        lpfa = lcpfa = 0.9
        lpfa_se = lcpfa_se = 0.0
        lpfa_pass = lcpfa_pass = False
        passed = False
        reps = 10

    monkeypatch.setattr(cli_mod, "check_inclusions",
                        lambda *a, **k: FailingReport())
    text = (
        "experiment.kind = calibrate\n"
        "calibrate.beta = 0.1\n"
        "model.name = ar1-gauss\n"
        "model.a0 = 0.0\n"
        "model.a1 = 0.5\n"
        "mc.reps = 10000\n")
    code, _ = _run_cli(tmp_path, text, "calibrate")
    assert code == 2


def test_audit_experiment_files(tmp_path):
    text = (
        "experiment.kind = audit\n"
        "model.name = ar1-gauss\n"
        "model.a0 = 0.0\n"
        "model.a1 = 0.5\n"
        "audit.eps = [0.1]\n"
        "audit.k_grid = [0, 2]\n"
        "audit.n_grid = [20, 60]\n"
        "mc.reps = 10000\n")
    code, out = _run_cli(tmp_path, text, "audit")
    assert code == 0
    assert (out / "audit.csv").read_text().splitlines()[0] == "k,n,eps,p_hat,se"
    assert (out / "audit_summary.csv").exists()
    assert (out / "drift.csv").exists()
    assert (out / "minorization.csv").exists()


def test_demo_lai_experiment(tmp_path):
    text = (
        "experiment.kind = demo-lai\n"
        "model.name = ar2d\n"
        "model.lam1 = 0.6\n"
        "model.lam2 = 0.05\n"
        "model.sigma1 = 0.03\n"
        "model.sigma2 = 0.9\n"
        "model.rho = 6.0\n"
        "demo.eps = 0.17\n"
        "demo.n = 30\n"
        "demo.x2_grid = [10.0, 100.0]\n"
        "demo.i_value = 0.57\n"
        "mc.reps = 2000\n")
    code, out = _run_cli(tmp_path, text, "demo-lai")
    assert code == 0
    lines = (out / "demo_lai.csv").read_text().splitlines()
    assert lines[0] == "x2,p_hat,se,i_value,eps,n"
    assert len(lines) == 3


def test_subcommand_kind_mismatch_is_error(tmp_path):
    cfg = tmp_path / "exp.conf"
    cfg.write_text(MINIMAL_RISK)
    assert main(["sweep", "--config", str(cfg)]) == 1


def test_models_list(capsys):
    assert main(["models", "list"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert "ar1-gauss" in out and "ar2d" in out and "var1" in out


def test_seed_override_changes_outputs(tmp_path):
    code, out_a = _run_cli(tmp_path / "a", MINIMAL_RISK, "risk", seed=1)
    code, out_b = _run_cli(tmp_path / "b", MINIMAL_RISK, "risk", seed=2)
    assert (out_a / "risk.csv").read_bytes() != (out_b / "risk.csv").read_bytes()


def test_risk_pfa_with_alpha_rho_threshold(tmp_path):
    text = (
        "experiment.kind = risk\n"
        "model.name = ar1-gauss\n"
        "model.a0 = 0.0\n"
        "model.a1 = 0.5\n"
        "detector.kind = sr\n"
        "detector.alpha = 0.05\n"
        "detector.rho = 0.05\n"
        "risk.functional = pfa\n"
        "mc.reps = 5000\n")
    code, out = _run_cli(tmp_path, text, "risk")
    assert code == 0
    lines = (out / "risk.csv").read_text().splitlines()
    row = lines[1].split(",")
    assert row[0] == "PFA" and row[1] == ""
    assert 0.0 <= float(row[2]) <= 0.05
