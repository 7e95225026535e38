"""Detector recursions against brute-force definitional evaluation."""

import math

import numpy as np
import pytest
from sklearn.base import clone

from srlab import (CusumDetector, ShiryaevDetector, SRDetector, build_model,
                   run_to_stop)
from srlab.errors import AlreadyStopped, InvalidRho, OutOfRange
from srlab.risk import simulate_stop_times
from srlab.util import stream_rng


# -- definitional oracles ----------------------------------------------------

def sr_direct(z):
    """R_n = sum_{k=1..n} exp(Z_n^{k-1}) summed outright."""
    z = np.asarray(z, dtype=float)
    out = []
    for n in range(1, len(z) + 1):
        tails = [math.exp(z[k:n].sum()) for k in range(n)]
        out.append(sum(tails))
    return np.array(out)


def cusum_direct(z):
    """W_n = max_{1<=k<=n} Z_n^{k-1} by brute force over k."""
    z = np.asarray(z, dtype=float)
    out = []
    for n in range(1, len(z) + 1):
        out.append(max(z[k:n].sum() for k in range(n)))
    return np.array(out)


def shiryaev_direct(z, rho):
    """Lambda_n = sum_{k=0..n-1} (1-rho)^{-(n-k)} exp(Z_n^k)."""
    z = np.asarray(z, dtype=float)
    out = []
    for n in range(1, len(z) + 1):
        out.append(sum((1.0 - rho) ** (-(n - k)) * math.exp(z[k:n].sum())
                       for k in range(n)))
    return np.array(out)


def _run_statistic(detector, z):
    detector.reset()
    path = []
    for value in z:
        detector.update(float(value))
        path.append(detector.log_statistic)
    return np.exp(path) if detector.kind != "cusum" else np.array(path)


# -- worked examples ---------------------------------------------------------

def test_sr_unit_likelihood_ratio_counts_steps():
    det = SRDetector()
    values = _run_statistic(det, np.zeros(20))
    assert values == pytest.approx(np.arange(1, 21), rel=1e-12)


def test_sr_worked_values():
    det = SRDetector()
    det.reset()
    det.update(math.log(2.0))
    assert math.exp(det.log_statistic) == pytest.approx(2.0, rel=1e-12)
    det.update(math.log(0.5))
    assert math.exp(det.log_statistic) == pytest.approx(1.5, rel=1e-12)


def test_cusum_worked_values():
    det = CusumDetector()
    assert _run_statistic(det, [1.0, -3.0, 2.0]) == pytest.approx([1.0, -2.0, 2.0])
    assert np.all(_run_statistic(det, np.zeros(10)) == 0.0)


def test_shiryaev_worked_value():
    det = ShiryaevDetector(rho=0.5)
    det.reset()
    det.update(0.0)
    assert math.exp(det.log_statistic) == pytest.approx(2.0, rel=1e-12)


def test_shiryaev_rejects_bad_rho():
    for rho in (0.0, 1.0, -0.1, 1.7):
        with pytest.raises(InvalidRho):
            ShiryaevDetector(rho=rho).reset()


def test_update_after_stop_raises():
    det = SRDetector(threshold=0.5)
    det.reset()
    assert det.update(0.0)
    with pytest.raises(AlreadyStopped):
        det.update(0.0)


# -- recursion vs definition -------------------------------------------------

def test_recursions_match_definitions_on_random_sequences():
    rng = np.random.default_rng(100)
    for _ in range(50):
        n = int(rng.integers(1, 51))
        z = rng.standard_normal(n) * rng.uniform(0.2, 3.0)
        r = _run_statistic(SRDetector(), z)
        assert r == pytest.approx(sr_direct(z), rel=1e-10)
        w = _run_statistic(CusumDetector(), z)
        assert w == pytest.approx(cusum_direct(z), rel=1e-10, abs=1e-10)
        rho = float(rng.uniform(0.01, 0.9))
        lam = _run_statistic(ShiryaevDetector(rho=rho), z)
        assert lam == pytest.approx(shiryaev_direct(z, rho), rel=1e-10)


def test_shiryaev_converges_to_sr_as_rho_vanishes():
    rng = np.random.default_rng(3)
    z = rng.standard_normal(20)
    sr = SRDetector().fit(z)
    sh = ShiryaevDetector(rho=1e-12).fit(z)
    assert np.max(np.abs(sh.statistic_path_ - sr.statistic_path_)) < 1e-9


def test_shiryaev_dominates_sr_pathwise():
    rng = np.random.default_rng(4)
    z = rng.standard_normal(400) * 0.5 + 0.05
    for rho in (0.05, 0.3):
        for h in (5.0, 50.0, 500.0):
            sr = SRDetector(threshold=h).fit(z)
            sh = ShiryaevDetector(rho=rho, threshold=h).fit(z)
            assert np.all(sh.statistic_path_[:len(sr.statistic_path_)]
                          >= sr.statistic_path_[:len(sh.statistic_path_)] - 1e-12)
            if sh.stopping_time_ is not None and sr.stopping_time_ is not None:
                assert sh.stopping_time_ <= sr.stopping_time_


def test_raising_threshold_never_decreases_tau():
    rng = np.random.default_rng(5)
    z = rng.standard_normal(600) * 0.6 + 0.1
    taus = []
    for h in (2.0, 20.0, 200.0, 2000.0):
        fit = SRDetector(threshold=h).fit(z)
        taus.append(fit.stopping_time_ or math.inf)
    assert taus == sorted(taus)


def test_log_space_survives_huge_increments():
    det = SRDetector()
    det.reset()
    for _ in range(10_000):
        det.update(30.0)
    assert math.isfinite(det.log_statistic)
    assert det.log_statistic == pytest.approx(10_000 * 30.0, rel=1e-6)


def test_stopped_implies_crossing_only_at_tau():
    rng = np.random.default_rng(6)
    z = rng.standard_normal(300) * 0.8 + 0.1
    fit = SRDetector(threshold=40.0).fit(z)
    assert fit.stopped_
    log_h = math.log(40.0)
    assert fit.statistic_path_[-1] >= log_h
    assert np.all(fit.statistic_path_[:-1] < log_h)


# -- estimator API -----------------------------------------------------------

def test_get_params_and_clone_round_trip():
    det = ShiryaevDetector(rho=0.2, alpha=0.1)
    params = det.get_params()
    assert params == {"rho": 0.2, "alpha": 0.1, "threshold": None}
    twin = clone(det)
    assert twin.get_params() == params
    det.set_params(rho=0.3)
    assert det.rho == 0.3


def test_fit_without_alarm_reports_open_run():
    fit = CusumDetector(threshold=math.inf).fit(np.ones(25))
    assert fit.stopping_time_ is None
    assert not fit.stopped_
    assert fit.n_steps_ == 25


def test_rejects_nonfinite_increments():
    det = SRDetector()
    det.reset()
    with pytest.raises(OutOfRange):
        det.update(math.nan)


# -- run_to_stop -------------------------------------------------------------

def test_run_to_stop_immediate_and_censored():
    model = build_model("ar1-gauss", a0=0.3, a1=0.3)  # z == 0, R_n = n
    rng = stream_rng(0, 1)
    res = run_to_stop(SRDetector(threshold=0.5), model, nu=0, n_max=50, rng=rng)
    assert res.tau == 1 and not res.censored
    res = run_to_stop(SRDetector(threshold=math.inf), model, nu=0, n_max=50,
                      rng=stream_rng(0, 2))
    assert res.censored and res.tau is None and res.n_steps == 50


def test_run_to_stop_martingale_consistency():
    # optional stopping: E_inf[min(tau, N)] = E_inf[R_{min(tau, N)}]
    #                                       >= h * P(tau <= N)
    model = build_model("ar1-gauss", a0=0.0, a1=0.5)
    h, n_max, reps = 15.0, 60, 20_000
    taus = simulate_stop_times(model, "sr", h, math.inf, n_max, reps, seed=8)
    trunc = np.where(taus > 0, taus, n_max).astype(float)
    p_hit = float(np.mean(taus > 0))
    lhs = float(trunc.mean())
    se = float(trunc.std(ddof=1) / math.sqrt(reps)) \
        + h * math.sqrt(p_hit * (1 - p_hit) / reps)
    assert lhs >= h * p_hit - 3.0 * se


def test_sr_log_recursion_matches_direct_summation_at_extreme_drift():
    # length <= 100 with |z| <= 30: the definitional sum is evaluated in
    # the log domain (logsumexp over explicitly materialized tail sums, a
    # different code path from the sequential recursion)
    rng = np.random.default_rng(30)
    for _ in range(20):
        n = int(rng.integers(2, 101))
        z = rng.uniform(-30.0, 30.0, n)
        fit = SRDetector().fit(z)
        s = np.concatenate([[0.0], np.cumsum(z)])
        for m in (1, n // 2, n):
            if m < 1:
                continue
            tails = s[m] - s[:m]
            direct = float(np.logaddexp.reduce(tails))
            log_r = fit.statistic_path_[m - 1]
            # 1e-10 relative error on R_m is 1e-10 absolute on log R_m
            assert abs(log_r - direct) < 1e-10


def test_shiryaev_statistic_rho_threads_through_risk_engines():
    from srlab import build_model, estimate_pfa

    model = build_model("ar1-gauss", a0=0.0, a1=0.5)
    report = estimate_pfa(model, "shiryaev", 380.0, rho=0.05, reps=2000,
                          seed=13, statistic_rho=0.05)
    assert report.estimate <= 0.05 + 3.0 * report.se
    with pytest.raises(InvalidRho):
        estimate_pfa(model, "shiryaev", 380.0, rho=0.05, reps=200, seed=13)


def test_shiryaev_alpha_threshold_resolution():
    # threshold defaults to (1 - alpha)/(rho * alpha); rho = alpha = 0.5
    # gives 2, and a zero increment reaches Lambda_1 = 2 exactly
    det = ShiryaevDetector(rho=0.5, alpha=0.5)
    det.reset()
    assert det.update(0.0)
    assert det.stopping_time == 1


def test_sr_nondecreasing_under_nonnegative_increments():
    rng = np.random.default_rng(31)
    z = np.abs(rng.standard_normal(200))
    path = SRDetector().fit(z).statistic_path_
    assert np.all(np.diff(path) >= 0.0)  # log scale, hence natural scale too
    assert np.all(np.isfinite(path))
