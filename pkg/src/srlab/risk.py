"""Monte Carlo estimation of the false-alarm and detection-delay risks.

Replicates are partitioned into fixed-size batches; every batch owns an RNG
stream derived from (seed, function tag, batch index), so results are
bit-for-bit reproducible for any worker count.  Standard errors come from
replicate-level influence values (nonparametric delta method), and every
guard band in this module is 3 standard errors.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .detectors import cusum_step, shiryaev_step, sr_step
from .errors import DegenerateConditioning, ExcessCensoring, InvalidRho, OutOfRange
from .util import batch_sizes, run_tasks, stream_rng
from .validation import check_int, check_unit_open

DETECTOR_KINDS = ("sr", "cusum", "shiryaev")


@dataclass
class RiskReport:
    """One estimated risk functional with its Monte Carlo uncertainty."""
    functional: str
    estimate: float
    se: float
    reps: int
    censored_frac: float = 0.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.se < 0:
            raise OutOfRange("standard error must be nonnegative")
        if self.functional in ("PFA", "LPFA", "LCPFA") and not (
                -1e-12 <= self.estimate <= 1.0 + 1e-12):
            raise OutOfRange(f"{self.functional} estimate {self.estimate} not in [0, 1]")


def _native_log_threshold(kind, threshold):
    if kind not in DETECTOR_KINDS:
        raise OutOfRange(f"unknown detector kind {kind!r}")
    if kind == "cusum":
        return float(threshold)
    if not threshold > 0:
        raise OutOfRange(f"{kind} threshold must be positive, got {threshold}")
    return math.log(threshold) if threshold < math.inf else math.inf


def _batch_initial(kind, reps):
    if kind == "cusum":
        return np.zeros(reps)
    return np.full(reps, -np.inf)


def _batch_step(kind, stat, z, rho):
    if kind == "sr":
        return sr_step(stat, z)
    if kind == "cusum":
        return cusum_step(stat, z)
    if rho is None or not (0.0 < rho < 1.0):
        raise InvalidRho(f"shiryaev runs need rho in (0, 1), got {rho}")
    return shiryaev_step(stat, z, rho)


def simulate_stop_times(model, kind, threshold, nu, n_max, reps, seed,
                        rho=None, batch_size=10_000, threads=1, stream=(0,)):
    """Stopping times of a detector on `reps` independent paths.

    Returns an int64 array; 0 encodes a run censored at n_max.  Innovations
    are drawn for every replicate at every step, so the draw sequence (and
    hence the result) does not depend on which replicates already stopped.
    """
    n_max = check_int("n_max", n_max, lo=1)
    sizes = batch_sizes(reps, batch_size)
    log_h = _native_log_threshold(kind, threshold)

    def task(b):
        rng = stream_rng(seed, *stream, b)
        m = sizes[b]
        x = model.initial_state(reps=m)
        stat = _batch_initial(kind, m)
        tau = np.zeros(m, dtype=np.int64)
        alive = np.ones(m, dtype=bool)
        for n in range(1, n_max + 1):
            y = model.step(x, post=(n > nu), rng=rng)
            z = model.llr(y, x)
            stat = _batch_step(kind, stat, z, rho)
            crossed = alive & (stat >= log_h)
            tau[crossed] = n
            alive &= ~crossed
            x = y
            if not alive.any():
                break
        return tau

    return np.concatenate(run_tasks(task, len(sizes), threads))


# ---------------------------------------------------------------------------
# weighted probability of false alarm
# ---------------------------------------------------------------------------

def pfa_horizon(rho, tail=1e-6):
    """Truncation horizon K with geometric tail bound (1-rho)^(K+1) < tail."""
    return math.ceil(math.log(tail) / math.log1p(-rho))


def estimate_pfa(model, kind, threshold, rho, reps, seed=0, batch_size=10_000,
                 threads=1, statistic_rho=None):
    """Weighted PFA under the geometric prior with rate rho.

    Uses PFA = E_inf[(1-rho)^tau]: only no-change paths are simulated, and
    the summation tail beyond the truncation horizon is bounded by the
    geometric tail (recorded in params, certifiably below 1e-6).
    """
    rho = check_unit_open("rho", rho)
    reps = check_int("reps", reps, lo=2)
    horizon = pfa_horizon(rho)
    taus = simulate_stop_times(model, kind, threshold, math.inf, horizon, reps,
                               seed, rho=statistic_rho, batch_size=batch_size,
                               threads=threads, stream=(10,))
    values = np.where(taus > 0, np.power(1.0 - rho, taus.astype(float)), 0.0)
    censored = float(np.mean(taus == 0))
    return RiskReport(
        functional="PFA",
        estimate=float(values.mean()),
        se=float(values.std(ddof=1) / math.sqrt(reps)),
        reps=reps,
        censored_frac=censored,
        params={"rho": rho, "threshold": threshold, "kind": kind,
                "horizon": horizon, "tail_bound": (1.0 - rho) ** (horizon + 1)},
    )


# ---------------------------------------------------------------------------
# local (windowed) probabilities of false alarm
# ---------------------------------------------------------------------------

def _window_taus(model, kind, threshold, k_star, m_star, reps, seed,
                 batch_size, threads, stream, statistic_rho=None):
    k_star = check_int("k_star", k_star, lo=2)
    m_star = check_int("m_star", m_star, lo=1)
    if not k_star > m_star:
        raise OutOfRange(f"k_star={k_star} must exceed m_star={m_star}")
    reps = check_int("reps", reps, lo=2)
    taus = simulate_stop_times(model, kind, threshold, math.inf, k_star, reps,
                               seed, rho=statistic_rho, batch_size=batch_size,
                               threads=threads, stream=stream)
    return taus, k_star, m_star


def window_indicators(taus, k_star, m_star):
    """Replicate-level window hits 1{k <= tau < k + m*} for k = 1..k*-m*.

    Censored runs (tau encoded as 0) stopped beyond the horizon and land in
    no window.  Returns (ks, matrix of shape (len(ks), len(taus))).
    """
    taus = np.asarray(taus)
    ks = np.arange(1, int(k_star) - int(m_star) + 1)
    hit = (taus[None, :] >= ks[:, None]) & (taus[None, :] < ks[:, None] + m_star) \
        & (taus[None, :] > 0)
    return ks, hit


def estimate_lpfa(model, kind, threshold, k_star, m_star, reps, seed=0,
                  batch_size=10_000, threads=1, statistic_rho=None):
    """Supremum over windows k = 1..k*-m* of P_inf(k <= tau < k+m*).

    One no-change path is scored against every window (the windows are far
    cheaper than the paths), with the standard error taken from the replicate
    indicators of the supremum window.
    """
    taus, k_star, m_star = _window_taus(model, kind, threshold, k_star, m_star,
                                        reps, seed, batch_size, threads, (11,),
                                        statistic_rho)
    ks, hit = window_indicators(taus, k_star, m_star)
    probs = hit.mean(axis=1)
    top = int(np.argmax(probs))
    assert np.all(probs[top] >= probs), "supremum below a window estimate"
    se = float(hit[top].std(ddof=1) / math.sqrt(reps))
    return RiskReport(
        functional="LPFA", estimate=float(probs[top]), se=se, reps=reps,
        censored_frac=float(np.mean(taus == 0)),
        params={"kind": kind, "threshold": threshold, "k_star": k_star,
                "m_star": m_star, "argmax_k": int(ks[top]),
                "window_estimates": probs},
    )


def estimate_lcpfa(model, kind, threshold, k_star, m_star, reps, seed=0,
                   batch_size=10_000, threads=1, denominator_guard=0.01,
                   statistic_rho=None):
    """Supremum over windows of P_inf(tau < k+m* | tau > k)."""
    taus, k_star, m_star = _window_taus(model, kind, threshold, k_star, m_star,
                                        reps, seed, batch_size, threads, (12,),
                                        statistic_rho)
    ks = np.arange(1, k_star - m_star + 1)
    beyond = (taus == 0)
    num = (taus[None, :] > ks[:, None]) & (taus[None, :] < ks[:, None] + m_star) \
        & (~beyond)[None, :]
    den = (taus[None, :] > ks[:, None]) | beyond[None, :]
    p_den = den.mean(axis=1)
    if np.any(p_den < denominator_guard):
        raise DegenerateConditioning(
            f"P_inf(tau > k) fell below {denominator_guard}; the detector "
            "stops almost immediately under the no-change law")
    ratios = num.mean(axis=1) / p_den
    top = int(np.argmax(ratios))
    infl = (num[top].astype(float) - ratios[top] * den[top]) / p_den[top]
    se = float(infl.std(ddof=1) / math.sqrt(reps))
    return RiskReport(
        functional="LCPFA", estimate=float(ratios[top]), se=se, reps=reps,
        censored_frac=float(np.mean(taus == 0)),
        params={"kind": kind, "threshold": threshold, "k_star": k_star,
                "m_star": m_star, "argmax_k": int(ks[top]),
                "window_estimates": ratios},
    )


# ---------------------------------------------------------------------------
# detection delay risks
# ---------------------------------------------------------------------------

@dataclass
class DelayEstimates:
    """Positive-part delay moment and its conditional (ratio) version."""
    positive_part: RiskReport
    conditional: RiskReport | None


def estimate_delay(model, kind, threshold, nu, r=1, reps=10_000, n_max=2000,
                   seed=0, censor_cap=0.001, batch_size=10_000, threads=1,
                   rho=None, conditional=True):
    """E_nu[((tau - nu)^+)^r] and E_nu[(tau - nu)^r | tau > nu].

    The conditional version is the ratio estimator over P_inf(tau > nu); the
    0.01 denominator guard applies to it alone (the positive-part risk is
    well defined for any survival probability), so pass conditional=False
    to skip it.  Censored replicates (tau > n_max) are counted and floored
    at n_max, and the whole estimate is refused once the censored fraction
    exceeds `censor_cap` (uncontrolled censoring biases delays downward).
    """
    nu = check_int("nu", nu, lo=0)
    r = check_int("r", r, lo=1)
    reps = check_int("reps", reps, lo=2)
    if n_max <= nu:
        raise OutOfRange(f"n_max={n_max} must exceed nu={nu}")
    taus = simulate_stop_times(model, kind, threshold, nu, n_max, reps, seed,
                               rho=rho, batch_size=batch_size, threads=threads,
                               stream=(13, nu, r))
    censored = taus == 0
    cens_frac = float(censored.mean())
    if cens_frac > censor_cap:
        raise ExcessCensoring(
            f"censored fraction {cens_frac:.4g} exceeds the cap {censor_cap}; "
            f"raise n_max={n_max}")
    eff = np.where(censored, n_max, taus)
    delays = np.maximum(eff - nu, 0).astype(float) ** r
    survived = (eff > nu)
    p_surv = float(survived.mean())
    est = float(delays.mean())
    se = float(delays.std(ddof=1) / math.sqrt(reps))
    name = "Rnu" if r == 1 else f"MomentR({r})"
    params = {"kind": kind, "threshold": threshold, "nu": nu, "r": r,
              "n_max": n_max, "p_surv": p_surv}
    plain = RiskReport(name, est, se, reps, cens_frac, params)
    if not conditional:
        return DelayEstimates(positive_part=plain, conditional=None)
    if p_surv < 0.01:
        raise DegenerateConditioning(
            f"P(tau > nu) = {p_surv:.4g} < 0.01; conditional risk undefined "
            "at this configuration")
    cond = est / p_surv
    infl = (delays - cond * survived) / p_surv
    cond_se = float(infl.std(ddof=1) / math.sqrt(reps))
    cond_name = "RnuStar" if r == 1 else f"MomentRStar({r})"
    return DelayEstimates(
        positive_part=plain,
        conditional=RiskReport(cond_name, cond, cond_se, reps, cens_frac,
                               dict(params)),
    )


# ---------------------------------------------------------------------------
# threshold sweeps and the first-order slope
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    """Delay table over a threshold grid plus the fitted delay-vs-log(h) line."""
    rows: list
    slope: float
    slope_se: float
    slope_ci: tuple
    intercept: float
    one_over_i: float | None
    ratios: list
    fit_nu: int


def fit_delay_slope(log_h, estimates, ses):
    """Unweighted OLS of delay on log h; slope variance from the MC SEs."""
    x = np.asarray(log_h, dtype=float)
    y = np.asarray(estimates, dtype=float)
    s = np.asarray(ses, dtype=float)
    if x.size < 2:
        raise OutOfRange("slope fit needs at least two thresholds")
    xc = x - x.mean()
    denom = float(np.sum(xc * xc))
    coef = xc / denom
    slope = float(coef @ y)
    intercept = float(y.mean() - slope * x.mean())
    var = float(np.sum(coef * coef * s * s))
    se = math.sqrt(var)
    return slope, se, intercept


def sweep_thresholds(model, kind, h_grid, nus=(0,), r=1, reps=10_000,
                     n_max=2000, seed=0, censor_cap=0.001, batch_size=10_000,
                     threads=1, rho=None, i_value=None):
    """Delay estimates over a threshold grid with the fitted slope vs log h.

    The grid is interpreted on the likelihood-ratio scale h for every
    detector kind; CUSUM runs at the log-threshold a = log h so the kinds
    are comparable at equal nominal levels.  The grid must span at least two
    decades.  The fitted slope of the nu = min(nus) delays against log h is
    compared with 1/I.
    """
    h_grid = [float(h) for h in h_grid]
    if len(h_grid) < 2 or max(h_grid) / min(h_grid) < 100.0 * (1.0 - 1e-12):
        raise OutOfRange("threshold grid must span at least two decades")
    if i_value is None:
        i_value = model.kl_closed_form
    rows = []
    for i, h in enumerate(h_grid):
        native = math.log(h) if kind == "cusum" else h
        for j, nu in enumerate(nus):
            est = estimate_delay(model, kind, native, nu, r=r, reps=reps,
                                 n_max=n_max, seed=seed, censor_cap=censor_cap,
                                 batch_size=batch_size, threads=threads, rho=rho)
            rows.append({"kind": kind, "h": h, "nu": nu,
                         "estimate": est.positive_part.estimate,
                         "se": est.positive_part.se,
                         "conditional": est.conditional.estimate,
                         "conditional_se": est.conditional.se,
                         "reps": reps,
                         "censored_frac": est.positive_part.censored_frac})
    fit_nu = int(min(nus))
    fit_rows = [row for row in rows if row["nu"] == fit_nu]
    slope, slope_se, intercept = fit_delay_slope(
        [math.log(row["h"]) for row in fit_rows],
        [row["estimate"] for row in fit_rows],
        [row["se"] for row in fit_rows])
    ratios = None
    if i_value:
        ratios = [row["estimate"] / (math.log(row["h"]) / i_value)
                  for row in fit_rows]
    return SweepResult(
        rows=rows, slope=slope, slope_se=slope_se,
        slope_ci=(slope - 1.96 * slope_se, slope + 1.96 * slope_se),
        intercept=intercept,
        one_over_i=(1.0 / i_value) if i_value else None,
        ratios=ratios, fit_nu=fit_nu,
    )


# ---------------------------------------------------------------------------
# no-change mean of the SR statistic (martingale diagnostic)
# ---------------------------------------------------------------------------

def sr_null_mean(model, n_values, reps, seed=0, batch_size=10_000, threads=1):
    """Empirical mean of R_n under the no-change law at the given n values.

    R_n - n is a zero-mean martingale under P_inf, so mean(R_n) should equal
    n within Monte Carlo error; returned rows carry (n, mean, se).
    """
    n_values = sorted(check_int("n", n, lo=1) for n in n_values)
    sizes = batch_sizes(reps, batch_size)

    def task(b):
        rng = stream_rng(seed, 15, b)
        m = sizes[b]
        x = model.initial_state(reps=m)
        log_r = np.full(m, -np.inf)
        out = {}
        for n in range(1, n_values[-1] + 1):
            y = model.step(x, post=False, rng=rng)
            log_r = sr_step(log_r, model.llr(y, x))
            x = y
            if n in n_values:
                out[n] = np.exp(log_r).copy()
        return out

    parts = run_tasks(task, len(sizes), threads)
    rows = []
    for n in n_values:
        values = np.concatenate([p[n] for p in parts])
        rows.append({"n": n, "mean": float(values.mean()),
                     "se": float(values.std(ddof=1) / math.sqrt(reps)),
                     "reps": reps})
    return rows
