"""Derived parameters for the false-alarm classes.

For a target local false-alarm level beta, the geometric-prior rates are

    rho1 = 1 / (1 + |log beta|),   rho2 = rho1 / (1 + |log |log beta||),

the bridged weighted-PFA levels are

    alpha1 = beta + (1 - rho1)^(m* + 1)
    alpha2 = beta * (1 - rho2)^k*
    alpha3 = alpha2 / (1 + beta)

and the class thresholds are h = (1 - alpha2)/(rho2 * alpha2) for the
window class and h* = (1 - alpha3)/(rho2 * alpha3) for the conditional
window class.  Natural logarithms throughout (LLR units are nats).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientBudget, WindowTooSmall
from .risk import estimate_lcpfa, estimate_lpfa
from .validation import check_int, check_unit_open


def bayes_threshold(alpha, rho):
    """Threshold h = (1 - alpha) / (rho * alpha) for the weighted-PFA class."""
    alpha = check_unit_open("alpha", alpha)
    rho = check_unit_open("rho", rho)
    return (1.0 - alpha) / (rho * alpha)


def default_window(beta):
    """Reference window choice m* = 1 + floor((1 + |log beta|)^2)."""
    beta = check_unit_open("beta", beta)
    return 1 + math.floor((1.0 + abs(math.log(beta))) ** 2)


@dataclass
class CalibrationSheet:
    """All derived parameters for a target local false-alarm level beta."""
    beta: float
    m_star: int
    k_star: int
    rho1: float
    rho2: float
    alpha1: float
    alpha2: float
    alpha3: float
    h_beta: float
    h_star_beta: float

    def as_row(self):
        return {
            "beta": self.beta, "m_star": self.m_star, "k_star": self.k_star,
            "rho1": self.rho1, "rho2": self.rho2, "alpha1": self.alpha1,
            "alpha2": self.alpha2, "alpha3": self.alpha3,
            "h_beta": self.h_beta, "h_star_beta": self.h_star_beta,
        }


def calibrate_for_beta(beta, m_star=None, k_star=None):
    """Populate the full calibration sheet for a target beta.

    m* and k* default to m* = 1 + floor((1 + |log beta|)^2)
    and k* = 2 m*.  m* below the class-inclusion lower bound
    |log(1-beta)| / |log(1-rho1)| - 1 is rejected.
    """
    beta = check_unit_open("beta", beta)
    log_beta = abs(math.log(beta))
    rho1 = 1.0 / (1.0 + log_beta)
    rho2 = rho1 / (1.0 + abs(math.log(log_beta)))
    if m_star is None:
        m_star = 1 + math.floor((1.0 + log_beta) ** 2)
    m_star = check_int("m_star", m_star, lo=1)
    if k_star is None:
        k_star = 2 * m_star
    k_star = check_int("k_star", k_star, lo=m_star + 1)

    bound = abs(math.log1p(-beta)) / abs(math.log1p(-rho1)) - 1.0
    if m_star < bound:
        raise WindowTooSmall(
            f"m_star={m_star} is below the inclusion lower bound {bound:.6g} "
            f"for beta={beta}")

    alpha1 = beta + (1.0 - rho1) ** (m_star + 1)
    alpha2 = beta * (1.0 - rho2) ** k_star
    alpha3 = alpha2 / (1.0 + beta)
    return CalibrationSheet(
        beta=beta, m_star=m_star, k_star=k_star, rho1=rho1, rho2=rho2,
        alpha1=alpha1, alpha2=alpha2, alpha3=alpha3,
        h_beta=bayes_threshold(alpha2, rho2),
        h_star_beta=bayes_threshold(alpha3, rho2),
    )


@dataclass
class MembershipReport:
    """Monte Carlo verdicts for the window-class memberships of the SR rule.

    A verdict is PASS when estimate + 3*SE <= beta: the inclusions are proven
    facts, so the guard band only protects against MC noise flagging them.
    """
    beta: float
    lpfa: float
    lpfa_se: float
    lpfa_pass: bool
    lcpfa: float
    lcpfa_se: float
    lcpfa_pass: bool
    reps: int
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.lpfa_pass and self.lcpfa_pass


def check_inclusions(sheet, model, reps=100_000, seed=0, batch_size=10_000,
                     threads=1):
    """Check H(beta, k*, m*) membership of SR at h_beta and the conditional
    class membership at h*_beta by direct Monte Carlo under the no-change law.
    """
    reps = check_int("reps", reps, lo=1)
    worst_se = 3.0 * math.sqrt(sheet.beta * (1.0 - sheet.beta) / reps)
    if worst_se > sheet.beta:
        raise InsufficientBudget(
            f"{reps} replicates cannot resolve beta={sheet.beta}: "
            f"3*SE ~ {worst_se:.3g} exceeds beta")
    lpfa = estimate_lpfa(model, "sr", sheet.h_beta, sheet.k_star, sheet.m_star,
                         reps=reps, seed=seed, batch_size=batch_size,
                         threads=threads)
    lcpfa = estimate_lcpfa(model, "sr", sheet.h_star_beta, sheet.k_star,
                           sheet.m_star, reps=reps, seed=seed,
                           batch_size=batch_size, threads=threads)
    return MembershipReport(
        beta=sheet.beta,
        lpfa=lpfa.estimate, lpfa_se=lpfa.se,
        lpfa_pass=bool(lpfa.estimate + 3.0 * lpfa.se <= sheet.beta),
        lcpfa=lcpfa.estimate, lcpfa_se=lcpfa.se,
        lcpfa_pass=bool(lcpfa.estimate + 3.0 * lcpfa.se <= sheet.beta),
        reps=reps,
        details={"window_lpfa": lpfa.params.get("window_estimates"),
                 "window_lcpfa": lcpfa.params.get("window_estimates")},
    )


def threshold_ratio_trend(betas=None):
    """log h_beta / |log beta| along a beta grid (diagnostic for the
    slow-limit behavior of the default calibration; decreasing toward 1)."""
    if betas is None:
        betas = np.logspace(-6, math.log10(0.3), 13)
    rows = []
    for b in betas:
        sheet = calibrate_for_beta(float(b))
        rows.append((float(b), math.log(sheet.h_beta) / abs(math.log(b))))
    return rows
