"""Sequential change-point detection over Markov data models.

Shiryaev-Roberts, CUSUM and Shiryaev detectors with log-space recursions,
a model zoo of autoregressive change-point models, threshold calibration for
local false-alarm classes, Monte Carlo risk estimation, and numerical audits
of the convergence and ergodicity conditions behind the asymptotics.
"""

__version__ = "0.1.0"

from .calibration import (CalibrationSheet, bayes_threshold, calibrate_for_beta,
                          check_inclusions)
from .detectors import (CusumDetector, ShiryaevDetector, SRDetector, StopResult,
                        run_to_stop)
from .models import (ChangePointModel, KlEstimate, build_model, kl_number,
                     llr_step, sample_path)
from .risk import (DelayEstimates, RiskReport, SweepResult, estimate_delay,
                   estimate_lcpfa, estimate_lpfa, estimate_pfa,
                   simulate_stop_times, sweep_thresholds)
from .audit import (ConvergenceAudit, DriftCheck, LaiDemoResult,
                    MinorizationCheck, audit_complete_convergence, check_drift,
                    check_minorization, demo_lai_failure)

__all__ = [
    "__version__",
    "CalibrationSheet", "bayes_threshold", "calibrate_for_beta", "check_inclusions",
    "CusumDetector", "ShiryaevDetector", "SRDetector", "StopResult", "run_to_stop",
    "ChangePointModel", "KlEstimate", "build_model", "kl_number", "llr_step",
    "sample_path",
    "DelayEstimates", "RiskReport", "SweepResult", "estimate_delay",
    "estimate_lcpfa", "estimate_lpfa", "estimate_pfa", "simulate_stop_times",
    "sweep_thresholds",
    "ConvergenceAudit", "DriftCheck", "LaiDemoResult", "MinorizationCheck",
    "audit_complete_convergence", "check_drift", "check_minorization",
    "demo_lai_failure",
]
