"""Streaming detection statistics with numerically stable log-space recursions.

Detectors are scikit-learn style estimators: constructor parameters are stored
verbatim (so ``get_params``/``set_params``/``clone`` work), ``update(z)``
consumes one LLR increment at a time, and ``fit(z_sequence)`` runs a whole
increment array until the first threshold crossing.

All statistics are maintained in natural-log space: the Shiryaev-Roberts
statistic overflows double precision after roughly 700 nats of drift, the
log-space recursions never do.
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .errors import AlreadyStopped, InvalidRho, OutOfRange
from .validation import as_increments, check_int


# vectorized one-step recursions, shared by the scalar estimators and the
# batch Monte Carlo engines -------------------------------------------------

def sr_step(log_r, z):
    """log R_n for R_n = (1 + R_{n-1}) e^z, with log R = -inf encoding R = 0."""
    return z + np.logaddexp(0.0, log_r)


def cusum_step(w, z):
    """W_n = max(W_{n-1}, 0) + z."""
    return np.maximum(w, 0.0) + z


def shiryaev_step(log_lam, z, rho):
    """log Lambda_n for Lambda_n = (1 - rho)^{-1} (Lambda_{n-1} + 1) e^z."""
    return z - math.log1p(-rho) + np.logaddexp(0.0, log_lam)


class _LogSpaceDetector(BaseEstimator):
    """Common threshold-stopping machinery; subclasses define the recursion."""

    kind = "?"

    def _init_stat(self):
        raise NotImplementedError

    def _advance(self, stat, z):
        raise NotImplementedError

    def _log_threshold(self):
        raise NotImplementedError

    def reset(self):
        """Fresh run: statistic at its n=0 value, not stopped."""
        self._validate()
        self._stat = self._init_stat()
        self._log_h = self._log_threshold()
        self._n = 0
        self._stopped = False
        self._tau = None
        return self

    def _validate(self):
        pass

    # streaming ------------------------------------------------------------
    def update(self, z):
        """Consume one LLR increment (nats); returns True once stopped.

        Stopping is inclusive (statistic >= threshold), matching the
        first-crossing definition of the stopping times.  The comparison is
        made in log space; an exact natural-scale tie can shift by one step
        from ulp-level accumulation (measure zero for continuous models).
        """
        if not hasattr(self, "_stat"):
            self.reset()
        if self._stopped:
            raise AlreadyStopped(f"{self.kind} detector already stopped at n={self._tau}")
        z = float(z)
        if not math.isfinite(z):
            raise OutOfRange(f"LLR increment must be finite, got {z!r}")
        self._stat = float(self._advance(self._stat, z))
        self._n += 1
        if self._stat >= self._log_h:
            self._stopped = True
            self._tau = self._n
        return self._stopped

    @property
    def n(self):
        return getattr(self, "_n", 0)

    @property
    def stopped(self):
        return getattr(self, "_stopped", False)

    @property
    def stopping_time(self):
        return getattr(self, "_tau", None)

    @property
    def log_statistic(self):
        if not hasattr(self, "_stat"):
            self.reset()
        return self._stat

    @property
    def statistic(self):
        """Natural-scale statistic (may overflow to inf for display only)."""
        return float(np.exp(self.log_statistic)) if self.kind != "cusum" else self.log_statistic

    # batch ------------------------------------------------------------------
    def fit(self, X, y=None):
        """Run the recursion over an increment array until the first alarm.

        Sets ``statistic_path_`` (log-space values at each processed step),
        ``stopping_time_`` (first crossing, or None) and ``stopped_``.
        """
        z = as_increments(X)
        self.reset()
        path = []
        for value in z:
            stopped = self.update(float(value))
            path.append(self._stat)
            if stopped:
                break
        self.statistic_path_ = np.asarray(path)
        self.stopping_time_ = self._tau
        self.stopped_ = self._stopped
        self.n_steps_ = self._n
        return self


class SRDetector(_LogSpaceDetector):
    """Shiryaev-Roberts detector: R_n = (1 + R_{n-1}) e^{z_n}, R_0 = 0.

    Raises an alarm at the first n with R_n >= threshold (threshold on the
    likelihood-ratio scale).
    """

    kind = "sr"

    def __init__(self, threshold=math.inf):
        self.threshold = threshold

    def _validate(self):
        if not self.threshold > 0:
            raise OutOfRange(f"SR threshold must be positive, got {self.threshold}")

    def _init_stat(self):
        return -math.inf  # R_0 = 0

    def _advance(self, stat, z):
        return sr_step(stat, z)

    def _log_threshold(self):
        return math.log(self.threshold) if self.threshold < math.inf else math.inf


class CusumDetector(_LogSpaceDetector):
    """CUSUM detector: W_n = max(W_{n-1}, 0) + z_n, W_0 = 0.

    The statistic and its threshold are already in log (nat) units.
    """

    kind = "cusum"

    def __init__(self, threshold=math.inf):
        self.threshold = threshold

    def _init_stat(self):
        return 0.0

    def _advance(self, stat, z):
        return cusum_step(stat, z)

    def _log_threshold(self):
        return float(self.threshold)


class ShiryaevDetector(_LogSpaceDetector):
    """Shiryaev detector for a geometric prior with rate rho.

    Lambda_n = (1 - rho)^{-1} (Lambda_{n-1} + 1) e^{z_n}, Lambda_0 = 0.
    With ``alpha`` given, the threshold defaults to (1 - alpha)/(rho * alpha),
    the posterior-probability threshold.
    """

    kind = "shiryaev"

    def __init__(self, rho=0.01, alpha=None, threshold=None):
        self.rho = rho
        self.alpha = alpha
        self.threshold = threshold

    def _validate(self):
        if not (0.0 < self.rho < 1.0):
            raise InvalidRho(f"rho must lie in (0, 1), got {self.rho}")
        if self.threshold is None and self.alpha is not None:
            if not (0.0 < self.alpha < 1.0):
                raise OutOfRange(f"alpha must lie in (0, 1), got {self.alpha}")

    def _init_stat(self):
        return -math.inf  # Lambda_0 = 0

    def _advance(self, stat, z):
        return shiryaev_step(stat, z, self.rho)

    def _log_threshold(self):
        if self.threshold is not None:
            if not self.threshold > 0:
                raise OutOfRange(f"threshold must be positive, got {self.threshold}")
            return math.log(self.threshold) if self.threshold < math.inf else math.inf
        if self.alpha is None:
            return math.inf
        return math.log((1.0 - self.alpha) / (self.rho * self.alpha))


@dataclass
class StopResult:
    """Outcome of a single detector run; censored=True marks a run that hit
    the horizon without stopping (the horizon was too small to observe tau)."""
    tau: int | None
    censored: bool
    n_steps: int


def run_to_stop(detector, model, nu, n_max, rng):
    """Drive a fresh detector with LLR increments from one sampled path.

    The change point nu may be an integer >= 0 or math.inf; observations
    beyond nu follow the post-change law.
    """
    n_max = check_int("n_max", n_max, lo=1)
    if not (nu == math.inf or (float(nu).is_integer() and nu >= 0)):
        raise OutOfRange(f"nu must be a nonnegative integer or inf, got {nu!r}")
    detector.reset()
    x = model.initial_state()
    for n in range(1, n_max + 1):
        y = model.step(x, post=(n > nu), rng=rng)
        z = model.llr(y, x)
        if detector.update(float(z)):
            return StopResult(tau=n, censored=False, n_steps=n)
        x = y
    return StopResult(tau=None, censored=True, n_steps=n_max)
