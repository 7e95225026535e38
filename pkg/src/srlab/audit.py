"""Numerical audits of the sufficient conditions behind the asymptotics.

Three instruments:

* a Monte Carlo audit of the uniform-complete-convergence behavior of the
  normalized LLR (exceedance probabilities over a grid of change points k,
  horizons n and tolerances eps, with partial sums and a decay slope),
* a drift checker for Lyapunov inequalities E_x V(X1) <= (1-rho) V(x) + D 1_C,
* a minorization checker for the transition-density floor on a compact set,

plus the two-dimensional-AR demonstration that conditioning on a remote
initial state keeps the LLR shortfall probability high while the k-uniform
audit decays.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (InsufficientBudget, NoDensity, NoValidRho, OutOfRange,
                     QuadratureFailure)
from .models import (Ar2dRandomCoefModel, ArPModel, VarRandomCoefModel,
                     _ScalarInnovationModel, kl_number)
from .util import batch_sizes, run_tasks, stream_rng
from .validation import check_int, check_scalar

# ---------------------------------------------------------------------------
# uniform complete convergence audit
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceAudit:
    """Exceedance tables p_k(n, eps) with partial sums and decay slopes."""
    eps_grid: np.ndarray
    k_grid: np.ndarray
    n_grid: np.ndarray
    p: np.ndarray            # shape (K, N, E)
    se: np.ndarray           # binomial standard errors, same shape
    sup_k: np.ndarray        # shape (N, E)
    partial_r1: np.ndarray   # cumulative sum over the n grid of sup_k
    partial_r2: np.ndarray   # cumulative sum of n * sup_k
    slopes: np.ndarray       # log-log decay slope of sup_k per eps (nan if <2 pts)
    sup_at_kmax: np.ndarray  # per eps: sup attained at the k-grid edge (flag)
    i_value: float
    reps: int


def audit_complete_convergence(model, i_value, eps_grid, k_grid, n_grid, reps,
                               seed=0, batch_size=10_000, threads=1):
    """Estimate p_k(n, eps) = P_k(|Z^k_{k+n}/n - I| > eps) over the grids.

    Under P_k the state at the change point is produced by running the
    pre-change chain k steps from X0.  Each (k, n) cell is an independent
    task with its own RNG stream; the slope fit uses only cells with
    p >= 10/reps so that near-zero estimates do not pollute the log fit.
    """
    i_value = check_scalar("i_value", i_value, lo=0.0, inclusive_lo=False)
    reps = check_int("reps", reps, lo=1)
    if reps < 10_000:
        raise InsufficientBudget(
            f"the audit needs at least 1e4 replicates per cell, got {reps}")
    eps_grid = np.asarray(sorted(float(e) for e in eps_grid))
    if eps_grid.size == 0 or np.any(eps_grid <= 0):
        raise OutOfRange("eps grid must contain positive tolerances")
    k_grid = np.asarray(sorted(check_int("k", k, lo=0) for k in k_grid))
    n_grid = np.asarray(sorted(check_int("n", n, lo=1) for n in n_grid))
    sizes = batch_sizes(reps, batch_size)

    def cell(ki, ni):
        k = int(k_grid[ki])
        n = int(n_grid[ni])

        def task(b):
            rng = stream_rng(seed, 20, ki, ni, b)
            m = sizes[b]
            x = model.initial_state(reps=m)
            for _ in range(k):
                x = model.step(x, post=False, rng=rng)
            acc = np.zeros(m)
            for _ in range(n):
                y = model.step(x, post=True, rng=rng)
                acc += model.llr(y, x)
                x = y
            return np.abs(acc / n - i_value)

        dev = np.concatenate(run_tasks(task, len(sizes), threads=1))
        p_row = np.array([np.mean(dev > e) for e in eps_grid])
        se_row = np.sqrt(p_row * (1.0 - p_row) / reps)
        return p_row, se_row

    flat = [(ki, ni) for ki in range(k_grid.size) for ni in range(n_grid.size)]
    results = run_tasks(lambda idx: cell(*flat[idx]), len(flat), threads)
    p = np.zeros((k_grid.size, n_grid.size, eps_grid.size))
    se = np.zeros_like(p)
    for (ki, ni), (p_row, se_row) in zip(flat, results):
        p[ki, ni] = p_row
        se[ki, ni] = se_row

    assert np.all(np.diff(p, axis=2) <= 1e-15), "p must be nonincreasing in eps"
    sup_k = p.max(axis=0)
    ns = n_grid.astype(float)
    partial_r1 = np.cumsum(sup_k, axis=0)
    partial_r2 = np.cumsum(ns[:, None] * sup_k, axis=0)

    slopes = np.full(eps_grid.size, np.nan)
    floor = 10.0 / reps
    for e in range(eps_grid.size):
        valid = sup_k[:, e] >= floor
        if valid.sum() >= 2:
            slopes[e] = np.polyfit(np.log(ns[valid]),
                                   np.log(sup_k[valid, e]), 1)[0]
    sup_at_kmax = p[:, -1, :].argmax(axis=0) == (k_grid.size - 1)
    return ConvergenceAudit(eps_grid, k_grid, n_grid, p, se, sup_k,
                            partial_r1, partial_r2, slopes, sup_at_kmax,
                            i_value, reps)


# ---------------------------------------------------------------------------
# drift condition checker
# ---------------------------------------------------------------------------

@dataclass
class PolyLyapunov:
    """V(x) = q_star * (1 + |x|^iota) on scalar states."""
    q_star: float = 1.0
    iota: float = 2.0

    def describe(self):
        return f"poly(q*={self.q_star}, iota={self.iota})"


@dataclass
class QuadFormLyapunov:
    """V(x) = c * (1 + x' T x) on vector states."""
    t: np.ndarray
    c: float = 1.0

    def describe(self):
        return f"quadform(c={self.c})"


@dataclass
class Interval:
    """Symmetric set C = [-half_width, half_width] for scalar states."""
    half_width: float

    def describe(self):
        return f"[-{self.half_width}, {self.half_width}]"

    def contains(self, x):
        return np.abs(x) <= self.half_width


@dataclass
class Ellipsoid:
    """C = {x : x' T x <= level} for vector states."""
    t: np.ndarray
    level: float

    def describe(self):
        return f"ellipsoid(level={self.level})"

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.einsum("...j,jk,...k->...", x, np.asarray(self.t), x) <= self.level


@dataclass
class DriftCheck:
    """Fitted drift inequality E_x V(X1) <= (1-rho) V(x) + D 1_C(x)."""
    lyapunov: str
    c_set: str
    rho: float
    d: float
    ratio_large: float
    grid: np.ndarray
    ratios: np.ndarray
    expectations: np.ndarray
    passed: bool


def _poly_expectation(model, lyap, x, quad_order):
    """E_x V(X1) under the post-change law by innovation quadrature."""
    x = np.asarray(x, dtype=float)
    t, w = model.innovation.nodes(quad_order)
    y = model._mean(x, True)[..., None] + model._scale(x)[..., None] * t
    moment = np.abs(y) ** lyap.iota @ w
    return lyap.q_star * (1.0 + moment)


def _poly_value(lyap, x):
    return lyap.q_star * (1.0 + np.abs(np.asarray(x, dtype=float)) ** lyap.iota)


def _quad_expectation(model, lyap, x):
    """Closed-form E_x V(X1) for linear models with quadratic-form V."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(lyap.t, dtype=float)
    if isinstance(model, VarRandomCoefModel):
        mean = x @ model.a[1].T
        d = np.square(x) @ model.q1.T
        noise = np.einsum("...j,jk,...k->...", mean, t, mean) \
            + d @ np.diag(t) + float(np.trace(t @ model.q0))
    elif isinstance(model, Ar2dRandomCoefModel):
        d = np.square(model.sig) * np.square(x)
        q = np.array([[1.0 + model.rho ** 2, model.rho], [model.rho, 1.0]])
        noise = d @ np.diag(t) + float(np.trace(t @ q))
    elif isinstance(model, ArPModel):
        a = model._companion(model.a1)
        mean = x @ a.T
        noise = np.einsum("...j,jk,...k->...", mean, t, mean) + t[0, 0]
    else:
        raise OutOfRange(
            f"quadratic-form drift check not supported for model {model.name!r}")
    return lyap.c * (1.0 + noise)


def _quad_value(lyap, x):
    x = np.asarray(x, dtype=float)
    return lyap.c * (1.0 + np.einsum("...j,jk,...k->...", x,
                                     np.asarray(lyap.t, dtype=float), x))


def default_drift_grid(half_width):
    inner = np.linspace(-half_width, half_width, 41)
    outer = np.geomspace(half_width * 1.05, 1e4, 40)
    return np.unique(np.concatenate([inner, outer, -outer, [100.0, -100.0]]))


def check_drift(model, lyapunov=None, c_set=None, x_grid=None, quad_order=64):
    """Fit the tightest (rho, D) satisfying the drift inequality on a grid.

    PASS requires rho > 0, i.e. the expectation ratio stays below one outside
    the small set.  NoValidRho is raised when the ratio reaches one there.
    """
    if isinstance(model, _ScalarInnovationModel):
        lyap = lyapunov or PolyLyapunov()
        if not isinstance(lyap, PolyLyapunov):
            raise OutOfRange("scalar models take a PolyLyapunov")
        cset = c_set or Interval(4.0)
        grid = np.asarray(x_grid if x_grid is not None
                          else default_drift_grid(cset.half_width), dtype=float)
        expectations = _poly_expectation(model, lyap, grid, quad_order)
        values = _poly_value(lyap, grid)
    else:
        lyap = lyapunov
        if not isinstance(lyap, QuadFormLyapunov):
            raise OutOfRange("vector models take a QuadFormLyapunov")
        cset = c_set or Ellipsoid(np.asarray(lyap.t), 16.0)
        if x_grid is None:
            raise OutOfRange("vector models need an explicit x grid")
        grid = np.asarray(x_grid, dtype=float)
        expectations = _quad_expectation(model, lyap, grid)
        values = _quad_value(lyap, grid)

    if not np.all(np.isfinite(expectations)):
        raise QuadratureFailure("drift expectation is not finite on the grid")
    ratios = expectations / values
    inside = cset.contains(grid)
    outside = ~inside
    if not outside.any():
        raise OutOfRange("grid has no points outside the small set C")
    worst = float(ratios[outside].max())
    if worst >= 1.0:
        raise NoValidRho(
            f"drift ratio reaches {worst:.6g} >= 1 outside C; no positive "
            "rate satisfies the inequality on this grid")
    rho = 1.0 - worst
    if inside.any():
        d = float(np.max(expectations[inside] - (1.0 - rho) * values[inside]))
        d = max(d, 0.0)
    else:
        d = 0.0
    if isinstance(lyap, PolyLyapunov):
        large = int(np.argmax(np.abs(grid)))
    else:
        large = int(np.argmax(np.einsum("...j,...j->...", grid, grid)))
    return DriftCheck(
        lyapunov=lyap.describe(), c_set=cset.describe(), rho=rho, d=d,
        ratio_large=float(ratios[large]), grid=grid, ratios=ratios,
        expectations=expectations, passed=rho > 0.0,
    )


# ---------------------------------------------------------------------------
# minorization checker
# ---------------------------------------------------------------------------

@dataclass
class MinorizationCheck:
    """Grid minimum of the post-change transition density over C x C with a
    Lipschitz-slack certificate (min - slack > 0 certifies the floor)."""
    f_star: float
    slack: float
    passed: bool
    argmin: tuple
    resolution: int
    steps: int = 1


def _scalar_f1(model, y, x):
    s = model._scale(x)
    return np.exp(model.innovation.logpdf((y - model._mean(x, True)) / s)) / s


def check_minorization(model, half_width, resolution=201, steps=1):
    """Minimum of f1(y|x) over the box C x C, C = [-half_width, half_width]^d.

    For the AR(p) companion model the one-step law is degenerate; pass
    steps = p to use the p-step Gaussian density instead.
    """
    half_width = check_scalar("half_width", half_width, lo=0.0)
    resolution = check_int("resolution", resolution, lo=2) if half_width > 0 else 1
    if isinstance(model, _ScalarInnovationModel):
        axis = np.linspace(-half_width, half_width, resolution)
        x, y = np.meshgrid(axis, axis, indexing="ij")
        f = _scalar_f1(model, y, x)
        spacing = axis[1] - axis[0] if resolution > 1 else 0.0
    elif isinstance(model, Ar2dRandomCoefModel):
        axis = np.linspace(-half_width, half_width, resolution)
        xs = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
        f = np.empty((xs.shape[0], xs.shape[0]))
        for i, x in enumerate(xs):
            f[i] = np.exp(model.log_density(xs, np.broadcast_to(x, xs.shape), True))
        spacing = axis[1] - axis[0] if resolution > 1 else 0.0
    elif isinstance(model, ArPModel):
        if steps != model.p:
            raise NoDensity(
                "the one-step law of the companion AR(p) state is degenerate; "
                f"call with steps={model.p} for the p-step density")
        if model.p > 2:
            raise NoDensity("p-step grid minorization implemented for p <= 2")
        a = np.linalg.matrix_power(model._companion(model.a1), model.p)
        q = sum(np.linalg.matrix_power(model._companion(model.a1), j)
                @ np.diag([1.0] + [0.0] * (model.p - 1))
                @ np.linalg.matrix_power(model._companion(model.a1), j).T
                for j in range(model.p))
        qinv = np.linalg.inv(q)
        norm = 1.0 / ((2.0 * math.pi) ** (model.p / 2) * math.sqrt(np.linalg.det(q)))
        axis = np.linspace(-half_width, half_width, resolution)
        xs = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
        f = np.empty((xs.shape[0], xs.shape[0]))
        for i, x in enumerate(xs):
            r = xs - x @ a.T
            f[i] = norm * np.exp(-0.5 * np.einsum("ij,jk,ik->i", r, qinv, r))
        spacing = axis[1] - axis[0] if resolution > 1 else 0.0
    else:
        raise NoDensity(
            f"no closed-form transition density grid for model {model.name!r}")

    f_star = float(f.min())
    argmin = np.unravel_index(int(f.argmin()), f.shape)
    if spacing > 0 and f_star > 0:
        if f.shape[0] != resolution:
            # vector states: indexings are flattened (res, res) grids
            f_spatial = f.reshape((resolution,) * 4)
        else:
            f_spatial = f
        # multiplicative certificate: log f is L-Lipschitz on the grid scale,
        # so the continuum minimum is at least f_star * exp(-L * r) with r
        # half the cell diagonal; slack is the certified shortfall
        grads = np.gradient(np.log(f_spatial), spacing)
        if isinstance(grads, np.ndarray):
            grads = [grads]
        lip = float(np.sqrt(np.max(sum(np.square(g) for g in grads))))
        radius = 0.5 * spacing * math.sqrt(len(grads))
        slack = f_star * (1.0 - math.exp(-lip * radius))
    elif f_star == 0.0 and spacing > 0:
        slack = math.inf  # a grid zero leaves nothing to certify
    else:
        slack = 0.0
    return MinorizationCheck(f_star=f_star, slack=slack,
                             passed=(f_star - slack) > 0.0,
                             argmin=tuple(int(i) for i in argmin),
                             resolution=resolution, steps=steps)


# ---------------------------------------------------------------------------
# the two-dimensional AR contrast demonstration
# ---------------------------------------------------------------------------

@dataclass
class LaiDemoResult:
    """Conditional shortfall probabilities from remote initial states."""
    x2_grid: np.ndarray
    p_hat: np.ndarray
    se: np.ndarray
    i_value: float
    eps: float
    n: int
    reps: int
    details: dict = field(default_factory=dict)


def demo_lai_failure(model, eps, n, x2_grid, reps, seed=0, i_value=None,
                     batch_size=10_000, threads=1):
    """P_0(sum_j Y_j < (I - eps) n | X0 = (0, x2)) along an |x2| grid.

    Uniformly over initial states this probability cannot be driven to zero
    for the two-dimensional AR model: the conditional drift flattens toward
    its |x2| -> infinity limit, so the estimates are nondecreasing along the
    grid while the k-uniform convergence audit (run separately) decays.
    """
    if model.dim != 2:
        raise OutOfRange("the demonstration runs on the two-dimensional AR model")
    n = check_int("n", n, lo=1)
    eps = check_scalar("eps", eps)
    if i_value is None:
        i_value = kl_number(model, "ergodic_mc", burn_in=1000, horizon=20_000,
                            reps=8, seed=seed).value
    threshold = (i_value - eps) * n
    x2_grid = np.asarray([check_scalar("x2", v) for v in x2_grid])
    sizes = batch_sizes(reps, batch_size)

    def estimate_for(idx):
        x2 = float(x2_grid[idx])

        def task(b):
            rng = stream_rng(seed, 30, idx, b)
            m = sizes[b]
            x = np.zeros((m, 2))
            x[:, 1] = x2
            acc = np.zeros(m)
            for _ in range(n):
                y = model.step(x, post=True, rng=rng)
                acc += model.llr(y, x)
                x = y
            return acc

        sums = np.concatenate(run_tasks(task, len(sizes), threads=1))
        p = float(np.mean(sums < threshold))
        return p, math.sqrt(p * (1.0 - p) / reps)

    results = run_tasks(estimate_for, x2_grid.size, threads)
    p_hat = np.array([r[0] for r in results])
    se = np.array([r[1] for r in results])
    return LaiDemoResult(x2_grid=x2_grid, p_hat=p_hat, se=se,
                         i_value=float(i_value), eps=eps, n=n, reps=reps)
