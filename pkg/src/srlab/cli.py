"""Experiment orchestration CLI.

Subcommands mirror the experiment kinds (calibrate, risk, sweep, audit,
demo-lai) plus ``models list``.  Every run writes a manifest (config echo +
seed + version) and one CSV per report type into the output directory;
outputs are deterministic byte-for-byte for a fixed config, any thread count.

Exit codes: 0 success, 1 error, 2 completed but a guard-band verdict failed.
"""

import argparse
import csv
import math
import sys
from pathlib import Path

from . import __version__
from .audit import audit_complete_convergence, check_drift, check_minorization, \
    demo_lai_failure, Interval, PolyLyapunov
from .calibration import bayes_threshold, calibrate_for_beta, check_inclusions
from .config import parse_config
from .errors import OutOfRange, SrlabError
from .models import MODEL_BUILDERS, build_model, kl_number, _ScalarInnovationModel
from .risk import estimate_delay, estimate_lcpfa, estimate_lpfa, estimate_pfa, \
    sweep_thresholds
from .util import fmt17


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt17(v) if isinstance(v, float) else v for v in row])


def _write_manifest(out_dir, config):
    lines = [f"srlab-version: {__version__}",
             f"experiment: {config.kind}",
             f"seed: {config.seed}",
             f"threads: {config.threads}",
             "config: |"]
    lines += ["  " + line for line in config.raw_text.splitlines()]
    (out_dir / "manifest.txt").write_text("\n".join(lines) + "\n")


def _build_config_model(config):
    if config.model_name is None:
        raise OutOfRange(f"{config.kind} experiments need model.name")
    return build_model(config.model_name, **config.model_params)


def _resolve_threshold(config, use_star=False):
    """Detector threshold from the config: explicit, (alpha, rho), or beta."""
    det = config.detector
    if det["threshold"] is not None:
        return det["threshold"]
    if det["alpha"] is not None and det["rho"] is not None:
        return bayes_threshold(det["alpha"], det["rho"])
    if det["beta"] is not None:
        sheet = calibrate_for_beta(det["beta"])
        return sheet.h_star_beta if use_star else sheet.h_beta
    raise OutOfRange(
        "detector needs a threshold source: detector.threshold, "
        "detector.alpha + detector.rho, or detector.beta")


def _native_threshold(kind, h):
    return math.log(h) if kind == "cusum" else h


def _run_calibrate(config, out_dir):
    sheet = calibrate_for_beta(config.extra["beta"], config.extra["m_star"],
                               config.extra["k_star"])
    row = sheet.as_row()
    _write_csv(out_dir / "calibration.csv", list(row), [list(row.values())])
    if config.model_name is None or config.mc["reps"] == 0:
        return 0
    model = _build_config_model(config)
    report = check_inclusions(sheet, model, reps=config.mc["reps"],
                              seed=config.seed,
                              batch_size=config.mc["batch_size"],
                              threads=config.threads)
    rows = [
        ["LPFA", sheet.h_beta, report.lpfa, report.lpfa_se, sheet.beta,
         report.reps, "PASS" if report.lpfa_pass else "FAIL"],
        ["LCPFA", sheet.h_star_beta, report.lcpfa, report.lcpfa_se, sheet.beta,
         report.reps, "PASS" if report.lcpfa_pass else "FAIL"],
    ]
    _write_csv(out_dir / "membership.csv",
               ["class", "threshold", "estimate", "se", "beta", "reps", "verdict"],
               rows)
    return 0 if report.passed else 2


def _risk_row(report, nu=""):
    return [report.functional, nu, report.estimate, report.se, report.reps,
            report.censored_frac]


def _run_risk(config, out_dir):
    model = _build_config_model(config)
    extra = config.extra
    det = config.detector
    reps = config.mc["reps"]
    if reps < 2:
        raise OutOfRange("risk experiments need mc.reps >= 2")
    functional = extra["functional"]
    rows = []
    if functional == "pfa":
        rho = extra["rho"]
        if rho is None:
            raise OutOfRange("pfa risk needs risk.rho or detector.rho")
        h = _native_threshold(det["kind"], _resolve_threshold(config))
        report = estimate_pfa(model, det["kind"], h, rho, reps,
                              seed=config.seed,
                              batch_size=config.mc["batch_size"],
                              threads=config.threads,
                              statistic_rho=det["rho"])
        rows.append(_risk_row(report))
    elif functional in ("lpfa", "lcpfa"):
        beta = det["beta"]
        k_star, m_star = extra["k_star"], extra["m_star"]
        if (k_star is None or m_star is None):
            if beta is None:
                raise OutOfRange(
                    f"{functional} risk needs detector.beta or explicit "
                    "risk.k_star and risk.m_star")
            sheet = calibrate_for_beta(beta)
            k_star = k_star or sheet.k_star
            m_star = m_star or sheet.m_star
        h = _native_threshold(det["kind"],
                              _resolve_threshold(config, use_star=(functional == "lcpfa")))
        fn = estimate_lpfa if functional == "lpfa" else estimate_lcpfa
        report = fn(model, det["kind"], h, k_star, m_star, reps,
                    seed=config.seed, batch_size=config.mc["batch_size"],
                    threads=config.threads, statistic_rho=det["rho"])
        rows.append(_risk_row(report))
    else:  # delay
        h = _native_threshold(det["kind"], _resolve_threshold(config))
        best = None
        for nu in extra["nu"]:
            est = estimate_delay(model, det["kind"], h, nu, r=extra["moment"],
                                 reps=reps, n_max=config.mc["n_max"],
                                 seed=config.seed,
                                 censor_cap=config.mc["censor_cap"],
                                 batch_size=config.mc["batch_size"],
                                 threads=config.threads, rho=det["rho"])
            rows.append(_risk_row(est.positive_part, nu))
            rows.append(_risk_row(est.conditional, nu))
            if best is None or est.positive_part.estimate > best[1]:
                best = (nu, est.positive_part.estimate, est.positive_part.se)
        # grid max is a lower bound on the supremum over all nu
        rows.append([f"{'Rnu' if extra['moment'] == 1 else 'MomentR(%d)' % extra['moment']}GridMax",
                     best[0], best[1], best[2], reps, 0.0])
    _write_csv(out_dir / "risk.csv",
               ["functional", "nu", "estimate", "se", "reps", "censored"], rows)
    return 0


def _run_sweep(config, out_dir):
    model = _build_config_model(config)
    extra = config.extra
    result = sweep_thresholds(model, config.detector["kind"], extra["h_grid"],
                              nus=extra["nu"], r=extra["moment"],
                              reps=config.mc["reps"], n_max=config.mc["n_max"],
                              seed=config.seed,
                              censor_cap=config.mc["censor_cap"],
                              batch_size=config.mc["batch_size"],
                              threads=config.threads,
                              rho=config.detector["rho"])
    rows = [[r["kind"], r["h"], r["nu"], r["estimate"], r["se"],
             r["conditional"], r["conditional_se"], r["reps"],
             r["censored_frac"]] for r in result.rows]
    _write_csv(out_dir / "sweep.csv",
               ["kind", "h", "nu", "estimate", "se", "conditional",
                "conditional_se", "reps", "censored"], rows)
    one_over_i = result.one_over_i if result.one_over_i is not None else ""
    _write_csv(out_dir / "sweep_summary.csv",
               ["slope", "ci_lo", "ci_hi", "one_over_I"],
               [[result.slope, result.slope_ci[0], result.slope_ci[1], one_over_i]])
    return 0


def _run_audit(config, out_dir):
    model = _build_config_model(config)
    extra = config.extra
    i_value = extra["i_value"]
    if i_value is None:
        i_value = model.kl_closed_form
    if i_value is None:
        i_value = kl_number(model, "ergodic_mc", seed=config.seed).value
    reps = config.mc["reps"] or 10_000
    audit = audit_complete_convergence(model, i_value, extra["eps"],
                                       extra["k_grid"], extra["n_grid"], reps,
                                       seed=config.seed,
                                       batch_size=config.mc["batch_size"],
                                       threads=config.threads)
    rows = []
    for ki, k in enumerate(audit.k_grid):
        for ni, n in enumerate(audit.n_grid):
            for ei, eps in enumerate(audit.eps_grid):
                rows.append([int(k), int(n), float(eps),
                             float(audit.p[ki, ni, ei]),
                             float(audit.se[ki, ni, ei])])
    _write_csv(out_dir / "audit.csv", ["k", "n", "eps", "p_hat", "se"], rows)
    srows = [[float(eps), float(audit.slopes[ei]),
              float(audit.partial_r1[-1, ei]), float(audit.partial_r2[-1, ei]),
              bool(audit.sup_at_kmax[ei])]
             for ei, eps in enumerate(audit.eps_grid)]
    _write_csv(out_dir / "audit_summary.csv",
               ["eps", "slope", "partial_r1", "partial_r2", "sup_at_k_edge"],
               srows)
    if extra["drift"] and isinstance(model, _ScalarInnovationModel):
        drift = check_drift(model,
                            PolyLyapunov(extra["drift_q_star"], extra["drift_iota"]),
                            Interval(extra["drift_half_width"]))
        _write_csv(out_dir / "drift.csv",
                   ["lyapunov", "c_set", "rho", "d", "ratio_large", "passed"],
                   [[drift.lyapunov, drift.c_set, drift.rho, drift.d,
                     drift.ratio_large, drift.passed]])
    if extra["minorization"] and isinstance(model, _ScalarInnovationModel):
        mino = check_minorization(model, extra["c_half_width"],
                                  resolution=extra["min_resolution"])
        _write_csv(out_dir / "minorization.csv",
                   ["half_width", "f_star", "slack", "passed"],
                   [[extra["c_half_width"], mino.f_star, mino.slack,
                     mino.passed]])
    return 0


def _run_demo_lai(config, out_dir):
    model = _build_config_model(config)
    extra = config.extra
    reps = config.mc["reps"] or 10_000
    result = demo_lai_failure(model, extra["eps"], extra["n"],
                              extra["x2_grid"], reps, seed=config.seed,
                              i_value=extra["i_value"],
                              batch_size=config.mc["batch_size"],
                              threads=config.threads)
    rows = [[float(x2), float(p), float(se), result.i_value, result.eps,
             result.n]
            for x2, p, se in zip(result.x2_grid, result.p_hat, result.se)]
    _write_csv(out_dir / "demo_lai.csv",
               ["x2", "p_hat", "se", "i_value", "eps", "n"], rows)
    return 0


_RUNNERS = {
    "calibrate": _run_calibrate,
    "risk": _run_risk,
    "sweep": _run_sweep,
    "audit": _run_audit,
    "demo-lai": _run_demo_lai,
}


def run(config):
    """Execute a parsed experiment config; returns the process exit code."""
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir, config)
    return _RUNNERS[config.kind](config, out_dir)


def _load_config(args, expected_kind):
    text = Path(args.config).read_text()
    config = parse_config(text)
    if config.kind != expected_kind:
        raise OutOfRange(
            f"config has experiment.kind={config.kind!r}, expected "
            f"{expected_kind!r} for this subcommand")
    if args.seed is not None:
        config.seed = args.seed
    if args.threads is not None:
        config.threads = args.threads
    if args.out is not None:
        config.out = args.out
    return config


def _add_run_parser(sub, name, help_text):
    parser = sub.add_parser(name, help=help_text)
    parser.add_argument("--config", required=True, help="experiment config path")
    parser.add_argument("--seed", type=int, default=None, help="override run.seed")
    parser.add_argument("--threads", type=int, default=None, help="override run.threads")
    parser.add_argument("--out", default=None, help="override run.out directory")
    return parser


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="srlab",
        description="Sequential change-point detection laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_parser(sub, "calibrate", "derived thresholds for a target beta")
    _add_run_parser(sub, "risk", "Monte Carlo risk estimation")
    _add_run_parser(sub, "sweep", "delay-vs-threshold sweep with slope fit")
    _add_run_parser(sub, "audit", "convergence/drift/minorization audits")
    _add_run_parser(sub, "demo-lai", "remote-initial-state contrast demo")
    models_parser = sub.add_parser("models", help="model registry")
    models_sub = models_parser.add_subparsers(dest="models_command", required=True)
    models_sub.add_parser("list", help="list available models")

    args = parser.parse_args(argv)
    if args.command == "models":
        for name in sorted(MODEL_BUILDERS):
            print(name)
        return 0
    try:
        config = _load_config(args, args.command)
        return run(config)
    except SrlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
