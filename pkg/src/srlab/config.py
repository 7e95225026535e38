"""Line-oriented experiment configuration: ``section.key = value``.

Values are ints, floats, booleans, bracketed lists (JSON syntax) or bare
strings.  Unknown keys are rejected so typos cannot silently change an
experiment; duplicate keys are parse errors.
"""

import json
import math
from dataclasses import dataclass, field

from .errors import OutOfRange, ParseError, UnknownKey
from .risk import DETECTOR_KINDS
from .validation import check_int, check_scalar, check_unit_open

EXPERIMENT_KINDS = ("calibrate", "risk", "sweep", "audit", "demo-lai")

# keys every experiment accepts; model.* parameter keys are validated by the
# model builders themselves
_COMMON_KEYS = {
    "experiment.kind",
    "run.seed", "run.threads", "run.out",
    "model.name",
    "detector.kind", "detector.threshold", "detector.alpha", "detector.rho",
    "detector.beta",
    "mc.reps", "mc.n_max", "mc.censor_cap", "mc.batch_size",
}

_KIND_KEYS = {
    "calibrate": {"calibrate.beta", "calibrate.m_star", "calibrate.k_star"},
    "risk": {"risk.functional", "risk.nu", "risk.moment", "risk.rho",
             "risk.k_star", "risk.m_star"},
    "sweep": {"sweep.h_grid", "sweep.nu", "sweep.moment"},
    "audit": {"audit.eps", "audit.k_grid", "audit.n_grid", "audit.i_value",
              "audit.drift", "audit.minorization", "audit.drift_iota",
              "audit.drift_q_star", "audit.c_half_width",
              "audit.drift_half_width",
              "audit.min_resolution"},
    "demo-lai": {"demo.eps", "demo.n", "demo.x2_grid", "demo.i_value"},
}

RISK_FUNCTIONALS = ("pfa", "lpfa", "lcpfa", "delay")


@dataclass
class ExperimentConfig:
    """Fully validated experiment description."""
    kind: str
    seed: int = 0
    threads: int = 1
    out: str = "out"
    model_name: str | None = None
    model_params: dict = field(default_factory=dict)
    detector: dict = field(default_factory=dict)
    mc: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    raw_text: str = ""


def _parse_value(raw, lineno):
    raw = raw.strip()
    if raw.startswith("["):
        try:
            value = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: bad list literal {raw!r} ({exc.msg})")
        if not isinstance(value, list):
            raise ParseError(f"line {lineno}: expected a list, got {raw!r}")
        return value
    lowered = raw.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered in ("inf", "infinity"):
        return math.inf
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def _read_pairs(text):
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(f"line {lineno}: expected 'section.key = value', got {line!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        if not key or "." not in key:
            raise ParseError(f"line {lineno}: keys use the section.key form, got {key!r}")
        if key in pairs:
            raise ParseError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = (_parse_value(raw, lineno), lineno)
    return pairs


def _number_list(name, value):
    if not isinstance(value, list) or not value:
        raise OutOfRange(f"{name} must be a nonempty list")
    return [check_scalar(name, v) for v in value]


def _int_list(name, value, lo=0):
    if not isinstance(value, list) or not value:
        raise OutOfRange(f"{name} must be a nonempty list")
    return [check_int(name, v, lo=lo) for v in value]


def parse_config(text):
    """Parse and validate a config; defaults for m*/k* and thresholds are
    resolved later from the calibration module's reference defaults."""
    pairs = _read_pairs(text)
    kind = pairs.pop("experiment.kind", (None, 0))[0]
    if kind is None:
        raise UnknownKey("config is missing experiment.kind")
    if kind not in EXPERIMENT_KINDS:
        raise OutOfRange(
            f"experiment.kind must be one of {EXPERIMENT_KINDS}, got {kind!r}")

    allowed = _COMMON_KEYS | _KIND_KEYS[kind]
    cfg = ExperimentConfig(kind=kind, raw_text=text)
    model_params = {}
    for key, (value, lineno) in pairs.items():
        if key.startswith("model.") and key != "model.name":
            model_params[key.split(".", 1)[1]] = value
            continue
        if key not in allowed:
            raise UnknownKey(f"line {lineno}: unknown key {key!r} for "
                             f"experiment kind {kind!r}")

    get = lambda key, default=None: pairs.get(key, (default, 0))[0]

    cfg.seed = check_int("run.seed", get("run.seed", 0), lo=0)
    cfg.threads = check_int("run.threads", get("run.threads", 1), lo=1)
    cfg.out = str(get("run.out", "out"))
    cfg.model_name = get("model.name")
    cfg.model_params = model_params

    det = {
        "kind": get("detector.kind", "sr"),
        "threshold": get("detector.threshold"),
        "alpha": get("detector.alpha"),
        "rho": get("detector.rho"),
        "beta": get("detector.beta"),
    }
    if det["kind"] not in DETECTOR_KINDS:
        raise OutOfRange(
            f"detector.kind must be one of {DETECTOR_KINDS}, got {det['kind']!r}")
    if det["threshold"] is not None:
        det["threshold"] = check_scalar("detector.threshold", det["threshold"],
                                        lo=0.0, inclusive_lo=False)
    for name in ("alpha", "rho", "beta"):
        if det[name] is not None:
            det[name] = check_unit_open(f"detector.{name}", det[name])
    cfg.detector = det

    cfg.mc = {
        "reps": check_int("mc.reps", get("mc.reps", 0), lo=0),
        "n_max": check_int("mc.n_max", get("mc.n_max", 2000), lo=1),
        "censor_cap": check_scalar("mc.censor_cap", get("mc.censor_cap", 0.001),
                                   lo=0.0, hi=1.0, inclusive_lo=False),
        "batch_size": check_int("mc.batch_size", get("mc.batch_size", 10_000), lo=1),
    }

    extra = {}
    if kind == "calibrate":
        beta = get("calibrate.beta", det["beta"])
        if beta is None:
            raise OutOfRange("calibrate experiments need calibrate.beta")
        extra["beta"] = check_unit_open("calibrate.beta", beta)
        for name in ("m_star", "k_star"):
            value = get(f"calibrate.{name}")
            extra[name] = None if value is None else check_int(
                f"calibrate.{name}", value, lo=1)
    elif kind == "risk":
        functional = get("risk.functional")
        if functional not in RISK_FUNCTIONALS:
            raise OutOfRange(
                f"risk.functional must be one of {RISK_FUNCTIONALS}, got {functional!r}")
        extra["functional"] = functional
        nu = get("risk.nu", [0])
        extra["nu"] = _int_list("risk.nu", nu if isinstance(nu, list) else [nu])
        extra["moment"] = check_int("risk.moment", get("risk.moment", 1), lo=1)
        rho = get("risk.rho", det["rho"])
        extra["rho"] = None if rho is None else check_unit_open("risk.rho", rho)
        for name in ("k_star", "m_star"):
            value = get(f"risk.{name}")
            extra[name] = None if value is None else check_int(
                f"risk.{name}", value, lo=1)
    elif kind == "sweep":
        grid = _number_list("sweep.h_grid", get("sweep.h_grid"))
        if min(grid) <= 0:
            raise OutOfRange("sweep.h_grid entries must be positive")
        extra["h_grid"] = grid
        nu = get("sweep.nu", [0])
        extra["nu"] = _int_list("sweep.nu", nu if isinstance(nu, list) else [nu])
        extra["moment"] = check_int("sweep.moment", get("sweep.moment", 1), lo=1)
    elif kind == "audit":
        extra["eps"] = _number_list("audit.eps", get("audit.eps", [0.05]))
        extra["k_grid"] = _int_list("audit.k_grid",
                                    get("audit.k_grid", [0, 1, 2, 5, 10, 20, 50]))
        extra["n_grid"] = _int_list("audit.n_grid",
                                    get("audit.n_grid", [50, 100, 200, 400, 800]),
                                    lo=1)
        value = get("audit.i_value")
        extra["i_value"] = None if value is None else check_scalar(
            "audit.i_value", value, lo=0.0, inclusive_lo=False)
        extra["drift"] = bool(get("audit.drift", True))
        extra["minorization"] = bool(get("audit.minorization", True))
        extra["drift_iota"] = check_scalar("audit.drift_iota",
                                           get("audit.drift_iota", 2.0),
                                           lo=0.0, inclusive_lo=False)
        extra["drift_q_star"] = check_scalar("audit.drift_q_star",
                                             get("audit.drift_q_star", 1.0),
                                             lo=0.0, inclusive_lo=False)
        extra["c_half_width"] = check_scalar("audit.c_half_width",
                                             get("audit.c_half_width", 1.0),
                                             lo=0.0, inclusive_lo=False)
        extra["drift_half_width"] = check_scalar(
            "audit.drift_half_width", get("audit.drift_half_width", 4.0),
            lo=0.0, inclusive_lo=False)
        extra["min_resolution"] = check_int("audit.min_resolution",
                                            get("audit.min_resolution", 201), lo=2)
    elif kind == "demo-lai":
        extra["eps"] = check_scalar("demo.eps", get("demo.eps", 0.05))
        extra["n"] = check_int("demo.n", get("demo.n", 100), lo=1)
        extra["x2_grid"] = _number_list("demo.x2_grid",
                                        get("demo.x2_grid", [10.0, 100.0, 1000.0]))
        value = get("demo.i_value")
        extra["i_value"] = None if value is None else check_scalar(
            "demo.i_value", value, lo=0.0, inclusive_lo=False)
    cfg.extra = extra
    return cfg
