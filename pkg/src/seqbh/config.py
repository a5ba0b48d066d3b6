"""JSON configuration documents for the command line.

Simulation config::

    {
      "defaults": {"alpha": 0.05, "beta": 0.2, "replications": 10000},
      "scenarios": [
        {
          "name": "K=2",
          "model": {"kind": "bernoulli", "p": [0.4, 0.6]},
          "hypotheses": {"null": 0.4, "alt": 0.6},
          "fbh_n": 60
        }
      ]
    }

Normal models use ``{"kind": "normal", "theta": [...], "covariance": "M1"}``
where the covariance is a named matrix (M1..M4) or an explicit nested list.

Run (hypothesis) config::

    {
      "alpha": 0.05, "beta": 0.2, "rho": 0.0, "variant": "full",
      "streams": [{"statistic": "bernoulli", "p0": 0.4, "p1": 0.6}]
    }

``"K": 3`` together with a single ``"statistic"`` object may replace the
``streams`` list when every stream is tested the same way.
"""
from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .ladders import CriticalLadder, RejectiveLadder
from .procedure import FULL, REJECTIVE
from .simulation import COVARIANCES, ExperimentConfig, StreamModelSpec
from .statistics import (
    OUTWARD,
    GLRAccumulator,
    GlrSpec,
    LLRAccumulator,
    SimpleTestSpec,
    TwoSampleBinomialAccumulator,
    TwoSampleBinomialSpec,
    WaldConfig,
    sbh_wald_ladder,
)

SCENARIO_KEYS = {
    "name", "model", "hypotheses", "alpha", "beta", "rho", "overshoot",
    "replications", "seed", "group_size", "variant", "truncation", "fbh_n", "notes",
}
RUN_KEYS = {
    "alpha", "beta", "rho", "overshoot", "variant", "truncation", "group_size",
    "K", "statistic", "streams",
}


def bundled_configs():
    return sorted(
        p.name[:-5] for p in resources.files("seqbh.configs").iterdir()
        if p.name.endswith(".json")
    )


def load_json(path):
    """Read a JSON document; bundled config names (``table1``) are accepted."""
    p = Path(path)
    if not p.exists() and str(path) in bundled_configs():
        text = resources.files("seqbh.configs").joinpath(f"{path}.json").read_text("utf-8")
        source = f"<bundled {path}>"
    else:
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(str(path), f"cannot read file ({exc.strerror})") from None
        source = str(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            source, f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None


def _require(obj, key, where):
    if key not in obj:
        raise ConfigError(f"{where}.{key}", "missing required field")
    return obj[key]


def _number(value, where, lo=None, hi=None, lo_open=False, hi_open=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(where, f"expected a finite number, got {value!r}")
    if lo is not None and (value < lo or (lo_open and value == lo)):
        raise ConfigError(where, f"must be {'>' if lo_open else '>='} {lo}, got {value}")
    if hi is not None and (value > hi or (hi_open and value == hi)):
        raise ConfigError(where, f"must be {'<' if hi_open else '<='} {hi}, got {value}")
    return float(value)


def _integer(value, where, lo=None, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(where, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(where, f"must be >= {lo}, got {value}")
    return value


def _choice(value, where, options):
    if value not in options:
        raise ConfigError(where, f"must be one of {sorted(options)}, got {value!r}")
    return value


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(where, f"expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(where, f"unknown field(s) {unknown}")


def _levels(obj, where):
    alpha = _number(obj.get("alpha", 0.05), f"{where}.alpha", 0, 1, True, True)
    beta = _number(obj.get("beta", 0.2), f"{where}.beta", 0, 1, True, True)
    if alpha + beta > 1:
        raise ConfigError(f"{where}.beta", f"alpha + beta must not exceed 1, got {alpha + beta}")
    rho = _number(obj.get("rho", 0.0), f"{where}.rho", lo=0)
    return alpha, beta, rho


def _stream_model(obj, where):
    _check_keys(obj, {"kind", "p", "theta", "covariance"}, where)
    kind = _choice(_require(obj, "kind", where), f"{where}.kind", {"bernoulli", "normal"})
    key = "p" if kind == "bernoulli" else "theta"
    params = _require(obj, key, where)
    if not isinstance(params, list) or not params:
        raise ConfigError(f"{where}.{key}", "expected a non-empty list of numbers")
    if kind == "bernoulli":
        params = [_number(v, f"{where}.p[{i}]", 0, 1, True, True) for i, v in enumerate(params)]
        return StreamModelSpec(kind, tuple(params))
    params = [_number(v, f"{where}.theta[{i}]") for i, v in enumerate(params)]
    cov = obj.get("covariance")
    if cov is None:
        cov = np.eye(len(params))
    elif isinstance(cov, str):
        if cov not in COVARIANCES:
            raise ConfigError(f"{where}.covariance", f"unknown named matrix {cov!r}")
        cov = COVARIANCES[cov]
    try:
        cov = np.asarray(cov, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.covariance", "expected a square numeric matrix") from None
    if cov.shape != (len(params), len(params)):
        raise ConfigError(
            f"{where}.covariance", f"shape {cov.shape} does not match {len(params)} streams"
        )
    if not np.allclose(cov, cov.T):
        raise ConfigError(f"{where}.covariance", "matrix is not symmetric")
    return StreamModelSpec(kind, tuple(params), cov)


def parse_scenario(obj, where="scenario", overrides=None):
    """Validate one scenario object and build an :class:`ExperimentConfig`."""
    obj = dict(obj)
    obj.update({k: v for k, v in (overrides or {}).items() if v is not None})
    _check_keys(obj, SCENARIO_KEYS, where)
    model = _stream_model(_require(obj, "model", where), f"{where}.model")
    hyp = _require(obj, "hypotheses", where)
    _check_keys(hyp, {"null", "alt"}, f"{where}.hypotheses")
    null = _number(_require(hyp, "null", f"{where}.hypotheses"), f"{where}.hypotheses.null")
    alt = _number(_require(hyp, "alt", f"{where}.hypotheses"), f"{where}.hypotheses.alt")
    if not null < alt:
        raise ConfigError(f"{where}.hypotheses", f"need null < alt, got {null} and {alt}")
    if model.kind == "bernoulli" and not (0 < null < 1 and 0 < alt < 1):
        raise ConfigError(f"{where}.hypotheses", "Bernoulli hypotheses must lie in (0, 1)")
    alpha, beta, rho = _levels(obj, where)
    overshoot = _choice(obj.get("overshoot", "inward"), f"{where}.overshoot", {"inward", "outward"})
    variant = _choice(obj.get("variant", FULL), f"{where}.variant", {FULL, REJECTIVE})
    truncation = _integer(obj.get("truncation"), f"{where}.truncation", 1, allow_none=True)
    if variant == REJECTIVE and truncation is None:
        raise ConfigError(f"{where}.truncation", "required for the rejective variant")
    name = obj.get("name", where)
    if not isinstance(name, str):
        raise ConfigError(f"{where}.name", "expected a string")
    notes = obj.get("notes", "")
    if not isinstance(notes, str):
        raise ConfigError(f"{where}.notes", "expected a string")
    try:
        WaldConfig(alpha, beta, model.K, rho, overshoot)
        sbh_wald_ladder(WaldConfig(alpha, beta, model.K, rho, overshoot))
    except ValueError as exc:
        raise ConfigError(f"{where}.rho", str(exc)) from None
    return ExperimentConfig(
        model=model,
        null=null,
        alt=alt,
        alpha=alpha,
        beta=beta,
        rho=rho,
        overshoot=overshoot,
        replications=_integer(obj.get("replications", 10_000), f"{where}.replications", 1),
        seed=_integer(obj.get("seed", 0), f"{where}.seed", 0),
        group_size=_integer(obj.get("group_size", 1), f"{where}.group_size", 1),
        variant=variant,
        truncation=truncation,
        fbh_n=_integer(obj.get("fbh_n"), f"{where}.fbh_n", 1, allow_none=True),
        name=name,
        notes=notes,
    )


def parse_simulation_config(doc, overrides=None):
    """List of :class:`ExperimentConfig` from a simulation document."""
    _check_keys(doc, {"scenarios", "defaults", "description"}, "config")
    defaults = doc.get("defaults", {})
    _check_keys(defaults, SCENARIO_KEYS, "config.defaults")
    scenarios = _require(doc, "scenarios", "config")
    if not isinstance(scenarios, list):
        raise ConfigError("config.scenarios", "expected a list")
    out = []
    for i, sc in enumerate(scenarios):
        where = f"scenarios[{i}]"
        _check_keys(sc, SCENARIO_KEYS, where)
        out.append(parse_scenario({**defaults, **sc}, where, overrides))
    return out


# -- run config -------------------------------------------------------------


class StreamStatistic:
    """Factory for one stream's accumulator plus the expected observation width."""

    def __init__(self, factory, width):
        self.factory = factory
        self.width = width


def _statistic(obj, where):
    if not isinstance(obj, dict):
        raise ConfigError(where, "expected an object")
    kind = _choice(
        _require(obj, "statistic", where), f"{where}.statistic",
        {"bernoulli", "normal", "bernoulli_glr", "normal_glr", "two_sample_binomial"},
    )
    if kind in ("bernoulli", "bernoulli_glr"):
        _check_keys(obj, {"statistic", "p0", "p1"}, where)
        p0 = _number(_require(obj, "p0", where), f"{where}.p0", 0, 1, True, True)
        p1 = _number(_require(obj, "p1", where), f"{where}.p1", 0, 1, True, True)
        if not p0 < p1:
            raise ConfigError(where, f"need p0 < p1, got {p0} and {p1}")
        if kind == "bernoulli":
            spec = SimpleTestSpec.bernoulli(p0, p1)
            return StreamStatistic(lambda: LLRAccumulator(spec), 1)
        gspec = GlrSpec.bernoulli(p0, p1)
        return StreamStatistic(lambda: GLRAccumulator(gspec), 1)
    if kind in ("normal", "normal_glr"):
        _check_keys(obj, {"statistic", "theta0", "theta1"}, where)
        t0 = _number(obj.get("theta0", 0.0), f"{where}.theta0")
        t1 = _number(_require(obj, "theta1", where), f"{where}.theta1")
        if not t0 < t1:
            raise ConfigError(where, f"need theta0 < theta1, got {t0} and {t1}")
        if kind == "normal":
            spec = SimpleTestSpec.normal_mean(t0, t1)
            return StreamStatistic(lambda: LLRAccumulator(spec), 1)
        gspec = GlrSpec.normal_mean(t0, t1)
        return StreamStatistic(lambda: GLRAccumulator(gspec), 1)
    _check_keys(obj, {"statistic", "m1", "m2", "delta"}, where)
    spec = TwoSampleBinomialSpec(
        _integer(_require(obj, "m1", where), f"{where}.m1", 1),
        _integer(_require(obj, "m2", where), f"{where}.m2", 1),
        _number(_require(obj, "delta", where), f"{where}.delta", 0, 1, True, True),
    )
    return StreamStatistic(lambda: TwoSampleBinomialAccumulator(spec), 2)


class RunConfig:
    def __init__(self, statistics, ladders, variant, truncation, group_size):
        self.statistics = statistics
        self.ladders = ladders
        self.variant = variant
        self.truncation = truncation
        self.group_size = group_size

    @property
    def K(self):
        return len(self.statistics)


def parse_run_config(doc, overrides=None):
    """Per-stream statistics and ladders for streaming ``run`` mode."""
    doc = dict(doc)
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    _check_keys(doc, RUN_KEYS, "config")
    if "streams" in doc:
        streams = doc["streams"]
        if not isinstance(streams, list) or not streams:
            raise ConfigError("config.streams", "expected a non-empty list")
    else:
        K = _integer(_require(doc, "K", "config"), "config.K", 1)
        streams = [_require(doc, "statistic", "config")] * K
        if isinstance(streams[0], str):
            raise ConfigError("config.statistic", "expected an object such as {\"statistic\": \"bernoulli\", ...}")
    alpha, beta, rho = _levels(doc, "config")
    overshoot = _choice(doc.get("overshoot", OUTWARD), "config.overshoot", {"inward", "outward"})
    variant = _choice(doc.get("variant", FULL), "config.variant", {FULL, REJECTIVE})
    truncation = _integer(doc.get("truncation"), "config.truncation", 1, allow_none=True)
    if variant == REJECTIVE and truncation is None:
        raise ConfigError("config.truncation", "required for the rejective variant")
    group_size = _integer(doc.get("group_size", 1), "config.group_size", 1)

    K = len(streams)
    statistics, ladders = [], []
    try:
        default = sbh_wald_ladder(WaldConfig(alpha, beta, K, rho, overshoot))
    except ValueError as exc:
        raise ConfigError("config", str(exc)) from None
    for i, st in enumerate(streams):
        where = f"config.streams[{i}]"
        st = dict(st) if isinstance(st, dict) else st
        ladder = default
        if isinstance(st, dict) and "ladder" in st:
            ladder = _explicit_ladder(st.pop("ladder"), f"{where}.ladder", K, variant)
        statistics.append(_statistic(st, where))
        ladders.append(ladder if variant == FULL else _as_rejective(ladder))
    return RunConfig(statistics, ladders, variant, truncation, group_size)


def _as_rejective(ladder):
    return ladder.rejective() if isinstance(ladder, CriticalLadder) else ladder


def _explicit_ladder(obj, where, K, variant):
    if not isinstance(obj, dict):
        raise ConfigError(where, "expected an object with 'upper' (and 'lower')")
    try:
        upper = obj["upper"]
        if variant == REJECTIVE and "lower" not in obj:
            ladder = RejectiveLadder(upper)
        else:
            ladder = CriticalLadder(obj["lower"], upper)
    except KeyError as exc:
        raise ConfigError(where, f"missing {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(where, str(exc)) from None
    if ladder.K != K:
        raise ConfigError(where, f"has {ladder.K} levels, expected {K}")
    return ladder
