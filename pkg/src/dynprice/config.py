"""Experiment configuration files (TOML syntax).

Layout::

    [scenario]
    true_model = "all"            # or an index
    [scenario.interval]
    l = 0.5
    u = 1.5
    [[scenario.models]]
    kind = "linear"               # linear | logistic | tabulated
    params = [1.4, -0.9]

    [[policies]]
    kind = "lrt"                  # lrt xlrt elrt exlrt mbp cmbp oracle
    # optional: kappa, eta0, eta1, delta, q0, metric

    [run]
    horizon = 1000
    replications = 500
    base_seed = 0
    checkpoints = [100, 1000]     # optional; defaults to dense-then-log spacing
    workers = 1
    grid_points = 4001

    [output]
    csv = "results.csv"
    bounds = "bounds.csv"

Unknown keys are rejected.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .demand import DemandModel, Scenario
from .optimize import GridConfig
from .policies import PolicySpec

TOP_KEYS = {"scenario", "policies", "run", "output"}
SCENARIO_KEYS = {"models", "interval", "true_model"}
MODEL_KEYS = {"kind", "params"}
INTERVAL_KEYS = {"l", "u"}
POLICY_KEYS = {"kind", "kappa", "eta0", "eta1", "delta", "q0", "metric"}
RUN_KEYS = {"horizon", "replications", "base_seed", "checkpoints", "workers", "grid_points"}
OUTPUT_KEYS = {"csv", "bounds"}
POLICY_KINDS = ("lrt", "xlrt", "elrt", "exlrt", "mbp", "cmbp", "oracle")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    horizon: int = 1000
    replications: int = 500
    base_seed: int = 0
    checkpoints: Optional[list] = None
    workers: int = 1
    grid_points: int = 4001


@dataclass
class ExperimentConfig:
    scenario: Scenario
    true_models: list
    policies: list
    run: RunConfig = field(default_factory=RunConfig)
    csv: Optional[str] = None
    bounds: Optional[str] = None
    source: Optional[Path] = None


def _check_keys(table, allowed, where: str) -> None:
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: expected a table, got {table!r}")
    for key in table:
        if key not in allowed:
            raise ConfigError(f"{where}: unknown key {key!r} (value {table[key]!r}); allowed keys: {sorted(allowed)}")


def _number(value, key: str, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _model(raw, where: str) -> DemandModel:
    _check_keys(raw, MODEL_KEYS, where)
    if "kind" not in raw:
        raise ConfigError(f"{where}.kind: missing")
    if "params" not in raw:
        raise ConfigError(f"{where}.params: missing")
    try:
        return DemandModel(raw["kind"], tuple(tuple(p) if isinstance(p, list) else p for p in raw["params"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: kind={raw.get('kind')!r} params={raw.get('params')!r}: {exc}") from None


def _policy(raw, where: str) -> PolicySpec:
    _check_keys(raw, POLICY_KEYS, where)
    kind = raw.get("kind")
    if kind not in POLICY_KINDS:
        raise ConfigError(f"{where}.kind: expected one of {POLICY_KINDS}, got {kind!r}")
    kwargs = {"kind": kind}
    for key in ("kappa", "eta0", "eta1", "delta", "q0"):
        if key in raw:
            kwargs[key] = _number(raw[key], f"{where}.{key}")
    if "metric" in raw:
        kwargs["metric"] = raw["metric"]
    try:
        return PolicySpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_config(data: dict, source: Optional[Path] = None) -> ExperimentConfig:
    _check_keys(data, TOP_KEYS, "config")
    if "scenario" not in data:
        raise ConfigError("scenario: missing")
    sc = data["scenario"]
    _check_keys(sc, SCENARIO_KEYS, "scenario")
    models_raw = sc.get("models")
    if not isinstance(models_raw, list) or len(models_raw) < 2:
        raise ConfigError(f"scenario.models: need a list of at least 2 models, got {models_raw!r}")
    models = [_model(m, f"scenario.models[{j}]") for j, m in enumerate(models_raw)]
    iv = sc.get("interval")
    if iv is None:
        raise ConfigError("scenario.interval: missing")
    _check_keys(iv, INTERVAL_KEYS, "scenario.interval")
    for key in ("l", "u"):
        if key not in iv:
            raise ConfigError(f"scenario.interval.{key}: missing")
    lo = _number(iv["l"], "scenario.interval.l")
    hi = _number(iv["u"], "scenario.interval.u")
    if not lo < hi:
        raise ConfigError(f"scenario.interval: need l < u, got l={lo!r} u={hi!r}")

    run_raw = data.get("run", {})
    _check_keys(run_raw, RUN_KEYS, "run")
    run = RunConfig()
    for key in ("horizon", "replications", "base_seed", "workers", "grid_points"):
        if key in run_raw:
            setattr(run, key, _number(run_raw[key], f"run.{key}", int))
    if run.horizon < 1:
        raise ConfigError(f"run.horizon: must be >= 1, got {run.horizon}")
    if run.replications < 1:
        raise ConfigError(f"run.replications: must be >= 1, got {run.replications}")
    if run.workers < 1:
        raise ConfigError(f"run.workers: must be >= 1, got {run.workers}")
    if run.grid_points < 3:
        raise ConfigError(f"run.grid_points: must be >= 3, got {run.grid_points}")
    if run.base_seed < 0:
        raise ConfigError(f"run.base_seed: must be >= 0, got {run.base_seed}")
    if "checkpoints" in run_raw:
        ck = run_raw["checkpoints"]
        if not isinstance(ck, list):
            raise ConfigError(f"run.checkpoints: expected a list of steps, got {ck!r}")
        run.checkpoints = [_number(x, "run.checkpoints", int) for x in ck]

    scenario = Scenario.build(models, (lo, hi), grid=GridConfig(points=run.grid_points))
    n = scenario.n_models
    tm = sc.get("true_model", "all")
    if tm == "all":
        true_models = list(range(n))
    else:
        tm = _number(tm, "scenario.true_model", int)
        if not 0 <= tm < n:
            raise ConfigError(f"scenario.true_model: index {tm} out of range [0, {n})")
        true_models = [tm]
        scenario = scenario.with_true_model(tm)

    pol_raw = data.get("policies", [])
    if not isinstance(pol_raw, list):
        raise ConfigError(f"policies: expected a list of tables, got {pol_raw!r}")
    policies = [_policy(p, f"policies[{j}]") for j, p in enumerate(pol_raw)]

    out = data.get("output", {})
    _check_keys(out, OUTPUT_KEYS, "output")
    for key in OUTPUT_KEYS:
        if key in out and not isinstance(out[key], str):
            raise ConfigError(f"output.{key}: expected a path string, got {out[key]!r}")
    return ExperimentConfig(scenario, true_models, policies, run, out.get("csv"), out.get("bounds"), source)


def bundled_config(name: str) -> Path:
    return Path(str(resources.files("dynprice") / "configs" / name))


def resolve_path(path) -> Path:
    """``path`` itself, or the bundled config of that name when no such file exists."""
    p = Path(path)
    if not p.exists() and p.parent == Path("."):
        candidate = bundled_config(p.name)
        if candidate.exists():
            return candidate
    return p


def load_config(path) -> ExperimentConfig:
    """Read and validate a config file; OSError propagates for I/O failures."""
    p = resolve_path(path)
    with open(p, "rb") as fh:
        raw = fh.read()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{p}: malformed config: {exc}") from None
    return parse_config(data, p)
