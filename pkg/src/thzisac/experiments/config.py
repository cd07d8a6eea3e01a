"""
YAML experiment configuration with strict validation.

Every accepted key has a default; the resolved configuration (defaults
included) is what gets echoed into run metadata and hashed.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..profiles import PROFILE_ORDER, get_profile


class ConfigError(ValueError):
    """Invalid configuration; message carries the key path and line when known."""


EXPERIMENT_IDS = (
    "capacity_vs_snr", "rmse_vs_snr", "freq_sweep", "distance_sweep",
    "gamma_sweep", "cd_frontier", "feasibility_map", "awgn_comparison",
)

# validity ranges of the sweep model; leaving them needs allow_extrapolation
MODEL_RANGES = {
    "carrier_hz": (100e9, 1000e9),
    "range_m": (500e3, 5000e3),
    "linewidth_hz": (10e3, 500e3),
}


@dataclass(frozen=True)
class Field:
    kind: type | tuple
    default: Any
    lo: float | None = None
    hi: float | None = None
    choices: tuple | None = None
    positive: bool = False
    nullable: bool = False


def _axis(start, stop, points, scale="linear"):
    return {"start": start, "stop": stop, "points": points, "scale": scale, "allow_extrapolation": False}


SCENARIO_SCHEMA = {
    "carrier_hz": Field(float, 300e9, positive=True),
    "range_m": Field(float, 2000e3, positive=True),
    "range_rate_mps": Field(float, -7500.0, -20e3, 20e3),
    "diameter_m": Field(float, 1.0, positive=True),
    "tx_power_dbm": Field(float, 30.0, -30.0, 60.0),
    "noise_figure_db": Field(float, 10.0, 0.0, 30.0),
    "noise_bandwidth_hz": Field(float, 1e9, positive=True),
    "m_pilots": Field(int, 64, 2, 4096),
    "frame_symbols": Field(int, 1024, 2, 1 << 20),
    "frame_duration_s": Field(float, 1e-6, positive=True),
    "pointing_rms_rad": Field(float, 1e-6, 0.0, 1e-2),
    "gain_mode": Field(str, "aperture", choices=("aperture", "fixed", "compensated")),
    "fixed_gain_dbi": Field(float, 50.0, 0.0, 100.0),
    "aperture_efficiency": Field(float, 0.65, 1e-3, 1.0),
    "ibo_db": Field(float, 10.0, 0.0, 40.0),
    "dse_below_db": Field(float, 30.0, 0.0, 120.0),
    "covariance": Field(str, "diagonal", choices=("diagonal", "correlated")),
}

PROFILE_OVERRIDE_SCHEMA = {
    "evm_pa": Field(float, None, 0.0, 0.999, nullable=True),
    "jitter_rms_s": Field(float, None, 0.0, 1e-9, nullable=True),
    "enob_bits": Field(float, None, 0.5, 24.0, nullable=True),
    "linewidth_hz": Field(float, None, 0.0, 1e9, nullable=True),
    "signal_bandwidth_hz": Field(float, None, positive=True, nullable=True),
    "system_bandwidth_hz": Field(float, None, positive=True, nullable=True),
    "gamma_eff": Field(float, None, 0.0, 1.0, nullable=True),
    "gamma_source": Field(str, None, choices=("asserted", "components"), nullable=True),
    "phase_variance_rad2": Field(float, None, 0.0, 10.0, nullable=True),
    "phase_window_s": Field(float, None, positive=True, nullable=True),
}

PROFILES_SCHEMA = {
    "names": Field(list, list(PROFILE_ORDER)),
    "gamma_source": Field(str, "asserted", choices=("asserted", "components")),
    "overrides": Field(dict, {}),
}

MONTE_CARLO_SCHEMA = {
    "pointing_draws": Field(int, 1000, 1000, 10_000_000),
    "mi_samples": Field(int, 25_000, 10_000, 100_000_000),
}

OUTPUT_SCHEMA = {
    "directory": Field(str, "results"),
    "formats": Field(list, ["csv", "svg"]),
}

AXIS_SCHEMA = {
    "start": Field(float, None),
    "stop": Field(float, None),
    "points": Field(int, None, 1, 100_000),
    "scale": Field(str, "linear", choices=("linear", "log")),
    "allow_extrapolation": Field(bool, False),
}

EXPERIMENT_SCHEMAS: dict[str, dict] = {
    "capacity_vs_snr": {"snr0_db": _axis(-10.0, 60.0, 71)},
    "awgn_comparison": {"snr0_db": _axis(-10.0, 60.0, 71)},
    "rmse_vs_snr": {"snr0_db": _axis(0.0, 60.0, 31)},
    "freq_sweep": {"carrier_hz": _axis(100e9, 1000e9, 10, "log"), "snr0_db": Field(float, 30.0, -50.0, 100.0)},
    "distance_sweep": {
        "range_m": _axis(500e3, 5000e3, 10),
        "carriers_hz": Field(list, [300e9, 1000e9]),
        "gain_mode": Field(str, "aperture", choices=("aperture", "fixed", "compensated")),
    },
    "gamma_sweep": {
        "gamma_eff": _axis(1e-3, 1e-1, 21, "log"),
        "snr0_db_list": Field(list, [20.0, 30.0, 40.0, 50.0]),
        "phase_variance_rad2": Field(float, 2 * math.pi * 10e3 * 1e-6, 0.0, 10.0),
    },
    "cd_frontier": {
        "constellation": Field(str, "qam16"),
        "target_fractions": Field(list, [0.1, 0.3, 0.5, 0.75, 1.0]),
        "include_unconstrained": Field(bool, True),
        "max_iters": Field(int, 50, 1, 10_000),
        "reference_range_rmse_m": Field(float, 1e-3, positive=True),
        "reference_velocity_rmse_mps": Field(float, 1e-3, positive=True),
    },
    "feasibility_map": {
        "tx_power_dbm": _axis(0.0, 40.0, 41),
        "diameter_m": _axis(0.2, 1.5, 27),
        "profile": Field(str, "high_performance"),
        "min_capacity_bits": Field(float, 2.0, 0.0, 100.0),
        "max_rmse_m": Field(float, 1e-3, positive=True),
    },
}

# which axes are checked against MODEL_RANGES
AXIS_RANGE_KEYS = {"carrier_hz": "carrier_hz", "range_m": "range_m"}

TOP_LEVEL = ("seed", "scenario", "profiles", "monte_carlo", "output", "experiments")


# ---------------------------------------------------------------------------
# YAML with line numbers
# ---------------------------------------------------------------------------

def _line_map(node, path=(), out=None):
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_map(v, path + (key,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            out[path + (i,)] = v.start_mark.line + 1
            _line_map(v, path + (i,), out)
    return out


class _Ctx:
    def __init__(self, lines: dict, source: str):
        self.lines = lines
        self.source = source
        self.extrapolations: list[str] = []

    def fail(self, path, msg):
        line = None
        p = tuple(path)
        while p and line is None:
            line = self.lines.get(p)
            p = p[:-1]
        where = ".".join(str(x) for x in path) or "<root>"
        loc = f"{self.source}:{line}" if line else self.source
        raise ConfigError(f"{loc}: {where}: {msg}")


def _to_number(val, kind, ctx, path):
    if isinstance(val, bool):
        ctx.fail(path, f"expected a number, got boolean {val}")
    if isinstance(val, str):
        try:
            val = float(val.strip().replace("_", ""))
        except ValueError:
            ctx.fail(path, f"expected a number, got {val!r}")
    if not isinstance(val, (int, float)):
        ctx.fail(path, f"expected a number, got {type(val).__name__}")
    if not math.isfinite(float(val)):
        ctx.fail(path, "value must be finite")
    if kind is int:
        if float(val) != int(val):
            ctx.fail(path, f"expected an integer, got {val}")
        return int(val)
    return float(val)


def _check_field(f: Field, val, ctx, path):
    if val is None:
        if f.nullable:
            return None
        ctx.fail(path, "value may not be null")
    if f.kind in (int, float):
        val = _to_number(val, f.kind, ctx, path)
        if f.positive and val <= 0:
            ctx.fail(path, f"must be positive, got {val}")
        if f.lo is not None and val < f.lo:
            ctx.fail(path, f"must be >= {f.lo}, got {val}")
        if f.hi is not None and val > f.hi:
            ctx.fail(path, f"must be <= {f.hi}, got {val}")
        return val
    if f.kind is bool:
        if not isinstance(val, bool):
            ctx.fail(path, f"expected true/false, got {val!r}")
        return val
    if f.kind is str:
        if not isinstance(val, str):
            ctx.fail(path, f"expected a string, got {val!r}")
        if f.choices and val not in f.choices:
            ctx.fail(path, f"must be one of {', '.join(f.choices)}; got {val!r}")
        return val
    if f.kind is list:
        if not isinstance(val, list):
            ctx.fail(path, f"expected a list, got {type(val).__name__}")
        return val
    if f.kind is dict:
        if not isinstance(val, dict):
            ctx.fail(path, f"expected a mapping, got {type(val).__name__}")
        return val
    raise AssertionError(f.kind)


def _section(schema: dict, raw, ctx, path) -> dict:
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        ctx.fail(path, "expected a mapping")
    unknown = sorted(set(raw) - set(schema), key=str)
    if unknown:
        ctx.fail(tuple(path) + (unknown[0],), f"unknown key (allowed: {', '.join(schema)})")
    out = {}
    for key, spec in schema.items():
        if isinstance(spec, dict):  # sweep axis
            out[key] = _axis_section(spec, raw.get(key), ctx, tuple(path) + (key,), key)
        else:
            out[key] = _check_field(spec, copy.deepcopy(raw.get(key, spec.default)), ctx, tuple(path) + (key,))
    return out


def _axis_section(default: dict, raw, ctx, path, name) -> dict:
    merged = dict(default)
    if raw is not None:
        if not isinstance(raw, dict):
            ctx.fail(path, "sweep axis must be a mapping with start/stop/points")
        unknown = sorted(set(raw) - set(AXIS_SCHEMA))
        if unknown:
            ctx.fail(path + (unknown[0],), f"unknown key (allowed: {', '.join(AXIS_SCHEMA)})")
        merged.update(raw)
    out = {k: _check_field(f, merged.get(k), ctx, path + (k,)) for k, f in AXIS_SCHEMA.items()}
    if out["scale"] == "log" and (out["start"] <= 0 or out["stop"] <= 0):
        ctx.fail(path, "log-scaled axis needs positive start and stop")
    if out["points"] == 1 and out["start"] != out["stop"]:
        ctx.fail(path, "a single-point axis needs start == stop")
    rng_key = AXIS_RANGE_KEYS.get(name)
    if rng_key:
        lo, hi = MODEL_RANGES[rng_key]
        lo_v, hi_v = sorted((out["start"], out["stop"]))
        if lo_v < lo * (1 - 1e-12) or hi_v > hi * (1 + 1e-12):
            msg = f"axis [{lo_v:g}, {hi_v:g}] leaves the supported range [{lo:g}, {hi:g}]"
            if not out["allow_extrapolation"]:
                ctx.fail(path, msg + "; set allow_extrapolation: true to run it anyway")
            ctx.extrapolations.append(".".join(map(str, path)) + ": " + msg)
    return out


def _check_scalar_range(val, key, ctx, path):
    lo, hi = MODEL_RANGES[key]
    if not (lo * (1 - 1e-12) <= val <= hi * (1 + 1e-12)):
        ctx.extrapolations.append(f"{'.'.join(map(str, path))}: {val:g} outside supported range [{lo:g}, {hi:g}]")


# ---------------------------------------------------------------------------
# Resolved configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    seed: int
    scenario: dict
    profiles: dict
    monte_carlo: dict
    output: dict
    experiments: dict
    source: str = "<defaults>"
    extrapolations: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "scenario": self.scenario, "profiles": self.profiles,
                "monte_carlo": self.monte_carlo, "output": self.output, "experiments": self.experiments}

    def config_hash(self) -> str:
        """Hash of the resolved physics/sweep settings (output location excluded)."""
        d = self.to_dict()
        d = {k: v for k, v in d.items() if k != "output"}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def hardware_profiles(self):
        """Profile objects with any overrides applied, in configured order."""
        out = []
        src = self.profiles["gamma_source"]
        for name in self.profiles["names"]:
            out.append(build_profile(name, self.profiles["overrides"].get(name, {}), src))
        return out

    def with_seed(self, seed: int) -> "ExperimentConfig":
        c = copy.deepcopy(self)
        c.seed = int(seed)
        return c


_OVERRIDE_TO_FIELD = {
    "evm_pa": "evm_pa", "jitter_rms_s": "jitter_rms", "enob_bits": "enob", "linewidth_hz": "linewidth",
    "signal_bandwidth_hz": "signal_bandwidth", "system_bandwidth_hz": "system_bandwidth",
    "gamma_eff": "gamma_asserted", "phase_variance_rad2": "phase_variance_override",
    "phase_window_s": "phase_window",
}


def build_profile(name: str, overrides: dict, gamma_source: str = "asserted"):
    kw = {_OVERRIDE_TO_FIELD[k]: v for k, v in overrides.items() if k in _OVERRIDE_TO_FIELD and v is not None}
    src = overrides.get("gamma_source") or gamma_source
    kw["use_component_gamma"] = src == "components"
    return get_profile(name, **kw)


def resolve(raw: dict | None, source: str = "<memory>", lines: dict | None = None) -> ExperimentConfig:
    ctx = _Ctx(lines or {}, source)
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        ctx.fail((), "top level must be a mapping")
    unknown = sorted(set(raw) - set(TOP_LEVEL), key=str)
    if unknown:
        ctx.fail((unknown[0],), f"unknown key (allowed: {', '.join(TOP_LEVEL)})")

    seed = _check_field(Field(int, 0, 0, 2**63 - 1), raw.get("seed", 0), ctx, ("seed",))
    scenario = _section(SCENARIO_SCHEMA, raw.get("scenario"), ctx, ("scenario",))
    for key in ("carrier_hz", "range_m"):
        _check_scalar_range(scenario[key], key, ctx, ("scenario", key))
    if scenario["m_pilots"] > scenario["frame_symbols"]:
        ctx.fail(("scenario", "m_pilots"), "pilot count cannot exceed frame_symbols")

    profiles = _section(PROFILES_SCHEMA, raw.get("profiles"), ctx, ("profiles",))
    names = []
    for i, n in enumerate(profiles["names"]):
        if not isinstance(n, str):
            ctx.fail(("profiles", "names", i), "profile names must be strings")
        try:
            names.append(get_profile(n).name)
        except KeyError as exc:
            ctx.fail(("profiles", "names", i), str(exc.args[0]))
    if not names:
        ctx.fail(("profiles", "names"), "at least one profile is required")
    profiles["names"] = names
    overrides = {}
    for pname, ov in profiles["overrides"].items():
        try:
            key = get_profile(str(pname)).name
        except KeyError as exc:
            ctx.fail(("profiles", "overrides", pname), str(exc.args[0]))
        sec = _section(PROFILE_OVERRIDE_SCHEMA, ov, ctx, ("profiles", "overrides", pname))
        overrides[key] = {k: v for k, v in sec.items() if v is not None}
        try:
            prof = build_profile(key, overrides[key], profiles["gamma_source"])
        except ValueError as exc:
            ctx.fail(("profiles", "overrides", pname), str(exc))
        if prof.linewidth > 0:
            _check_scalar_range(prof.linewidth, "linewidth_hz", ctx, ("profiles", "overrides", pname, "linewidth_hz"))
    profiles["overrides"] = overrides

    monte_carlo = _section(MONTE_CARLO_SCHEMA, raw.get("monte_carlo"), ctx, ("monte_carlo",))
    output = _section(OUTPUT_SCHEMA, raw.get("output"), ctx, ("output",))
    for i, fmt in enumerate(output["formats"]):
        if fmt not in ("csv", "svg"):
            ctx.fail(("output", "formats", i), f"unsupported format {fmt!r} (csv, svg)")

    raw_exp = raw.get("experiments")
    if raw_exp is None:
        raw_exp = {k: None for k in EXPERIMENT_IDS}
    elif isinstance(raw_exp, list):
        for i, k in enumerate(raw_exp):
            if k not in EXPERIMENT_IDS:
                ctx.fail(("experiments", i), f"unknown experiment {k!r} (known: {', '.join(EXPERIMENT_IDS)})")
        raw_exp = {k: None for k in raw_exp}
    elif not isinstance(raw_exp, dict):
        ctx.fail(("experiments",), "expected a mapping of experiment id to options, or a list of ids")
    experiments = {}
    for exp_id, opts in raw_exp.items():
        if exp_id not in EXPERIMENT_IDS:
            ctx.fail(("experiments", exp_id), f"unknown experiment (known: {', '.join(EXPERIMENT_IDS)})")
        experiments[exp_id] = _section(EXPERIMENT_SCHEMAS[exp_id], opts, ctx, ("experiments", exp_id))
    _validate_experiment_lists(experiments, ctx)
    experiments = {k: experiments[k] for k in EXPERIMENT_IDS if k in experiments}

    return ExperimentConfig(seed=seed, scenario=scenario, profiles=profiles, monte_carlo=monte_carlo,
                            output=output, experiments=experiments, source=source,
                            extrapolations=ctx.extrapolations)


def _validate_experiment_lists(experiments, ctx):
    def nums(exp, key, positive=False):
        vals = experiments[exp][key]
        out = [_to_number(v, float, ctx, ("experiments", exp, key, i)) for i, v in enumerate(vals)]
        if not out:
            ctx.fail(("experiments", exp, key), "list may not be empty")
        if positive and any(v <= 0 for v in out):
            ctx.fail(("experiments", exp, key), "values must be positive")
        experiments[exp][key] = out
        return out

    if "distance_sweep" in experiments:
        for i, f in enumerate(nums("distance_sweep", "carriers_hz", True)):
            _check_scalar_range(f, "carrier_hz", ctx, ("experiments", "distance_sweep", "carriers_hz", i))
    if "gamma_sweep" in experiments:
        nums("gamma_sweep", "snr0_db_list")
    if "cd_frontier" in experiments:
        fr = nums("cd_frontier", "target_fractions")
        if any(not (0 <= v <= 1) for v in fr):
            ctx.fail(("experiments", "cd_frontier", "target_fractions"), "fractions must lie in [0, 1]")
        from ..tradeoff import Constellation, TradeoffError
        try:
            Constellation.from_name(experiments["cd_frontier"]["constellation"])
        except (TradeoffError, ValueError) as exc:
            ctx.fail(("experiments", "cd_frontier", "constellation"), str(exc))
    if "feasibility_map" in experiments:
        try:
            experiments["feasibility_map"]["profile"] = get_profile(experiments["feasibility_map"]["profile"]).name
        except KeyError as exc:
            ctx.fail(("experiments", "feasibility_map", "profile"), str(exc.args[0]))
        if experiments["feasibility_map"]["diameter_m"]["start"] <= 0:
            ctx.fail(("experiments", "feasibility_map", "diameter_m"), "diameters must be positive")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return loads_config(text, str(path))


def loads_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f":{mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{source}{line}: YAML parse error: {getattr(exc, 'problem', exc)}") from None
    lines = _line_map(node) if node is not None else {}
    return resolve(raw, source, lines)


def default_config() -> ExperimentConfig:
    return resolve({}, "<defaults>")


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
