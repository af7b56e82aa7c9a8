"""Scenario configuration and its flat ``key = value`` text format.

Nested config dataclasses are flattened to their leaf field names, which
are unique across the tree. Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

from ..channel import ChannelParams
from ..measurement import MeasurementConfig
from ..selection import N_CAP, N_MIN, PHI_PRIME_MODES
from ..solver import SolverConfig

SELECTION_MODES = ("fixed_n", "alg1", "empirical")


class ConfigError(ValueError):
    pass


def _default_sweep():
    return list(range(N_MIN, N_CAP + 1))


@dataclass(frozen=True)
class ScenarioConfig:
    coverage_radius: float = 120.0
    uav_altitude: float = 20.0
    layers: int = 5
    uav_offset: float | str = "random"
    n_fixed_sweep: list[int] = field(default_factory=_default_sweep)
    n_fixed: int = 10
    delta_los: float = 0.0
    trials: int = 1000
    seed: int = 2025
    selection_mode: str = "alg1"
    n_max: int = N_CAP
    t2_phi_prime: str = "proxy"
    sweep_radii: list[float] = field(default_factory=lambda: [60.0, 90.0, 120.0])
    sweep_altitudes: list[float] = field(default_factory=lambda: [20.0, 30.0])
    los_grid: list[float] = field(default_factory=lambda: [-0.4, -0.3, -0.2, -0.1, 0.0, 0.1])
    include_z: bool = False
    profile_trials: int = 5000
    measurement: MeasurementConfig = field(default_factory=MeasurementConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        bad = [n for n in self.n_fixed_sweep if not N_MIN <= n <= N_CAP]
        if bad:
            raise ConfigError(f"n_fixed_sweep entries {bad} outside [{N_MIN}, {N_CAP}]")
        if self.selection_mode not in SELECTION_MODES:
            raise ConfigError(f"selection_mode must be one of {SELECTION_MODES}")
        if self.t2_phi_prime not in PHI_PRIME_MODES:
            raise ConfigError(f"t2_phi_prime must be one of {PHI_PRIME_MODES}")
        if self.trials < 1 or self.layers < 1:
            raise ConfigError("trials and layers must be >= 1")
        if not N_MIN <= self.n_max <= N_CAP:
            raise ConfigError(f"n_max must lie in [{N_MIN}, {N_CAP}]")
        if isinstance(self.uav_offset, str) and self.uav_offset != "random":
            raise ConfigError("uav_offset must be a number or 'random'")

    def with_updates(self, **kw) -> "ScenarioConfig":
        return replace_flat(self, kw)


_NESTED = {ScenarioConfig, MeasurementConfig, SolverConfig, ChannelParams}


def _leaves(cls, prefix=()):
    hints = typing.get_type_hints(cls)
    for f in dataclasses.fields(cls):
        if hints[f.name] in _NESTED:
            yield from _leaves(hints[f.name], prefix + (f.name,))
        else:
            yield f.name, prefix, hints[f.name]


LEAVES = {name: (path, tp) for name, path, tp in _leaves(ScenarioConfig)}
assert len(LEAVES) == len(list(_leaves(ScenarioConfig))), "config leaf names must be unique"


def _get(obj, path, name):
    for p in path:
        obj = getattr(obj, p)
    return getattr(obj, name)


def flatten(cfg: ScenarioConfig) -> dict:
    return {name: _get(cfg, path, name) for name, (path, _) in LEAVES.items()}


def replace_flat(cfg: ScenarioConfig, updates: dict) -> ScenarioConfig:
    unknown = sorted(set(updates) - set(LEAVES))
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}; valid keys: {', '.join(LEAVES)}")
    updates = dict(updates)
    if "carrier_freq" in updates and "ref_pathloss_1m" not in updates:
        updates["ref_pathloss_1m"] = None  # re-derive from the new carrier
    by_path: dict[tuple, dict] = {}
    for k, v in updates.items():
        by_path.setdefault(LEAVES[k][0], {})[k] = v

    def rebuild(obj, path):
        kw = dict(by_path.get(path, {}))
        for f in dataclasses.fields(obj):
            sub = getattr(obj, f.name)
            if type(sub) in _NESTED and any(p[: len(path) + 1] == path + (f.name,) for p in by_path):
                kw[f.name] = rebuild(sub, path + (f.name,))
        return dataclasses.replace(obj, **kw) if kw else obj

    try:
        return rebuild(cfg, ())
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return ", ".join(_format_value(x) for x in v)
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_value(text: str, tp):
    text = text.strip()
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if tp is bool:
        return _parse_bool(text)
    if tp is int:
        return int(text)
    if tp is float:
        return float(text)
    if tp is str:
        return text
    if origin is list:
        return [_parse_value(x, args[0]) for x in text.split(",") if x.strip()]
    # unions: float | None, float | str
    if text.lower() == "none" and type(None) in args:
        return None
    for a in args:
        if a is type(None):
            continue
        try:
            return _parse_value(text, a)
        except ValueError:
            continue
    raise ValueError(f"cannot parse {text!r}")


def format_config(cfg: ScenarioConfig | None = None) -> str:
    cfg = cfg or ScenarioConfig()
    lines = ["# hexloc scenario configuration", ""]
    section = None
    for name, value in flatten(cfg).items():
        path = LEAVES[name][0]
        if path != section:
            section = path
            lines.append(f"# [{'.'.join(path) or 'scenario'}]")
        lines.append(f"{name} = {_format_value(value)}")
    return "\n".join(lines) + "\n"


def parse_config(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in LEAVES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}; valid keys: {', '.join(LEAVES)}")
        try:
            updates[key] = _parse_value(value, LEAVES[key][1])
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    return replace_flat(base or ScenarioConfig(), updates)


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text())
