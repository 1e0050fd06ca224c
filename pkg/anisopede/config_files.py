"""
Run Configuration Files
=======================
INI files for `simulate`, `eps-sweep` and the lab, validated with the
pydantic models. Every error names `<file>:[section] key`.

Simulation file sections:
    [grid]     nx, ny, nz, h
    [physics]  eps, f0
    [time]     dt, t_end, adaptive, cfl
    [output]   interval, directory, checkpoint_every
    [initial]  builtin = name,key=value,...   or   v1 = path, v2 = path, T = path
    [run]      seed
    [monitor]  enabled, m, qmax, q_values, r_values, r0, delta0, stride

Lab file: a single [lab] section with the LabConfig fields.
"""

import configparser
import io
import logging
from pathlib import Path
from typing import Union

from pydantic import BaseModel, ValidationError

from anisopede.config import settings
from anisopede.models import InitialCondition, LabConfig, MonitorSettings, SimulationConfig, SolverConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# section -> {key in file: SolverConfig field}
SOLVER_KEYS: dict[str, dict[str, str]] = {
    "grid": {"nx": "nx", "ny": "ny", "nz": "nz", "h": "h"},
    "physics": {"eps": "eps", "f0": "f0"},
    "time": {"dt": "dt", "t_end": "t_end", "adaptive": "adaptive", "cfl": "cfl"},
    "output": {"interval": "output_interval", "directory": "directory", "checkpoint_every": "checkpoint_every"},
    "run": {"seed": "seed"},
}
REQUIRED = (("grid", "nx"), ("grid", "ny"), ("grid", "nz"), ("time", "t_end"))
LIST_KEYS = {"q_values", "r_values", "grid", "p"}
SNAPSHOT_KEYS = ("v1", "v2", "T")


class ConfigError(ValueError):
    """Invalid configuration file; the message names file, section and key."""
    pass


def _read(path: PathLike) -> configparser.ConfigParser:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: configuration file not found")
    # keep key case: T must stay distinct from t
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path)
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from e
    return parser


def _value(key: str, raw: str):
    if key in LIST_KEYS:
        return [item.strip() for item in raw.split(",") if item.strip()]
    return raw.strip()


def _validate(model: type[BaseModel], data: dict, locations: dict[str, tuple[str, str]], path: PathLike):
    try:
        return model(**data)
    except ValidationError as e:
        problems = []
        for err in e.errors():
            field = str(err["loc"][0]) if err["loc"] else ""
            section, key = locations.get(field, ("?", field))
            problems.append(f"{path}:[{section}] {key}: {err['msg']}")
        raise ConfigError("; ".join(problems)) from e


def _reject_unknown(parser: configparser.ConfigParser, allowed: dict[str, set[str]], path: PathLike) -> None:
    for section in parser.sections():
        if section not in allowed:
            raise ConfigError(f"{path}:[{section}] unknown section")
        unknown = set(parser[section]) - allowed[section]
        if unknown:
            raise ConfigError(f"{path}:[{section}] {sorted(unknown)[0]}: unknown key")


def parse_simulation_config(path: PathLike) -> SimulationConfig:
    """Parse and validate a simulation file; unknown keys are rejected."""
    parser = _read(path)
    allowed = {section: set(keys) for section, keys in SOLVER_KEYS.items()}
    allowed["initial"] = {"builtin", *SNAPSHOT_KEYS}
    allowed["monitor"] = set(MonitorSettings.model_fields)
    _reject_unknown(parser, allowed, path)

    for section, key in REQUIRED:
        if not parser.has_option(section, key):
            raise ConfigError(f"{path}:[{section}] {key}: missing required key")

    data, locations = {}, {}
    for section, keys in SOLVER_KEYS.items():
        if parser.has_section(section):
            for key, field in keys.items():
                if parser.has_option(section, key):
                    data[field] = _value(key, parser[section][key])
                    locations[field] = (section, key)
    solver = _validate(SolverConfig, data, locations, path)

    monitor_data = {}
    if parser.has_section("monitor"):
        monitor_data = {key: _value(key, raw) for key, raw in parser["monitor"].items()}
    monitor = _validate(MonitorSettings, monitor_data, {k: ("monitor", k) for k in monitor_data}, path)

    initial = InitialCondition()
    if parser.has_section("initial"):
        section = parser["initial"]
        if "builtin" in section and any(k in section for k in SNAPSHOT_KEYS):
            raise ConfigError(f"{path}:[initial] builtin: give either a builtin or snapshot paths, not both")
        if "builtin" in section:
            try:
                initial = InitialCondition.parse(section["builtin"])
            except ValueError as e:
                raise ConfigError(f"{path}:[initial] builtin: {e}") from e
        else:
            base = Path(path).parent
            initial = InitialCondition(name="snapshot", snapshots={k: str(base / section[k]) for k in SNAPSHOT_KEYS if k in section})

    logger.info(f"Loaded configuration {path}")
    return SimulationConfig(solver=solver, initial=initial, monitor=monitor, source=str(path))


def parse_lab_config(path: PathLike) -> LabConfig:
    parser = _read(path)
    _reject_unknown(parser, {"lab": set(LabConfig.model_fields)}, path)
    if not parser.has_section("lab"):
        raise ConfigError(f"{path}:[lab] missing section")
    data = {key: _value(key, raw) for key, raw in parser["lab"].items()}
    return _validate(LabConfig, data, {k: ("lab", k) for k in LabConfig.model_fields}, path)


def parse_config(path: PathLike) -> Union[SimulationConfig, LabConfig]:
    """A lab file (has [lab]) or a simulation file."""
    parser = _read(path)
    if parser.has_section("lab"):
        return parse_lab_config(path)
    return parse_simulation_config(path)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, settings.FLOAT_FORMAT)
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def echo_simulation_config(config: SimulationConfig) -> str:
    """Canonical INI text with every value spelled out, defaults included."""
    out = configparser.ConfigParser(interpolation=None)
    out.optionxform = str
    solver = config.solver
    for section, keys in SOLVER_KEYS.items():
        out[section] = {key: _fmt(getattr(solver, field)) for key, field in keys.items()}
    if config.initial.snapshots:
        out["initial"] = dict(config.initial.snapshots)
    else:
        out["initial"] = {"builtin": config.initial.echo()}
    out["monitor"] = {key: _fmt(value) for key, value in config.monitor.model_dump().items()}
    buffer = io.StringIO()
    out.write(buffer)
    return buffer.getvalue()
