"""One TOML document drives every parameter group of an experiment.

Tables: [platform] [arm] [propeller] [contact] [gains] [controller]
[trajectory] [sim], plus the top-level key ``g_frac_plant``. Unknown keys
and wrongly typed values are rejected with the offending field path.
"""

from dataclasses import fields, is_dataclass, replace

import tomli
import tomli_w

from .contact import ContactParams
from .controller import ControllerParams, Gains
from .params import ArmParams, PlatformParams, PropellerParams, RobotParams
from .sim import Experiment, SimConfig
from .trajectory import TrajectoryParams

GROUPS = {
    "platform": PlatformParams,
    "arm": ArmParams,
    "propeller": PropellerParams,
    "contact": ContactParams,
    "gains": Gains,
    "controller": ControllerParams,
    "trajectory": TrajectoryParams,
    "sim": SimConfig,
}
TOP_LEVEL = ("g_frac_plant",)


class ConfigError(ValueError):
    pass


def _coerce(path, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool) and not isinstance(value, float):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(default, (int, float)) or default is None:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"{path}: expected a list of numbers, got {value!r}")
        return tuple(float(v) for v in value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{path}: unsupported value {value!r}")


def _build(name, cls, table):
    if not isinstance(table, dict):
        raise ConfigError(f"{name}: expected a table")
    defaults = cls()
    known = {f.name for f in fields(cls) if not is_dataclass(getattr(defaults, f.name))}
    unknown = sorted(set(table) - known)
    if unknown:
        raise ConfigError(f"{name}: unknown key(s) {', '.join(unknown)}")
    kwargs = {k: _coerce(f"{name}.{k}", v, getattr(defaults, k)) for k, v in table.items()}
    if cls is TrajectoryParams and "apex_height" in kwargs and "hop_length" not in kwargs:
        kwargs["hop_length"] = None
    try:
        return replace(defaults, **kwargs)
    except ValueError as exc:
        msg = str(exc)
        raise ConfigError(msg if msg.startswith(f"{name}.") else f"{name}: {msg}") from exc


def from_dict(doc):
    unknown = sorted(set(doc) - set(GROUPS) - set(TOP_LEVEL))
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {', '.join(unknown)}")
    part = {name: _build(name, cls, doc.get(name, {})) for name, cls in GROUPS.items()}
    try:
        robot = RobotParams(platform=part["platform"], arm=part["arm"], propeller=part["propeller"])
        controller = replace(part["controller"], gains=part["gains"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    g_plant = doc.get("g_frac_plant", 1.0)
    if isinstance(g_plant, bool) or not isinstance(g_plant, (int, float)) or not 0.0 <= g_plant <= 1.0:
        raise ConfigError(f"g_frac_plant: expected a number in [0, 1], got {g_plant!r}")
    return Experiment(robot=robot, contact=part["contact"], controller=controller, trajectory=part["trajectory"],
                      sim=part["sim"], g_frac_plant=float(g_plant))


def loads(text):
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return from_dict(doc)


def load(path):
    """Parse a config file; a missing file raises FileNotFoundError."""
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    return loads(text)


def _table(obj):
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        if v is None or is_dataclass(v):
            continue
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


def to_dict(exp: Experiment):
    """Fully resolved document; ``from_dict(to_dict(exp)) == exp``."""
    doc = {"g_frac_plant": exp.g_frac_plant}
    doc["platform"] = _table(exp.robot.platform)
    doc["arm"] = _table(exp.robot.arm)
    doc["propeller"] = _table(exp.robot.propeller)
    doc["contact"] = _table(exp.contact)
    doc["gains"] = _table(exp.controller.gains)
    doc["controller"] = _table(exp.controller)
    doc["trajectory"] = _table(exp.trajectory)
    doc["sim"] = _table(exp.sim)
    return doc


def dumps(exp: Experiment):
    return tomli_w.dumps(to_dict(exp))
