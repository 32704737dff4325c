"""TOML configuration for simulation runs.

Sections and keys::

    [robot]    radius, mass, lever_arm, gravity, inertia ([ixx, iyy, izz] or 3x3)
    [sim]      dt, t_end, model, t_look, feedforward, bidirectional, carrot,
               control_every, torque ([tau_X, tau_Y, tau_Z], open loop only)
    [gains]    k_theta, k_theta1, k_theta2, k_phi, k_phi1, k_phi2, k_psi, k_e
    [terrain]  kind = plane | flat | ramp | cosine | bump | composite, plus parameters
    [path]     kind = none | line | circle | waypoints, plus parameters
    [initial]  x, y, psi, pose ([alpha, beta, gamma]), rates ([Theta', Phi', Psi'])

Unknown sections or keys raise :class:`ConfigError` naming the dotted key.
Floats are written in shortest round-trip form, so a dumped config reloads
to the identical run.
"""

from __future__ import annotations

import dataclasses
import sys
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as tomli
else:
    import tomli

import tomli_w

from . import terrain as terrain_mod
from .control import ControllerGains
from .dynamics import RobotParams
from .frames import EulerPose
from .inertia import InertiaTensor
from .sim import SimConfig


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted name of the offender."""

    def __init__(self, key: str, message: str):
        super().__init__(message if message.startswith(key) else f"{key}: {message}")
        self.key = key


_SECTIONS = {
    "robot": {"radius", "mass", "lever_arm", "gravity", "inertia"},
    "sim": {"dt", "t_end", "model", "t_look", "feedforward", "bidirectional", "carrot",
            "control_every", "torque"},
    "gains": {f.name for f in dataclasses.fields(ControllerGains)},
    "terrain": None,   # validated by terrain.from_dict
    "path": None,      # validated by sim.build_path
    "initial": {"x", "y", "psi", "pose", "rates"},
}


def _check_keys(data: dict) -> None:
    for section, body in data.items():
        if section not in _SECTIONS:
            raise ConfigError(section, "unknown section")
        if not isinstance(body, dict):
            raise ConfigError(section, "expected a table")
        allowed = _SECTIONS[section]
        if allowed is None:
            continue
        for key in body:
            if key not in allowed:
                raise ConfigError(f"{section}.{key}", "unknown key")


def _floats(key: str, value, n: int) -> tuple[float, ...]:
    try:
        out = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected {n} numbers") from None
    if len(out) != n:
        raise ConfigError(key, f"expected {n} numbers, got {len(out)}")
    return out


def _inertia(value) -> InertiaTensor:
    arr = np.asarray(value, dtype=float)
    if arr.shape == (3,):
        return InertiaTensor.diagonal(*arr)
    return InertiaTensor(arr)


def config_from_dict(data: dict[str, Any]) -> SimConfig:
    """Build a :class:`SimConfig`; missing keys take the library defaults."""
    _check_keys(data)
    robot = dict(data.get("robot", {}))
    sim = dict(data.get("sim", {}))
    initial = dict(data.get("initial", {}))
    kwargs: dict[str, Any] = {}

    def guarded(key, fn, *args):
        try:
            return fn(*args)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, str(exc)) from None

    if "inertia" in robot:
        robot["i_body"] = guarded("robot.inertia", _inertia, robot.pop("inertia"))
    for key in ("radius", "mass", "lever_arm", "gravity"):
        if key in robot:
            robot[key] = guarded(f"robot.{key}", float, robot[key])
    try:
        kwargs["params"] = RobotParams(**robot)
    except ValueError as exc:
        key = str(exc).split(" ")[0] if str(exc).startswith("robot.") else "robot"
        raise ConfigError(key, str(exc)) from None

    gains = data.get("gains", {})
    try:
        kwargs["gains"] = ControllerGains(**{k: float(v) for k, v in gains.items()})
    except (TypeError, ValueError) as exc:
        key = str(exc).split(" ")[0] if str(exc).startswith("gains.") else "gains"
        raise ConfigError(key, str(exc)) from None

    if "terrain" in data:
        try:
            kwargs["terrain"] = terrain_mod.from_dict(data["terrain"])
        except KeyError as exc:
            raise ConfigError(exc.args[0], "unknown terrain key or kind") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError("terrain", str(exc)) from None

    if "path" in data:
        spec = dict(data["path"])
        if spec.get("kind", "none") == "none":
            if len(spec) > 1:
                extra = next(k for k in spec if k != "kind")
                raise ConfigError(f"path.{extra}", "unknown key for path kind 'none'")
            kwargs["path"] = None
        else:
            kwargs["path"] = spec

    simple = {"dt": float, "t_end": float, "t_look": float, "feedforward": str,
              "bidirectional": bool, "carrot": bool, "control_every": int}
    for key, conv in simple.items():
        if key in sim:
            kwargs[key] = guarded(f"sim.{key}", conv, sim[key])
    if "model" in sim:
        kwargs["model_kind"] = str(sim["model"])
    if "torque" in sim:
        kwargs["torque"] = _floats("sim.torque", sim["torque"], 3)

    if "x" in initial or "y" in initial:
        kwargs["initial_xy"] = (guarded("initial.x", float, initial.get("x", 0.0)),
                                guarded("initial.y", float, initial.get("y", 0.0)))
    if "psi" in initial:
        kwargs["initial_psi"] = guarded("initial.psi", float, initial["psi"])
    if "pose" in initial:
        kwargs["initial_pose"] = EulerPose(*_floats("initial.pose", initial["pose"], 3))
    if "rates" in initial:
        kwargs["initial_rates"] = _floats("initial.rates", initial["rates"], 3)

    try:
        config = SimConfig(**kwargs)
    except ValueError as exc:
        msg = str(exc)
        key = msg.split(" ")[0] if msg.split(" ")[0].count(".") == 1 else "sim"
        raise ConfigError(key.rstrip(":"), msg) from None
    if config.path is not None:
        try:
            config.reference()
        except KeyError as exc:
            raise ConfigError(exc.args[0], "unknown path key or kind") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError("path", str(exc)) from None
    return config


def _plain(value):
    """Convert to TOML-friendly builtins (floats stay floats)."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


def _inertia_entry(m: np.ndarray) -> list:
    diag = np.diag(m)
    return diag.tolist() if np.array_equal(m, np.diag(diag)) else m.tolist()


def config_to_dict(config: SimConfig) -> dict[str, Any]:
    if config.torque_schedule is not None:
        raise ConfigError("sim.torque", "a torque schedule function cannot be serialised")
    p = config.params
    data = {
        "robot": {"radius": p.radius, "mass": p.mass, "lever_arm": p.lever_arm,
                  "gravity": p.gravity, "inertia": _inertia_entry(p.i_body.m)},
        "sim": {"dt": config.dt, "t_end": config.t_end, "model": config.model_kind,
                "t_look": config.t_look, "feedforward": config.feedforward,
                "bidirectional": config.bidirectional, "carrot": config.carrot,
                "control_every": config.control_every, "torque": list(config.torque)},
        "gains": dataclasses.asdict(config.gains),
        "terrain": config.terrain.to_dict(),
        "path": {"kind": "none"} if config.path is None else dict(config.path),
        "initial": {"x": config.initial_xy[0], "y": config.initial_xy[1],
                    "psi": config.initial_psi, "pose": list(config.initial_pose.as_tuple()),
                    "rates": list(config.initial_rates)},
    }
    if config.terrain.bounds is not None:
        data["terrain"]["bounds"] = list(config.terrain.bounds)
    return _plain(data)


def dumps(config: SimConfig) -> str:
    return tomli_w.dumps(config_to_dict(config))


def loads(text: str) -> SimConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"invalid TOML: {exc}") from None
    return config_from_dict(data)


def load(path: str) -> SimConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    return loads(text)


def apply_override(data: dict, assignment: str) -> None:
    """Apply ``section.key=value`` (value parsed as a TOML literal) in place."""
    if "=" not in assignment:
        raise ConfigError(assignment, "override must look like section.key=value")
    dotted, raw = assignment.split("=", 1)
    dotted = dotted.strip()
    if dotted.count(".") != 1:
        raise ConfigError(dotted, "override key must be section.key")
    section, key = dotted.split(".")
    try:
        value = tomli.loads(f"v = {raw.strip()}")["v"]
    except tomli.TOMLDecodeError:
        value = raw.strip()
    data.setdefault(section, {})[key] = value
