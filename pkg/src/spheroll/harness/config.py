"""Scenario configuration: JSON with a versioned ``schema`` field.

Serialization is canonical (sorted keys, two-space indent, trailing newline)
so a config read back and written again is byte-identical. Unknown keys are
reported with a warning and dropped; missing required keys raise
:class:`SchemaError` naming the field and, where possible, the line.
"""

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass

from spheroll.controller import Gains, Limits
from spheroll.dynamics import RobotParams
from spheroll.errors import SchemaError, SpherollError
from spheroll.harness.closed_loop import LoopSettings

SCHEMA_VERSION = 1
KINDS = ("open-loop-sweep", "circle", "waypoints")


@dataclass(frozen=True)
class IntegratorSettings:
    dt: float = 1e-3
    stride: float = 0.01


@dataclass(frozen=True)
class OpenLoopSettings:
    omega0: tuple = (0.5 * math.pi, math.pi, 1.5 * math.pi, 2.0 * math.pi)
    beta: float = 0.5
    settle_time: float = 120.0
    fit_window: float = 30.0


@dataclass(frozen=True)
class CircleSettings:
    start: tuple = (0.0, 0.0)
    center: tuple = (1.0, 0.0)
    radii: tuple = (0.20, 0.35, 0.50, 0.65)
    duration: float = 200.0
    fit_window: float = 30.0


@dataclass(frozen=True)
class WaypointSettings:
    start: tuple = (0.0, -1.0)
    # N shape on a 1 m square: up the left side, diagonal down, up the right side
    points: tuple = (
        {"x": 0.0, "y": 0.0, "speed": "stop"},
        {"x": 0.0, "y": 1.0, "speed": "stop"},
        {"x": 1.0, "y": 0.0, "speed": "stop"},
        {"x": 1.0, "y": 1.0, "speed": "stop"},
    )
    stop_radius: float = 0.20
    timeout: float = 300.0
    pass_duration: float = 60.0


@dataclass(frozen=True)
class ControllerSettings:
    gains: Gains = Gains()
    limits: Limits = Limits()
    loop: LoopSettings = LoopSettings()


@dataclass(frozen=True)
class Disturbance:
    enabled: bool = False
    slope_force: tuple = (0.0, 0.0, 0.0)
    pose_noise: float = 0.0


@dataclass(frozen=True)
class Tolerances:
    open_loop_R0_rel: float = 0.02
    open_loop_Omega_rel: float = 0.02
    open_loop_xi_deg: float = 0.5
    static_xi_deg: float = 0.5
    circle_radius_rel: float = 0.10
    circle_center_abs: float = 0.10
    approach_speed_min: float = 0.004
    approach_speed_max: float = 0.10
    stop_abs: float = 0.07


@dataclass(frozen=True)
class OutputSettings:
    dir: str = "out"
    plots: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    schema: int = SCHEMA_VERSION
    robot: RobotParams = RobotParams()
    integrator: IntegratorSettings = IntegratorSettings()
    open_loop: OpenLoopSettings = OpenLoopSettings()
    circle: CircleSettings = CircleSettings()
    waypoints: WaypointSettings = WaypointSettings()
    controller: ControllerSettings = ControllerSettings()
    disturbance: Disturbance = Disturbance()
    tolerances: Tolerances = Tolerances()
    output: OutputSettings = OutputSettings()
    seed: int = 0
    workers: int = 1
    strict_contact: bool = False

    def to_dict(self):
        return _to_plain(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def loop_settings(self):
        """Controller loop settings with the integrator and disturbance applied."""
        d = self.disturbance
        return dataclasses.replace(
            self.controller.loop,
            dt=self.integrator.dt,
            pose_noise=d.pose_noise if d.enabled else 0.0,
            slope_force=tuple(d.slope_force) if d.enabled else (0.0, 0.0, 0.0),
        )


# which keys must be present, per section; everything else has a default
_REQUIRED = {"": ("schema", "kind")}


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.init}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, float) and not math.isfinite(obj):
        raise SchemaError(f"non-finite value {obj} cannot be serialized")
    return obj


def _line_of(text, key):
    if text is None:
        return None
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def _coerce(value, default, path, text):
    """Convert a JSON value to the type of ``default``."""
    key = path.rsplit(".", 1)[-1]
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise SchemaError(f"{path}: expected true/false, got {value!r}", field=path, line=_line_of(text, key))
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(f"{path}: expected an integer, got {value!r}", field=path, line=_line_of(text, key))
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"{path}: expected a number, got {value!r}", field=path, line=_line_of(text, key))
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise SchemaError(f"{path}: expected a string, got {value!r}", field=path, line=_line_of(text, key))
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise SchemaError(f"{path}: expected a list, got {value!r}", field=path, line=_line_of(text, key))
        if default and isinstance(default[0], dict):
            return tuple(dict(v) for v in value)
        if default and isinstance(default[0], float):
            return tuple(_coerce(v, 0.0, path, text) for v in value)
        return tuple(value)
    return value


def _build(cls, data, path, text):
    if not isinstance(data, dict):
        raise SchemaError(f"{path or 'config'}: expected an object", field=path or None, line=_line_of(text, path.rsplit(".", 1)[-1]) if path else 1)
    for key in _REQUIRED.get(path, ()):
        if key not in data:
            raise SchemaError(f"missing required field '{key}'", field=key, line=None)
    fields = {f.name: f for f in dataclasses.fields(cls) if f.init}
    for key in data:
        if key not in fields:
            where = f"{path}.{key}" if path else key
            warnings.warn(f"unknown config field '{where}' ignored", stacklevel=3)
    defaults = cls(kind=KINDS[0]) if cls is ScenarioConfig else cls()
    kwargs = {}
    for name in fields:
        if name not in data:
            continue
        where = f"{path}.{name}" if path else name
        default = getattr(defaults, name)
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), data[name], where, text)
        else:
            kwargs[name] = _coerce(data[name], default, where, text)
    try:
        return cls(**kwargs)
    except SchemaError:
        raise
    except (TypeError, ValueError, SpherollError) as exc:
        raise SchemaError(f"{path or 'config'}: {exc}", field=path or None, line=_line_of(text, path.rsplit('.', 1)[-1]) if path else None) from exc


def from_dict(data, text=None):
    cfg = _build(ScenarioConfig, data, "", text)
    if cfg.schema != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema version {cfg.schema} (expected {SCHEMA_VERSION})", field="schema", line=_line_of(text, "schema")
        )
    if cfg.kind not in KINDS:
        raise SchemaError(f"kind must be one of {KINDS}, got {cfg.kind!r}", field="kind", line=_line_of(text, "kind"))
    return validate(cfg, text)


def validate(cfg, text=None):
    """Physical and structural checks that need more than the field types."""
    from spheroll.errors import InvalidParamsError, InvalidStateError

    try:
        cfg.robot.validate()
    except InvalidParamsError as exc:
        raise SchemaError(f"robot: {exc}", field="robot", line=_line_of(text, "robot")) from exc
    if not 0.0 < cfg.integrator.dt <= 0.01:
        raise SchemaError("integrator.dt must be in (0, 0.01]", field="integrator.dt", line=_line_of(text, "dt"))
    if cfg.integrator.stride < cfg.integrator.dt:
        raise SchemaError("integrator.stride must be at least dt", field="integrator.stride", line=_line_of(text, "stride"))
    if cfg.workers < 1:
        raise SchemaError("workers must be at least 1", field="workers", line=_line_of(text, "workers"))
    for i, pt in enumerate(cfg.waypoints.points):
        for key in ("x", "y", "speed"):
            if key not in pt:
                raise SchemaError(f"missing required field 'waypoints.points[{i}].{key}'", field=f"waypoints.points[{i}].{key}", line=_line_of(text, "points"))
        speed = pt["speed"]
        if not (speed == "stop" or (isinstance(speed, (int, float)) and not isinstance(speed, bool) and speed > 0)):
            raise SchemaError(
                f"waypoints.points[{i}].speed must be a positive number or \"stop\"", field=f"waypoints.points[{i}].speed", line=_line_of(text, "speed")
            )
    if cfg.kind == "waypoints" and len(cfg.waypoints.points) < 1:
        raise SchemaError("waypoints.points needs at least one waypoint", field="waypoints.points")
    try:
        Limits(**dataclasses.asdict(cfg.controller.limits))
    except InvalidStateError as exc:
        raise SchemaError(f"controller.limits: {exc}", field="controller.limits") from exc
    return cfg


def loads(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}", field=None, line=exc.lineno) from exc
    return from_dict(data, text)


def load(path):
    with open(path) as fh:
        return loads(fh.read())


def default_config(kind):
    if kind not in KINDS:
        raise SchemaError(f"kind must be one of {KINDS}, got {kind!r}", field="kind")
    return ScenarioConfig(kind=kind)
