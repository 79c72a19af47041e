"""Stepper kinematics for the three linear stages and the two-axis magnet gimbal.

Distances become revolutions (``motor_position / distance_per_rev``), then
steps (``steps_per_rev * revs``); gimbal angles become steps via
``angle / degree_per_step``. Sub-step remainders are carried between moves so
quantization error never accumulates.
"""

from __future__ import annotations

import hashlib
import math
import sys
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from .voxel_model import Magnetization, Vec3

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


class TravelLimitError(ValueError):
    def __init__(self, axis: str, value: float, limits: tuple[float, float], voxel_id: int | None = None):
        self.axis = axis
        self.value = value
        self.limits = limits
        self.voxel_id = voxel_id
        who = f"voxel {voxel_id}: " if voxel_id is not None else ""
        super().__init__(f"{who}{axis}={value:g} outside travel limits [{limits[0]:g}, {limits[1]:g}]")


class DegenerateMagnetizationError(ValueError):
    pass


class Motor(str, Enum):
    X = "X"
    Y = "Y"
    Z = "Z"
    AZ = "AZ"
    INC = "INC"


LINEAR_MOTORS = (Motor.X, Motor.Y, Motor.Z)


@dataclass(frozen=True)
class MotorSpec:
    steps_per_rev: int = 200
    distance_per_rev: float | None = None  # mm, linear stages
    degree_per_step: float | None = None  # deg, rotary stages

    def __post_init__(self):
        if int(self.steps_per_rev) != self.steps_per_rev or self.steps_per_rev <= 0:
            raise ConfigError(f"steps_per_rev must be a positive integer, got {self.steps_per_rev}")
        if self.distance_per_rev is not None and not self.distance_per_rev > 0:
            raise ConfigError(f"distance_per_rev must be > 0, got {self.distance_per_rev}")
        if self.degree_per_step is not None and not self.degree_per_step > 0:
            raise ConfigError(f"degree_per_step must be > 0, got {self.degree_per_step}")

    @property
    def step_size(self) -> float:
        """mm per step for linear stages, degrees per step for rotary ones."""
        if self.distance_per_rev is not None:
            return self.distance_per_rev / self.steps_per_rev
        if self.degree_per_step is not None:
            return self.degree_per_step
        raise ConfigError("motor has neither distance_per_rev nor degree_per_step")


def _linear() -> MotorSpec:
    return MotorSpec(200, distance_per_rev=8.0)


def _rotary() -> MotorSpec:
    return MotorSpec(200, degree_per_step=1.8)


def _default_limits() -> dict[str, tuple[float, float]]:
    return {"x": (-50.0, 50.0), "y": (-50.0, 50.0), "z": (-50.0, 50.0)}


@dataclass(frozen=True)
class MachineConfig:
    x: MotorSpec = field(default_factory=_linear)
    y: MotorSpec = field(default_factory=_linear)
    z: MotorSpec = field(default_factory=_linear)
    azimuth: MotorSpec = field(default_factory=_rotary)
    inclination: MotorSpec = field(default_factory=_rotary)
    travel_limits: dict[str, tuple[float, float]] = field(default_factory=_default_limits)
    cure_duration_ms: int = 1000
    voxel_pitch_um: float = 50.0
    z_tol_mm: float = 1e-6

    def __post_init__(self):
        for m in (self.x, self.y, self.z):
            if m.distance_per_rev is None:
                raise ConfigError("linear motors need distance_per_rev")
        for m in (self.azimuth, self.inclination):
            if m.degree_per_step is None:
                raise ConfigError("rotary motors need degree_per_step")
        if set(self.travel_limits) != {"x", "y", "z"}:
            raise ConfigError("travel limits must cover exactly x, y, z")
        for axis, (lo, hi) in self.travel_limits.items():
            if not lo < hi:
                raise ConfigError(f"travel.{axis}: min must be < max")
        if int(self.cure_duration_ms) != self.cure_duration_ms or self.cure_duration_ms <= 0:
            raise ConfigError("cure_duration_ms must be a positive integer")
        if not self.voxel_pitch_um > 0 or not self.z_tol_mm >= 0:
            raise ConfigError("voxel_pitch_um must be > 0 and z_tol_mm >= 0")

    def motor(self, m: Motor) -> MotorSpec:
        return {
            Motor.X: self.x,
            Motor.Y: self.y,
            Motor.Z: self.z,
            Motor.AZ: self.azimuth,
            Motor.INC: self.inclination,
        }[m]

    def step_size(self, m: Motor) -> float:
        return self.motor(m).step_size

    def to_keys(self) -> dict[str, object]:
        """Flat config-file keys, sorted."""
        keys: dict[str, object] = {}
        for name, spec in (("x", self.x), ("y", self.y), ("z", self.z), ("az", self.azimuth), ("inc", self.inclination)):
            keys[f"steps_per_rev.{name}"] = spec.steps_per_rev
            if name in ("x", "y", "z"):
                keys[f"distance_per_rev.{name}"] = float(spec.distance_per_rev)
            else:
                keys[f"degree_per_step.{name}"] = float(spec.degree_per_step)
        for axis, (lo, hi) in self.travel_limits.items():
            keys[f"travel.{axis}.min"] = float(lo)
            keys[f"travel.{axis}.max"] = float(hi)
        keys["cure_duration_ms"] = int(self.cure_duration_ms)
        keys["voxel_pitch_um"] = float(self.voxel_pitch_um)
        keys["z_tol_mm"] = float(self.z_tol_mm)
        return dict(sorted(keys.items()))

    def fingerprint(self) -> str:
        canon = "\n".join(f"{k}={v!r}" for k, v in self.to_keys().items())
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]

    @classmethod
    def from_mapping(cls, data: dict) -> "MachineConfig":
        """Build from a parsed TOML document (nested tables or dotted keys)."""
        data = dict(data)
        known = {"steps_per_rev", "distance_per_rev", "degree_per_step", "travel", "cure_duration_ms", "voxel_pitch_um", "z_tol_mm"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        spr = data.get("steps_per_rev", {})
        dpr = data.get("distance_per_rev", {})
        dps = data.get("degree_per_step", {})
        travel = data.get("travel", {})
        base = cls()
        for table, allowed in ((spr, {"x", "y", "z", "az", "inc"}), (dpr, {"x", "y", "z"}), (dps, {"az", "inc"})):
            if not isinstance(table, dict) or set(table) - allowed:
                raise ConfigError(f"unknown motor key(s) in config: {sorted(set(table) - allowed) if isinstance(table, dict) else table}")
        try:
            linear = {
                a: MotorSpec(spr.get(a, 200), distance_per_rev=dpr.get(a, 8.0))
                for a in "xyz"
            }
            rotary = {
                a: MotorSpec(spr.get(a, 200), degree_per_step=dps.get(a, 1.8)) for a in ("az", "inc")
            }
            limits = _default_limits()
            for axis, lim in travel.items():
                if axis not in limits:
                    raise ConfigError(f"unknown travel axis {axis!r}")
                if set(lim) - {"min", "max"}:
                    raise ConfigError(f"travel.{axis}: only min and max are allowed")
                limits[axis] = (float(lim.get("min", limits[axis][0])), float(lim.get("max", limits[axis][1])))
            return cls(
                x=linear["x"],
                y=linear["y"],
                z=linear["z"],
                azimuth=rotary["az"],
                inclination=rotary["inc"],
                travel_limits=limits,
                cure_duration_ms=data.get("cure_duration_ms", base.cure_duration_ms),
                voxel_pitch_um=float(data.get("voxel_pitch_um", base.voxel_pitch_um)),
                z_tol_mm=float(data.get("z_tol_mm", base.z_tol_mm)),
            )
        except (AttributeError, TypeError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "MachineConfig":
        try:
            with open(path, "rb") as fh:
                return cls.from_mapping(tomllib.load(fh))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    def dumps(self) -> str:
        return "".join(f"{k} = {v!r}\n" for k, v in self.to_keys().items())


# -- the three conversions -----------------------------------------------------


def required_trans_revs(motor_position: float, distance_per_rev: float) -> float:
    if not distance_per_rev > 0:
        raise ConfigError(f"distance_per_rev must be > 0, got {distance_per_rev}")
    return motor_position / distance_per_rev


def required_trans_steps(revs: float, steps_per_rev: int) -> float:
    if steps_per_rev <= 0:
        raise ConfigError(f"steps_per_rev must be > 0, got {steps_per_rev}")
    return steps_per_rev * revs


def required_revo_steps(motor_angle: float, degree_per_step: float) -> float:
    if not degree_per_step > 0:
        raise ConfigError(f"degree_per_step must be > 0, got {degree_per_step}")
    return motor_angle / degree_per_step


# -- angles --------------------------------------------------------------------


def wrap_degrees(angle: float) -> float:
    """Wrap into (-180, 180]."""
    a = math.fmod(angle, 360.0)
    if a <= -180.0:
        a += 360.0
    elif a > 180.0:
        a -= 360.0
    return a


def cartesian_to_spherical(m: Magnetization | Vec3) -> tuple[float, float]:
    """Return ``(azimuth_deg, inclination_deg)`` of a unit direction.

    Inclination is measured from +z. At the poles the azimuth is 0 by convention.
    """
    d = m.direction if isinstance(m, Magnetization) else m
    n = d.norm()
    if n == 0.0:
        raise DegenerateMagnetizationError("cannot orient the magnet along a zero vector")
    x, y, z = d.x / n, d.y / n, d.z / n
    inclination = math.degrees(math.acos(max(-1.0, min(1.0, z))))
    if x == 0.0 and y == 0.0:
        return 0.0, inclination
    azimuth = wrap_degrees(math.degrees(math.atan2(y, x)))
    return azimuth + 0.0, inclination


_QUARTER_TURNS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))


def _cos_sin_deg(a: float) -> tuple[float, float]:
    """cos and sin of degrees, exact on multiples of 90 so poles and axes come out clean."""
    q, r = divmod(a, 90.0)
    if r == 0.0:
        return _QUARTER_TURNS[int(q) % 4]
    t = math.radians(a)
    return math.cos(t), math.sin(t)


def spherical_to_cartesian(azimuth_deg: float, inclination_deg: float) -> Vec3:
    ca, sa = _cos_sin_deg(azimuth_deg)
    ci, si = _cos_sin_deg(inclination_deg)
    return Vec3(si * ca + 0.0, si * sa + 0.0, ci + 0.0)


# -- machine state and move planning ---------------------------------------------


@dataclass(frozen=True)
class StepCommand:
    motor: Motor
    steps: int


@dataclass(frozen=True)
class MachineState:
    """Achieved pose plus the sub-step remainder per motor (in steps)."""

    position: Vec3 = Vec3(0.0, 0.0, 0.0)
    azimuth_deg: float = 0.0
    inclination_deg: float = 0.0
    residuals: tuple[float, float, float, float, float] = (0.0, 0.0, 0.0, 0.0, 0.0)

    def residual(self, m: Motor) -> float:
        return self.residuals[list(Motor).index(m)]


HOME = MachineState()


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def _quantize(real_steps: float) -> tuple[int, float]:
    n = round_half_away(real_steps)
    return n, real_steps - n


def _check_limits(target: Vec3, cfg: MachineConfig) -> None:
    for axis, value in zip("xyz", target):
        lo, hi = cfg.travel_limits[axis]
        if not lo <= value <= hi:
            raise TravelLimitError(axis, value, (lo, hi))


def plan_translation(state: MachineState, target: Vec3, cfg: MachineConfig) -> tuple[list[StepCommand], MachineState]:
    _check_limits(target, cfg)
    cmds = []
    residuals = list(state.residuals)
    new_pos = []
    for i, (motor, cur, tgt) in enumerate(zip(LINEAR_MOTORS, state.position, target)):
        spec = cfg.motor(motor)
        step = spec.step_size
        # delta from the commanded pose (achieved + carried remainder)
        delta = tgt - (cur + residuals[i] * step)
        real = required_trans_steps(required_trans_revs(delta, spec.distance_per_rev), spec.steps_per_rev)
        n, residuals[i] = _quantize(real + residuals[i])
        if n:
            cmds.append(StepCommand(motor, n))
        new_pos.append(cur + n * step)
    return cmds, replace(state, position=Vec3.of(new_pos), residuals=tuple(residuals))


def plan_orientation(
    state: MachineState, azimuth_deg: float, inclination_deg: float, cfg: MachineConfig
) -> tuple[list[StepCommand], MachineState]:
    if not 0.0 <= inclination_deg <= 180.0:
        raise TravelLimitError("inclination", inclination_deg, (0.0, 180.0))
    residuals = list(state.residuals)
    cmds = []

    az_step = cfg.azimuth.degree_per_step
    commanded_az = state.azimuth_deg + residuals[3] * az_step
    az_delta = wrap_degrees(azimuth_deg - commanded_az)
    n_az, residuals[3] = _quantize(required_revo_steps(az_delta, az_step) + residuals[3])

    inc_step = cfg.inclination.degree_per_step
    commanded_inc = state.inclination_deg + residuals[4] * inc_step
    inc_delta = inclination_deg - commanded_inc
    n_inc, residuals[4] = _quantize(required_revo_steps(inc_delta, inc_step) + residuals[4])

    if n_az:
        cmds.append(StepCommand(Motor.AZ, n_az))
    if n_inc:
        cmds.append(StepCommand(Motor.INC, n_inc))
    new_state = replace(
        state,
        azimuth_deg=wrap_degrees(state.azimuth_deg + n_az * az_step),
        inclination_deg=state.inclination_deg + n_inc * inc_step,
        residuals=tuple(residuals),
    )
    return cmds, new_state


def plan_move(
    state: MachineState, target_pos: Vec3, target_m: Magnetization, cfg: MachineConfig
) -> tuple[list[StepCommand], MachineState]:
    """Steps to translate to ``target_pos`` and orient the magnet along ``target_m``.

    The returned state is the pose actually reached after integer stepping.
    """
    az, inc = cartesian_to_spherical(target_m)
    move, state = plan_translation(state, target_pos, cfg)
    turn, state = plan_orientation(state, az, inc, cfg)
    return move + turn, state
