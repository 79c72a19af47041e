"""Dry-run a program on a simulated five-motor machine and score the result.

:func:`execute` quantizes through the same planner the controller uses, with
sub-step carry. :func:`execute_naive` rounds each relative move on its own and
drops the remainder; it exists to show the drift the carry prevents.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .gcode import Comment, Cure, Dwell, GCodeError, Home, MoveTo, OrientMagnet, Program
from .kinematics import (
    HOME,
    MachineConfig,
    Motor,
    TravelLimitError,
    cartesian_to_spherical,
    plan_orientation,
    plan_translation,
    round_half_away,
    spherical_to_cartesian,
    wrap_degrees,
)
from .path_planner import plan
from .voxel_model import Design, Vec3


class ExecutionError(GCodeError):
    pass


class FingerprintMismatchError(ExecutionError):
    def __init__(self, program_fp: str, config_fp: str):
        self.program_fingerprint = program_fp
        self.config_fingerprint = config_fp
        super().__init__(f"config fingerprint mismatch: program was generated for {program_fp}, machine config is {config_fp}")


@dataclass(frozen=True)
class ReconstructedVoxel:
    position: Vec3
    magnetization_direction: Vec3
    cure_ms: int
    azimuth_deg: float = 0.0
    inclination_deg: float = 0.0


def _run(p: Program, cfg: MachineConfig, home, move, turn) -> list[ReconstructedVoxel]:
    if p.fingerprint != cfg.fingerprint():
        raise FingerprintMismatchError(p.fingerprint, cfg.fingerprint())
    state = None
    moved = False
    out = []
    for n, ins in enumerate(p.instructions):
        if isinstance(ins, Home):
            state = home
            continue
        if isinstance(ins, (Comment, Dwell)):
            continue
        if state is None:
            raise ExecutionError(f"instruction {n}: machine not homed")
        try:
            if isinstance(ins, MoveTo):
                state = move(state, Vec3(ins.x, ins.y, ins.z), cfg)
                moved = True
            elif isinstance(ins, OrientMagnet):
                state = turn(state, ins.azimuth_deg, ins.inclination_deg, cfg)
            elif isinstance(ins, Cure):
                if not moved:
                    raise ExecutionError(f"instruction {n}: cure before first MoveTo")
                direction = spherical_to_cartesian(state.azimuth_deg, state.inclination_deg)
                out.append(ReconstructedVoxel(state.position, direction, ins.duration_ms, state.azimuth_deg, state.inclination_deg))
        except TravelLimitError as exc:
            raise ExecutionError(f"instruction {n}: {exc}") from exc
    return out


def execute(p: Program, cfg: MachineConfig) -> list[ReconstructedVoxel]:
    return _run(
        p,
        cfg,
        HOME,
        lambda s, t, c: plan_translation(s, t, c)[1],
        lambda s, a, i, c: plan_orientation(s, a, i, c)[1],
    )


# -- contrast executor: per-move rounding, remainder discarded --------------------


@dataclass(frozen=True)
class _NaiveState:
    position: Vec3 = Vec3(0.0, 0.0, 0.0)
    azimuth_deg: float = 0.0
    inclination_deg: float = 0.0
    # last requested pose; relative moves are measured from here
    requested: tuple[float, float, float, float, float] = (0.0, 0.0, 0.0, 0.0, 0.0)


def _naive_move(s, target: Vec3, cfg: MachineConfig):
    pos = []
    for i, (axis, motor) in enumerate(zip("xyz", (Motor.X, Motor.Y, Motor.Z))):
        lo, hi = cfg.travel_limits[axis]
        value = getattr(target, axis)
        if not lo <= value <= hi:
            raise TravelLimitError(axis, value, (lo, hi))
        step = cfg.step_size(motor)
        n = round_half_away((value - s.requested[i]) / step)
        pos.append(getattr(s.position, axis) + n * step)
    return replace(s, position=Vec3.of(pos), requested=(target.x, target.y, target.z) + s.requested[3:])


def _naive_turn(s, az: float, inc: float, cfg: MachineConfig):
    n_az = round_half_away(wrap_degrees(az - s.requested[3]) / cfg.azimuth.degree_per_step)
    n_inc = round_half_away((inc - s.requested[4]) / cfg.inclination.degree_per_step)
    return replace(
        s,
        azimuth_deg=wrap_degrees(s.azimuth_deg + n_az * cfg.azimuth.degree_per_step),
        inclination_deg=s.inclination_deg + n_inc * cfg.inclination.degree_per_step,
        requested=s.requested[:3] + (az, inc),
    )


def execute_naive(p: Program, cfg: MachineConfig) -> list[ReconstructedVoxel]:
    return _run(p, cfg, _NaiveState(), _naive_move, _naive_turn)


# -- fidelity --------------------------------------------------------------------


@dataclass(frozen=True)
class VoxelError:
    voxel_id: int
    position_error_mm: tuple[float, float, float]
    azimuth_error_deg: float
    inclination_error_deg: float
    angular_error_deg: float  # angle between intended and achieved direction
    passed: bool


@dataclass(frozen=True)
class FidelityReport:
    voxels: tuple[VoxelError, ...]
    passed: bool
    messages: tuple[str, ...] = ()
    max_position_error_mm: float = 0.0
    mean_position_error_mm: float = 0.0
    max_angular_error_deg: float = 0.0
    mean_angular_error_deg: float = 0.0
    failures: tuple[int, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "messages": list(self.messages),
            "failures": list(self.failures),
            "max_position_error_mm": self.max_position_error_mm,
            "mean_position_error_mm": self.mean_position_error_mm,
            "max_angular_error_deg": self.max_angular_error_deg,
            "mean_angular_error_deg": self.mean_angular_error_deg,
            "voxels": [
                {
                    "id": e.voxel_id,
                    "position_error_mm": list(e.position_error_mm),
                    "azimuth_error_deg": e.azimuth_error_deg,
                    "inclination_error_deg": e.inclination_error_deg,
                    "angular_error_deg": e.angular_error_deg,
                    "pass": e.passed,
                }
                for e in self.voxels
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


# float slack on the one-step bound
_EPS = 1e-9


def compare(
    d: Design,
    r: list[ReconstructedVoxel],
    cfg: MachineConfig,
    order: list[int] | None = None,
) -> FidelityReport:
    """Score a reconstruction against the design, voxel by voxel in cure order.

    A voxel passes when every linear axis is within one step and azimuth and
    inclination are each within one gimbal step. Pole voxels ignore azimuth;
    passive voxels ignore orientation.
    """
    if order is None:
        order = plan(d, cfg).order
    if len(order) != len(r):
        msg = f"count mismatch: design has {len(order)} voxels, reconstruction has {len(r)}"
        return FidelityReport((), False, (msg,))

    vox = d.by_id()
    steps = [cfg.step_size(m) for m in (Motor.X, Motor.Y, Motor.Z)]
    az_tol, inc_tol = cfg.azimuth.degree_per_step, cfg.inclination.degree_per_step
    errors = []
    for vid, rec in zip(order, r):
        v = vox[vid]
        pos_err = tuple(abs(a - b) for a, b in zip(rec.position, v.position))
        m = v.magnetization
        if m.passive and m.magnitude == 0.0:
            az_err = inc_err = ang = 0.0
        else:
            az, inc = cartesian_to_spherical(m)
            inc_err = abs(rec.inclination_deg - inc)
            at_pole = inc in (0.0, 180.0)
            az_err = 0.0 if at_pole else abs(wrap_degrees(rec.azimuth_deg - az))
            dot = sum(a * b for a, b in zip(rec.magnetization_direction, m.direction))
            ang = math.degrees(math.acos(max(-1.0, min(1.0, dot))))
        ok = all(e <= s * (1 + _EPS) for e, s in zip(pos_err, steps)) and az_err <= az_tol + _EPS and inc_err <= inc_tol + _EPS
        errors.append(VoxelError(vid, pos_err, az_err, inc_err, ang, ok))

    pos_norms = [math.sqrt(sum(e * e for e in x.position_error_mm)) for x in errors]
    angs = [max(x.azimuth_error_deg, x.inclination_error_deg) for x in errors]
    failures = tuple(x.voxel_id for x in errors if not x.passed)
    msgs = tuple(f"voxel {i} exceeds the one-step tolerance" for i in failures)
    return FidelityReport(
        tuple(errors),
        not failures,
        msgs,
        max(pos_norms, default=0.0),
        sum(pos_norms) / len(pos_norms) if pos_norms else 0.0,
        max(angs, default=0.0),
        sum(angs) / len(angs) if angs else 0.0,
        failures,
    )
