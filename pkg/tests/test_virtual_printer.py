import json
from dataclasses import replace

import numpy as np
import pytest

from magvox import fixtures
from magvox.gcode import Cure, Home, MoveTo, OrientMagnet, Program, emit
from magvox.ingest import GeomRecord, MagRecord
from magvox.kinematics import MachineConfig, Motor, MotorSpec
from magvox.path_planner import plan
from magvox.virtual_printer import ExecutionError, FingerprintMismatchError, compare, execute, execute_naive
from magvox.voxel_model import Vec3, merge_datasets

from .conftest import random_design


def one_voxel(x, y=0.0, z=0.0, m=(0, 0, 1)):
    return merge_datasets([MagRecord(1, *m)], [GeomRecord(1, 0.05, 0.05, 0.05, x, y, z)])


def test_home_only(cfg):
    assert execute(Program(cfg.fingerprint(), (Home(),)), cfg) == []


def test_fingerprint_mismatch(cfg):
    other = MachineConfig(cure_duration_ms=5)
    with pytest.raises(FingerprintMismatchError):
        execute(Program(other.fingerprint(), (Home(),)), cfg)


def test_aligned_target_exact(cfg):
    d = one_voxel(4.0, -2.0, 0.08)
    r = execute(emit(plan(d, cfg), d, cfg), cfg)
    assert r[0].position == Vec3(4.0, -2.0, 0.08)


def test_half_step_offset_within_half_step(cfg):
    step = cfg.step_size(Motor.X)
    d = one_voxel(10 * step + step / 2 + 1e-4)
    r = execute(emit(plan(d, cfg), d, cfg), cfg)
    assert abs(r[0].position.x - d.voxels[0].position.x) <= step / 2


def test_cure_before_move_rejected(cfg):
    prog = Program(cfg.fingerprint(), (Home(), OrientMagnet(0, 0), Cure(10)))
    with pytest.raises(ExecutionError):
        execute(prog, cfg)


def test_travel_violation_mid_program(cfg):
    prog = Program(cfg.fingerprint(), (Home(), MoveTo(0, 0, 0), MoveTo(0, 80, 0)))
    with pytest.raises(ExecutionError, match="y="):
        execute(prog, cfg)


def test_round_trip_random_designs(cfg):
    rng = np.random.default_rng(20)
    for _ in range(25):
        d = random_design(rng, 20)
        prog = emit(plan(d, cfg), d, cfg)
        r = execute(prog, cfg)
        assert len(r) == prog.cure_count
        rep = compare(d, r, cfg)
        assert rep.passed, rep.messages


def test_deterministic(cfg):
    d = random_design(np.random.default_rng(1), 15)
    prog = emit(plan(d, cfg), d, cfg)
    assert execute(prog, cfg) == execute(prog, cfg)


def test_corrupted_move_names_voxel(cfg):
    d = fixtures.gripper()
    path = plan(d, cfg)
    prog = emit(path, d, cfg)
    ins = list(prog.instructions)
    moves = [i for i, x in enumerate(ins) if isinstance(x, MoveTo)]
    k = 5
    step = cfg.step_size(Motor.Y)
    ins[moves[k]] = replace(ins[moves[k]], y=ins[moves[k]].y + 2 * step)
    rep = compare(d, execute(replace(prog, instructions=tuple(ins)), cfg), cfg)
    assert not rep.passed
    assert rep.failures == (path.order[k],)
    assert str(path.order[k]) in rep.messages[0]


def test_worm_angles_exact(cfg):
    d = fixtures.worm()
    rep = compare(d, execute(emit(plan(d, cfg), d, cfg), cfg), cfg)
    assert rep.passed
    assert rep.max_angular_error_deg == 0.0


def test_axis_aligned_angles_step_exact(cfg):
    d = fixtures.zipper()
    rep = compare(d, execute(emit(plan(d, cfg), d, cfg), cfg), cfg)
    assert rep.passed and rep.max_angular_error_deg == 0.0


def test_count_mismatch_reported(cfg):
    d = fixtures.worm()
    r = execute(emit(plan(d, cfg), d, cfg), cfg)
    rep = compare(d, r[:-1], cfg)
    assert not rep.passed
    assert "count mismatch" in rep.messages[0]


def test_report_json(cfg):
    d = fixtures.worm()
    rep = compare(d, execute(emit(plan(d, cfg), d, cfg), cfg), cfg)
    data = json.loads(rep.to_json())
    assert data["pass"] is True
    assert [v["id"] for v in data["voxels"]] == [1, 2, 3, 4]


def test_naive_executor_drifts():
    # a long row at a pitch that is 0.6 of a step: per-move rounding loses 0.4 step each time
    cfg = MachineConfig()
    step = cfg.step_size(Motor.X)
    n = 60
    mags = [MagRecord(i + 1, 0, 0, 1) for i in range(n)]
    geoms = [GeomRecord(i + 1, 0.024, 0.05, 0.05, round(i * 0.6 * step, 9), 0.0, 0.0) for i in range(n)]
    d = merge_datasets(mags, geoms)
    prog = emit(plan(d, cfg), d, cfg)
    carried = compare(d, execute(prog, cfg), cfg)
    naive = compare(d, execute_naive(prog, cfg), cfg)
    assert carried.passed
    assert not naive.passed
    assert naive.max_position_error_mm > 10 * step


def test_gimbal_residual_with_fine_steps():
    cfg = MachineConfig(azimuth=MotorSpec(200, degree_per_step=0.7), inclination=MotorSpec(200, degree_per_step=0.7))
    d = random_design(np.random.default_rng(4), 20)
    rep = compare(d, execute(emit(plan(d, cfg), d, cfg), cfg), cfg)
    assert rep.passed
    assert rep.max_angular_error_deg <= 0.35 + 1e-6
