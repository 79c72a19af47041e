"""Reference designs: worm, gripper and zipper test structures."""

from __future__ import annotations

import math

from .ingest import GeomRecord, MagRecord
from .voxel_model import Design, merge_datasets

WORM_PITCH_MM = 0.05
GRIPPER_PITCH_MM = 0.025


def worm_records(n: int = 4, pitch: float = WORM_PITCH_MM, direction=(0.0, 0.0, 1.0)):
    mags = [MagRecord(i + 1, *direction) for i in range(n)]
    geoms = [GeomRecord(i + 1, pitch, pitch, pitch, round(i * pitch, 12), 0.0, 0.0) for i in range(n)]
    return mags, geoms


def worm(n: int = 4, pitch: float = WORM_PITCH_MM, direction=(0.0, 0.0, 1.0)) -> Design:
    """Straight line of ``n`` cubes along +x, uniformly magnetized."""
    return merge_datasets(*worm_records(n, pitch, direction), name="worm")


_ARMS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def gripper_records(arm_length: int = 3, pitch: float = GRIPPER_PITCH_MM):
    """Cross-shaped gripper: a hub voxel plus four arms magnetized outward and up."""
    s = 1 / math.sqrt(2)
    mags = [MagRecord(1, 0.0, 0.0, 1.0)]
    geoms = [GeomRecord(1, pitch, pitch, pitch, 0.0, 0.0, 0.0)]
    vid = 2
    for dx, dy in _ARMS:
        for k in range(1, arm_length + 1):
            mags.append(MagRecord(vid, dx * s, dy * s, s))
            geoms.append(GeomRecord(vid, pitch, pitch, pitch, round(dx * k * pitch, 12) + 0.0, round(dy * k * pitch, 12) + 0.0, 0.0))
            vid += 1
    return mags, geoms


def gripper(arm_length: int = 3, pitch: float = GRIPPER_PITCH_MM) -> Design:
    return merge_datasets(*gripper_records(arm_length, pitch), name="gripper")


def gripper_arms(arm_length: int = 3, pitch: float = GRIPPER_PITCH_MM) -> list[tuple[Design, str, str]]:
    """Each arm with the hub as its clamped end: ``(design, axis, clamp)``."""
    full = gripper(arm_length, pitch)
    hub = full.voxels[0]
    out = []
    for a, (dx, dy) in enumerate(_ARMS):
        arm = full.voxels[1 + a * arm_length : 1 + (a + 1) * arm_length]
        axis = "x" if dx else "y"
        clamp = "min" if (dx + dy) > 0 else "max"
        out.append((Design((hub,) + tuple(arm), f"gripper-arm{a + 1}"), axis, clamp))
    return out


def zipper_records(teeth: int = 6, pitch: float = WORM_PITCH_MM, overlap: float = 0.0):
    """Staircase of cubes touching only at corners, or overlapping by ``overlap`` mm per axis.

    Consecutive voxels step +x, +z and alternate in y, so with no overlap each
    pair shares exactly one corner point.
    """
    step = pitch - overlap
    mags, geoms = [], []
    for k in range(teeth):
        sign = 1.0 if k % 2 == 0 else -1.0
        mags.append(MagRecord(k + 1, 0.0, sign, 0.0))
        geoms.append(GeomRecord(k + 1, pitch, pitch, pitch, round(k * step, 12), round((k % 2) * step, 12), round(k * step, 12)))
    return mags, geoms


def zipper(teeth: int = 6, pitch: float = WORM_PITCH_MM, overlap: float = 0.0) -> Design:
    return merge_datasets(*zipper_records(teeth, pitch, overlap), name="zipper" if not overlap else "zipper-overlap")
