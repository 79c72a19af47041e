"""Cure ordering: top layer first, then nearest-to-origin within each layer."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .kinematics import MachineConfig
from .voxel_model import Design, DesignError, ValidationError, Voxel, validate_design

ORDERS = ("paper", "nn")


@dataclass(frozen=True)
class Layer:
    z: float
    voxel_ids: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "voxel_ids", tuple(self.voxel_ids))


@dataclass(frozen=True)
class ToolPath:
    layers: tuple[Layer, ...]
    total_xy_travel: float

    @property
    def order(self) -> list[int]:
        return [vid for layer in self.layers for vid in layer.voxel_ids]

    def to_dict(self) -> dict:
        return {
            "voxel_count": len(self.order),
            "layer_count": len(self.layers),
            "order": self.order,
            "layers": [{"z_mm": layer.z, "voxel_ids": list(layer.voxel_ids)} for layer in self.layers],
            "total_xy_travel_mm": self.total_xy_travel,
        }


def group_layers(d: Design, z_tol: float = 1e-6) -> list[Layer]:
    """Cluster voxels by z, highest layer first.

    A layer is anchored at its highest voxel; a voxel joins while it is within
    ``z_tol`` of that anchor, so every member stays within tolerance of the
    layer's z. Members are listed by ascending id.
    """
    if z_tol < 0:
        raise ValueError("z_tol must be >= 0")
    layers: list[Layer] = []
    anchor = None
    members: list[Voxel] = []
    for v in sorted(d.voxels, key=lambda v: (-v.position.z, v.id)):
        if anchor is not None and anchor - v.position.z <= z_tol:
            members.append(v)
            continue
        if members:
            layers.append(Layer(anchor, tuple(sorted(m.id for m in members))))
        anchor, members = v.position.z, [v]
    if members:
        layers.append(Layer(anchor, tuple(sorted(m.id for m in members))))
    return layers


def _hyp_key(v: Voxel) -> tuple[float, float, float, int]:
    return (math.hypot(v.position.x, v.position.y), v.position.y, v.position.x, v.id)


def order_within_layer(layer: Layer, d: Design) -> Layer:
    if not layer.voxel_ids:
        raise ValueError("cannot order an empty layer")
    vox = d.by_id()
    ordered = sorted((vox[i] for i in layer.voxel_ids), key=_hyp_key)
    return Layer(layer.z, tuple(v.id for v in ordered))


def _nearest_neighbor(layer: Layer, d: Design, start: tuple[float, float]) -> Layer:
    vox = d.by_id()
    remaining = sorted((vox[i] for i in layer.voxel_ids), key=_hyp_key)
    out = []
    cx, cy = start
    while remaining:
        nxt = min(remaining, key=lambda v: (math.hypot(v.position.x - cx, v.position.y - cy),) + _hyp_key(v))
        remaining.remove(nxt)
        out.append(nxt.id)
        cx, cy = nxt.position.x, nxt.position.y
    return Layer(layer.z, tuple(out))


def xy_travel(ids: Sequence[int], d: Design) -> float:
    """Euclidean XY length from the origin through each site in turn."""
    vox = d.by_id()
    total, cx, cy = 0.0, 0.0, 0.0
    for i in ids:
        p = vox[i].position
        total += math.hypot(p.x - cx, p.y - cy)
        cx, cy = p.x, p.y
    return total


def plan(d: Design, cfg: MachineConfig | None = None, order: str = "paper", z_tol: float | None = None) -> ToolPath:
    """Full cure sequence for a design.

    ``order="paper"`` sorts each layer by distance from the origin;
    ``order="nn"`` is a greedy nearest-neighbour tour kept for comparison.
    """
    if order not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}, got {order!r}")
    if not d.voxels:
        raise DesignError("cannot plan an empty design")
    report = validate_design(d, cfg)
    if not report.ok:
        raise ValidationError(report)
    if z_tol is None:
        z_tol = cfg.z_tol_mm if cfg is not None else 1e-6

    layers = []
    pos = (0.0, 0.0)
    vox = d.by_id()
    for layer in group_layers(d, z_tol):
        if order == "paper":
            layer = order_within_layer(layer, d)
        else:
            layer = _nearest_neighbor(layer, d, pos)
        last = vox[layer.voxel_ids[-1]].position
        pos = (last.x, last.y)
        layers.append(layer)
    ids = [i for layer in layers for i in layer.voxel_ids]
    return ToolPath(tuple(layers), xy_travel(ids, d))
