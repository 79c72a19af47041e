"""Field sources, flux density, and magnetic force and torque on voxels.

SI units inside (meters, A/m, tesla); positions at the public boundary are mm.

    B = mu H
    tau = mu0 v M x H
    F = mu0 v [M . dH/dx, M . dH/dy, M . dH/dz]
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

MU0 = 4e-7 * math.pi  # T*m/A
MIN_DISTANCE_MM = 1e-6
MM = 1e-3


class SingularityError(ValueError):
    pass


class ScenarioError(ValueError):
    pass


def _vec(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite vector {a}")
    return a


@dataclass(frozen=True)
class Uniform:
    B: tuple[float, float, float]  # tesla

    def __post_init__(self):
        object.__setattr__(self, "B", tuple(_vec(self.B)))


@dataclass(frozen=True)
class Dipole:
    moment: tuple[float, float, float]  # A*m^2
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)  # mm

    def __post_init__(self):
        object.__setattr__(self, "moment", tuple(_vec(self.moment)))
        object.__setattr__(self, "position", tuple(_vec(self.position)))


FieldSource = Union[Uniform, Dipole]


@dataclass(frozen=True)
class MagneticBody:
    M: tuple[float, float, float]  # A/m
    v: float  # m^3

    def __post_init__(self):
        object.__setattr__(self, "M", tuple(_vec(self.M)))
        if not self.v > 0:
            raise ValueError(f"body volume must be > 0, got {self.v}")


def _offset_m(src: Dipole, p_mm) -> np.ndarray:
    r_mm = _vec(p_mm) - np.asarray(src.position)
    if np.linalg.norm(r_mm) < MIN_DISTANCE_MM:
        raise SingularityError(f"field evaluated at the dipole position {src.position}")
    return r_mm * MM


def field_at(src: FieldSource, p) -> np.ndarray:
    """H in A/m at ``p`` (mm)."""
    if isinstance(src, Uniform):
        return np.asarray(src.B) / MU0
    r = _offset_m(src, p)
    m = np.asarray(src.moment)
    d = np.linalg.norm(r)
    rhat = r / d
    return (3.0 * np.dot(m, rhat) * rhat - m) / (4.0 * math.pi * d**3)


def field_jacobian(src: FieldSource, p) -> np.ndarray:
    """J[i, j] = dH_i/dx_j in A/m^2 at ``p`` (mm)."""
    if isinstance(src, Uniform):
        return np.zeros((3, 3))
    r = _offset_m(src, p)
    m = np.asarray(src.moment)
    d = np.linalg.norm(r)
    mr = float(np.dot(m, r))
    J = (
        3.0 * (np.outer(r, m) + np.outer(m, r) + mr * np.eye(3)) / d**5
        - 15.0 * mr * np.outer(r, r) / d**7
    )
    return J / (4.0 * math.pi)


def flux_density(H, mu: float) -> np.ndarray:
    if not mu > 0:
        raise ValueError(f"permeability must be > 0, got {mu}")
    return mu * np.asarray(H, dtype=float)


def torque(body: MagneticBody, H) -> np.ndarray:
    return MU0 * body.v * np.cross(np.asarray(body.M), np.asarray(H, dtype=float))


def force(body: MagneticBody, src: FieldSource, p) -> np.ndarray:
    """Componentwise form: F_j = mu0 v M . dH/dx_j."""
    if isinstance(src, Uniform):
        return np.zeros(3)
    J = field_jacobian(src, p)
    return MU0 * body.v * (J.T @ np.asarray(body.M))


def force_advective(body: MagneticBody, src: FieldSource, p) -> np.ndarray:
    """(M . grad) H form; equals :func:`force` wherever the field is curl-free."""
    if isinstance(src, Uniform):
        return np.zeros(3)
    J = field_jacobian(src, p)
    return MU0 * body.v * (J @ np.asarray(body.M))


# -- scenarios -------------------------------------------------------------------


def source_from_dict(data: dict) -> FieldSource:
    kind = data.get("type")
    try:
        if kind == "uniform":
            if "B_mT" in data:
                return Uniform(tuple(np.asarray(data["B_mT"], dtype=float) * 1e-3))
            return Uniform(tuple(data["B"]))
        if kind == "dipole":
            return Dipole(tuple(data["moment"]), tuple(data.get("position_mm", (0.0, 0.0, 0.0))))
    except (KeyError, ValueError, TypeError) as exc:
        raise ScenarioError(f"bad {kind} source: {exc}") from exc
    raise ScenarioError(f"unknown source type {kind!r}")


def source_to_dict(src: FieldSource) -> dict:
    if isinstance(src, Uniform):
        return {"type": "uniform", "B": list(src.B)}
    return {"type": "dipole", "moment": list(src.moment), "position_mm": list(src.position)}


@dataclass(frozen=True)
class PlacedBody:
    name: str
    body: MagneticBody
    position: tuple[float, float, float]  # mm


def bodies_from_design(d, magnetization_A_per_m: float | None = None) -> list[PlacedBody]:
    """One body per magnetized voxel. ``magnetization_A_per_m`` overrides the
    stored magnitude (needed when the export held bare directions)."""
    out = []
    for v in d.voxels:
        m = v.magnetization
        if m.magnitude == 0.0:
            continue
        mag = m.magnitude if magnetization_A_per_m is None else magnetization_A_per_m
        out.append(PlacedBody(str(v.id), MagneticBody(tuple(v.magnetization.direction.as_array() * mag), v.volume), tuple(v.position)))
    return out


def load_scenario(data: dict) -> tuple[FieldSource, list[PlacedBody]]:
    """``{"source": {...}, "bodies": [{"name", "M", "volume_m3", "position_mm"}]}``"""
    if "source" not in data or "bodies" not in data:
        raise ScenarioError("scenario needs 'source' and 'bodies'")
    src = source_from_dict(data["source"])
    bodies = []
    for i, b in enumerate(data["bodies"]):
        try:
            bodies.append(PlacedBody(str(b.get("name", i + 1)), MagneticBody(tuple(b["M"]), float(b["volume_m3"])), tuple(b["position_mm"])))
        except (KeyError, ValueError, TypeError) as exc:
            raise ScenarioError(f"body {i}: {exc}") from exc
    return src, bodies


def load_scenario_file(path: str | Path) -> tuple[FieldSource, list[PlacedBody]]:
    return load_scenario(json.loads(Path(path).read_text(encoding="utf-8")))


TABLE_COLUMNS = ("name", "x_mm", "y_mm", "z_mm", "Fx_N", "Fy_N", "Fz_N", "tx_Nm", "ty_Nm", "tz_Nm")


def force_torque_table(src: FieldSource, bodies: Iterable[PlacedBody]) -> list[dict]:
    rows = []
    for pb in bodies:
        H = field_at(src, pb.position)
        F = force(pb.body, src, pb.position)
        t = torque(pb.body, H)
        rows.append(dict(zip(TABLE_COLUMNS, (pb.name, *pb.position, *F, *t))))
    return rows


def table_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (row[k] if k == "name" else repr(float(row[k]))) for k in TABLE_COLUMNS})
    return buf.getvalue()
