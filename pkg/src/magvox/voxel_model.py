"""Core design types: voxels, magnetizations, designs, and geometric checks.

Voxels are axis-aligned boxes. Positions are voxel centers in mm unless a
``position_convention="corner"`` import says otherwise.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Iterator, Sequence

import numpy as np

if TYPE_CHECKING:
    from .ingest import GeomRecord, MagRecord
    from .kinematics import MachineConfig

DEFAULT_ADJACENCY_TOL_MM = 1e-6
UNIT_TOL = 1e-9


class DesignError(ValueError):
    """Base class for problems with a design's records."""


class MissingCounterpartError(DesignError):
    def __init__(self, mag_only: Sequence[int], geom_only: Sequence[int]):
        self.mag_only = sorted(mag_only)
        self.geom_only = sorted(geom_only)
        parts = []
        if self.mag_only:
            parts.append(f"ids {self.mag_only} have magnetization but no geometry")
        if self.geom_only:
            parts.append(f"ids {self.geom_only} have geometry but no magnetization")
        super().__init__("missing counterpart: " + "; ".join(parts))

    @property
    def ids(self) -> list[int]:
        return sorted(self.mag_only + self.geom_only)


class DuplicateIdError(DesignError):
    def __init__(self, dataset: str, ids: Sequence[int]):
        self.dataset = dataset
        self.ids = sorted(ids)
        super().__init__(f"duplicate id(s) {self.ids} in {dataset} records")


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"Vec3.{name} must be finite, got {v}")
            object.__setattr__(self, name, v)

    def __iter__(self) -> Iterator[float]:
        yield self.x
        yield self.y
        yield self.z

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scaled(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def of(cls, v: Iterable[float]) -> "Vec3":
        x, y, z = v
        return cls(x, y, z)


@dataclass(frozen=True)
class Magnetization:
    """Unit direction plus magnitude (A/m, or 1.0 when imported as a bare direction).

    A zero magnitude is only legal for voxels flagged ``passive``; that is
    reported by :func:`validate_design`, not enforced here.
    """

    direction: Vec3
    magnitude: float = 1.0
    passive: bool = False

    @classmethod
    def from_components(cls, mx: float, my: float, mz: float, passive: bool = False) -> "Magnetization":
        n = math.sqrt(mx * mx + my * my + mz * mz)
        if n == 0.0:
            return cls(Vec3(0.0, 0.0, 0.0), 0.0, passive)
        return cls(Vec3(mx / n, my / n, mz / n), n, passive)

    @property
    def vector(self) -> Vec3:
        return self.direction.scaled(self.magnitude)

    def is_unit(self, tol: float = UNIT_TOL) -> bool:
        return abs(self.direction.norm() - 1.0) <= tol


@dataclass(frozen=True)
class Voxel:
    id: int
    position: Vec3  # mm, center
    dims: Vec3  # mm, L x W x H
    magnetization: Magnetization

    @property
    def volume(self) -> float:
        """Volume in m^3."""
        return self.dims.x * self.dims.y * self.dims.z * 1e-9

    @property
    def lo(self) -> np.ndarray:
        return self.position.as_array() - 0.5 * self.dims.as_array()

    @property
    def hi(self) -> np.ndarray:
        return self.position.as_array() + 0.5 * self.dims.as_array()


@dataclass(frozen=True)
class Design:
    voxels: tuple[Voxel, ...]
    name: str = "design"

    def __post_init__(self):
        object.__setattr__(self, "voxels", tuple(self.voxels))

    def __len__(self) -> int:
        return len(self.voxels)

    def __iter__(self) -> Iterator[Voxel]:
        return iter(self.voxels)

    def by_id(self) -> dict[int, Voxel]:
        return {v.id: v for v in self.voxels}

    def translated(self, offset: Vec3) -> "Design":
        return Design(
            tuple(Voxel(v.id, v.position + offset, v.dims, v.magnetization) for v in self.voxels),
            self.name,
        )


def merge_datasets(
    mag_records: Sequence["MagRecord"],
    geom_records: Sequence["GeomRecord"],
    name: str = "design",
    position_convention: str = "center",
) -> Design:
    """Join magnetization and geometry records on voxel id.

    Output voxels are in ascending id order. ``position_convention`` is
    ``"center"`` (default) or ``"corner"`` when the exported x, y, z are the
    minimum corner of each box.
    """
    if not mag_records or not geom_records:
        raise DesignError("both magnetization and geometry records must be non-empty")
    if position_convention not in ("center", "corner"):
        raise ValueError(f"unknown position convention {position_convention!r}")

    for label, records in (("magnetization", mag_records), ("geometry", geom_records)):
        dupes = [i for i, n in Counter(r.id for r in records).items() if n > 1]
        if dupes:
            raise DuplicateIdError(label, dupes)

    mags = {r.id: r for r in mag_records}
    geoms = {r.id: r for r in geom_records}
    mag_only = mags.keys() - geoms.keys()
    geom_only = geoms.keys() - mags.keys()
    if mag_only or geom_only:
        raise MissingCounterpartError(list(mag_only), list(geom_only))

    voxels = []
    for vid in sorted(mags):
        m, g = mags[vid], geoms[vid]
        dims = Vec3(g.l, g.w, g.h)
        pos = Vec3(g.x, g.y, g.z)
        if position_convention == "corner":
            pos = pos + dims.scaled(0.5)
        voxels.append(Voxel(vid, pos, dims, Magnetization.from_components(m.mx, m.my, m.mz, m.passive)))
    return Design(tuple(voxels), name)


def split_design(d: Design) -> tuple[list["MagRecord"], list["GeomRecord"]]:
    """Project a design back onto magnetization and geometry records (center convention)."""
    from .ingest import GeomRecord, MagRecord

    mags, geoms = [], []
    for v in d.voxels:
        mv = v.magnetization.vector
        mags.append(MagRecord(v.id, mv.x, mv.y, mv.z, v.magnetization.passive))
        geoms.append(GeomRecord(v.id, v.dims.x, v.dims.y, v.dims.z, v.position.x, v.position.y, v.position.z))
    return mags, geoms


# -- adjacency -----------------------------------------------------------------


class Contact(str, Enum):
    FACE = "face"
    EDGE = "edge"
    CORNER = "corner"
    OVERLAP = "overlap"
    NONE = "none"


@dataclass(frozen=True)
class AdjacencyReport:
    pairs: tuple[tuple[int, int, Contact], ...]
    overlap_volumes: dict[tuple[int, int], float] = field(default_factory=dict)  # mm^3, keyed (lo_id, hi_id)

    def contact(self, a: int, b: int) -> Contact:
        key = (min(a, b), max(a, b))
        for i, j, c in self.pairs:
            if (i, j) == key:
                return c
        raise KeyError(key)

    def of_class(self, cls: Contact) -> list[tuple[int, int]]:
        return [(i, j) for i, j, c in self.pairs if c is cls]

    def overlap_volume(self, a: int, b: int) -> float:
        return self.overlap_volumes.get((min(a, b), max(a, b)), 0.0)


def box_overlap_extents(lo_a, hi_a, lo_b, hi_b) -> np.ndarray:
    """Signed per-axis overlap length; negative means a gap."""
    return np.minimum(hi_a, hi_b) - np.maximum(lo_a, lo_b)


def box_intersection_volume(lo_a, hi_a, lo_b, hi_b) -> float:
    return float(np.prod(np.maximum(0.0, box_overlap_extents(lo_a, hi_a, lo_b, hi_b))))


def classify_pair(a: Voxel, b: Voxel, tol: float = DEFAULT_ADJACENCY_TOL_MM) -> tuple[Contact, float]:
    ext = box_overlap_extents(a.lo, a.hi, b.lo, b.hi)
    if np.any(ext < -tol):
        return Contact.NONE, 0.0
    positive = int(np.sum(ext > tol))
    if positive == 3:
        return Contact.OVERLAP, float(np.prod(ext))
    return (Contact.CORNER, Contact.EDGE, Contact.FACE)[positive], 0.0


def classify_adjacency(d: Design, tol: float = DEFAULT_ADJACENCY_TOL_MM) -> AdjacencyReport:
    if tol < 0:
        raise ValueError("tol must be >= 0")
    pairs = []
    volumes = {}
    for a, b in itertools.combinations(sorted(d.voxels, key=lambda v: v.id), 2):
        cls, vol = classify_pair(a, b, tol)
        pairs.append((a.id, b.id, cls))
        if cls is Contact.OVERLAP:
            volumes[(a.id, b.id)] = vol
    return AdjacencyReport(tuple(pairs), volumes)


# -- validation ----------------------------------------------------------------


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Issue:
    severity: Severity
    code: str
    message: str
    voxel_ids: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "severity": self.severity.value,
            "code": self.code,
            "message": self.message,
            "voxel_ids": list(self.voxel_ids),
        }


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity is Severity.ERROR]

    @property
    def warnings(self) -> list[Issue]:
        return [i for i in self.issues if i.severity is Severity.WARNING]

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self) -> bool:
        return bool(self.issues)

    def __len__(self) -> int:
        return len(self.issues)

    def with_code(self, code: str) -> list[Issue]:
        return [i for i in self.issues if i.code == code]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "issues": [i.to_dict() for i in self.issues]}


class ValidationError(DesignError):
    def __init__(self, report: ValidationReport):
        self.report = report
        first = report.errors[0]
        super().__init__(f"{first.message} ({len(report.errors)} error(s))")


def _components(ids: Sequence[int], links: Iterable[tuple[int, int]]) -> dict[int, int]:
    parent = {i: i for i in ids}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in links:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return {i: find(i) for i in ids}


def validate_design(d: Design, cfg: "MachineConfig | None" = None, tol: float = DEFAULT_ADJACENCY_TOL_MM) -> ValidationReport:
    issues: list[Issue] = []
    err, warn = Severity.ERROR, Severity.WARNING

    if not d.voxels:
        issues.append(Issue(err, "empty-design", "design has no voxels"))
        return ValidationReport(tuple(issues))

    dupes = sorted(i for i, n in Counter(v.id for v in d.voxels).items() if n > 1)
    if dupes:
        issues.append(Issue(err, "duplicate-id", f"duplicate voxel id(s) {dupes}", tuple(dupes)))

    for v in d.voxels:
        if v.id <= 0:
            issues.append(Issue(err, "non-positive-id", f"voxel id {v.id} must be positive", (v.id,)))
        if min(v.dims) <= 0:
            issues.append(Issue(err, "non-positive-dimension", f"voxel {v.id}: non-positive dimension {tuple(v.dims)}", (v.id,)))
        m = v.magnetization
        if m.magnitude == 0.0:
            if not m.passive:
                issues.append(Issue(err, "zero-magnetization", f"voxel {v.id}: zero magnetization without passive flag", (v.id,)))
        elif not m.is_unit():
            issues.append(Issue(err, "non-unit-direction", f"voxel {v.id}: magnetization direction has norm {m.direction.norm():.12g}", (v.id,)))
        if cfg is not None:
            for axis, value in zip("xyz", v.position):
                lo, hi = cfg.travel_limits[axis]
                if not lo <= value <= hi:
                    issues.append(Issue(err, "outside-travel", f"voxel {v.id}: {axis}={value:g} mm outside travel [{lo:g}, {hi:g}]", (v.id,)))

    if len(d.voxels) > 1 and not dupes:
        adj = classify_adjacency(d, tol)
        ids = [v.id for v in d.voxels]
        strong = adj.of_class(Contact.FACE) + adj.of_class(Contact.OVERLAP)
        comp = _components(ids, strong)
        for cls, code in ((Contact.EDGE, "edge-only-connectivity"), (Contact.CORNER, "corner-only-connectivity")):
            for a, b in adj.of_class(cls):
                if comp[a] != comp[b]:
                    issues.append(Issue(warn, code, f"voxels {a} and {b} are joined only by a shared {cls.value}", (a, b)))
        any_contact = [(a, b) for a, b, c in adj.pairs if c is not Contact.NONE]
        groups = set(_components(ids, any_contact).values())
        if len(groups) > 1:
            issues.append(Issue(warn, "disconnected", f"design splits into {len(groups)} unconnected parts"))

    return ValidationReport(tuple(issues))
