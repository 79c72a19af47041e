"""Quasi-static bending preview for chain-like designs.

A straight line of voxels is treated as a pseudo-rigid-body chain: the first
voxel is clamped to the base, each later voxel is a rigid link, and links are
joined by torsional springs about a common hinge axis. Magnetization is fixed
in each link's body frame. The equilibrium minimizes

    U(theta) = sum_j k_j theta_j^2 / 2  -  sum_i mu0 v_i M_i(theta) . H(x_i(theta))

Spring stiffnesses lump half of each neighbouring link's bending compliance
into the joint between them (the link next to the clamp contributes only its
own half), so a uniform chain under uniform distributed torque reproduces the
continuous cantilever tip angle exactly in the linear regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .magnetostatics import MM, MU0, FieldSource, Uniform, field_at, field_jacobian
from .voxel_model import Contact, Design, classify_pair

AXES = {"x": np.array([1.0, 0.0, 0.0]), "y": np.array([0.0, 1.0, 0.0]), "z": np.array([0.0, 0.0, 1.0])}
DEFAULT_HINGE = {"x": "y", "y": "x", "z": "y"}


class NotAChainError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"no equilibrium after {iterations} iterations (gradient norm {residual:.3e} N*m)")


@dataclass(frozen=True)
class Material:
    E: float = 4.6e6  # Pa
    nu: float = 0.49  # recorded; unused by the 1D bending model

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError("elastic modulus must be > 0")


@dataclass(frozen=True)
class Segment:
    length_mm: float
    width_mm: float  # along the hinge
    thickness_mm: float  # in the bending plane, normal to the chain
    M: tuple[float, float, float]  # A/m, body frame (= world frame when straight)
    voxel_id: int | None = None

    @property
    def volume(self) -> float:
        return self.length_mm * self.width_mm * self.thickness_mm * 1e-9

    @property
    def second_moment(self) -> float:
        """I = w h^3 / 12 in m^4."""
        return (self.width_mm * MM) * (self.thickness_mm * MM) ** 3 / 12.0


@dataclass(frozen=True)
class ChainModel:
    segments: tuple[Segment, ...]
    E: float
    joint_stiffness: tuple[float, ...]  # N*m/rad, one per joint between consecutive segments
    base: tuple[float, float, float] = (0.0, 0.0, 0.0)  # mm, clamped end of segment 0
    axis: tuple[float, float, float] = (1.0, 0.0, 0.0)
    hinge: tuple[float, float, float] = (0.0, 1.0, 0.0)
    nu: float = 0.49

    def __post_init__(self):
        if not self.segments:
            raise ValueError("a chain needs at least one segment")
        if len(self.joint_stiffness) != len(self.segments) - 1:
            raise ValueError("need exactly one joint between each pair of segments")
        if not self.E > 0 or any(not k > 0 for k in self.joint_stiffness):
            raise ValueError("modulus and joint stiffnesses must be > 0")
        a, n = np.asarray(self.axis), np.asarray(self.hinge)
        if abs(np.linalg.norm(a) - 1) > 1e-12 or abs(np.linalg.norm(n) - 1) > 1e-12 or abs(a @ n) > 1e-12:
            raise ValueError("axis and hinge must be orthonormal")

    @property
    def n_joints(self) -> int:
        return len(self.joint_stiffness)

    @property
    def length_mm(self) -> float:
        return sum(s.length_mm for s in self.segments)


def joint_stiffnesses(segments: Sequence[Segment], E: float) -> tuple[float, ...]:
    ks = []
    for j in range(1, len(segments)):
        here = segments[j]
        compliance = here.length_mm * MM / (2.0 * E * here.second_moment)
        if j > 1:
            prev = segments[j - 1]
            compliance += prev.length_mm * MM / (2.0 * E * prev.second_moment)
        ks.append(1.0 / compliance)
    return tuple(ks)


def make_chain(
    segments: Sequence[Segment],
    material: Material = Material(),
    base=(0.0, 0.0, 0.0),
    axis="x",
    hinge=None,
) -> ChainModel:
    a_name = axis
    h_name = hinge or DEFAULT_HINGE[a_name]
    if h_name == a_name:
        raise ValueError("hinge must differ from the chain axis")
    return ChainModel(
        tuple(segments),
        material.E,
        joint_stiffnesses(segments, material.E),
        tuple(float(b) for b in base),
        tuple(AXES[a_name]),
        tuple(AXES[h_name]),
        material.nu,
    )


def build_chain(
    d: Design,
    material: Material = Material(),
    axis: str = "x",
    hinge: str | None = None,
    magnetization_A_per_m: float | None = None,
    clamp: str = "min",
    tol: float = 1e-6,
) -> ChainModel:
    """Chain model from a straight, face-connected line of voxels along ``axis``.

    ``clamp`` picks which end is fixed ("min" or "max" coordinate).
    ``magnetization_A_per_m`` replaces stored magnitudes, which are only
    meaningful when the export carried A/m.
    """
    if axis not in AXES:
        raise ValueError(f"axis must be one of x, y, z; got {axis!r}")
    if not d.voxels:
        raise NotAChainError("empty design")
    hinge = hinge or DEFAULT_HINGE[axis]
    if hinge == axis or hinge not in AXES:
        raise ValueError(f"bad hinge axis {hinge!r}")
    ai = "xyz".index(axis)
    hi = "xyz".index(hinge)
    ti = 3 - ai - hi

    vox = sorted(d.voxels, key=lambda v: v.position.as_array()[ai], reverse=(clamp == "max"))
    ref = vox[0].position.as_array()
    for v in vox[1:]:
        off = v.position.as_array() - ref
        off[ai] = 0.0
        if np.any(np.abs(off) > tol):
            raise NotAChainError(
                f"voxel {v.id} is off the {axis} line; only straight chains are supported "
                "(general shapes need a continuum solver)"
            )
    for a, b in zip(vox, vox[1:]):
        cls, _ = classify_pair(a, b, tol)
        if cls is not Contact.FACE:
            raise NotAChainError(f"voxels {a.id} and {b.id} do not share a face ({cls.value})")

    segs = []
    for v in vox:
        dims = v.dims.as_array()
        mag = v.magnetization.magnitude if magnetization_A_per_m is None else magnetization_A_per_m
        M = tuple(v.magnetization.direction.as_array() * mag)
        segs.append(Segment(dims[ai], dims[hi], dims[ti], M, v.id))

    a_vec = AXES[axis] * (-1.0 if clamp == "max" else 1.0)
    base = vox[0].position.as_array() - 0.5 * segs[0].length_mm * a_vec
    chain = make_chain(segs, material, base, axis, hinge)
    return ChainModel(chain.segments, chain.E, chain.joint_stiffness, chain.base, tuple(a_vec), chain.hinge, chain.nu)


# -- kinematics of the chain --------------------------------------------------------


def _rotate(u: np.ndarray, n: np.ndarray, phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return u * c + np.cross(n, u) * s + n * (n @ u) * (1.0 - c)


def _pose(c: ChainModel, theta: np.ndarray):
    """Absolute link angles, link start points and centers (mm), world-frame M."""
    n, a = np.asarray(c.hinge), np.asarray(c.axis)
    phi = np.concatenate([[0.0], np.cumsum(theta)])
    starts, centers, Ms = [], [], []
    p = np.asarray(c.base, dtype=float)
    for seg, ang in zip(c.segments, phi):
        u = _rotate(a, n, ang)
        starts.append(p)
        centers.append(p + 0.5 * seg.length_mm * u)
        Ms.append(_rotate(np.asarray(seg.M), n, ang))
        p = p + seg.length_mm * u
    return phi, starts, centers, Ms, p


def tip_position(c: ChainModel, theta) -> np.ndarray:
    return _pose(c, np.asarray(theta, dtype=float))[4]


def chain_points(c: ChainModel, theta) -> np.ndarray:
    """Link endpoints from base to tip (mm)."""
    _, starts, _, _, tip = _pose(c, np.asarray(theta, dtype=float))
    return np.array(starts + [tip])


def energy(c: ChainModel, src: FieldSource, theta) -> float:
    theta = np.asarray(theta, dtype=float)
    _, _, centers, Ms, _ = _pose(c, theta)
    elastic = 0.5 * float(np.sum(np.asarray(c.joint_stiffness) * theta**2))
    magnetic = sum(MU0 * s.volume * float(M @ field_at(src, x)) for s, M, x in zip(c.segments, Ms, centers))
    return elastic - magnetic


def energy_gradient(c: ChainModel, src: FieldSource, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    n = np.asarray(c.hinge)
    _, starts, centers, Ms, _ = _pose(c, theta)
    uniform = isinstance(src, Uniform)
    g = np.asarray(c.joint_stiffness) * theta
    # per-link field terms; link i moves with every joint j <= i
    Hs = [field_at(src, x) for x in centers]
    Js = [None if uniform else field_jacobian(src, x) for x in centers]
    for j in range(1, len(c.segments)):
        total = 0.0
        for i in range(j, len(c.segments)):
            w = MU0 * c.segments[i].volume
            total += w * float(np.cross(n, Ms[i]) @ Hs[i])
            if not uniform:
                dx = np.cross(n, (centers[i] - starts[j]) * MM)
                total += w * float(Ms[i] @ (Js[i] @ dx))
        g[j - 1] -= total
    return g


# -- solver --------------------------------------------------------------------------


@dataclass(frozen=True)
class EquilibriumResult:
    joint_angles: tuple[float, ...]  # rad
    tip_displacement: tuple[float, float, float]  # mm
    energy: float  # J
    residual_norm: float  # N*m
    iterations: int
    converged: bool = True
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def tip_angle(self) -> float:
        """Absolute rotation of the last link (rad)."""
        return float(sum(self.joint_angles))

    def to_dict(self) -> dict:
        return {
            "joint_angles_rad": list(self.joint_angles),
            "tip_angle_deg": math.degrees(self.tip_angle),
            "tip_displacement_mm": list(self.tip_displacement),
            "energy_J": self.energy,
            "residual_norm_Nm": self.residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _hessian(c: ChainModel, src: FieldSource, theta: np.ndarray, h: float = 1e-6) -> np.ndarray:
    k = len(theta)
    Hm = np.empty((k, k))
    for j in range(k):
        e = np.zeros(k)
        e[j] = h
        Hm[:, j] = (energy_gradient(c, src, theta + e) - energy_gradient(c, src, theta - e)) / (2 * h)
    return 0.5 * (Hm + Hm.T)


def solve_equilibrium(
    c: ChainModel,
    src: FieldSource,
    gtol: float = 1e-12,
    rtol: float = 1e-10,
    etol: float = 1e-14,
    max_iter: int = 10_000,
    theta0=None,
) -> EquilibriumResult:
    """Damped Newton descent on the chain energy.

    Converged when the gradient norm is below ``gtol`` N*m and below ``rtol``
    times the starting gradient (torques on 50 um voxels are often far below
    1e-12 N*m, so the absolute bound alone can pass at the start), or when the
    relative energy change stays under ``etol`` for three iterations.
    """
    theta = np.zeros(c.n_joints) if theta0 is None else np.array(theta0, dtype=float)
    if c.n_joints == 0:
        e = energy(c, src, theta)
        return EquilibriumResult((), (0.0, 0.0, 0.0), e, 0.0, 0)

    U = energy(c, src, theta)
    g = energy_gradient(c, src, theta)
    tol = min(gtol, rtol * float(np.linalg.norm(g)))
    flat = 0
    history = [U]
    it = 0
    while True:
        gn = float(np.linalg.norm(g))
        if gn <= tol or flat >= 3:
            break
        if it >= max_iter:
            raise ConvergenceError(it, gn)
        it += 1
        Hm = _hessian(c, src, theta)
        lam = 0.0
        scale = max(float(np.max(np.abs(np.diag(Hm)))), min(c.joint_stiffness))
        while True:
            try:
                L = np.linalg.cholesky(Hm + lam * np.eye(len(theta)))
                break
            except np.linalg.LinAlgError:
                lam = max(2 * lam, 1e-8 * scale)
        step = -np.linalg.solve(L.T, np.linalg.solve(L, g))
        alpha, slope = 1.0, float(g @ step)
        while True:
            trial = theta + alpha * step
            U_new = energy(c, src, trial)
            if U_new <= U + 1e-4 * alpha * slope or alpha < 1e-10:
                break
            alpha *= 0.5
        rel = abs(U_new - U) / max(abs(U), abs(U_new), 1e-300)
        flat = flat + 1 if rel < etol else 0
        theta, U = trial, U_new
        g = energy_gradient(c, src, theta)
        history.append(U)

    tip = tip_position(c, theta) - tip_position(c, np.zeros(c.n_joints))
    return EquilibriumResult(
        tuple(float(t) for t in theta), tuple(float(t) for t in tip), float(U), gn, it, True, tuple(float(u) for u in history)
    )


def tip_deflection(r: EquilibriumResult, c: ChainModel) -> np.ndarray:
    """Distal end position minus its undeformed position (mm)."""
    # same summation as the bent pose, so theta = 0 gives exactly zero
    return tip_position(c, r.joint_angles) - tip_position(c, np.zeros(c.n_joints))


def cantilever_tip_angle(per_length_torque: float, length_m: float, E: float, I: float) -> float:
    """Linear cantilever under uniform distributed moment: m L^2 / (2 E I)."""
    return per_length_torque * length_m**2 / (2.0 * E * I)


# -- rendering -------------------------------------------------------------------


def render_svg(c: ChainModel, r: EquilibriumResult, size: int = 480, margin: int = 30) -> str:
    """Start (grey) and end (blue) poses in the bending plane."""
    a = np.asarray(c.axis)
    b = np.cross(np.asarray(c.hinge), a)
    base = np.asarray(c.base)
    start = chain_points(c, np.zeros(c.n_joints)) - base
    end = chain_points(c, r.joint_angles) - base
    pts = [(p @ a, p @ b) for p in np.vstack([start, end])]
    us, vs = zip(*pts)
    span = max(max(us) - min(us), max(vs) - min(vs), 1e-12)
    k = (size - 2 * margin) / span
    u0, v0 = min(us), min(vs)

    def xy(p):
        return f"{margin + (p @ a - u0) * k:.3f},{size - margin - (p @ b - v0) * k:.3f}"

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<polyline points="{" ".join(xy(p) for p in start)}" fill="none" stroke="#999" stroke-width="6"/>',
        f'<polyline points="{" ".join(xy(p) for p in end)}" fill="none" stroke="#1f5fbf" stroke-width="6"/>',
        f'<circle cx="{xy(start[0]).split(",")[0]}" cy="{xy(start[0]).split(",")[1]}" r="5" fill="black"/>',
        f'<text x="{margin}" y="{margin - 10}" font-size="12" font-family="sans-serif">'
        f"tip angle {math.degrees(r.tip_angle):.4f} deg, |tip| {np.linalg.norm(r.tip_displacement) * 1000:.3f} um</text>",
        "</svg>",
    ]
    return "\n".join(lines) + "\n"
