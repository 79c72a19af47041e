"""Voxel-level magnetic soft-robot slicing, G-code generation and actuation preview."""

from .kinematics import MachineConfig
from .voxel_model import Design, Magnetization, Vec3, Voxel

__version__ = "0.1.0"

__all__ = ["Design", "MachineConfig", "Magnetization", "Vec3", "Voxel"]
