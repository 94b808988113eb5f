"""Discrete bending energies, forces and relaxation dynamics for closed vesicle meshes."""
from ._backend import backend_name
from .mesh import MeshError, ShapeSpec, TriMesh, build_icosphere, equiangulate, map_to_shape, validate
from .models import EnergyBreakdown, evaluate, reduced_quantities, total_energy
from .params import ConstraintParams, ModelParams
from .schemes import SCHEMES, bending_energy_force, vertex_field

__version__ = "0.1.0"

__all__ = [
    "SCHEMES",
    "ConstraintParams",
    "EnergyBreakdown",
    "MeshError",
    "ModelParams",
    "ShapeSpec",
    "TriMesh",
    "backend_name",
    "bending_energy_force",
    "build_icosphere",
    "equiangulate",
    "evaluate",
    "map_to_shape",
    "reduced_quantities",
    "total_energy",
    "validate",
    "vertex_field",
]
