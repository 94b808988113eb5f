"""Total energy and force: bending model plus area/volume penalties."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .geometry import total_area, total_volume
from .mesh import TriMesh
from .params import ALPHA_LARGE, ConstraintParams, ModelParams, UnsupportedModelError
from .schemes import Moments, VertexField, bending_energy_force, moment_energy, moments


@dataclass(frozen=True)
class EnergyBreakdown:
    E_H: float
    E_AD: float
    E_area_g: float
    E_area_l: float
    E_vol: float
    v: float
    da: float
    da_prime: float
    da_sphere: float
    area: float
    volume: float

    @property
    def total(self) -> float:
        return self.E_H + self.E_AD + self.E_area_g + self.E_area_l + self.E_vol

    @property
    def bending(self) -> float:
        return self.E_H + self.E_AD

    def as_dict(self) -> dict:
        d = asdict(self)
        d["E_total"] = self.total
        return d


@dataclass(frozen=True)
class ReducedQuantities:
    v: float
    da: float
    da_prime: float
    da_sphere: float
    area: float
    volume: float
    R: float


def reduced_quantities(mesh: TriMesh, field: VertexField | Moments | None, D: float, R: float | None = None):
    """Reduced volume and reduced area differences.

    ``da = dA / (4 pi R D)`` (a sphere gives 2), ``da_sphere = dA / (8 pi R D)``
    (a sphere gives 1) and ``da_prime = dA / A``, with ``dA = 2 D M1``.
    """
    A = total_area(mesh)
    V = total_volume(mesh)
    R = math.sqrt(A / (4 * math.pi)) if R is None else R
    v = 3.0 * V / (4.0 * math.pi * R**3)
    if field is None:
        return ReducedQuantities(v, math.nan, math.nan, math.nan, A, V, R)
    M1 = field.M1 if isinstance(field, Moments) else moments(field).M1
    dA = 2.0 * D * M1
    return ReducedQuantities(v, dA / (4 * math.pi * R * D), dA / A, dA / (8 * math.pi * R * D), A, V, R)


def penalty_terms(mesh: TriMesh, cons: ConstraintParams, want_force: bool = True):
    """``(E_area_g, E_area_l, E_vol, F)``."""
    at0 = cons.triangle_targets(mesh.n_triangles)
    x = mesh.vertices - mesh.vertices.mean(axis=0)
    terms, F = kernels.penalty(x, mesh.triangles, cons.pen_vector(), at0, want_force)
    return float(terms[2]), float(terms[3]), float(terms[4]), F


def _breakdown(mesh, mom, E_H, E_AD, pen, model: ModelParams, R_ref):
    red = reduced_quantities(mesh, mom, model.D, R_ref)
    return EnergyBreakdown(
        E_H, E_AD, pen[0], pen[1], pen[2], red.v, red.da, red.da_prime, red.da_sphere, red.area, red.volume
    )


def total_energy(
    mesh: TriMesh,
    field: VertexField | None,
    model: ModelParams,
    constraints: ConstraintParams | None = None,
    R: float | None = None,
) -> EnergyBreakdown:
    """Energy from the grouped moment expression for a precomputed field.

    ``R`` is the reference radius for reduced quantities and for ``da0``;
    by default it is taken from the current area.
    """
    if field is None:
        raise UnsupportedModelError("scheme A has no curvature field; use evaluate(..., scheme='A')")
    R_ref = math.sqrt(total_area(mesh) / (4 * math.pi)) if R is None else R
    mom = moments(field)
    E_H, E_AD = moment_energy(mom, model, R_ref)
    cons = constraints or ConstraintParams.none()
    pen = penalty_terms(mesh, cons, want_force=False)[:3]
    return _breakdown(mesh, mom, E_H, E_AD, pen, model, R_ref)


def energy_direct(field: VertexField, model: ModelParams, R: float = 1.0) -> tuple[float, float]:
    """Per-vertex Helfrich sum and ADE term, without moment grouping."""
    E_H = float(np.sum(2.0 * model.kappa * (field.H - model.H0) ** 2 * field.A))
    E_AD = 0.0
    if model.alpha:
        A = float(field.A.sum())
        dA = 2.0 * model.D * float(np.sum(field.H * field.A))
        E_AD = model.alpha * math.pi * model.kappa / (2.0 * A * model.D**2) * (dA - model.delta_A0(R)) ** 2
    return E_H, E_AD


def energy_grouped(m: Moments, model: ModelParams, R: float = 1.0) -> float:
    """Six-term grouping with the combined reduced target ``kappa_ad da'_0``."""
    k, a, D, H0 = model.kappa, model.alpha, model.D, model.H0
    A, M1, M2 = m.M0, m.M1, m.M2
    dA0 = model.delta_A0(R)
    # kappa_ad * da'_0 = 2 kappa D H0 / pi + alpha kappa dA0 / A, finite as alpha -> 0
    k_da0 = 2.0 * k * D * H0 / math.pi + a * k * dA0 / A
    return (
        2.0 * k * M2
        + 2.0 * a * math.pi * k / A * M1**2
        - 2.0 * math.pi * k_da0 / D * M1
        + 2.0 * k * H0**2 * A
        + a * math.pi * k / (2.0 * A) * (dA0 / D) ** 2
    )


@dataclass
class Evaluation:
    breakdown: EnergyBreakdown
    force: np.ndarray
    bending_force: np.ndarray
    penalty_force: np.ndarray


def evaluate(
    mesh: TriMesh,
    scheme: str,
    model: ModelParams,
    constraints: ConstraintParams | None = None,
    R: float | None = None,
    want_force: bool = True,
) -> Evaluation:
    """Energy breakdown and total force for any scheme."""
    R_ref = math.sqrt(total_area(mesh) / (4 * math.pi)) if R is None else R
    mom, E_H, E_AD, Fb = bending_energy_force(mesh, scheme, model, R_ref, want_force)
    cons = constraints or ConstraintParams.none()
    *pen, Fp = penalty_terms(mesh, cons, want_force)
    bd = _breakdown(mesh, mom, E_H, E_AD, pen, model, R_ref)
    return Evaluation(bd, Fb + Fp, Fb, Fp)


def total_force(mesh, model, constraints, scheme: str, R: float | None = None) -> np.ndarray:
    return evaluate(mesh, scheme, model, constraints, R).force


def bc_model(mesh: TriMesh, field: VertexField, da0_target: float, alpha_large: float = ALPHA_LARGE,
             kappa: float = 0.01, D: float = 0.001, R: float | None = None) -> EnergyBreakdown:
    """Bilayer-couple energy: the ADE term with a large alpha acting as a constraint."""
    model = ModelParams("bc", kappa=kappa, alpha=alpha_large, D=D, da0=da0_target)
    return total_energy(mesh, field, model, None, R)
