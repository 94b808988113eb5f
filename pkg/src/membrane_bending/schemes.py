"""Discrete curvature fields, moments, energies and forces for schemes A-D.

* A: edge-angle energy ``2 kt sum(1 - cos(theta - theta0))``.
* B: ``H_i = sum(l_e theta_e) / (4 A_i)`` with barycentric areas.
* C: cotangent Laplacian of the embedding projected on the angle-weighted
  inward normal, Voronoi areas.
* D: as C but with mixed areas, angle-defect Gaussian curvature and a
  force density from the continuum variation (not an exact gradient).

Forces are returned as ``(N_v, 3)`` arrays of per-vertex forces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import (
    TrianglePrims,
    _dot,
    angle_gradients,
    dihedral_angles,
    mixed_corner_areas,
    scatter,
    scatter_scalar,
    triangle_prims,
    unit_normal_vjp,
    voronoi_corner_areas,
)
from .mesh import MeshError, TriMesh
from .params import ModelParams, UnsupportedModelError

SCHEMES = ("A", "B", "C", "D")


class NonPositiveAreaError(MeshError):
    """A vertex has a non-positive Voronoi area, so its curvature is undefined."""


@dataclass(frozen=True)
class VertexField:
    scheme: str
    H: np.ndarray
    A: np.ndarray
    n: np.ndarray | None = None
    G: np.ndarray | None = None
    lvec: np.ndarray | None = None
    nonpositive_area: int = 0

    @property
    def h(self) -> np.ndarray:
        return self.H * self.A


@dataclass(frozen=True)
class Moments:
    M0: float
    M1: float
    M2: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.M0, self.M1, self.M2)


def moments(field: VertexField) -> Moments:
    A, H = field.A, field.H
    return Moments(float(A.sum()), float((H * A).sum()), float((H * H * A).sum()))


def to_density(F: np.ndarray, A: np.ndarray) -> np.ndarray:
    return F / A[:, None]


def from_density(f: np.ndarray, A: np.ndarray) -> np.ndarray:
    return f * A[:, None]


def _edge_arrays(mesh: TriMesh):
    e = mesh.edges
    return e.i, e.j, e.k, e.l


# ---------------------------------------------------------------------------
# scheme A


def scheme_a_energy(mesh: TriMesh, kappa_tilde: float, theta0: float = 0.0, linearized: bool = False) -> float:
    E, _ = kernels.scheme_a(mesh.vertices, *_edge_arrays(mesh), kappa_tilde, theta0, linearized, want_force=False)
    return float(E)


def scheme_a_energy_linearized(mesh: TriMesh, kappa_tilde: float, theta0: float = 0.0) -> float:
    return scheme_a_energy(mesh, kappa_tilde, theta0, linearized=True)


def scheme_a_force(mesh: TriMesh, kappa_tilde: float, theta0: float = 0.0, linearized: bool = False) -> np.ndarray:
    _, F = kernels.scheme_a(mesh.vertices, *_edge_arrays(mesh), kappa_tilde, theta0, linearized, want_force=True)
    return F


def scheme_a_vertex_energy(mesh: TriMesh, kappa_tilde: float, theta0: float = 0.0, linearized: bool = False):
    """Per-vertex energy with each edge's share split evenly between its ends."""
    th = dihedral_angles(mesh).theta - theta0
    per_edge = kappa_tilde * th * th if linearized else 2.0 * kappa_tilde * (1.0 - np.cos(th))
    e = mesh.edges
    half = 0.5 * per_edge
    return np.bincount(e.i, half, mesh.n_vertices) + np.bincount(e.j, half, mesh.n_vertices)


# ---------------------------------------------------------------------------
# fields


def scheme_b_field(mesh: TriMesh) -> VertexField:
    prims = triangle_prims(mesh)
    A = scatter_scalar(mesh.n_vertices, mesh.triangles, np.repeat(prims.area[:, None] / 3.0, 3, axis=1))
    ep = dihedral_angles(mesh)
    e = mesh.edges
    q = 0.25 * ep.length * ep.theta
    h = np.bincount(e.i, q, mesh.n_vertices) + np.bincount(e.j, q, mesh.n_vertices)
    return VertexField("B", h / A, A)


def _laplacian_vectors(x: np.ndarray, tri: np.ndarray, cot: np.ndarray) -> np.ndarray:
    """``sum_j (cot_k + cot_l)(x_j - x_i) / 4`` per vertex (half the area-weighted Laplacian)."""
    out = np.zeros_like(x)
    for s in range(3):
        b, c = tri[:, (s + 1) % 3], tri[:, (s + 2) % 3]
        w = 0.25 * cot[:, s][:, None] * (x[b] - x[c])
        for dim in range(3):
            out[:, dim] -= np.bincount(b, w[:, dim], len(x))
            out[:, dim] += np.bincount(c, w[:, dim], len(x))
    return out


def _angle_weighted(mesh: TriMesh, prims: TrianglePrims) -> np.ndarray:
    return -scatter(mesh.n_vertices, mesh.triangles, prims.angles[:, :, None] * prims.normal[:, None, :])


def _cotan_field(mesh: TriMesh, prims: TrianglePrims, A: np.ndarray, scheme: str) -> VertexField:
    x, t = mesh.vertices, mesh.triangles
    lvec = _laplacian_vectors(x, t, prims.cot)
    m = _angle_weighted(mesh, prims)
    n = m / np.linalg.norm(m, axis=1)[:, None]
    h = _dot(lvec, n)
    bad = A <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        H = np.where(bad, np.nan, h / np.where(bad, 1.0, A))
    G = None
    if scheme == "D":
        defect = 2.0 * np.pi - scatter_scalar(mesh.n_vertices, t, prims.angles)
        G = defect / A
    return VertexField(scheme, H, A, n, G, lvec, int(np.count_nonzero(bad)))


def scheme_c_field(mesh: TriMesh) -> VertexField:
    prims = triangle_prims(mesh)
    A = scatter_scalar(mesh.n_vertices, mesh.triangles, voronoi_corner_areas(mesh.vertices, mesh.triangles, prims.cot))
    return _cotan_field(mesh, prims, A, "C")


def scheme_d_field(mesh: TriMesh) -> VertexField:
    prims = triangle_prims(mesh)
    A = scatter_scalar(mesh.n_vertices, mesh.triangles, mixed_corner_areas(mesh.vertices, mesh.triangles, prims))
    return _cotan_field(mesh, prims, A, "D")


FIELD_FUNCTIONS = {"B": scheme_b_field, "C": scheme_c_field, "D": scheme_d_field}


def vertex_field(mesh: TriMesh, scheme: str) -> VertexField:
    try:
        return FIELD_FUNCTIONS[scheme.upper()](mesh)
    except KeyError:
        raise UnsupportedModelError(f"scheme {scheme!r} has no curvature field (use B, C or D)") from None


# ---------------------------------------------------------------------------
# energies from moments


def moment_energy(m: Moments, model: ModelParams, R: float = 1.0) -> tuple[float, float]:
    """``(E_H, E_AD)`` from the grouped moment expression."""
    E_H, E_AD, *_ = kernels.moment_energy(m.M0, m.M1, m.M2, model.bend_vector(R))
    return float(E_H), float(E_AD)


# ---------------------------------------------------------------------------
# forces


def scheme_b_energy_force(mesh: TriMesh, model: ModelParams, R: float = 1.0, want_force: bool = True):
    terms, F = kernels.scheme_b(mesh.vertices, mesh.triangles, *_edge_arrays(mesh), model.bend_vector(R), want_force)
    return Moments(*terms[:3]), float(terms[3]), float(terms[4]), F


def scheme_b_force(mesh: TriMesh, model: ModelParams, R: float = 1.0) -> np.ndarray:
    return scheme_b_energy_force(mesh, model, R)[3]


def scheme_c_energy_force(mesh: TriMesh, model: ModelParams, R: float = 1.0, want_force: bool = True):
    """Energy and exact negative gradient for scheme C by reverse accumulation."""
    x, t = mesh.vertices, mesh.triangles
    nv = mesh.n_vertices
    prims = triangle_prims(mesh)
    A = scatter_scalar(nv, t, voronoi_corner_areas(x, t, prims.cot))
    field = _cotan_field(mesh, prims, A, "C")
    if field.nonpositive_area:
        raise NonPositiveAreaError(f"{field.nonpositive_area} vertex(es) with Voronoi area <= 0")
    mom = moments(field)
    E_H, E_AD, g0, g1, g2 = kernels.moment_energy(mom.M0, mom.M1, mom.M2, model.bend_vector(R))
    if not want_force:
        return mom, float(E_H), float(E_AD), np.zeros_like(x)
    H, n, lvec = field.H, field.n, field.lvec
    gA = g0 - g2 * H * H
    gh = g1 + 2.0 * g2 * H
    m = _angle_weighted(mesh, prims)
    mnorm = np.linalg.norm(m, axis=1)
    g_lvec = gh[:, None] * n
    g_n = gh[:, None] * lvec
    g_m = (g_n - _dot(g_n, n)[:, None] * n) / mnorm[:, None]

    u = prims.normal
    nt = len(t)
    g_phi = np.zeros((nt, 3))
    g_u = np.zeros((nt, 3))
    g_slot = np.zeros((nt, 3, 3))
    for s in range(3):
        a, b, c = t[:, s], t[:, (s + 1) % 3], t[:, (s + 2) % 3]
        g_phi[:, s] -= _dot(g_m[a], u)
        g_u -= prims.angles[:, s][:, None] * g_m[a]
        d = x[b] - x[c]
        gAbc = gA[b] + gA[c]
        dlv = g_lvec[c] - g_lvec[b]
        cot = prims.cot[:, s]
        g_cot = gAbc * _dot(d, d) / 8.0 + 0.25 * _dot(dlv, d)
        g_phi[:, s] -= g_cot / np.sin(prims.angles[:, s]) ** 2
        gd = (0.25 * cot)[:, None] * (gAbc[:, None] * d + dlv)
        g_slot[:, (s + 1) % 3] += gd
        g_slot[:, (s + 2) % 3] -= gd
    ag = angle_gradients(x, t, u)
    g_slot += np.einsum("ts,tsrd->trd", g_phi, ag)
    g_slot += unit_normal_vjp(x, t, g_u)
    return mom, float(E_H), float(E_AD), -scatter(nv, t, g_slot)


def scheme_c_force(mesh: TriMesh, model: ModelParams, R: float = 1.0) -> np.ndarray:
    return scheme_c_energy_force(mesh, model, R)[3]


def cotan_laplacian(mesh: TriMesh, f: np.ndarray, A: np.ndarray, prims: TrianglePrims | None = None) -> np.ndarray:
    """``(1 / 2A_i) sum_j (cot_k + cot_l)(f_j - f_i)`` for a scalar vertex function."""
    prims = prims or triangle_prims(mesh)
    t = mesh.triangles
    out = np.zeros(mesh.n_vertices)
    for s in range(3):
        b, c = t[:, (s + 1) % 3], t[:, (s + 2) % 3]
        w = prims.cot[:, s] * (f[c] - f[b])
        out += np.bincount(b, w, mesh.n_vertices) - np.bincount(c, w, mesh.n_vertices)
    return out / (2.0 * A)


@dataclass(frozen=True)
class DensityParts:
    f_H: np.ndarray
    f_AD: np.ndarray
    lap_H: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.f_H + self.f_AD


def curvature_force_density(H, G, lap_H, A_total, M1, model: ModelParams, R: float = 1.0) -> tuple:
    """Normal force magnitudes ``(f_H, f_AD)`` from local H, G and the Laplacian of H."""
    k, H0, alpha, D = model.kappa, model.H0, model.alpha, model.D
    f_H = -2.0 * k * (2.0 * (H - H0) * (H * H + H0 * H - G) + lap_H)
    if alpha:
        r = 2.0 * M1 - model.delta_A0(R) / D
        f_AD = alpha * k * np.pi * (r * 2.0 * G / A_total - r * r * H / A_total**2)
    else:
        f_AD = np.zeros_like(np.asarray(H, dtype=float))
    return f_H, f_AD


def scheme_d_density_parts(mesh: TriMesh, model: ModelParams, R: float = 1.0) -> tuple[VertexField, DensityParts]:
    prims = triangle_prims(mesh)
    field = scheme_d_field(mesh)
    lap = cotan_laplacian(mesh, field.H, field.A, prims)
    mom = moments(field)
    f_H, f_AD = curvature_force_density(field.H, field.G, lap, mom.M0, mom.M1, model, R)
    return field, DensityParts(f_H, f_AD, lap)


def scheme_d_force_density(mesh: TriMesh, model: ModelParams, R: float = 1.0) -> np.ndarray:
    """Force density vectors ``f_i n_i`` (inward normal); not an exact energy gradient."""
    field, parts = scheme_d_density_parts(mesh, model, R)
    return parts.total[:, None] * field.n


def scheme_d_force(mesh: TriMesh, model: ModelParams, R: float = 1.0) -> np.ndarray:
    field, parts = scheme_d_density_parts(mesh, model, R)
    return from_density(parts.total[:, None] * field.n, field.A)


def scheme_d_energy_force(mesh: TriMesh, model: ModelParams, R: float = 1.0, want_force: bool = True):
    field, parts = scheme_d_density_parts(mesh, model, R)
    mom = moments(field)
    E_H, E_AD = moment_energy(mom, model, R)
    F = from_density(parts.total[:, None] * field.n, field.A) if want_force else np.zeros_like(mesh.vertices)
    return mom, E_H, E_AD, F


def bending_energy_force(mesh: TriMesh, scheme: str, model: ModelParams, R: float = 1.0, want_force: bool = True):
    """``(Moments | None, E_H, E_AD, F)`` for any scheme.

    Scheme A supports only the minimal model and reports its edge energy
    as ``E_H``.
    """
    s = scheme.upper()
    if s == "A":
        if model.kind != "minimal":
            raise UnsupportedModelError("scheme A supports only the minimal model")
        E, F = kernels.scheme_a(
            mesh.vertices, *_edge_arrays(mesh), model.scheme_a_kappa, model.theta0, False, want_force
        )
        return None, float(E), 0.0, F
    if s == "B":
        return scheme_b_energy_force(mesh, model, R, want_force)
    if s == "C":
        return scheme_c_energy_force(mesh, model, R, want_force)
    if s == "D":
        return scheme_d_energy_force(mesh, model, R, want_force)
    raise ValueError(f"unknown scheme {scheme!r}")
