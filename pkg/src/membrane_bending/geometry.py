"""Primitive geometry on a TriMesh and the exact gradients of each primitive.

Triangle normals are outward.  Vertex normals are inward (so that the
mean curvature of a sphere is positive) and are built from the
angle-weighted sum of incident triangle normals.

Gradient arrays are indexed by local vertex slot: ``(n_elem, slots, 3)``.
For edges the slots are ``(i, j, k, l)``, for triangles ``(a, b, c)`` in
stored order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import MeshError, TriMesh

COT_CAP = 1e8


class DegenerateElementError(MeshError):
    pass


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


@dataclass(frozen=True)
class TrianglePrims:
    area: np.ndarray         # (N_t,)
    normal: np.ndarray       # (N_t, 3) outward unit
    cross: np.ndarray        # (N_t, 3) unnormalized (x_b - x_a) x (x_c - x_a)
    angles: np.ndarray       # (N_t, 3) interior angle at each corner
    cot: np.ndarray          # (N_t, 3)
    cot_clamped: int = 0


@dataclass(frozen=True)
class EdgePrims:
    length: np.ndarray       # (N_e,)
    theta: np.ndarray        # (N_e,) signed, positive where convex
    unit: np.ndarray         # (N_e, 3) along x_j - x_i


def corner_angles(x: np.ndarray, tri: np.ndarray) -> np.ndarray:
    out = np.empty(tri.shape, dtype=float)
    for s in range(3):
        a = x[tri[:, s]]
        p = x[tri[:, (s + 1) % 3]] - a
        q = x[tri[:, (s + 2) % 3]] - a
        out[:, s] = np.arctan2(np.linalg.norm(np.cross(p, q), axis=1), _dot(p, q))
    return out


def triangle_prims(mesh: TriMesh, x: np.ndarray | None = None, check: bool = True) -> TrianglePrims:
    x = mesh.vertices if x is None else x
    t = mesh.triangles
    a, b, c = x[t[:, 0]], x[t[:, 1]], x[t[:, 2]]
    N = np.cross(b - a, c - a)
    norm = np.linalg.norm(N, axis=1)
    area = 0.5 * norm
    if check and len(area):
        bad = np.nonzero(area <= 1e-12 * area.mean())[0]
        if len(bad):
            raise DegenerateElementError(f"degenerate triangle {int(bad[0])} (area {area[bad[0]]:.3e})")
    ang = corner_angles(x, t)
    s = np.sin(ang)
    with np.errstate(divide="ignore", invalid="ignore"):
        cot = np.cos(ang) / s
    over = ~(np.abs(cot) <= COT_CAP)
    n_clamped = int(np.count_nonzero(over))
    if n_clamped:
        cot = np.where(over, np.copysign(COT_CAP, np.nan_to_num(cot, nan=1.0)), cot)
    return TrianglePrims(area, N / norm[:, None], N, ang, cot, n_clamped)


def edge_cross_normals(x: np.ndarray, mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized outward normals of the two wing triangles of every edge."""
    e = mesh.edges
    xi, xj, xk, xl = x[e.i], x[e.j], x[e.k], x[e.l]
    n1 = np.cross(xj - xi, xk - xi)
    n2 = np.cross(xi - xj, xl - xj)
    return n1, n2


def dihedral_angles(mesh: TriMesh, x: np.ndarray | None = None) -> EdgePrims:
    """Edge lengths and signed angles between the wing-triangle normals."""
    x = mesh.vertices if x is None else x
    e = mesh.edges
    d = x[e.j] - x[e.i]
    length = np.linalg.norm(d, axis=1)
    ehat = d / length[:, None]
    n1, n2 = edge_cross_normals(x, mesh)
    m1 = np.linalg.norm(n1, axis=1)
    m2 = np.linalg.norm(n2, axis=1)
    if np.any(m1 == 0) or np.any(m2 == 0):
        raise DegenerateElementError("degenerate wing triangle")
    u1 = n1 / m1[:, None]
    u2 = n2 / m2[:, None]
    theta = np.arctan2(_dot(np.cross(u1, u2), ehat), np.clip(_dot(u1, u2), -1.0, 1.0))
    return EdgePrims(length, theta, ehat)


# ---------------------------------------------------------------------------
# vectorized gradients


def length_gradients(x: np.ndarray, mesh: TriMesh) -> np.ndarray:
    """``(N_e, 2, 3)``: d l_e / d(x_i, x_j)."""
    e = mesh.edges
    d = x[e.j] - x[e.i]
    u = d / np.linalg.norm(d, axis=1)[:, None]
    return np.stack([-u, u], axis=1)


def dihedral_gradients(x: np.ndarray, mesh: TriMesh) -> np.ndarray:
    """``(N_e, 4, 3)``: d theta_e / d(x_i, x_j, x_k, x_l)."""
    e = mesh.edges
    xi, xj, xk, xl = x[e.i], x[e.j], x[e.k], x[e.l]
    d = xj - xi
    l = np.linalg.norm(d, axis=1)
    ehat = d / l[:, None]
    n1, n2 = edge_cross_normals(x, mesh)
    w1 = n1 / _dot(n1, n1)[:, None]
    w2 = n2 / _dot(n2, n2)[:, None]
    gk = -l[:, None] * w1
    gl = -l[:, None] * w2
    gi = -(_dot(xk - xj, ehat)[:, None] * w1 + _dot(xl - xj, ehat)[:, None] * w2)
    gj = _dot(xk - xi, ehat)[:, None] * w1 + _dot(xl - xi, ehat)[:, None] * w2
    return np.stack([gi, gj, gk, gl], axis=1)


def area_gradients(x: np.ndarray, tri: np.ndarray, unit: np.ndarray | None = None) -> np.ndarray:
    """``(N_t, 3, 3)``: d A^t / d(x_a, x_b, x_c)."""
    a, b, c = x[tri[:, 0]], x[tri[:, 1]], x[tri[:, 2]]
    if unit is None:
        N = np.cross(b - a, c - a)
        unit = N / np.linalg.norm(N, axis=1)[:, None]
    return 0.5 * np.stack([np.cross(unit, c - b), np.cross(unit, a - c), np.cross(unit, b - a)], axis=1)


def volume_gradients(x: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """``(N_t, 3, 3)``: d V^t / d(x_a, x_b, x_c) with V^t = x_a . (x_b x x_c) / 6."""
    a, b, c = x[tri[:, 0]], x[tri[:, 1]], x[tri[:, 2]]
    return np.stack([np.cross(b, c), np.cross(c, a), np.cross(a, b)], axis=1) / 6.0


def angle_gradients(x: np.ndarray, tri: np.ndarray, unit: np.ndarray) -> np.ndarray:
    """``(N_t, 3, 3, 3)``: entry ``[t, s, r]`` is d phi_s / d x_{slot r}."""
    out = np.empty((len(tri), 3, 3, 3))
    for s in range(3):
        ra, rb, rc = s, (s + 1) % 3, (s + 2) % 3
        xa = x[tri[:, ra]]
        p = x[tri[:, rb]] - xa
        q = x[tri[:, rc]] - xa
        gb = -np.cross(unit, p) / _dot(p, p)[:, None]
        gc = np.cross(unit, q) / _dot(q, q)[:, None]
        out[:, s, rb] = gb
        out[:, s, rc] = gc
        out[:, s, ra] = -(gb + gc)
    return out


def unit_normal_vjp(x: np.ndarray, tri: np.ndarray, g_unit: np.ndarray) -> np.ndarray:
    """Pull a cotangent on each triangle's outward unit normal back to its vertices."""
    a, b, c = x[tri[:, 0]], x[tri[:, 1]], x[tri[:, 2]]
    p, q = b - a, c - a
    N = np.cross(p, q)
    n = np.linalg.norm(N, axis=1)
    u = N / n[:, None]
    gN = (g_unit - _dot(g_unit, u)[:, None] * u) / n[:, None]
    gb = np.cross(q, gN)
    gc = np.cross(gN, p)
    return np.stack([-(gb + gc), gb, gc], axis=1)


def scatter(n_vertices: int, idx: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Sum per-slot 3-vectors ``vals[(n, slots, 3)]`` into vertices ``idx[(n, slots)]``."""
    out = np.zeros((n_vertices, 3))
    flat = idx.reshape(-1)
    v = vals.reshape(-1, 3)
    for d in range(3):
        out[:, d] = np.bincount(flat, weights=v[:, d], minlength=n_vertices)
    return out


def scatter_scalar(n_vertices: int, idx: np.ndarray, vals: np.ndarray) -> np.ndarray:
    return np.bincount(idx.reshape(-1), weights=vals.reshape(-1), minlength=n_vertices)


def edge_slots(mesh: TriMesh) -> np.ndarray:
    e = mesh.edges
    return np.stack([e.i, e.j, e.k, e.l], axis=1)


# ---------------------------------------------------------------------------
# per-element gradient accessors


def _slot(indices, m: int) -> int | None:
    for s, v in enumerate(indices):
        if int(v) == m:
            return s
    return None


def d_length(mesh: TriMesh, e: int, m: int) -> np.ndarray:
    ed = mesh.edges
    s = _slot((ed.i[e], ed.j[e]), m)
    if s is None:
        return np.zeros(3)
    x = mesh.vertices
    d = x[ed.j[e]] - x[ed.i[e]]
    n = np.linalg.norm(d)
    if n == 0:
        raise DegenerateElementError(f"zero-length edge {e}")
    return d / n if s == 1 else -d / n


def d_dihedral(mesh: TriMesh, e: int, m: int) -> np.ndarray:
    ed = mesh.edges
    s = _slot((ed.i[e], ed.j[e], ed.k[e], ed.l[e]), m)
    if s is None:
        return np.zeros(3)
    sub = _EdgeView(mesh, e)
    return dihedral_gradients(mesh.vertices, sub)[0, s]


def d_tri_area(mesh: TriMesh, t: int, m: int) -> np.ndarray:
    tri = mesh.triangles[t : t + 1]
    s = _slot(tri[0], m)
    if s is None:
        return np.zeros(3)
    x = mesh.vertices
    if np.linalg.norm(np.cross(x[tri[0, 1]] - x[tri[0, 0]], x[tri[0, 2]] - x[tri[0, 0]])) == 0:
        raise DegenerateElementError(f"degenerate triangle {t}")
    return area_gradients(x, tri)[0, s]


def d_tet_volume(mesh: TriMesh, t: int, m: int) -> np.ndarray:
    tri = mesh.triangles[t : t + 1]
    s = _slot(tri[0], m)
    if s is None:
        return np.zeros(3)
    return volume_gradients(mesh.vertices, tri)[0, s]


class _EdgeView:
    """Minimal stand-in exposing a single edge record through ``.edges``."""

    def __init__(self, mesh: TriMesh, e: int):
        ed = mesh.edges
        sl = slice(e, e + 1)
        self.edges = type(ed)(ed.i[sl], ed.j[sl], ed.k[sl], ed.l[sl], ed.t1[sl], ed.t2[sl])


# ---------------------------------------------------------------------------
# vertex quantities


def vertex_area_barycentric(mesh: TriMesh, prims: TrianglePrims | None = None) -> np.ndarray:
    prims = prims or triangle_prims(mesh)
    return scatter_scalar(mesh.n_vertices, mesh.triangles, np.repeat(prims.area[:, None] / 3.0, 3, axis=1))


def voronoi_corner_areas(x: np.ndarray, tri: np.ndarray, cot: np.ndarray) -> np.ndarray:
    """Per-corner Voronoi share ``(N_t, 3)``.

    The edge opposite corner ``s`` contributes ``cot_s |edge|^2 / 8`` to each
    of its two endpoints.
    """
    out = np.zeros(tri.shape)
    for s in range(3):
        b, c = (s + 1) % 3, (s + 2) % 3
        d = x[tri[:, b]] - x[tri[:, c]]
        w = cot[:, s] * _dot(d, d) / 8.0
        out[:, b] += w
        out[:, c] += w
    return out


def vertex_area_voronoi(mesh: TriMesh, prims: TrianglePrims | None = None) -> np.ndarray:
    prims = prims or triangle_prims(mesh)
    corner = voronoi_corner_areas(mesh.vertices, mesh.triangles, prims.cot)
    return scatter_scalar(mesh.n_vertices, mesh.triangles, corner)


def mixed_corner_areas(x: np.ndarray, tri: np.ndarray, prims: TrianglePrims) -> np.ndarray:
    corner = voronoi_corner_areas(x, tri, prims.cot)
    obtuse = prims.angles > np.pi / 2
    any_obt = obtuse.any(axis=1)
    if any_obt.any():
        A = prims.area[any_obt]
        rep = np.where(obtuse[any_obt], 0.5, 0.25) * A[:, None]
        corner[any_obt] = rep
    return corner


def vertex_area_mixed(mesh: TriMesh, prims: TrianglePrims | None = None) -> np.ndarray:
    prims = prims or triangle_prims(mesh)
    corner = mixed_corner_areas(mesh.vertices, mesh.triangles, prims)
    return scatter_scalar(mesh.n_vertices, mesh.triangles, corner)


def vertex_normal_angle_weighted(mesh: TriMesh, prims: TrianglePrims | None = None) -> np.ndarray:
    """Inward unit vertex normals: ``-sum(phi u) / |sum(phi u)|``."""
    prims = prims or triangle_prims(mesh)
    m = -scatter(mesh.n_vertices, mesh.triangles, prims.angles[:, :, None] * prims.normal[:, None, :])
    return m / np.linalg.norm(m, axis=1)[:, None]


def angle_sums(mesh: TriMesh, prims: TrianglePrims | None = None) -> np.ndarray:
    prims = prims or triangle_prims(mesh)
    return scatter_scalar(mesh.n_vertices, mesh.triangles, prims.angles)


def triangle_volumes(x: np.ndarray, tri: np.ndarray) -> np.ndarray:
    a, b, c = x[tri[:, 0]], x[tri[:, 1]], x[tri[:, 2]]
    return _dot(a, np.cross(b, c)) / 6.0


def total_area(mesh: TriMesh) -> float:
    x, t = mesh.vertices, mesh.triangles
    return 0.5 * float(np.linalg.norm(np.cross(x[t[:, 1]] - x[t[:, 0]], x[t[:, 2]] - x[t[:, 0]]), axis=1).sum())


def total_volume(mesh: TriMesh) -> float:
    # centering first keeps the sum well conditioned for translated meshes
    x = mesh.vertices - mesh.vertices.mean(axis=0)
    return float(triangle_volumes(x, mesh.triangles).sum())


def reduced_volume(mesh: TriMesh) -> float:
    A = total_area(mesh)
    R = np.sqrt(A / (4 * np.pi))
    return 3.0 * total_volume(mesh) / (4.0 * np.pi * R**3)
