"""Closed oriented triangle meshes: construction, refinement and checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np

# Evans-Fung biconcave profile coefficients
BICONCAVE_COEFFS = (0.207161, 2.002558, -1.122762)

DEGENERATE_FLOOR = 1e-12


class MeshError(ValueError):
    """Raised when a mesh violates the closed-manifold contract."""


@dataclass(frozen=True)
class EdgeTable:
    """Edge ``<i, j>`` shared by triangles ``t1 = <i, j, k>`` and ``t2 = <j, i, l>``."""

    i: np.ndarray
    j: np.ndarray
    k: np.ndarray
    l: np.ndarray
    t1: np.ndarray
    t2: np.ndarray

    def __len__(self) -> int:
        return len(self.i)

    def as_array(self) -> np.ndarray:
        return np.stack([self.i, self.j, self.k, self.l, self.t1, self.t2], axis=1)


def _csr(keys: np.ndarray, values: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(keys, kind="stable")
    counts = np.bincount(keys, minlength=n)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets, values[order]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class TriMesh:
    """Indexed triangle mesh, triangles counter-clockwise seen from outside.

    Instances are treated as immutable: arrays are read-only and every
    operation returns a new mesh.  Connectivity tables are built lazily,
    and :meth:`with_vertices` shares them between meshes with identical
    topology (the common case during time integration).
    """

    def __init__(self, vertices, triangles):
        v = np.array(vertices, dtype=np.float64)
        t = np.array(triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must have shape (N, 3), got {v.shape}")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError(f"triangles must have shape (N, 3), got {t.shape}")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle index out of range")
        self.vertices = _readonly(v)
        self.triangles = _readonly(t)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def __repr__(self) -> str:
        return f"TriMesh(n_vertices={self.n_vertices}, n_triangles={self.n_triangles})"

    def with_vertices(self, vertices) -> "TriMesh":
        """Same connectivity, new positions; cached tables are shared."""
        new = TriMesh.__new__(TriMesh)
        v = np.array(vertices, dtype=np.float64)
        if v.shape != self.vertices.shape:
            raise MeshError("vertex array shape changed")
        new.vertices = _readonly(v)
        new.triangles = self.triangles
        for name in ("edges", "vertex_edges", "vertex_triangles", "edge_index"):
            if name in self.__dict__:
                new.__dict__[name] = self.__dict__[name]
        return new

    def translated(self, shift) -> "TriMesh":
        return self.with_vertices(self.vertices + np.asarray(shift, dtype=float))

    def scaled(self, factor: float) -> "TriMesh":
        return self.with_vertices(self.vertices * factor)

    @cached_property
    def edges(self) -> EdgeTable:
        return _build_edges(self.triangles, self.n_vertices)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        e = self.edges
        return {(int(a), int(b)): n for n, (a, b) in enumerate(zip(e.i, e.j))}

    @cached_property
    def vertex_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR ``(offsets, edge_ids)`` of edges incident to each vertex."""
        e = self.edges
        ids = np.arange(len(e), dtype=np.int64)
        return _csr(np.concatenate([e.i, e.j]), np.concatenate([ids, ids]), self.n_vertices)

    @cached_property
    def vertex_triangles(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR ``(offsets, triangle_ids)`` of triangles incident to each vertex."""
        ids = np.repeat(np.arange(self.n_triangles, dtype=np.int64), 3)
        return _csr(self.triangles.ravel(), ids, self.n_vertices)

    def valence(self) -> np.ndarray:
        return np.diff(self.vertex_edges[0])


def _build_edges(tri: np.ndarray, n_vertices: int) -> EdgeTable:
    n_t = len(tri)
    src = tri.ravel()
    dst = tri[:, [1, 2, 0]].ravel()
    opp = tri[:, [2, 0, 1]].ravel()
    owner = np.repeat(np.arange(n_t, dtype=np.int64), 3)
    key = src * n_vertices + dst
    order = np.argsort(key, kind="stable")
    skey = key[order]
    if np.any(skey[1:] == skey[:-1]):
        raise MeshError("directed edge used twice: inconsistent orientation or non-manifold edge")
    fwd = np.nonzero(src < dst)[0]
    twin_key = dst[fwd] * n_vertices + src[fwd]
    pos = np.searchsorted(skey, twin_key)
    pos_c = np.minimum(pos, len(skey) - 1)
    found = skey[pos_c] == twin_key
    n_back = int(np.count_nonzero(src > dst))
    if not np.all(found) or n_back != len(fwd):
        raise MeshError("mesh is not closed: boundary edge without a twin")
    twin = order[pos_c]
    return EdgeTable(
        i=_readonly(src[fwd]),
        j=_readonly(dst[fwd]),
        k=_readonly(opp[fwd]),
        l=_readonly(opp[twin]),
        t1=_readonly(owner[fwd]),
        t2=_readonly(owner[twin]),
    )


# ---------------------------------------------------------------------------
# generation and refinement


def icosahedron(R: float = 1.0) -> TriMesh:
    p = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
            [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
            [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1],
        ],
        dtype=float,
    )
    t = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    v *= R / np.linalg.norm(v, axis=1, keepdims=True)
    # enforce outward orientation face by face
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    inward = np.einsum("ij,ij->i", np.cross(b - a, c - a), a + b + c) < 0
    t[inward] = t[inward][:, [0, 2, 1]]
    return TriMesh(v, t)


def _split_topology(mesh: TriMesh) -> np.ndarray:
    """Triangles of the 1-to-4 split; edge ``e`` gets new vertex ``N_v + e``."""
    e = mesh.edges
    n_v = mesh.n_vertices
    lookup = mesh.edge_index
    t = mesh.triangles

    def mid(a, b):
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        return np.fromiter((lookup[(x, y)] for x, y in zip(lo.tolist(), hi.tolist())), np.int64, len(lo)) + n_v

    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    mab, mbc, mca = mid(a, b), mid(b, c), mid(c, a)
    del e
    return np.concatenate(
        [
            np.stack([a, mab, mca], axis=1),
            np.stack([b, mbc, mab], axis=1),
            np.stack([c, mca, mbc], axis=1),
            np.stack([mab, mbc, mca], axis=1),
        ]
    )


def midpoint_subdivide(mesh: TriMesh) -> TriMesh:
    e = mesh.edges
    x = mesh.vertices
    new_v = np.concatenate([x, 0.5 * (x[e.i] + x[e.j])])
    return TriMesh(new_v, _split_topology(mesh))


def loop_subdivide(mesh: TriMesh) -> TriMesh:
    """One step of Loop subdivision (standard even/odd stencils)."""
    e = mesh.edges
    x = mesh.vertices
    odd = 0.375 * (x[e.i] + x[e.j]) + 0.125 * (x[e.k] + x[e.l])
    nbr_sum = np.zeros_like(x)
    np.add.at(nbr_sum, e.i, x[e.j])
    np.add.at(nbr_sum, e.j, x[e.i])
    n = mesh.valence().astype(float)
    beta = (0.625 - (0.375 + 0.25 * np.cos(2.0 * np.pi / n)) ** 2) / n
    even = (1.0 - n * beta)[:, None] * x + beta[:, None] * nbr_sum
    return TriMesh(np.concatenate([even, odd]), _split_topology(mesh))


def build_icosphere(subdivision_level: int, R: float = 1.0) -> TriMesh:
    """Icosahedron refined ``subdivision_level`` times, projected onto radius ``R``.

    Midpoint refinement followed by radial projection keeps every vertex
    exactly on the sphere.
    """
    if subdivision_level < 0:
        raise ValueError("subdivision_level must be >= 0")
    mesh = icosahedron(1.0)
    for _ in range(subdivision_level):
        mesh = midpoint_subdivide(mesh)
        x = mesh.vertices
        mesh = mesh.with_vertices(x / np.linalg.norm(x, axis=1, keepdims=True))
    return mesh.with_vertices(mesh.vertices * R)


def level_for_triangles(n_triangles: int) -> int:
    level = 0
    while 20 * 4**level < n_triangles:
        level += 1
    if 20 * 4**level != n_triangles:
        raise ValueError(f"icospheres have 20*4^k triangles; got {n_triangles}")
    return level


# ---------------------------------------------------------------------------
# target shapes

ShapeKind = Literal["sphere", "prolate", "oblate", "biconcave"]


@dataclass(frozen=True)
class ShapeSpec:
    kind: ShapeKind = "sphere"
    v: float | None = None
    R: float = 1.0
    v_floor: float = 0.05

    def __post_init__(self):
        if self.kind not in ("sphere", "prolate", "oblate", "biconcave"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.R <= 0:
            raise ValueError("R must be positive")
        if self.kind in ("prolate", "oblate"):
            if self.v is None:
                raise ValueError("ellipsoids need a target reduced volume v")
            if not (self.v_floor <= self.v < 1.0):
                raise ValueError(
                    f"reduced volume {self.v} outside [{self.v_floor}, 1) for an ellipsoid"
                )


_GL_U, _GL_W = np.polynomial.legendre.leggauss(96)


def spheroid_area(a: float, c: float) -> float:
    """Area of the spheroid with semi-axes (a, a, c) by Gauss-Legendre quadrature."""
    u = 0.5 * np.pi * (_GL_U + 1.0)
    w = 0.5 * np.pi * _GL_W
    s = np.sin(u)
    return float(2.0 * np.pi * a * np.sum(w * s * np.sqrt((c * s) ** 2 + (a * np.cos(u)) ** 2)))


def spheroid_reduced_volume(ratio: float) -> float:
    """Reduced volume of the spheroid with axis ratio ``c/a``."""
    s = spheroid_area(1.0, ratio)
    return ratio * (4.0 * np.pi / s) ** 1.5


def spheroid_axes(kind: str, v: float, R: float = 1.0, tol: float = 1e-10) -> tuple[float, float]:
    """Semi-axes ``(a, c)`` with area ``4 pi R^2`` and reduced volume ``v``."""
    if kind == "oblate":
        lo, hi = 1e-9, 1.0
    else:
        lo, hi = 1.0, 1e6
    # v(ratio) increases on the oblate bracket and decreases on the prolate one
    increasing = kind == "oblate"
    for _ in range(400):
        mid = 0.5 * (lo + hi) if kind == "oblate" else math.sqrt(lo * hi)
        vm = spheroid_reduced_volume(mid)
        if abs(vm - v) < tol:
            break
        if (vm < v) == increasing:
            lo = mid
        else:
            hi = mid
    ratio = mid
    a = R * math.sqrt(4.0 * np.pi / spheroid_area(1.0, ratio))
    return a, ratio * a


def biconcave_height(p_z, R: float = 1.0, coeffs=BICONCAVE_COEFFS):
    c0, c1, c2 = coeffs
    s2 = 1.0 - np.asarray(p_z) ** 2
    return 0.5 * R * p_z * (c0 + c1 * s2 + c2 * s2 * s2)


def map_to_shape(mesh: TriMesh, spec: ShapeSpec) -> TriMesh:
    """Map an icosphere onto the target surface; connectivity is untouched."""
    r = np.linalg.norm(mesh.vertices, axis=1)
    if r.min() <= 0 or np.ptp(r) > 1e-8 * r.mean():
        raise MeshError("map_to_shape expects an icosphere (all vertices on one sphere)")
    p = mesh.vertices / r[:, None]
    R = spec.R
    if spec.kind == "sphere":
        x = R * p
    elif spec.kind in ("prolate", "oblate"):
        a, c = spheroid_axes(spec.kind, float(spec.v), R)
        x = p * np.array([a, a, c])
    else:
        x = np.column_stack([R * p[:, 0], R * p[:, 1], biconcave_height(p[:, 2], R)])
    return mesh.with_vertices(x)


# ---------------------------------------------------------------------------
# equiangulation


def _angle(a, b, c) -> float:
    """Angle at ``a`` in triangle (a, b, c)."""
    u = b - a
    w = c - a
    return math.atan2(np.linalg.norm(np.cross(u, w)), float(np.dot(u, w)))


def equiangulate(mesh: TriMesh, max_passes: int = 100, tol: float = 1e-12) -> tuple[TriMesh, int]:
    """Flip edges whose two opposite angles sum to more than pi.

    Flips that would duplicate an edge, drop a vertex below valence 3 or
    create a degenerate triangle are skipped.
    """
    x = mesh.vertices
    tri = mesh.triangles.copy()
    e = mesh.edges
    owners: dict[tuple[int, int], list[int]] = {}
    for n in range(len(e)):
        owners[(int(e.i[n]), int(e.j[n]))] = [int(e.t1[n]), int(e.t2[n])]
    valence = mesh.valence().copy()
    mean_area = float(np.mean(_tri_areas(x, tri)))
    floor = DEGENERATE_FLOOR * mean_area
    flips = 0
    for _ in range(max_passes):
        flipped = 0
        for key in list(owners.keys()):
            if key not in owners:
                continue
            i, j = key
            ta, tb = owners[key]
            # orient so that ta = <i, j, k>
            if not _has_directed(tri[ta], i, j):
                ta, tb = tb, ta
            k = _third(tri[ta], i, j)
            l = _third(tri[tb], i, j)
            if k == l or valence[i] <= 3 or valence[j] <= 3:
                continue
            kl = (min(k, l), max(k, l))
            if kl in owners:
                continue
            if _angle(x[k], x[i], x[j]) + _angle(x[l], x[i], x[j]) <= np.pi + tol:
                continue
            new_a = (k, i, l)
            new_b = (l, j, k)
            if _area(x, new_a) <= floor or _area(x, new_b) <= floor:
                continue
            tri[ta] = new_a
            tri[tb] = new_b
            del owners[key]
            owners[kl] = [ta, tb]
            _swap_owner(owners, j, k, ta, tb)
            _swap_owner(owners, i, l, tb, ta)
            valence[i] -= 1
            valence[j] -= 1
            valence[k] += 1
            valence[l] += 1
            flipped += 1
        flips += flipped
        if flipped == 0:
            break
    if flips == 0:
        return mesh, 0
    return TriMesh(x, tri), flips


def _has_directed(t, a, b) -> bool:
    t0, t1, t2 = int(t[0]), int(t[1]), int(t[2])
    return (t0, t1) == (a, b) or (t1, t2) == (a, b) or (t2, t0) == (a, b)


def _third(t, a, b) -> int:
    for v in t:
        if v != a and v != b:
            return int(v)
    raise MeshError("degenerate triangle with repeated vertex")


def _swap_owner(owners, a, b, old, new):
    lst = owners[(min(a, b), max(a, b))]
    lst[lst.index(old)] = new


def _area(x, t) -> float:
    a, b, c = x[t[0]], x[t[1]], x[t[2]]
    return 0.5 * float(np.linalg.norm(np.cross(b - a, c - a)))


def _tri_areas(x, tri) -> np.ndarray:
    a, b, c = x[tri[:, 0]], x[tri[:, 1]], x[tri[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


# ---------------------------------------------------------------------------
# validation


@dataclass
class MeshDiagnostics:
    n_vertices: int
    n_edges: int
    n_triangles: int
    euler: int
    boundary_edges: int = 0
    nonmanifold_edges: int = 0
    orientation_errors: int = 0
    duplicate_triangles: int = 0
    degenerate_triangles: int = 0
    isolated_vertices: int = 0
    min_area: float = math.nan
    max_area: float = math.nan
    min_angle: float = math.nan
    max_angle: float = math.nan
    messages: list[str] = field(default_factory=list)

    @property
    def closed(self) -> bool:
        return self.boundary_edges == 0 and self.nonmanifold_edges == 0

    @property
    def ok(self) -> bool:
        return not self.messages

    def summary(self) -> str:
        head = (
            f"N_v={self.n_vertices} N_e={self.n_edges} N_t={self.n_triangles} chi={self.euler} "
            f"area=[{self.min_area:.6g}, {self.max_area:.6g}] "
            f"angle=[{math.degrees(self.min_angle):.3f}, {math.degrees(self.max_angle):.3f}] deg"
        )
        return "\n".join([head, *self.messages]) if self.messages else head + "\nok"


def validate(mesh: TriMesh, floor: float = DEGENERATE_FLOOR) -> MeshDiagnostics:
    """Report closedness, orientation, Euler characteristic and element quality."""
    x = mesh.vertices
    t = mesh.triangles
    n_v, n_t = len(x), len(t)
    src = t.ravel()
    dst = t[:, [1, 2, 0]].ravel()
    directed = np.stack([src, dst], axis=1)
    und = np.sort(directed, axis=1)
    uniq_und, und_counts = np.unique(und, axis=0, return_counts=True)
    _, dir_counts = np.unique(directed, axis=0, return_counts=True)
    n_e = len(uniq_und)
    diag = MeshDiagnostics(n_v, n_e, n_t, n_v - n_e + n_t)
    diag.boundary_edges = int(np.count_nonzero(und_counts == 1))
    diag.nonmanifold_edges = int(np.count_nonzero(und_counts > 2))
    diag.orientation_errors = int(np.count_nonzero(dir_counts > 1))
    diag.duplicate_triangles = n_t - len(np.unique(np.sort(t, axis=1), axis=0))
    diag.isolated_vertices = n_v - len(np.unique(src))
    if n_t:
        a, b, c = x[t[:, 0]], x[t[:, 1]], x[t[:, 2]]
        area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
        diag.min_area, diag.max_area = float(area.min()), float(area.max())
        diag.degenerate_triangles = int(np.count_nonzero(area <= floor * area.mean()))
        ang = []
        for p, q, r in ((a, b, c), (b, c, a), (c, a, b)):
            u, w = q - p, r - p
            ang.append(np.arctan2(np.linalg.norm(np.cross(u, w), axis=1), np.einsum("ij,ij->i", u, w)))
        ang = np.stack(ang)
        diag.min_angle, diag.max_angle = float(ang.min()), float(ang.max())
    if diag.boundary_edges:
        diag.messages.append(f"boundary edge: {diag.boundary_edges} edge(s) with a single triangle")
    if diag.nonmanifold_edges:
        diag.messages.append(f"non-manifold edge: {diag.nonmanifold_edges} edge(s) with >2 triangles")
    if diag.orientation_errors:
        diag.messages.append(
            f"orientation inconsistency: {diag.orientation_errors} directed edge(s) used twice"
        )
    if diag.duplicate_triangles:
        diag.messages.append(f"duplicate triangles: {diag.duplicate_triangles}")
    if diag.degenerate_triangles:
        diag.messages.append(f"degenerate triangles: {diag.degenerate_triangles}")
    if diag.isolated_vertices:
        diag.messages.append(f"isolated vertices: {diag.isolated_vertices}")
    if diag.euler != 2:
        diag.messages.append(f"Euler characteristic {diag.euler} != 2 (genus 0 expected)")
    return diag
