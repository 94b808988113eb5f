"""Shape descriptors and a geometric classifier for axisymmetric-like vesicles.

Definitions used by the classifier:

* symmetry axis: the principal axis of the vertex cloud whose inertia
  eigenvalue is farthest from the other two; for nearly isotropic shapes a
  cup is also searched for along the other principal axes, the offset of
  the volume centroid from the membrane centroid, and the line from the
  rim of the largest negative-H patch through its centroid;
* meridian profile: the closed curve cut by a plane containing the axis,
  with H interpolated linearly along mesh edges; its cyclic sign changes
  (ignoring samples with ``|H| < threshold / R``, R the equal-area sphere
  radius) separate convex shapes (0), stomatocytes (2) and biconcave
  discocytes (4);
* dimple: mean H of the vertices nearest to each axis pole is negative;
* axial cavity: difference of the exterior gaps the symmetry axis crosses
  at its two ends, over the axial extent; a stomatocyte has two sign
  changes, a negative pole and an axial cavity above ``cavity_depth``
  (a neck also raises the convex-hull cavity volume, so that is reported
  but not used);
* dumbbell: the cross-sectional area along the long axis has two local
  maxima separated by a neck at most ``neck_ratio`` of the smaller one.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull

from .geometry import total_area, total_volume
from .mesh import TriMesh


def principal_axes(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(center, eigenvalues, eigenvectors)`` of the vertex inertia tensor (ascending)."""
    x = mesh.vertices
    c = x.mean(axis=0)
    d = x - c
    r2 = np.sum(d * d, axis=1)
    inertia = np.eye(3) * r2.sum() - d.T @ d
    w, V = np.linalg.eigh(inertia)
    return c, w, V


def centroid_offset(mesh: TriMesh) -> np.ndarray:
    """Enclosed-volume centroid minus membrane (area-weighted) centroid."""
    x = mesh.vertices
    a, b, c = (x[mesh.triangles[:, k]] for k in range(3))
    cross = np.cross(b - a, c - a)
    area = 0.5 * np.linalg.norm(cross, axis=1)
    tri_c = (a + b + c) / 3.0
    o = np.sum(area[:, None] * tri_c, axis=0) / area.sum()
    vol = np.einsum("ij,ij->i", a - o, np.cross(b - o, c - o)) / 6.0
    vol_c = o + np.sum(vol[:, None] * (a + b + c - 3.0 * o), axis=0) / (4.0 * vol.sum())
    return vol_c - o


def symmetry_axis(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray, str]:
    """Unique principal axis and whether it is the ``long`` or ``short`` one."""
    c, w, V = principal_axes(mesh)
    # smallest eigenvalue unique -> elongated (long axis); largest unique -> flattened
    if (w[1] - w[0]) > (w[2] - w[1]):
        return c, V[:, 0], "long"
    return c, V[:, 2], "short"


def neck_axis(mesh: TriMesh, H: np.ndarray, cut: float) -> tuple[np.ndarray, np.ndarray] | None:
    """Line from the rim of the largest ``H < -cut`` patch through the patch centroid.

    For a stomatocyte the patch is the invagination and its rim the neck, so
    the line enters the cavity through the neck whatever the outer shape.
    """
    pocket = H < -cut
    if pocket.sum() < 4 or pocket.all():
        return None
    e = mesh.edges
    inner = pocket[e.i] & pocket[e.j]
    n = mesh.n_vertices
    graph = coo_matrix((np.ones(inner.sum()), (e.i[inner], e.j[inner])), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    big = np.bincount(comp[pocket]).argmax()
    patch = pocket & (comp == big)
    cross = patch[e.i] != patch[e.j]
    ends = np.concatenate([e.i[cross], e.j[cross]])
    rim = np.zeros(n, dtype=bool)
    rim[ends[patch[ends]]] = True
    if not rim.any():
        return None
    x = mesh.vertices
    start = x[rim].mean(axis=0)
    d = x[patch].mean(axis=0) - start
    if np.linalg.norm(d) == 0:
        return None
    return start, d / np.linalg.norm(d)


def _perpendicular(a: np.ndarray, angle: float = 0.3183) -> np.ndarray:
    ref = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    p = np.cross(a, ref)
    p /= np.linalg.norm(p)
    q = np.cross(a, p)
    return np.cos(angle) * p + np.sin(angle) * q


def plane_section(mesh: TriMesh, point: np.ndarray, normal: np.ndarray, values: np.ndarray | None = None):
    """Closed polylines where the plane cuts the mesh.

    Returns a list of ``(points (n, 3), values (n,))`` loops, longest first.
    """
    x = mesh.vertices
    s = (x - point) @ normal
    s = np.where(s == 0.0, 1e-15, s)
    vals = np.zeros(len(x)) if values is None else np.asarray(values, dtype=float)
    t = mesh.triangles
    sign = s[t] > 0
    crossing = np.nonzero(sign.any(axis=1) & ~sign.all(axis=1))[0]
    adj: dict[tuple[int, int], list] = {}
    for tri in t[crossing]:
        ends = []
        for r in range(3):
            a, b = int(tri[r]), int(tri[(r + 1) % 3])
            if (s[a] > 0) != (s[b] > 0):
                ends.append((min(a, b), max(a, b)))
        if len(ends) == 2:
            adj.setdefault(ends[0], []).append(ends[1])
            adj.setdefault(ends[1], []).append(ends[0])
    seen = set()
    loops = []
    for start in adj:
        if start in seen:
            continue
        chain = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            options = [n for n in adj[cur] if n != prev and n not in seen]
            if not options:
                break
            prev, cur = cur, options[0]
            seen.add(cur)
            chain.append(cur)
        pts, vs = [], []
        for a, b in chain:
            w = s[a] / (s[a] - s[b])
            pts.append(x[a] + w * (x[b] - x[a]))
            vs.append(vals[a] + w * (vals[b] - vals[a]))
        loops.append((np.array(pts), np.array(vs)))
    loops.sort(key=lambda lp: -_loop_length(lp[0]))
    return loops


def _loop_length(p: np.ndarray) -> float:
    if len(p) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)))


def cyclic_sign_changes(values: np.ndarray, cut: float = 0.0) -> int:
    """Sign changes around a closed loop, skipping samples with ``|value| <= cut``."""
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return 0
    signs = np.sign(v[np.abs(v) > cut])
    if len(signs) < 2:
        return 0
    return int(np.count_nonzero(signs != np.roll(signs, 1)))


def meridian_profile(mesh: TriMesh, H: np.ndarray, axis=None):
    c, a, _ = symmetry_axis(mesh) if axis is None else (*axis, None)
    loops = plane_section(mesh, c, _perpendicular(a), H)
    return loops[0] if loops else (np.zeros((0, 3)), np.zeros(0))


def axis_intersections(mesh: TriMesh, center: np.ndarray, axis: np.ndarray) -> np.ndarray:
    """Sorted axial coordinates where the symmetry axis line pierces the surface."""
    x = mesh.vertices - center
    t = mesh.triangles
    p = _perpendicular(axis, 0.0)
    q = np.cross(axis, p)
    uv = np.stack([x @ p, x @ q], axis=1)
    h = x @ axis
    a, b, cc = uv[t[:, 0]], uv[t[:, 1]], uv[t[:, 2]]

    def edge(o, d):
        return (d[:, 0] - o[:, 0]) * (-o[:, 1]) - (d[:, 1] - o[:, 1]) * (-o[:, 0])

    e1, e2, e3 = edge(b, cc), edge(cc, a), edge(a, b)
    hit = ((e1 >= 0) & (e2 >= 0) & (e3 >= 0)) | ((e1 <= 0) & (e2 <= 0) & (e3 <= 0))
    w = np.stack([e1[hit], e2[hit], e3[hit]], axis=1)
    tot = w.sum(axis=1)
    ok = tot != 0
    z = np.sort(np.sum(w[ok] / tot[ok, None] * h[t[hit][ok]], axis=1))
    # an axis through a vertex or edge hits every incident triangle at one point
    tol = 1e-9 * max(float(np.ptp(h)), 1e-300)
    return z[np.concatenate([[True], np.diff(z) > tol])] if len(z) else z


def axis_crossings(mesh: TriMesh, center: np.ndarray, axis: np.ndarray) -> int:
    """Number of triangles pierced by the symmetry axis line."""
    return len(axis_intersections(mesh, center, axis))


def axial_cavity(mesh: TriMesh, center: np.ndarray, axis: np.ndarray) -> float:
    """Asymmetry of the on-axis exterior gaps at the two ends, relative to the axial extent.

    Each gap runs from the outermost axis crossing to the farthest vertex on
    that side.  A cup-shaped invagination leaves one deep gap; biconcave
    dimples leave two equal ones; convex and dumbbell shapes leave none.
    """
    h = (mesh.vertices - center) @ axis
    s = axis_intersections(mesh, center, axis)
    extent = h.max() - h.min()
    if len(s) == 0 or extent <= 0:
        return 0.0
    top, bottom = h.max() - s[-1], s[0] - h.min()
    return float(abs(top - bottom) / extent)


def pole_curvature(mesh: TriMesh, H: np.ndarray, center: np.ndarray, axis: np.ndarray, k: int = 6):
    """Mean H of the ``k`` vertices closest to the axis on each side of the center."""
    d = mesh.vertices - center
    h = d @ axis
    r = np.linalg.norm(d - np.outer(h, axis), axis=1)
    out = []
    for side in (h > 0, h <= 0):
        idx = np.nonzero(side)[0]
        near = idx[np.argsort(r[idx])[:k]]
        out.append(float(np.mean(H[near])) if len(near) else np.nan)
    return tuple(out)


def cavity_volume(mesh: TriMesh) -> float:
    return float(ConvexHull(mesh.vertices).volume) - total_volume(mesh)


def section_areas(mesh: TriMesh, center, axis, n: int = 41) -> tuple[np.ndarray, np.ndarray]:
    """Cross-sectional area at ``n`` planes perpendicular to ``axis``."""
    h = (mesh.vertices - center) @ axis
    zs = np.linspace(h.min(), h.max(), n + 2)[1:-1]
    areas = np.zeros(n)
    for m, z in enumerate(zs):
        for pts, _ in plane_section(mesh, center + z * axis, axis):
            if len(pts) > 2:
                q = np.roll(pts, -1, axis=0)
                areas[m] += abs(0.5 * float(np.sum(np.cross(pts - center, q - center) @ axis)))
    return zs, areas


def count_lobes(areas: np.ndarray, neck_ratio: float = 0.95) -> int:
    """Local maxima of a sampled profile separated by a significant neck."""
    a = np.asarray(areas)
    peaks = [i for i in range(1, len(a) - 1) if a[i] >= a[i - 1] and a[i] > a[i + 1]]
    if not peaks:
        return 1 if len(a) else 0
    kept = [peaks[0]]
    for p in peaks[1:]:
        neck = a[kept[-1]:p + 1].min()
        if neck <= neck_ratio * min(a[kept[-1]], a[p]):
            kept.append(p)
        elif a[p] > a[kept[-1]]:
            kept[-1] = p
    return len(kept)


@dataclass
class ShapeReport:
    label: str
    axis_kind: str
    sign_changes: int
    pole_H: tuple[float, float]
    axis_crossings: int
    cavity_volume: float
    axial_cavity: float
    lobes: int
    reduced_volume: float
    asphericity: float

    def as_dict(self) -> dict:
        return asdict(self)


def cup_axis(mesh: TriMesh, H: np.ndarray, cut: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Candidate axis with the deepest axial cavity, for nearly isotropic shapes.

    Candidates are the three principal axes, the centroid offset and the
    neck axis; the returned center is the vertex centroid projected on the line.
    """
    c, _, V = principal_axes(mesh)
    lines = [(c, V[:, k]) for k in range(3)]
    d = centroid_offset(mesh)
    if np.linalg.norm(d) > 0:
        lines.append((c, d / np.linalg.norm(d)))
    neck = neck_axis(mesh, H, cut)
    if neck is not None:
        lines.append(neck)
    best = (c, V[:, 2], -1.0)
    for p, a in lines:
        p = p + ((c - p) @ a) * a
        depth = axial_cavity(mesh, p, a)
        if depth > best[2]:
            best = (p, a, depth)
    return best


def classify(mesh: TriMesh, H: np.ndarray, threshold: float = 0.1, neck_ratio: float = 0.95,
             cavity_depth: float = 0.3, isotropy: float = 0.1) -> ShapeReport:
    """Label a closed vesicle as sphere/prolate/dumbbell/oblate/biconcave/stomatocyte/other."""
    c, w, _ = principal_axes(mesh)
    asph = float((w[2] - w[0]) / w.sum())
    center, axis, kind = symmetry_axis(mesh)
    A = total_area(mesh)
    V = total_volume(mesh)
    R = np.sqrt(A / (4 * np.pi))
    v = 3 * V / (4 * np.pi * R**3)
    cut = threshold / R
    cav = cavity_volume(mesh)
    if asph < isotropy:
        # the inertia axes of a nearly round outline say nothing about where a cup opens
        p, a, depth = cup_axis(mesh, H, cut)
        _, hv = meridian_profile(mesh, H, (p, a))
        changes = cyclic_sign_changes(hv, cut)
        poles = pole_curvature(mesh, H, p, a)
        if changes == 2 and min(poles) < 0 and depth > cavity_depth:
            return ShapeReport("stomatocyte", "cup", changes, poles, axis_crossings(mesh, p, a), cav, depth, 1,
                               float(v), asph)
    _, hv = meridian_profile(mesh, H, (center, axis))
    changes = cyclic_sign_changes(hv, cut)
    poles = pole_curvature(mesh, H, center, axis)
    crossings = axis_crossings(mesh, center, axis)
    axial = axial_cavity(mesh, center, axis)
    lobes = 1
    if kind == "long":
        _, areas = section_areas(mesh, center, axis)
        lobes = count_lobes(areas, neck_ratio)
    if asph < 1e-3 and changes == 0:
        label = "sphere"
    elif changes == 2 and min(poles) < 0 and axial > cavity_depth:
        label = "stomatocyte"
    elif kind == "long":
        label = "dumbbell" if lobes >= 2 else ("prolate" if changes == 0 else "other")
    elif changes == 4 and poles[0] < 0 and poles[1] < 0:
        label = "biconcave"
    elif changes == 0:
        label = "oblate"
    else:
        label = "other"
    return ShapeReport(label, kind, changes, poles, crossings, cav, axial, lobes, float(v), asph)
