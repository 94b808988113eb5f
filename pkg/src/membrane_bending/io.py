"""OFF and OBJ readers/writers for closed triangle meshes."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import MeshError, TriMesh, validate


class MeshParseError(ValueError):
    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.line = line


def _format_for(path: Path, fmt: str | None) -> str:
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if fmt not in ("off", "obj"):
        raise ValueError(f"unsupported mesh format {fmt!r} (expected off or obj)")
    return fmt


def _content_lines(text: str):
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield n, line


def _parse_off(text: str, path) -> tuple[np.ndarray, np.ndarray]:
    lines = list(_content_lines(text))
    if not lines:
        raise MeshParseError(path, 1, "empty file")
    n, first = lines[0]
    pos = 0
    if first.upper().startswith("OFF"):
        rest = first[3:].strip()
        if rest:
            lines[0] = (n, rest)
        else:
            pos = 1
    else:
        raise MeshParseError(path, n, "missing OFF header")
    if pos >= len(lines):
        raise MeshParseError(path, n, "missing element counts")
    counts_line, counts = lines[pos]
    n = counts_line
    try:
        n_v, n_t, n_e = (int(s) for s in counts.split()[:3])
    except ValueError:
        raise MeshParseError(path, n, f"bad count line {counts!r}") from None
    pos += 1
    body = lines[pos:]
    if len(body) < n_v + n_t:
        last = body[-1][0] if body else n
        raise MeshParseError(path, last, f"header declares {n_v} vertices and {n_t} faces, body is shorter")
    if len(body) > n_v + n_t:
        raise MeshParseError(path, body[n_v + n_t][0], "trailing data beyond declared element counts")
    verts = np.empty((n_v, 3))
    for r, (n, line) in enumerate(body[:n_v]):
        parts = line.split()
        try:
            verts[r] = [float(s) for s in parts[:3]]
        except ValueError:
            raise MeshParseError(path, n, f"bad vertex {line!r}") from None
        if len(parts) < 3:
            raise MeshParseError(path, n, "vertex needs 3 coordinates")
    tris = np.empty((n_t, 3), dtype=np.int64)
    for r, (n, line) in enumerate(body[n_v:]):
        try:
            parts = [int(s) for s in line.split()]
        except ValueError:
            raise MeshParseError(path, n, f"bad face {line!r}") from None
        if not parts or parts[0] != 3 or len(parts) < 4:
            raise MeshParseError(path, n, "triangles only")
        idx = parts[1:4]
        if min(idx) < 0 or max(idx) >= n_v:
            raise MeshParseError(path, n, "face index out of range")
        tris[r] = idx
    n_e_actual = len({tuple(sorted(p)) for t in tris.tolist() for p in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0]))})
    if n_e and n_e != n_e_actual:
        raise MeshParseError(path, counts_line, f"header declares {n_e} edges, faces define {n_e_actual}")
    return verts, tris


def _parse_obj(text: str, path) -> tuple[np.ndarray, np.ndarray]:
    verts, tris = [], []
    for n, line in _content_lines(text):
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            try:
                verts.append([float(s) for s in parts[1:4]])
            except ValueError:
                raise MeshParseError(path, n, f"bad vertex {line!r}") from None
            if len(verts[-1]) != 3:
                raise MeshParseError(path, n, "vertex needs 3 coordinates")
        elif tag == "f":
            if len(parts) != 4:
                raise MeshParseError(path, n, "triangles only")
            try:
                idx = [int(p.split("/")[0]) for p in parts[1:]]
            except ValueError:
                raise MeshParseError(path, n, f"bad face {line!r}") from None
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            if min(idx) < 0 or max(idx) >= len(verts):
                raise MeshParseError(path, n, "face index out of range")
            tris.append(idx)
    if not verts or not tris:
        raise MeshParseError(path, 1, "no vertices or faces")
    return np.array(verts, dtype=float), np.array(tris, dtype=np.int64)


def read_mesh(path, fmt: str | None = None, check: bool = True) -> TriMesh:
    """Read an OFF/OBJ mesh.  With ``check`` the mesh must pass :func:`validate`."""
    path = Path(path)
    fmt = _format_for(path, fmt)
    text = path.read_text()
    verts, tris = (_parse_off if fmt == "off" else _parse_obj)(text, path)
    mesh = TriMesh(verts, tris)
    if check:
        diag = validate(mesh)
        if not diag.ok:
            raise MeshError(f"{path}: invalid mesh\n" + "\n".join(diag.messages))
    return mesh


def format_off(mesh: TriMesh) -> str:
    n_e = validate(mesh).n_edges
    out = [f"OFF\n{mesh.n_vertices} {mesh.n_triangles} {n_e}"]
    out.extend(f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices.tolist())
    out.extend(f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist())
    return "\n".join(out) + "\n"


def format_obj(mesh: TriMesh) -> str:
    out = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices.tolist()]
    out.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles.tolist())
    return "\n".join(out) + "\n"


def write_mesh(mesh: TriMesh, path, fmt: str | None = None) -> Path:
    path = Path(path)
    fmt = _format_for(path, fmt)
    path.write_text(format_off(mesh) if fmt == "off" else format_obj(mesh))
    return path
