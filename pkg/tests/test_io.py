import numpy as np
import pytest

from membrane_bending.io import MeshParseError, format_off, read_mesh, write_mesh
from membrane_bending.mesh import MeshError, ShapeSpec, TriMesh, build_icosphere, map_to_shape

TETRA_OFF = """OFF
# a tetrahedron
4 4 6
0 0 0
1 0 0
0 1 0
0 0 1
3 0 2 1
3 0 1 3
3 0 3 2
3 1 2 3
"""


@pytest.mark.parametrize("suffix", ["off", "obj"])
def test_round_trip_is_exact(tmp_path, suffix):
    m = map_to_shape(build_icosphere(2), ShapeSpec("oblate", 0.7))
    path = write_mesh(m, tmp_path / f"m.{suffix}")
    back = read_mesh(path)
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.triangles, m.triangles)


def test_off_header_counts(tmp_path):
    m = build_icosphere(1)
    lines = format_off(m).splitlines()
    assert lines[0] == "OFF"
    assert lines[1] == f"{m.n_vertices} {m.n_triangles} {m.n_edges}"


def test_reads_handwritten_tetrahedron(tmp_path):
    p = tmp_path / "t.off"
    p.write_text(TETRA_OFF)
    m = read_mesh(p)
    assert m.n_vertices == 4 and m.n_triangles == 4 and m.n_edges == 6


def test_obj_negative_indices_and_slashes(tmp_path):
    p = tmp_path / "t.obj"
    p.write_text(
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\n"
        "f 1/1 3/1 2/1\nf 1 2 4\nf -4 -1 -2\nf 2 3 4\n"
    )
    assert read_mesh(p).n_triangles == 4


@pytest.mark.parametrize(
    "text,line,fragment",
    [
        (TETRA_OFF.replace("3 1 2 3", "4 1 2 3 0"), 11, "triangles only"),
        (TETRA_OFF.replace("4 4 6", "4 4 7"), 3, "edges"),
        (TETRA_OFF.replace("4 4 6", "5 4 6"), 11, "shorter"),
        (TETRA_OFF.replace("1 0 0", "1 zero 0"), 5, "bad vertex"),
        (TETRA_OFF.replace("3 0 3 2", "3 0 3 9"), 10, "out of range"),
        (TETRA_OFF.replace("OFF", "PLY"), 1, "header"),
        (TETRA_OFF + "0 0 0\n", 12, "trailing"),
    ],
)
def test_off_errors_carry_line_numbers(tmp_path, text, line, fragment):
    p = tmp_path / "bad.off"
    p.write_text(text)
    with pytest.raises(MeshParseError) as info:
        read_mesh(p)
    assert info.value.line == line
    assert fragment in str(info.value)
    assert f":{line}:" in str(info.value)


def test_obj_quads_rejected(tmp_path):
    p = tmp_path / "q.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    with pytest.raises(MeshParseError, match="triangles only") as info:
        read_mesh(p)
    assert info.value.line == 5


def test_invalid_mesh_raises_unless_unchecked(tmp_path):
    m = build_icosphere(1)
    p = write_mesh(TriMesh(m.vertices, m.triangles[:-1]), tmp_path / "open.obj")
    with pytest.raises(MeshError, match="boundary edge"):
        read_mesh(p)
    assert read_mesh(p, check=False).n_triangles == m.n_triangles - 1


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError, match="unsupported"):
        write_mesh(build_icosphere(0), tmp_path / "m.stl")
