import math

import numpy as np
import pytest

from membrane_bending import schemes as S
from membrane_bending.mesh import ShapeSpec, build_icosphere, map_to_shape
from membrane_bending.oracle import (
    QuadratureSpec,
    RevolutionSurface,
    converged_energy,
    fd_gradient,
    icosahedron_volume,
    integrate,
    parametric_energy,
    parametric_force_density,
    parametric_moments,
    prolate_area,
    relative_error,
    sphere_energy,
)
from membrane_bending.params import ModelParams

# frozen references from the quadrature oracle (96 x 16 nodes, doubled to
# check convergence); consumed by the biconcave acceptance check
BICONCAVE_E_MINIMAL = 48.474464751660875
BICONCAVE_E_H0_M05 = 74.25150307130758
BICONCAVE_AREA = 8.770854567499036
BICONCAVE_REDUCED_VOLUME = 0.6445


def test_sphere_moments_and_volume():
    m = parametric_moments(RevolutionSurface.sphere(2.0))
    assert m.M0 == pytest.approx(16 * math.pi, rel=1e-13)
    assert m.M1 == pytest.approx(8 * math.pi, rel=1e-13)
    assert m.M2 == pytest.approx(4 * math.pi, rel=1e-13)
    assert m.volume == pytest.approx(32 * math.pi / 3, rel=1e-13)
    assert m.reduced_volume == pytest.approx(1.0, rel=1e-13)


def test_sphere_principal_curvatures_everywhere():
    s = RevolutionSurface.sphere(1.5)
    u1 = np.linspace(0.1, 3.0, 7)
    H, G = s.curvatures(u1, 0.3)
    assert np.allclose(H, 1 / 1.5, rtol=1e-13)
    assert np.allclose(G, 1 / 1.5**2, rtol=1e-13)
    assert np.allclose(s.laplace_H(u1), 0.0, atol=1e-12)


def test_prolate_area_matches_closed_form():
    assert parametric_moments(RevolutionSurface.spheroid(1.0, 2.0)).M0 == pytest.approx(prolate_area(1.0, 2.0), rel=1e-10)


def test_biconcave_references_are_converged():
    s = RevolutionSurface.biconcave()
    for model, ref in ((ModelParams("minimal", kappa=1.0), BICONCAVE_E_MINIMAL),
                       (ModelParams("sc", kappa=1.0, H0=-0.5), BICONCAVE_E_H0_M05)):
        e, rel = converged_energy(s, model)
        assert rel < 1e-10
        assert e.total == pytest.approx(ref, rel=1e-10)
    mom = parametric_moments(s)
    assert mom.M0 == pytest.approx(BICONCAVE_AREA, rel=1e-10)
    assert mom.reduced_volume == pytest.approx(BICONCAVE_REDUCED_VOLUME, abs=5e-4)


def test_area_integral_matches_moment():
    s = RevolutionSurface.biconcave()
    assert integrate(s, lambda u1, u2: np.ones_like(u1)) == pytest.approx(parametric_moments(s).M0, rel=1e-14)


def test_quadrature_rejects_tiny_grids():
    with pytest.raises(ValueError):
        QuadratureSpec(4, 16)


@pytest.mark.parametrize(
    "model,expected",
    [
        (ModelParams("minimal", kappa=1.0), (8 * math.pi, 0.0)),
        (ModelParams("sc", kappa=1.0, H0=-0.5), (18 * math.pi, 0.0)),
        (ModelParams("ade", kappa=1.0, H0=-0.5, alpha=2 / math.pi, D=0.001, da0=-1.0), (18 * math.pi, 36 * math.pi)),
    ],
)
def test_sphere_closed_forms(model, expected):
    E_H, E_AD = sphere_energy(model)
    assert E_H == pytest.approx(expected[0], rel=1e-14)
    assert E_AD == pytest.approx(expected[1], rel=1e-12, abs=1e-14)
    pe = parametric_energy(RevolutionSurface.sphere(), model)
    assert pe.E_H == pytest.approx(expected[0], rel=1e-12)
    assert pe.E_AD == pytest.approx(expected[1], rel=1e-10, abs=1e-12)


def test_sphere_force_density():
    # minimal model: the shape equation is satisfied by any sphere
    f_H, f_AD = parametric_force_density(RevolutionSurface.sphere(), ModelParams("minimal", kappa=1.0), np.array([0.7]))
    assert np.allclose(f_H, 0.0, atol=1e-12) and np.allclose(f_AD, 0.0)
    # spontaneous curvature: 4 kappa H0 (H0 - H) per unit area on a unit sphere,
    # written along the inward normal with the sign of -dE/dx
    H0 = -0.5
    f_H, _ = parametric_force_density(RevolutionSurface.sphere(), ModelParams("sc", kappa=1.0, H0=H0), np.array([0.7]))
    assert f_H[0] == pytest.approx(4 * H0 * (H0 - 1.0), rel=1e-12)


def test_icosahedron_volume_value():
    assert icosahedron_volume() == pytest.approx(2.5361507101204093, rel=1e-14)


def test_fd_gradient_of_quadratic():
    Q = np.array([[2.0, 0.3], [0.3, 1.0]])
    x = np.array([[0.4, -1.1]])
    F = fd_gradient(lambda y: float(0.5 * y[0] @ Q @ y[0]), x)
    assert np.allclose(F, -(Q @ x[0])[None, :], atol=1e-9)


def test_relative_error():
    a = np.array([3.0, 4.0])
    assert relative_error(a, a) == 0.0
    assert relative_error(a, np.zeros(2)) == pytest.approx(1.0)


def test_discrete_moments_approach_oracle():
    """Scheme C moments on the sampled biconcave mesh converge to the oracle."""
    s = RevolutionSurface.biconcave()
    ref = parametric_moments(s)
    errs = []
    for level in (2, 3, 4):
        m = s.sample_mesh(build_icosphere(level))
        mom = S.moments(S.scheme_c_field(m))
        errs.append(abs(mom.M2 - ref.M2) / ref.M2)
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.01


def test_sampled_mesh_equals_mapped_shape():
    sphere = build_icosphere(3)
    a = RevolutionSurface.biconcave().sample_mesh(sphere)
    b = map_to_shape(sphere, ShapeSpec("biconcave"))
    assert np.allclose(a.vertices, b.vertices, atol=1e-12)
