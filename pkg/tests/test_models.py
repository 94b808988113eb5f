import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from membrane_bending import schemes as S
from membrane_bending.geometry import total_area, total_volume
from membrane_bending.mesh import ShapeSpec, build_icosphere, map_to_shape
from membrane_bending.models import (
    bc_model,
    energy_direct,
    energy_grouped,
    evaluate,
    penalty_terms,
    reduced_quantities,
    total_energy,
)
from membrane_bending.oracle import fd_gradient, relative_error
from membrane_bending.params import (
    ALPHA_DEFAULT,
    ConstraintParams,
    ModelParams,
    UnsupportedModelError,
    format_params,
    read_params,
)

from conftest import perturbed


class TestParams:
    def test_default_alphas(self):
        assert ModelParams("minimal").alpha == 0
        assert ModelParams("ade", da0=1.0).alpha == pytest.approx(ALPHA_DEFAULT)
        assert ModelParams("bc", da0=1.0).alpha > 100 * ALPHA_DEFAULT

    @pytest.mark.parametrize(
        "kw",
        [
            dict(kind="minimal", H0=0.1),
            dict(kind="sc", alpha=0.5),
            dict(kind="ade"),
            dict(kind="ade", da0=1.0, dA0=0.01),
            dict(kind="sc", kappa=-1.0),
            dict(kind="ade", da0=1.0, D=0.0),
            dict(kind="foo"),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ModelParams(**kw)

    def test_reduced_and_dimensional_targets_agree(self):
        a = ModelParams("ade", D=0.002, da0=1.5)
        b = ModelParams("ade", D=0.002, dA0=1.5 * 4 * math.pi * 2.0 * 0.002)
        assert a.delta_A0(2.0) == pytest.approx(b.delta_A0(2.0), rel=1e-15)

    def test_constraint_targets(self):
        c = ConstraintParams.for_targets(2.0, 0.7, 320)
        assert c.A0 == pytest.approx(16 * math.pi)
        assert c.V0 == pytest.approx(0.7 * 32 * math.pi / 3)
        assert c.triangle_targets(320).sum() == pytest.approx(c.A0)
        with pytest.raises(ValueError):
            c.triangle_targets(80)
        with pytest.raises(ValueError):
            ConstraintParams(k_volume=1.0, A0=1.0, V0=None)

    def test_params_file_round_trip(self, tmp_path):
        model = ModelParams("ade", kappa=0.02, H0=-0.3, D=0.002, da0=1.2)
        cons = ConstraintParams.for_targets(1.0, 0.8, 80)
        p = tmp_path / "p.txt"
        p.write_text(format_params(model, cons) + "# comment\n\n")
        mk, ck = read_params(p)
        assert ModelParams(**mk) == model
        assert ck["V0"] == pytest.approx(cons.V0)
        p.write_text("bogus = 1\n")
        with pytest.raises(ValueError, match=":1: unknown parameter"):
            read_params(p)


class TestEnergyForms:
    @settings(max_examples=20, deadline=None)
    @given(
        seed=st.integers(0, 2**31),
        H0=st.floats(-1.0, 1.0),
        alpha=st.floats(0.0, 3.0),
        da0=st.floats(-3.0, 3.0),
        scheme=st.sampled_from("BCD"),
    )
    def test_grouped_equals_direct(self, seed, H0, alpha, da0, scheme):
        m = perturbed(build_icosphere(2), 0.04, seed)
        model = ModelParams("ade", kappa=0.7, H0=H0, alpha=alpha, D=0.01, da0=da0)
        f = S.vertex_field(m, scheme)
        direct = sum(energy_direct(f, model, 1.3))
        grouped = energy_grouped(S.moments(f), model, 1.3)
        assert grouped == pytest.approx(direct, rel=1e-12)

    def test_spontaneous_curvature_trades_with_area_difference(self):
        """With alpha > 0 a shift of H0 is equivalent to a shift of dA0 up to a
        shape-independent constant; energy differences between shapes agree."""
        a = map_to_shape(build_icosphere(2), ShapeSpec("prolate", 0.8))
        b = map_to_shape(build_icosphere(2), ShapeSpec("oblate", 0.8))
        D, alpha, H0 = 0.01, 0.8, 0.4
        # rescale both meshes to the same area so A is shape-independent
        b = b.scaled(math.sqrt(total_area(a) / total_area(b)))
        A = total_area(a)
        shift = 2 * D * H0 * A / (alpha * math.pi)
        m1 = ModelParams("ade", kappa=1.0, H0=H0, alpha=alpha, D=D, dA0=0.05)
        m2 = ModelParams("ade", kappa=1.0, H0=0.0, alpha=alpha, D=D, dA0=0.05 + shift)
        e1 = [total_energy(m, S.scheme_b_field(m), m1, R=1.0).bending for m in (a, b)]
        e2 = [total_energy(m, S.scheme_b_field(m), m2, R=1.0).bending for m in (a, b)]
        assert e1[0] - e1[1] == pytest.approx(e2[0] - e2[1], rel=1e-10)

    def test_scheme_a_needs_minimal_model(self, spheres):
        with pytest.raises(UnsupportedModelError):
            evaluate(spheres[80], "A", ModelParams("sc", H0=0.2))
        with pytest.raises(UnsupportedModelError):
            total_energy(spheres[80], None, ModelParams("minimal"))


class TestReducedQuantities:
    def test_sphere(self, spheres):
        m = spheres[5120]
        red = reduced_quantities(m, S.scheme_c_field(m), 0.001)
        assert red.v == pytest.approx(1.0, abs=2e-3)
        assert red.da == pytest.approx(2.0, rel=2e-3)
        assert red.da_sphere == pytest.approx(1.0, rel=2e-3)
        assert red.da_prime == pytest.approx(2 * 0.001 / red.R, rel=2e-3)

    def test_without_field(self, spheres):
        red = reduced_quantities(spheres[320], None, 0.001)
        assert math.isnan(red.da) and red.v > 0.98


class TestPenalties:
    def test_zero_at_targets(self):
        m = map_to_shape(build_icosphere(2), ShapeSpec("oblate", 0.7))
        A = total_area(m)
        prims = S.triangle_prims(m)
        cons = ConstraintParams(3.0, A, 2.0, prims.area.copy(), 5.0, total_volume(m))
        Eg, El, Ev, F = penalty_terms(m, cons)
        assert abs(Eg) < 1e-26 and abs(El) < 1e-26 and abs(Ev) < 1e-26
        assert np.abs(F).max() < 1e-12

    @pytest.mark.parametrize("which", ["k_area_global", "k_area_local", "k_volume"])
    def test_penalty_forces_match_fd(self, rough, which):
        m = rough(21, 0.08)
        kw = dict(k_area_global=0.0, k_area_local=0.0, k_volume=0.0)
        kw[which] = 2.5
        cons = ConstraintParams.for_targets(1.05, 0.9, m.n_triangles, **kw)
        F = penalty_terms(m, cons)[3]
        fd = fd_gradient(lambda x: sum(penalty_terms(m.with_vertices(x), cons, False)[:3]), m.vertices)
        assert relative_error(fd, F) < 1e-6

    def test_evaluate_force_is_sum(self, rough):
        m = rough(22)
        model = ModelParams("ade", kappa=1.0, H0=0.2, da0=1.0)
        cons = ConstraintParams.for_targets(1.0, 0.95, m.n_triangles)
        ev = evaluate(m, "C", model, cons, R=1.0)
        assert np.allclose(ev.force, ev.bending_force + ev.penalty_force)
        fd = fd_gradient(lambda x: evaluate(m.with_vertices(x), "C", model, cons, 1.0, False).breakdown.total, m.vertices)
        assert relative_error(fd, ev.force) < 1e-6


class TestBilayerCouple:
    def test_large_alpha_pins_area_difference(self):
        """Along a family of shapes the BC energy minimum approaches the
        target area difference as alpha grows."""
        target = 1.1  # in units of the sphere value 2
        fam = [map_to_shape(build_icosphere(2), ShapeSpec("prolate", v)) for v in np.linspace(0.6, 0.98, 12)]
        fields = [S.scheme_b_field(m) for m in fam]
        das = np.array([reduced_quantities(m, f, 0.001, R=1.0).da for m, f in zip(fam, fields)])
        miss = []
        for alpha in (10.0, 100.0, 1000.0):
            E = [bc_model(m, f, target * 2, alpha_large=alpha, kappa=1.0, R=1.0).bending for m, f in zip(fam, fields)]
            miss.append(abs(das[int(np.argmin(E))] - 2 * target))
        assert miss[-1] <= miss[0]
        assert miss[-1] == pytest.approx(np.min(np.abs(das - 2 * target)), abs=1e-12)
