"""Acceptance criteria, one test (or parametrized family) per numbered item.

Each test attaches a ``detail`` property; the session summary prints one
PASS/FAIL line per criterion.  The relaxation runs (8, 9, 10, 12) take
minutes to tens of minutes on one core.
"""
import math
from dataclasses import replace

import numpy as np
import pytest

from membrane_bending import dynamics as dyn
from membrane_bending import schemes as S
from membrane_bending.analysis import classify
from membrane_bending.geometry import vertex_area_mixed
from membrane_bending.mesh import ShapeSpec, build_icosphere, equiangulate, map_to_shape, validate
from membrane_bending.models import penalty_terms
from membrane_bending.oracle import RevolutionSurface, fd_gradient, parametric_energy, relative_error
from membrane_bending.params import ConstraintParams, ModelParams

from conftest import perturbed

MINIMAL = ModelParams("minimal", kappa=1.0)
NTS = (80, 320, 1280, 5120)
ADE_ALPHA = 2 / math.pi


def _bending(mesh, scheme, model, R=1.0):
    _, E_H, E_AD, _ = S.bending_energy_force(mesh, scheme, model, R, want_force=False)
    return E_H, E_AD


@pytest.mark.acceptance(1, "sphere energy convergence (B/C/D)")
@pytest.mark.parametrize("scheme", "BCD")
def test_01_sphere_energy_convergence(spheres, scheme, record_property):
    errs = [abs(_bending(spheres[nt], scheme, MINIMAL)[0] - 8 * math.pi) / (8 * math.pi) for nt in NTS]
    record_property("detail", f"{scheme}: " + ", ".join(f"{e:.2e}" for e in errs))
    assert errs[2] < 0.02 and errs[3] < 0.01
    assert all(b < a for a, b in zip(errs, errs[1:]))


@pytest.mark.acceptance(2, "scheme A mismatch")
def test_02_scheme_a_mismatch(spheres, record_property):
    model = ModelParams("minimal", kappa=1.0)  # kappa_tilde defaults to sqrt(3) kappa
    sphere = [_bending(spheres[nt], "A", model)[0] / (8 * math.pi) for nt in NTS]
    surf = RevolutionSurface.biconcave()
    ref = parametric_energy(surf, model).total
    gap = abs(_bending(surf.sample_mesh(spheres[5120]), "A", model)[0] - ref) / ref
    record_property("detail", "sphere E/8pi " + ", ".join(f"{e:.4f}" for e in sphere) + f"; biconcave gap {gap:.1%}")
    assert all(e > 1.0 for e in sphere)
    # the excess does not vanish with refinement
    assert sphere[-1] - 1.0 > 0.5 * (sphere[1] - 1.0)
    assert gap > 0.05


@pytest.mark.acceptance(3, "biconcave energy vs quadrature oracle")
@pytest.mark.parametrize("H0", [0.0, -0.5])
def test_03_biconcave_energy(spheres, H0, record_property):
    surf = RevolutionSurface.biconcave()
    model = ModelParams("minimal", kappa=1.0) if H0 == 0 else ModelParams("sc", kappa=1.0, H0=H0)
    ref = parametric_energy(surf, model).total
    mesh = surf.sample_mesh(spheres[5120])
    errs = {s: abs(_bending(mesh, s, model)[0] - ref) / ref for s in "BCD"}
    record_property("detail", f"h0={H0}: ref {ref:.4f}, " + ", ".join(f"{s} {e:.2e}" for s, e in errs.items()))
    assert all(e < 0.01 for e in errs.values())


@pytest.mark.acceptance(4, "sphere SC+ADE closed forms")
def test_04_sphere_sc_ade(spheres, record_property):
    model = ModelParams("ade", kappa=1.0, H0=-0.5, alpha=ADE_ALPHA, D=0.001, da0=-1.0)
    out = []
    for s in "BCD":
        E_H, E_AD = _bending(spheres[5120], s, model)
        out.append((s, E_H / (18 * math.pi) - 1, E_AD / (36 * math.pi) - 1))
    record_property("detail", ", ".join(f"{s} dE_H {a:+.1e} dE_AD {b:+.1e}" for s, a, b in out))
    assert all(abs(a) < 0.01 and abs(b) < 0.01 for _, a, b in out)


def _fd_check(mesh, energy, force):
    fd = fd_gradient(lambda x: energy(mesh.with_vertices(x)), mesh.vertices, 1e-6)
    return relative_error(fd, force)


@pytest.mark.acceptance(5, "gradient correctness (A/B/C, every term, penalties)")
def test_05_gradients(record_property):
    terms = {
        "M2": ModelParams("minimal", kappa=1.0),
        "SC": ModelParams("sc", kappa=1.0, H0=-0.7),
        "ADE": ModelParams("ade", kappa=1.0, H0=0.0, alpha=1.3, D=0.01, da0=1.7),
    }
    worst = {}
    for seed in range(20):
        mesh = perturbed(build_icosphere(1), 0.06, 1000 + seed)
        R = 1.0
        for scheme in "BC":
            prev = None
            for name, model in terms.items():
                F = S.bending_energy_force(mesh, scheme, model, R)[3]

                def energy(m, model=model):
                    return sum(_bending(m, scheme, model, R))

                fd = fd_gradient(lambda x: energy(mesh.with_vertices(x)), mesh.vertices, 1e-6)
                # isolate each term: SC minus minimal, ADE minus SC with H0 = 0
                if name == "ADE":
                    base = ModelParams("sc", kappa=1.0, H0=0.0)
                    Fb = S.bending_energy_force(mesh, scheme, base, R)[3]
                    fdb = fd_gradient(lambda x: sum(_bending(mesh.with_vertices(x), scheme, base, R)), mesh.vertices)
                    err = relative_error(fd - fdb, F - Fb)
                elif name == "SC":
                    err = relative_error(fd - prev[0], F - prev[1])
                else:
                    err = relative_error(fd, F)
                prev = (fd, F)
                worst[f"{scheme}/{name}"] = max(worst.get(f"{scheme}/{name}", 0.0), err)
        kt = 1.7
        F = S.scheme_a_force(mesh, kt, 0.05)
        err = _fd_check(mesh, lambda m: S.scheme_a_energy(m, kt, 0.05), F)
        worst["A"] = max(worst.get("A", 0.0), err)
        for which in ("k_area_global", "k_area_local", "k_volume"):
            kw = dict(k_area_global=0.0, k_area_local=0.0, k_volume=0.0)
            kw[which] = 3.0
            cons = ConstraintParams.for_targets(1.1, 0.85, mesh.n_triangles, **kw)
            F = penalty_terms(mesh, cons)[3]
            err = _fd_check(mesh, lambda m: sum(penalty_terms(m, cons, False)[:3]), F)
            worst[which] = max(worst.get(which, 0.0), err)
    record_property("detail", "max rel. err " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert max(worst.values()) < 1e-5


@pytest.mark.acceptance(6, "momentum conservation")
def test_06_conservation(record_property):
    worst_f = worst_t = 0.0
    for seed in range(10):
        mesh = perturbed(build_icosphere(2), 0.08, seed)
        x = mesh.vertices
        for scheme, model in (("A", MINIMAL), ("B", ModelParams("ade", kappa=1.0, H0=0.4, da0=1.5)),
                              ("C", ModelParams("ade", kappa=1.0, H0=0.4, da0=1.5))):
            F = S.bending_energy_force(mesh, scheme, model)[3]
            scale = np.abs(F).sum()
            worst_f = max(worst_f, np.linalg.norm(F.sum(axis=0)) / scale)
            worst_t = max(worst_t, np.linalg.norm(np.cross(x - x.mean(axis=0), F).sum(axis=0)) / scale)
    mesh = perturbed(build_icosphere(2), 0.08, 99)
    vel = np.random.default_rng(0).standard_normal(mesh.vertices.shape)
    thermo = [dyn.pairwise_damping_force(mesh, vel, 1.3), dyn.pairwise_stochastic_force(mesh, 7, 0.2, 3, 0.01)]
    pair = max(np.abs(F.sum(axis=0)).max() / np.abs(F).sum() for F in thermo)
    record_property("detail", f"scheme net force {worst_f:.1e}, torque {worst_t:.1e}; thermostat sum {pair:.1e}")
    assert worst_f <= 1e-10 and worst_t <= 1e-10
    assert pair <= 1e-15


@pytest.mark.acceptance(7, "discrete Gauss-Bonnet (scheme D)")
def test_07_gauss_bonnet(record_property):
    meshes = [build_icosphere(k) for k in range(5)]
    meshes += [perturbed(build_icosphere(2), 0.1, s) for s in range(5)]
    meshes += [map_to_shape(build_icosphere(3), spec) for spec in
               (ShapeSpec("prolate", 0.6), ShapeSpec("oblate", 0.7), ShapeSpec("biconcave"))]
    meshes.append(equiangulate(map_to_shape(build_icosphere(3), ShapeSpec("prolate", 0.5)))[0])
    meshes.append(RevolutionSurface({1: 1.0}, {1: 1.0, 2: -1.0}).sample_mesh(build_icosphere(3)))
    errs = []
    for m in meshes:
        f = S.scheme_d_field(m)
        assert np.allclose(f.A, vertex_area_mixed(m))
        errs.append(abs(float(np.sum(f.G * f.A)) - 4 * math.pi))
    record_property("detail", f"{len(meshes)} meshes, max |sum G A - 4 pi| = {max(errs):.1e}")
    assert max(errs) < 1e-10


# ---------------------------------------------------------------------------
# relaxation runs

MIN_MODEL = ModelParams("minimal", kappa=0.01)


def _e8pi(tr, kappa=0.01):
    return tr.final.bending / (8 * math.pi * kappa)


def _label_mesh(mesh):
    return classify(mesh, S.scheme_b_field(mesh).H).label


def _label(tr):
    return _label_mesh(tr.mesh)


@pytest.mark.acceptance(8, "minimal-model delimiting energies")
@pytest.mark.parametrize("v,target", [(0.59, 2.0), (0.65, 1.83)])
def test_08_delimiting_energies(v, target, record_property):
    best, runs = dyn.ground_state(dyn.default_seeds(v), v, MIN_MODEL, scheme="B", n_triangles=1280)
    seeds = ", ".join(f"{s.kind} {_e8pi(r):.3f}/{_label(r)}" for s, r in zip(dyn.default_seeds(v), runs))
    E = _e8pi(best)
    label = _label(best)
    record_property("detail", f"v={v}: ground state E/8pi k = {E:.3f} (target {target}), {label}, v={best.final.v:.3f} [{seeds}]")
    assert abs(E - target) / target < 0.03
    assert label == "biconcave"


@pytest.mark.acceptance(9, "branch jump at v = 0.8")
def test_09_branch_behavior(record_property):
    v = 0.8
    _, (oblate, prolate) = dyn.ground_state([ShapeSpec("oblate", v), ShapeSpec("prolate", v)], v, MIN_MODEL)
    Eo, Ep = _e8pi(oblate), _e8pi(prolate)
    record_property("detail", f"oblate seed {Eo:.3f} ({_label(oblate)}), prolate seed {Ep:.3f} ({_label(prolate)})")
    assert abs(Eo - Ep) / Ep < 0.03


def _overlap_fraction(mesh, n=32):
    """Volume fraction of a bounding-box grid with winding number outside {0, 1}."""
    x, t = mesh.vertices, mesh.triangles
    g = [np.linspace(x[:, i].min(), x[:, i].max(), n) for i in range(3)]
    P = np.stack(np.meshgrid(*g, indexing="ij"), -1).reshape(-1, 3)
    w = []
    for k in range(0, len(P), 1000):
        a, b, c = (x[t[:, m]][None] - P[k:k + 1000, None] for m in range(3))
        la, lb, lc = (np.linalg.norm(q, axis=2) for q in (a, b, c))
        num = np.einsum("pij,pij->pi", a, np.cross(b, c))
        den = (la * lb * lc + np.einsum("pij,pij->pi", a, b) * lc + np.einsum("pij,pij->pi", b, c) * la
               + np.einsum("pij,pij->pi", c, a) * lb)
        w.append(np.rint(np.arctan2(num, den).sum(axis=1) / (2 * math.pi)))
    w = np.concatenate(w)
    return float(np.mean((w < 0) | (w > 1)) / max(np.mean(w == 1), 1e-300))


STOMATOCYTE_SOFT_STEPS = 100_000


@pytest.mark.slow
@pytest.mark.acceptance(10, "stomatocyte regime")
@pytest.mark.parametrize("v", [0.35, 0.45])
def test_10_stomatocytes(v, record_property):
    # The flat oblate seed is first relaxed with the unit-scale penalties
    # (2, 1, 1) so the volume can lag while the rim rounds; the stiff
    # protocol penalties drive the two faces through each other instead.
    mesh = dyn.seed_mesh(ShapeSpec("oblate", v), 1280)
    soft = ConstraintParams.for_targets(1.0, v, mesh.n_triangles, 2.0, 1.0, 1.0)
    stiff = ConstraintParams.for_targets(1.0, v, mesh.n_triangles, **dyn.MINIMIZE_STIFFNESS)
    dt = 0.00625
    first = dyn.minimize(mesh, MIN_MODEL, soft,
                         replace(dyn.MINIMIZE_CONFIG, dt=dt, n_steps=STOMATOCYTE_SOFT_STEPS), "B", R_ref=1.0)
    labels = []

    def watch(step, m):
        if step % 100_000 == 0:
            labels.append(_label_mesh(m))

    rest = 1_000_000 - first.steps
    cfg = replace(dyn.MINIMIZE_CONFIG, dt=dt, n_steps=rest, sample_interval=50_000, seed=1)
    tr = dyn.minimize(first.mesh, MIN_MODEL, stiff, cfg, "B", R_ref=1.0, snapshot=watch)
    rep = classify(tr.mesh, S.scheme_b_field(tr.mesh).H)
    overlap = _overlap_fraction(tr.mesh)
    record_property("detail", f"v={v}: {rep.label}, sign changes {rep.sign_changes}, axial cavity "
                              f"{rep.axial_cavity:.2f}, E/8pi k {_e8pi(tr):.3f}, v {tr.final.v:.3f}, "
                              f"{first.steps}+{tr.steps} steps ({tr.reason}), self-overlap {overlap:.1%}, "
                              f"thermal-phase labels every 1e5 steps {labels}")
    assert first.reason != "numerical-failure" and tr.reason != "numerical-failure"
    assert first.steps + tr.steps == 1_000_000
    assert validate(tr.mesh).ok
    assert rep.sign_changes == 2 and rep.axial_cavity > 0 and rep.cavity_volume > 0
    assert rep.label == "stomatocyte"


@pytest.mark.acceptance(11, "scale invariance")
@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_11_scale_invariance(lam, record_property):
    m = map_to_shape(build_icosphere(3), ShapeSpec("biconcave"))
    E = _bending(m, "B", MINIMAL)[0]
    Es = _bending(m.scaled(lam), "B", MINIMAL)[0]
    record_property("detail", f"lambda={lam}: rel. change {abs(Es - E) / E:.1e}")
    assert abs(Es - E) / E < 1e-12


@pytest.mark.slow
@pytest.mark.acceptance(12, "ADE dynamics endpoint")
def test_12_ade_dynamics(record_property):
    v = 0.642
    seed_model = ModelParams("ade", kappa=0.01, alpha=ADE_ALPHA, D=0.001, da0=1.11)
    start = dyn.seed_mesh(ShapeSpec("oblate", v), 1280)
    cons = ConstraintParams.for_targets(1.0, v, start.n_triangles, **dyn.MINIMIZE_STIFFNESS)
    seed = dyn.minimize(start, seed_model, cons, dyn.MINIMIZE_CONFIG, "B", R_ref=1.0)
    seed_label = _label(seed)
    model = seed_model.with_(da0=3.34)
    # keep the seed run's step: the relaxed seed starts with small forces, so a
    # fresh pre-scan would pick a step that goes unstable once E_AD pulls
    cfg = replace(dyn.MINIMIZE_CONFIG, dt=seed.config["dt"], n_steps=200_000, sample_interval=5000)
    tr = dyn.run_dynamics(seed.mesh, model, cons, cfg, "B", R_ref=1.0)
    E_AD = tr.column("E_AD")
    da = tr.column("da_sphere")
    drop = E_AD[0] / max(E_AD[-1], 1e-300)
    label = _label(tr)
    record_property("detail", f"seed {seed_label} (da {da[0]:.3f}); final da {da[-1]:.3f}, E_AD drop {drop:.1f}x, {label}")
    assert seed_label == "stomatocyte"
    assert 1.28 <= da[-1] <= 1.37
    assert drop >= 5.0
    assert label == "dumbbell"



@pytest.mark.slow
@pytest.mark.parametrize("v", [0.6, 0.8])
def test_spontaneous_curvature_slice_is_elongated(v, record_property):
    """SC model at h0 = 1.2: the lowest state over seeds is prolate or dumbbell."""
    model = ModelParams("sc", kappa=0.01, H0=1.2)
    best, runs = dyn.ground_state([ShapeSpec("prolate", v), ShapeSpec("oblate", v)], v, model)
    labels = [_label(r) for r in runs]
    record_property("detail", f"v={v}: " + ", ".join(f"{l} {_e8pi(r):.3f}" for l, r in zip(labels, runs)))
    assert _label(best) in ("prolate", "dumbbell")
