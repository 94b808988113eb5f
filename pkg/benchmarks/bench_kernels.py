"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--levels 2 3 4] [--repeat 20]

Prints one row per (kernel, mesh size) with the median wall time of each
backend and the speed-up.  Both backends are checked to agree first.
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from membrane_bending import kernels
from membrane_bending.mesh import build_icosphere
from membrane_bending.params import ConstraintParams, ModelParams


def _median_time(fn, repeat: int) -> float:
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times)


def cases(mesh):
    x = mesh.vertices + 0.01 * np.random.default_rng(0).standard_normal(mesh.vertices.shape)
    tri = mesh.triangles
    e = mesh.edges
    bend = ModelParams("ade", kappa=0.01, H0=-0.5, da0=1.5).bend_vector()
    cons = ConstraintParams.for_targets(1.0, 0.9, mesh.n_triangles)
    pen, at0 = cons.pen_vector(), cons.triangle_targets(mesh.n_triangles)
    v = np.random.default_rng(1).standard_normal(x.shape)
    noise = np.random.default_rng(2).standard_normal(len(e))
    return {
        "scheme_b": (kernels.scheme_b_nb, kernels.scheme_b_np, (x, tri, e.i, e.j, e.k, e.l, bend, True)),
        "scheme_a": (kernels.scheme_a_nb, kernels.scheme_a_np, (x, e.i, e.j, e.k, e.l, 0.0173, 0.0, False, True)),
        "penalty": (kernels.penalty_nb, kernels.penalty_np, (x, tri, pen, at0, True)),
        "thermostat": (kernels.thermostat_nb, kernels.thermostat_np, (x, v, e.i, e.j, 0.5, noise)),
    }


def _flatten(out):
    if isinstance(out, tuple):
        return np.concatenate([np.ravel(np.asarray(o, dtype=float)) for o in out])
    return np.ravel(out)


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--levels", type=int, nargs="+", default=[2, 3, 4])
    p.add_argument("--repeat", type=int, default=20)
    a = p.parse_args(argv)
    print(f"{'kernel':<11} {'N_t':>6} {'numba [ms]':>11} {'numpy [ms]':>11} {'speed-up':>9}")
    for level in a.levels:
        mesh = build_icosphere(level)
        for name, (nb, np_fn, args) in cases(mesh).items():
            ref, got = _flatten(np_fn(*args)), _flatten(nb(*args))
            scale = max(np.max(np.abs(ref)), 1e-300)
            if np.max(np.abs(ref - got)) > 1e-10 * scale:
                raise SystemExit(f"{name}: backends disagree")
            t_nb = _median_time(lambda: nb(*args), a.repeat)
            t_np = _median_time(lambda: np_fn(*args), a.repeat)
            print(f"{name:<11} {mesh.n_triangles:>6} {1e3 * t_nb:>11.3f} {1e3 * t_np:>11.3f} {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
