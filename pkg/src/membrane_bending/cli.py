"""Command-line interface: ``membrane-bending <command> ...``.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 numerical failure.
Every run that writes a directory also writes ``config.json`` with the fully
resolved settings; ``membrane-bending replay config.json`` reruns it.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import classify
from .dynamics import (
    MINIMIZE_CONFIG,
    MINIMIZE_STIFFNESS,
    REGULARIZATION_MODES,
    IntegratorConfig,
    NumericalFailure,
    Trajectory,
    default_seeds,
    minimize,
    seed_mesh,
)
from .geometry import reduced_volume
from .io import MeshParseError, read_mesh, write_mesh
from .mesh import (
    MeshError,
    ShapeSpec,
    build_icosphere,
    equiangulate,
    level_for_triangles,
    loop_subdivide,
    map_to_shape,
    midpoint_subdivide,
    validate,
)
from .models import evaluate
from .oracle import fd_gradient, relative_error
from .params import MODEL_KINDS, ConstraintParams, ModelParams, UnsupportedModelError
from .schemes import SCHEMES, NonPositiveAreaError, vertex_field

OUTPUT_ROOT_ENV = "MEMBRANE_BENDING_OUTPUT_ROOT"
EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3
SHAPES = ("sphere", "prolate", "oblate", "biconcave")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    return vals


def _strs(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


# ---------------------------------------------------------------------------
# shared option groups


def _add_model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=MODEL_KINDS, default="minimal")
    g.add_argument("--kappa", type=float, default=0.01, help="bending rigidity")
    g.add_argument("--h0", type=float, default=0.0, help="H0 (half the spontaneous curvature)")
    g.add_argument("--alpha", type=float, default=None, help="ADE ratio (default by model kind)")
    g.add_argument("--D", type=float, default=0.001, help="bilayer thickness")
    g.add_argument("--da0", type=float, default=None, help="reduced reference area difference dA0/(4 pi R D)")
    g.add_argument("--kappa-tilde", type=float, default=None, help="scheme A edge rigidity (default sqrt(3) kappa)")
    g.add_argument("--theta0", type=float, default=0.0, help="scheme A spontaneous dihedral angle")
    g.add_argument("--R", type=float, default=None, help="reference radius (default from area)")


def _model_from(a, **over) -> ModelParams:
    kw = dict(kind=a.model, kappa=a.kappa, H0=a.h0, alpha=a.alpha, D=a.D, da0=a.da0,
              kappa_tilde=a.kappa_tilde, theta0=a.theta0)
    kw.update(over)
    return ModelParams(**kw)


def _add_constraint_flags(p):
    g = p.add_argument_group("constraints")
    g.add_argument("--k-area-global", type=float, default=None)
    g.add_argument("--k-area-local", type=float, default=None)
    g.add_argument("--k-volume", type=float, default=None)


def _add_integrator_flags(p):
    g = p.add_argument_group("integrator")
    g.add_argument("--steps", type=int, default=None, help="maximum number of steps")
    g.add_argument("--dt", type=float, default=None, help="time step (default: stability pre-scan)")
    g.add_argument("--gamma", type=float, default=None, help="edge damping (default 1/(50 dt))")
    g.add_argument("--kBT", type=float, default=None, help="noise temperature (default 1e-4 kappa, 0 disables)")
    g.add_argument("--regularization", choices=REGULARIZATION_MODES, default=None)
    g.add_argument("--equiangulation-period", type=int, default=None)
    g.add_argument("--sample-interval", type=int, default=None)
    g.add_argument("--anneal-fraction", type=float, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--deterministic", action="store_true",
                   help="accepted for compatibility: runs are always bitwise reproducible")


def _integrator_from(a, base: IntegratorConfig) -> IntegratorConfig:
    over = {
        "n_steps": a.steps, "dt": a.dt, "gamma": a.gamma, "kBT": a.kBT, "regularization": a.regularization,
        "equiangulation_period": a.equiangulation_period, "sample_interval": a.sample_interval,
        "anneal_fraction": a.anneal_fraction, "seed": a.seed,
    }
    return replace(base, **{k: v for k, v in over.items() if v is not None})


def _stiffness_from(a, base: dict) -> dict:
    out = dict(base)
    for key, flag in (("k_area_global", a.k_area_global), ("k_area_local", a.k_area_local), ("k_volume", a.k_volume)):
        if flag is not None:
            out[key] = flag
    return out


def _output_dir(arg: str | None, name: str) -> Path:
    if arg:
        path = Path(arg)
    else:
        path = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs")) / name
    path.mkdir(parents=True, exist_ok=True)
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))


# ---------------------------------------------------------------------------
# mesh


def _shape_spec(shape: str, v: float | None, R: float) -> ShapeSpec:
    if shape in ("prolate", "oblate") and v is None:
        raise UsageError(f"--v is required for --shape {shape}")
    return ShapeSpec(shape, v if shape in ("prolate", "oblate") else None, R)


def cmd_mesh(a) -> int:
    if a.mesh_cmd == "gen":
        level = level_for_triangles(a.nt)
        mesh = map_to_shape(build_icosphere(level, a.R), _shape_spec(a.shape, a.v, a.R))
        write_mesh(mesh, a.output)
        diag = validate(mesh)
        _emit({"path": str(a.output), "n_triangles": mesh.n_triangles, "n_vertices": mesh.n_vertices,
               "reduced_volume": reduced_volume(mesh), "valid": diag.ok})
        return EXIT_OK if diag.ok else EXIT_VALIDATION
    if a.mesh_cmd == "validate":
        mesh = read_mesh(a.input, check=False)
        diag = validate(mesh)
        print(diag.summary())
        return EXIT_OK if diag.ok else EXIT_VALIDATION
    mesh = read_mesh(a.input)
    if a.mesh_cmd == "subdivide":
        for _ in range(a.times):
            mesh = loop_subdivide(mesh) if a.loop else midpoint_subdivide(mesh)
        write_mesh(mesh, a.output)
        _emit({"path": str(a.output), "n_triangles": mesh.n_triangles})
    else:
        mesh, flips = equiangulate(mesh)
        write_mesh(mesh, a.output)
        _emit({"path": str(a.output), "flips": flips, "valid": validate(mesh).ok})
    return EXIT_OK


# ---------------------------------------------------------------------------
# energy and force check


def _constraints_for(a, mesh) -> ConstraintParams:
    if a.v_target is None:
        return ConstraintParams.none()
    R = a.R if a.R is not None else math.sqrt(evaluate(mesh, "B", ModelParams()).breakdown.area / (4 * math.pi))
    stiff = _stiffness_from(a, {"k_area_global": 2.0, "k_area_local": 1.0, "k_volume": 1.0})
    return ConstraintParams.for_targets(R, a.v_target, mesh.n_triangles, **stiff)


def cmd_energy(a) -> int:
    mesh = read_mesh(a.mesh)
    model = _model_from(a)
    ev = evaluate(mesh, a.scheme, model, _constraints_for(a, mesh), a.R, want_force=False)
    out = ev.breakdown.as_dict()
    out.update(scheme=a.scheme, model=asdict(model), n_triangles=mesh.n_triangles,
               E_H_over_8pi_kappa=ev.breakdown.E_H / (8 * math.pi * model.kappa))
    if a.classify and a.scheme != "A":
        out["shape"] = classify(mesh, vertex_field(mesh, a.scheme).H).as_dict()
    _emit(out)
    return EXIT_OK


def cmd_force_check(a) -> int:
    mesh = read_mesh(a.mesh)
    if a.perturb > 0:
        rng = np.random.default_rng(a.seed)
        mesh = mesh.with_vertices(mesh.vertices + a.perturb * rng.standard_normal(mesh.vertices.shape))
    model = _model_from(a)
    cons = _constraints_for(a, mesh)
    R = a.R if a.R is not None else 1.0

    def energy(x):
        return evaluate(mesh.with_vertices(x), a.scheme, model, cons, R, want_force=False).breakdown.total

    F = evaluate(mesh, a.scheme, model, cons, R).force
    F_fd = fd_gradient(energy, mesh.vertices, a.eps)
    err = relative_error(F_fd, F)
    report_only = a.scheme == "D"
    passed = err < a.threshold
    _emit({"scheme": a.scheme, "relative_error": err, "threshold": a.threshold, "eps": a.eps,
           "passed": passed, "report_only": report_only,
           "note": "scheme D force is a variational density, not an energy gradient" if report_only else ""})
    if report_only or passed:
        return EXIT_OK
    return EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# minimize / sweep / dynamics

def _initial_mesh(init: str, v: float, nt: int, R: float):
    if init in SHAPES:
        spec = ShapeSpec(init, v if init in ("prolate", "oblate") and v < 1 else None, R)
        if init in ("prolate", "oblate") and v >= 1:
            spec = ShapeSpec("sphere", None, R)
        return seed_mesh(spec, nt, R)
    return read_mesh(init)


def _summary(tr: Trajectory, model: ModelParams, scheme: str) -> dict:
    bd = tr.final
    out = {
        "reason": tr.reason, "steps": tr.steps, "flips": tr.flips,
        "E_over_8pi_kappa": bd.bending / (8 * math.pi * model.kappa),
        "E_H_over_8pi_kappa": bd.E_H / (8 * math.pi * model.kappa),
        **bd.as_dict(),
    }
    if scheme != "A":
        out["shape"] = classify(tr.mesh, vertex_field(tr.mesh, scheme).H).as_dict()
    return out


def _run_cell(job: dict) -> dict:
    """Minimize one (v, init, scheme, model) cell and write its artifacts."""
    out = Path(job["out"])
    out.mkdir(parents=True, exist_ok=True)
    model = ModelParams(**job["model"])
    cfg = IntegratorConfig(**job["integrator"])
    R = job["R"]
    mesh = _initial_mesh(job["init"], job["v"], job["nt"], R)
    cons = ConstraintParams.for_targets(R, job["v"], mesh.n_triangles, **job["stiffness"])
    snap_every = job.get("snapshot_interval") or 0

    def snapshot(step, m):
        if snap_every and step % snap_every == 0:
            write_mesh(m, out / f"snapshot_{step:09d}.off")

    tr = minimize(mesh, model, cons, cfg, job["scheme"], R_ref=R, snapshot=snapshot if snap_every else None)
    resolved = dict(job, integrator=_plain(tr.config))
    _write_json(out / "config.json", resolved)
    tr.write_csv(out / "trajectory.csv")
    write_mesh(tr.mesh, out / "final.off")
    summary = _summary(tr, model, job["scheme"])
    _write_json(out / "summary.json", summary)
    return summary


def _plain(cfg: dict) -> dict:
    keys = {f for f in IntegratorConfig.__dataclass_fields__}
    return {k: v for k, v in cfg.items() if k in keys}


def _job(a, command: str, v: float, init: str, scheme: str, model: ModelParams, out: Path,
         base_cfg: IntegratorConfig, base_stiff: dict) -> dict:
    return {
        "command": command, "v": v, "init": init, "scheme": scheme, "nt": a.nt,
        "R": a.R if a.R is not None else 1.0, "model": asdict(model),
        "integrator": asdict(_integrator_from(a, base_cfg)), "stiffness": _stiffness_from(a, base_stiff),
        "out": str(out), "snapshot_interval": getattr(a, "snapshot_interval", 0),
    }


def _finish(summary: dict, quiet: bool = False) -> int:
    if not quiet:
        _emit(summary)
    return EXIT_NUMERICAL if summary["reason"] == "numerical-failure" else EXIT_OK


def cmd_minimize(a) -> int:
    if a.init in ("prolate", "oblate") and a.v >= 1:
        raise UsageError("--v must be < 1 for ellipsoidal seeds")
    out = _output_dir(a.out, f"minimize_v{a.v}_{a.init}_{a.scheme}")
    job = _job(a, "minimize", a.v, a.init, a.scheme, _model_from(a), out, MINIMIZE_CONFIG, MINIMIZE_STIFFNESS)
    return _finish(_run_cell(job))


def cmd_dynamics(a) -> int:
    out = _output_dir(a.out, "dynamics")
    base = replace(MINIMIZE_CONFIG, kBT=None, sample_interval=1000)
    job = _job(a, "dynamics", a.v, a.init, a.scheme, _model_from(a), out, base, MINIMIZE_STIFFNESS)
    return _finish(_run_cell(job))


def cmd_sweep(a) -> int:
    grids = {"v": a.v, "h0": a.h0_list, "da0": a.da0_list, "init": a.inits, "scheme": a.schemes}
    empty = [k for k, g in grids.items() if g is not None and len(g) == 0]
    if empty:
        raise UsageError(f"empty grid for {', '.join(empty)}")
    h0s = a.h0_list or [a.h0]
    da0s = a.da0_list or [a.da0]
    schemes = [s.upper() for s in (a.schemes or ["B"])]
    bad = [s for s in schemes if s not in SCHEMES]
    if bad:
        raise UsageError(f"unknown scheme(s) {bad}")
    out = _output_dir(a.out, "sweep")
    jobs = []
    for v in a.v:
        inits = a.inits or [s.kind for s in default_seeds(v)]
        for h0 in h0s:
            for da0 in da0s:
                model = _model_from(a, H0=h0, da0=da0)
                for scheme in schemes:
                    for init in inits:
                        cell = len(jobs)
                        name = f"cell{cell:03d}_v{v}_h{h0}_da{da0}_{scheme}_{Path(init).stem}"
                        job = _job(a, "sweep", v, init, scheme, model, out / name, MINIMIZE_CONFIG, MINIMIZE_STIFFNESS)
                        job["integrator"]["seed"] = a.seed ^ cell
                        job.update(h0=h0, da0=da0, cell=cell)
                        jobs.append(job)
    if a.workers > 1:
        with ProcessPoolExecutor(a.workers) as pool:
            summaries = list(pool.map(_run_cell, jobs))
    else:
        summaries = [_run_cell(j) for j in jobs]
    cols = ["cell", "v", "h0", "da0", "scheme", "init", "reason", "E_over_8pi_kappa", "E_H", "E_AD",
            "E_total", "v_final", "da", "da_sphere", "shape", "ground_state"]
    best: dict[tuple, int] = {}
    for n, (job, s) in enumerate(zip(jobs, summaries)):
        key = (job["v"], job["h0"], job["da0"], job["scheme"])
        if s["reason"] != "numerical-failure" and (key not in best or s["E_total"] < summaries[best[key]]["E_total"]):
            best[key] = n
    winners = set(best.values())
    with (out / "summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for n, (job, s) in enumerate(zip(jobs, summaries)):
            w.writerow([job["cell"], job["v"], job["h0"], job["da0"], job["scheme"], job["init"], s["reason"],
                        s["E_over_8pi_kappa"], s["E_H"], s["E_AD"], s["E_total"], s["v"], s["da"],
                        s["da_sphere"], s.get("shape", {}).get("label", ""), int(n in winners)])
    _write_json(out / "config.json", {"command": "sweep", "cells": jobs})
    print(out / "summary.csv")
    return EXIT_NUMERICAL if any(s["reason"] == "numerical-failure" for s in summaries) else EXIT_OK


def cmd_replay(a) -> int:
    cfg = json.loads(Path(a.config).read_text())
    if cfg.get("command") == "sweep":
        summaries = [_run_cell(dict(j, out=str(Path(a.out or ".") / Path(j["out"]).name)) if a.out else j)
                     for j in cfg["cells"]]
        return EXIT_NUMERICAL if any(s["reason"] == "numerical-failure" for s in summaries) else EXIT_OK
    if a.out:
        cfg["out"] = a.out
    return _finish(_run_cell(cfg))


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="membrane-bending", description="Bending energies and relaxation of vesicle meshes.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pm = sub.add_parser("mesh", help="generate, refine, regularize or validate meshes")
    msub = pm.add_subparsers(dest="mesh_cmd", required=True, parser_class=_Parser)
    g = msub.add_parser("gen", help="icosphere mapped to a shape")
    g.add_argument("--shape", choices=SHAPES, default="sphere")
    g.add_argument("--v", type=float, default=None, help="reduced volume for prolate/oblate")
    g.add_argument("--nt", type=int, default=1280, help="triangle count 20*4^k")
    g.add_argument("--R", type=float, default=1.0)
    g.add_argument("-o", "--output", required=True)
    s = msub.add_parser("subdivide")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--times", type=int, default=1)
    s.add_argument("--loop", action="store_true", help="Loop smoothing instead of midpoint split")
    e = msub.add_parser("equiangulate")
    e.add_argument("input")
    e.add_argument("-o", "--output", required=True)
    v = msub.add_parser("validate")
    v.add_argument("input")
    pm.set_defaults(func=cmd_mesh)

    pe = sub.add_parser("energy", help="energy breakdown as JSON")
    pe.add_argument("mesh")
    pe.add_argument("--scheme", type=str.upper, choices=SCHEMES, default="B")
    pe.add_argument("--v-target", type=float, default=None, help="add penalties with this reduced volume target")
    pe.add_argument("--classify", action="store_true")
    _add_model_flags(pe)
    _add_constraint_flags(pe)
    pe.set_defaults(func=cmd_energy)

    pf = sub.add_parser("force-check", help="analytic force versus central differences")
    pf.add_argument("mesh")
    pf.add_argument("--scheme", type=str.upper, choices=SCHEMES, default="B")
    pf.add_argument("--eps", type=float, default=1e-6)
    pf.add_argument("--threshold", type=float, default=1e-5)
    pf.add_argument("--perturb", type=float, default=0.0, help="random vertex noise amplitude")
    pf.add_argument("--seed", type=int, default=0)
    pf.add_argument("--v-target", type=float, default=None)
    _add_model_flags(pf)
    _add_constraint_flags(pf)
    pf.set_defaults(func=cmd_force_check)

    for name, func, helptext in (("minimize", cmd_minimize, "relax one seed at a reduced volume"),
                                 ("dynamics", cmd_dynamics, "thermalized trajectory with snapshots")):
        pr = sub.add_parser(name, help=helptext)
        pr.add_argument("--v", type=float, required=True, help="target reduced volume")
        pr.add_argument("--init", default="oblate", help=f"one of {SHAPES} or a mesh file")
        pr.add_argument("--scheme", type=str.upper, choices=SCHEMES, default="B")
        pr.add_argument("--nt", type=int, default=1280)
        pr.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ROOT_ENV}/...)")
        if name == "dynamics":
            pr.add_argument("--snapshot-interval", type=int, default=10000)
        _add_model_flags(pr)
        _add_constraint_flags(pr)
        _add_integrator_flags(pr)
        pr.set_defaults(func=func)

    pw = sub.add_parser("sweep", help="grid of minimizations with ground-state selection")
    pw.add_argument("--v", type=_floats, required=True, help="comma-separated reduced volumes")
    pw.add_argument("--h0-list", type=_floats, default=None)
    pw.add_argument("--da0-list", type=_floats, default=None)
    pw.add_argument("--inits", type=_strs, default=None, help="comma-separated seeds (default sphere,prolate,oblate)")
    pw.add_argument("--schemes", type=_strs, default=None)
    pw.add_argument("--nt", type=int, default=1280)
    pw.add_argument("--workers", type=int, default=1)
    pw.add_argument("--out", default=None)
    _add_model_flags(pw)
    _add_constraint_flags(pw)
    _add_integrator_flags(pw)
    pw.set_defaults(func=cmd_sweep)

    pp = sub.add_parser("replay", help="rerun from a written config.json")
    pp.add_argument("config")
    pp.add_argument("--out", default=None)
    pp.set_defaults(func=cmd_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return int(exc.code or 0)
    try:
        return a.func(a)
    except UsageError as exc:
        print(f"membrane-bending: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MeshParseError, MeshError, NonPositiveAreaError, FileNotFoundError) as exc:
        print(f"membrane-bending: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, UnsupportedModelError) as exc:
        print(f"membrane-bending: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalFailure, FloatingPointError) as exc:
        print(f"membrane-bending: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
