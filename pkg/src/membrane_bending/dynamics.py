"""Damped, optionally thermalized velocity-Verlet relaxation of vesicle meshes.

Vertices have unit mass.  Besides the conservative force each edge carries
a central damping force and a central white-noise force with
``sigma^2 = 2 gamma kBT``, so linear and angular momentum are conserved.
The noise for edge ``e`` at step ``s`` is a pure function of
``(seed, s, e)`` (Philox counter mode plus Box-Muller), which makes runs
bitwise reproducible.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import _backend, kernels
from ._backend import njit
from .geometry import total_area
from .mesh import ShapeSpec, TriMesh, build_icosphere, equiangulate, level_for_triangles, map_to_shape, validate
from .models import EnergyBreakdown, evaluate
from .params import ConstraintParams, ModelParams

log = logging.getLogger(__name__)

REGULARIZATION_MODES = ("local-area-penalty", "equiangulation", "both")
TRAJECTORY_COLUMNS = (
    "step", "time", "E_H", "E_AD", "E_area_g", "E_area_l", "E_vol", "E_total", "kinetic", "v", "da", "da_prime", "fmax",
)


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration settings; ``None`` entries are resolved at run start.

    ``dt=None`` triggers a stability pre-scan, ``gamma=None`` gives an edge
    damping time of ``50 dt``, ``kBT=None`` means ``1e-4 kappa`` and
    ``fmax_tol=None`` means ``1e-6 kappa / R``.
    """

    dt: float | None = None
    dt0: float = 0.2
    gamma: float | None = None
    kBT: float | None = None
    n_steps: int = 100_000
    fmax_tol: float | None = None
    dE_tol: float = 1e-8
    window: int = 1000
    regularization: str = "both"
    equiangulation_period: int = 500
    seed: int = 0
    anneal_fraction: float = 0.25
    sample_interval: int = 1000

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.gamma is not None and self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.kBT is not None and self.kBT < 0:
            raise ValueError("kBT must be >= 0")
        if self.regularization not in REGULARIZATION_MODES:
            raise ValueError(f"regularization must be one of {REGULARIZATION_MODES}")
        if self.n_steps < 0 or self.sample_interval < 1 or self.window < 1:
            raise ValueError("n_steps >= 0, sample_interval >= 1 and window >= 1 required")
        if not 0 <= self.anneal_fraction <= 1:
            raise ValueError("anneal_fraction must lie in [0, 1]")

    @property
    def equiangulates(self) -> bool:
        return self.regularization in ("equiangulation", "both") and self.equiangulation_period > 0

    def sigma(self) -> float:
        return math.sqrt(2.0 * (self.gamma or 0.0) * (self.kBT or 0.0))

    def noise_scale(self, step: int) -> float:
        """Noise amplitude factor at ``step``: 1, then linear decay to 0."""
        if not self.kBT:
            return 0.0
        start = (1.0 - self.anneal_fraction) * self.n_steps
        if step < start:
            return 1.0
        if self.n_steps <= start:
            return 0.0
        return max(0.0, (self.n_steps - step) / (self.n_steps - start))


# ---------------------------------------------------------------------------
# pairwise thermostat


def edge_noise(seed: int, step: int, n_edges: int) -> np.ndarray:
    """Standard normal ``xi[e]`` depending only on ``(seed, step, e)``."""
    bg = np.random.Philox(key=int(seed) & (2**64 - 1), counter=[0, int(step), 0, 0])
    n_pairs = (n_edges + 1) // 2
    raw = bg.random_raw(2 * n_pairs)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    r = np.sqrt(-2.0 * np.log(u[0::2]))
    phi = 2.0 * np.pi * u[1::2]
    z = np.empty(2 * n_pairs)
    z[0::2] = r * np.cos(phi)
    z[1::2] = r * np.sin(phi)
    return z[:n_edges]


def pairwise_damping_force(mesh: TriMesh, velocities: np.ndarray, gamma: float) -> np.ndarray:
    e = mesh.edges
    return kernels.thermostat(mesh.vertices, np.asarray(velocities, float), e.i, e.j, gamma, np.zeros(len(e)))


def pairwise_stochastic_force(mesh: TriMesh, step: int, sigma: float, seed: int, dt: float) -> np.ndarray:
    e = mesh.edges
    noise = sigma / math.sqrt(dt) * edge_noise(seed, step, len(e))
    return kernels.thermostat(mesh.vertices, np.zeros_like(mesh.vertices), e.i, e.j, 0.0, noise)


# ---------------------------------------------------------------------------
# force evaluation


class ForceModel:
    """Conservative energy/force for one scheme, model and constraint set."""

    def __init__(self, scheme: str, model: ModelParams, constraints: ConstraintParams, R_ref: float):
        self.scheme = scheme.upper()
        self.model = model
        self.constraints = constraints
        self.R_ref = R_ref
        self.fast = self.scheme in ("A", "B")

    def with_constraints(self, constraints: ConstraintParams) -> "ForceModel":
        return ForceModel(self.scheme, self.model, constraints, self.R_ref)

    def energy_force(self, mesh: TriMesh) -> tuple[float, np.ndarray]:
        if self.fast:
            x = mesh.vertices
            e = mesh.edges
            if self.scheme == "B":
                terms, F = kernels.scheme_b(x, mesh.triangles, e.i, e.j, e.k, e.l, self.model.bend_vector(self.R_ref))
                E = terms[3] + terms[4]
            else:
                E, F = kernels.scheme_a(x, e.i, e.j, e.k, e.l, self.model.scheme_a_kappa, self.model.theta0)
            c = self.constraints
            pt, Fp = kernels.penalty(x, mesh.triangles, c.pen_vector(), c.triangle_targets(mesh.n_triangles))
            return float(E + pt[2:].sum()), F + Fp
        ev = evaluate(mesh, self.scheme, self.model, self.constraints, self.R_ref)
        return ev.breakdown.total, ev.force

    def breakdown(self, mesh: TriMesh) -> EnergyBreakdown:
        return evaluate(mesh, self.scheme, self.model, self.constraints, self.R_ref, want_force=False).breakdown


# ---------------------------------------------------------------------------
# integration


class NumericalFailure(RuntimeError):
    pass


@dataclass
class State:
    mesh: TriMesh
    v: np.ndarray
    F: np.ndarray      # total force (conservative + thermostat) at the current step
    Fc: np.ndarray     # conservative part
    E: float
    step: int = 0

    @property
    def kinetic(self) -> float:
        return 0.5 * float(np.sum(self.v * self.v))


def initial_state(mesh: TriMesh, fm: ForceModel, v: np.ndarray | None = None, step: int = 0) -> State:
    E, Fc = fm.energy_force(mesh)
    v = np.zeros_like(mesh.vertices) if v is None else np.array(v, dtype=float)
    return State(mesh, v, Fc.copy(), Fc, E, step)


def step(state: State, fm: ForceModel, dt: float, gamma: float = 0.0, noise: np.ndarray | None = None) -> State:
    """One velocity-Verlet step (unit mass).

    The dissipative force at the new position uses the half-step velocity;
    ``noise`` holds per-edge noise forces already scaled by ``sigma/sqrt(dt)``.
    """
    v_half = state.v + 0.5 * dt * state.F
    mesh = state.mesh.with_vertices(state.mesh.vertices + dt * v_half)
    E, Fc = fm.energy_force(mesh)
    F = Fc
    if gamma or noise is not None:
        e = mesh.edges
        F = Fc + kernels.thermostat(mesh.vertices, v_half, e.i, e.j, gamma, np.zeros(len(e)) if noise is None else noise)
    v = v_half + 0.5 * dt * F
    return State(mesh, v, F, Fc, E, state.step + 1)


@njit
def _chunk_nb(x, v, F, tri, ei, ej, ek, el, scheme_b, bend, kt, theta0, pen, at0, dt, gamma, noise, n):
    ne = ei.shape[0]
    zero_noise = np.zeros(ne)
    Fc = np.zeros_like(x)
    E = 0.0
    for s in range(n):
        for a in range(x.shape[0]):
            for d in range(3):
                v[a, d] += 0.5 * dt * F[a, d]
                x[a, d] += dt * v[a, d]
        if scheme_b:
            terms, Fb = kernels.scheme_b_nb(x, tri, ei, ej, ek, el, bend, True)
            E = terms[3] + terms[4]
        else:
            E, Fb = kernels.scheme_a_nb(x, ei, ej, ek, el, kt, theta0, False, True)
        pt, Fp = kernels.penalty_nb(x, tri, pen, at0, True)
        E += pt[2] + pt[3] + pt[4]
        nz = noise[s] if noise.shape[0] > 0 else zero_noise
        Fd = kernels.thermostat_nb(x, v, ei, ej, gamma, nz)
        ok = True
        for a in range(x.shape[0]):
            for d in range(3):
                Fc[a, d] = Fb[a, d] + Fp[a, d]
                F[a, d] = Fc[a, d] + Fd[a, d]
                v[a, d] += 0.5 * dt * F[a, d]
                if not (math.isfinite(v[a, d]) and math.isfinite(x[a, d])):
                    ok = False
        if not ok or not math.isfinite(E):
            return E, Fc, s + 1, False
    return E, Fc, n, True


def run_steps(state: State, fm: ForceModel, n: int, dt: float, gamma: float,
              noise_fn: Callable[[int], np.ndarray | None] | None = None) -> State:
    """Advance ``n`` steps.  ``noise_fn(step)`` returns scaled edge noise or None.

    Raises :class:`NumericalFailure` on non-finite state.
    """
    if n <= 0:
        return state
    if fm.fast and _backend.USE_NUMBA:
        mesh = state.mesh
        e = mesh.edges
        if noise_fn is None:
            noise = np.zeros((0, len(e)))
        else:
            rows = [noise_fn(state.step + 1 + s) for s in range(n)]
            noise = np.zeros((0, len(e))) if all(r is None for r in rows) else np.stack(
                [np.zeros(len(e)) if r is None else r for r in rows]
            )
        x = mesh.vertices.copy()
        v = state.v.copy()
        F = state.F.copy()
        c = fm.constraints
        E, Fc, done, ok = _chunk_nb(
            x, v, F, mesh.triangles, e.i, e.j, e.k, e.l, fm.scheme == "B",
            fm.model.bend_vector(fm.R_ref), fm.model.scheme_a_kappa, fm.model.theta0,
            c.pen_vector(), c.triangle_targets(mesh.n_triangles), dt, gamma, noise, n,
        )
        if not ok:
            raise NumericalFailure(f"non-finite state at step {state.step + done}")
        return State(mesh.with_vertices(x), v, F, Fc, float(E), state.step + n)
    for _ in range(n):
        noise = noise_fn(state.step + 1) if noise_fn is not None else None
        state = step(state, fm, dt, gamma, noise)
        if not (np.isfinite(state.E) and np.all(np.isfinite(state.mesh.vertices)) and np.all(np.isfinite(state.v))):
            raise NumericalFailure(f"non-finite state at step {state.step}")
    return state


def mean_edge_length(mesh: TriMesh) -> float:
    e = mesh.edges
    return float(np.mean(np.linalg.norm(mesh.vertices[e.j] - mesh.vertices[e.i], axis=1)))


def prescan_dt(mesh: TriMesh, fm: ForceModel, dt0: float = 0.2, trial_steps: int = 100,
               max_fraction: float = 0.05, min_dt: float = 1e-8) -> float:
    """Largest ``dt0 / 2^k`` whose trial run keeps every per-step move below
    ``max_fraction`` of the mean edge length."""
    limit = max_fraction * mean_edge_length(mesh)
    dt = dt0
    base = initial_state(mesh, fm)
    while dt >= min_dt:
        gamma = 1.0 / (50.0 * dt)
        state = base
        ok = True
        try:
            for _ in range(trial_steps // 10):
                prev = state.mesh.vertices
                state = run_steps(state, fm, 10, dt, gamma)
                # per-step displacement bound: the largest move over any step of the block
                move = np.max(np.linalg.norm(state.mesh.vertices - prev, axis=1)) / 10
                vmax = np.max(np.linalg.norm(state.v, axis=1)) * dt
                if max(move, vmax) > limit:
                    ok = False
                    break
        except NumericalFailure:
            ok = False
        if ok:
            return dt
        dt *= 0.5
    raise NumericalFailure("no stable time step found")


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    samples: list[dict]
    mesh: TriMesh
    reason: str
    steps: int
    config: dict
    final: EnergyBreakdown | None = None
    flips: int = 0
    velocities: np.ndarray | None = field(default=None, repr=False)

    def column(self, name: str) -> np.ndarray:
        return np.array([s[name] for s in self.samples], dtype=float)

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRAJECTORY_COLUMNS)
            for s in self.samples:
                w.writerow([s["step"], repr(float(s["time"]))] + [repr(float(s[c])) for c in TRAJECTORY_COLUMNS[2:]])
        return path

    @property
    def energy(self) -> float:
        return self.final.total if self.final else math.nan


def resolve_config(cfg: IntegratorConfig, mesh: TriMesh, fm: ForceModel) -> IntegratorConfig:
    R = fm.R_ref
    dt = cfg.dt if cfg.dt is not None else prescan_dt(mesh, fm, cfg.dt0)
    return replace(
        cfg,
        dt=dt,
        gamma=cfg.gamma if cfg.gamma is not None else 1.0 / (50.0 * dt),
        kBT=cfg.kBT if cfg.kBT is not None else 1e-4 * fm.model.kappa,
        fmax_tol=cfg.fmax_tol if cfg.fmax_tol is not None else 1e-6 * fm.model.kappa / R,
    )


def _sample(state: State, fm: ForceModel, dt: float) -> dict:
    bd = fm.breakdown(state.mesh)
    fmax = float(np.max(np.linalg.norm(state.Fc, axis=1)))
    return {
        "step": state.step, "time": state.step * dt,
        "E_H": bd.E_H, "E_AD": bd.E_AD, "E_area_g": bd.E_area_g, "E_area_l": bd.E_area_l, "E_vol": bd.E_vol,
        "E_total": bd.total, "kinetic": state.kinetic, "v": bd.v, "da": bd.da, "da_prime": bd.da_prime,
        "da_sphere": bd.da_sphere, "fmax": fmax,
    }


def minimize(
    initial: TriMesh,
    model: ModelParams,
    constraints: ConstraintParams,
    config: IntegratorConfig = IntegratorConfig(),
    scheme: str = "B",
    R_ref: float | None = None,
    velocities: np.ndarray | None = None,
    snapshot: Callable[[int, TriMesh], None] | None = None,
) -> Trajectory:
    """Relax ``initial`` by damped (and optionally thermalized) dynamics.

    Stops when the conservative force and the energy change over
    ``config.window`` steps are both below tolerance while the noise is
    off, at ``config.n_steps``, or on numerical failure (the last finite
    state is returned).
    """
    if not validate(initial).ok:
        raise ValueError("initial mesh fails validation")
    if R_ref is None:
        A = constraints.A0 if constraints.A0 else total_area(initial)
        R_ref = math.sqrt(A / (4 * math.pi))
    cons = constraints
    if config.regularization == "equiangulation":
        cons = cons.with_(k_area_local=0.0)
    fm = ForceModel(scheme, model, cons, R_ref)
    cfg = resolve_config(config, initial, fm)
    dt, gamma = cfg.dt, cfg.gamma
    sigma = math.sqrt(2.0 * gamma * cfg.kBT)

    def noise_fn(s: int):
        amp = sigma * cfg.noise_scale(s)
        if amp == 0.0:
            return None
        return amp / math.sqrt(dt) * edge_noise(cfg.seed, s, n_edges[0])

    mesh = initial
    n_edges = [mesh.n_edges]
    state = initial_state(mesh, fm, velocities)
    samples = [_sample(state, fm, dt)]
    history = {0: samples[0]["E_total"]}
    reason = "max-steps"
    flips_total = 0
    if snapshot:
        snapshot(0, state.mesh)
    while state.step < cfg.n_steps:
        nxt = min(cfg.n_steps, (state.step // cfg.sample_interval + 1) * cfg.sample_interval)
        if cfg.equiangulates:
            nxt = min(nxt, (state.step // cfg.equiangulation_period + 1) * cfg.equiangulation_period)
        try:
            state = run_steps(state, fm, nxt - state.step, dt, gamma, noise_fn)
        except NumericalFailure as exc:
            log.warning("%s", exc)
            reason = "numerical-failure"
            break
        if cfg.equiangulates and state.step % cfg.equiangulation_period == 0:
            new_mesh, flips = equiangulate(state.mesh)
            if flips:
                flips_total += flips
                if cons.k_area_local > 0:
                    cons = cons.retarget_local(new_mesh.n_triangles)
                fm = fm.with_constraints(cons)
                n_edges[0] = new_mesh.n_edges
                E, Fc = fm.energy_force(new_mesh)
                # thermostat force is re-evaluated on the next step; keep velocities
                state = State(new_mesh, state.v, Fc.copy(), Fc, E, state.step)
        if state.step % cfg.sample_interval == 0 or state.step == cfg.n_steps:
            smp = _sample(state, fm, dt)
            samples.append(smp)
            history[state.step] = smp["E_total"]
            if snapshot:
                snapshot(state.step, state.mesh)
            if cfg.noise_scale(state.step) == 0.0 and smp["fmax"] < cfg.fmax_tol:
                past = [k for k in history if k <= state.step - cfg.window]
                if past:
                    E0 = history[max(past)]
                    if abs(smp["E_total"] - E0) <= cfg.dE_tol * abs(smp["E_total"]):
                        reason = "converged"
                        break
    final = fm.breakdown(state.mesh)
    cfg_dict = asdict(cfg)
    cfg_dict.update(scheme=fm.scheme, R_ref=R_ref)
    return Trajectory(samples, state.mesh, reason, state.step, cfg_dict, final, flips_total, state.v)


# ---------------------------------------------------------------------------
# multi-start and seeds

# Relaxation protocol used for the phase-diagram runs.  Penalties 30x the
# usual (2, 1, 1) hold v within ~3e-3 of target at kappa = 0.01; edge flips
# are required with scheme B, whose curvature is blind to zig-zag buckling
# modes that otherwise absorb area and drive the energy below the continuum.
MINIMIZE_STIFFNESS = {"k_area_global": 60.0, "k_area_local": 30.0, "k_volume": 30.0}
MINIMIZE_CONFIG = IntegratorConfig(n_steps=150_000, regularization="both", sample_interval=5000)


def seed_mesh(spec: ShapeSpec | TriMesh, n_triangles: int = 1280, R: float = 1.0) -> TriMesh:
    if isinstance(spec, TriMesh):
        return spec
    sphere = build_icosphere(level_for_triangles(n_triangles), R)
    return map_to_shape(sphere, replace(spec, R=R))


def default_seeds(v: float) -> list[ShapeSpec]:
    if v >= 1.0:
        return [ShapeSpec("sphere")]
    return [ShapeSpec("sphere"), ShapeSpec("prolate", v), ShapeSpec("oblate", v)]


def ground_state(
    initials: Iterable[ShapeSpec | TriMesh],
    v: float,
    model: ModelParams,
    config: IntegratorConfig = MINIMIZE_CONFIG,
    scheme: str = "B",
    n_triangles: int = 1280,
    R: float = 1.0,
    stiffness: dict | None = None,
) -> tuple[Trajectory, list[Trajectory]]:
    """Minimize from each seed and return the lowest-energy trajectory and all runs."""
    runs = []
    for k, init in enumerate(initials):
        mesh = seed_mesh(init, n_triangles, R)
        cons = ConstraintParams.for_targets(R, v, mesh.n_triangles, **(MINIMIZE_STIFFNESS if stiffness is None else stiffness))
        cfg = replace(config, seed=config.seed ^ k)
        runs.append(minimize(mesh, model, cons, cfg, scheme, R_ref=R))
    best = min(runs, key=lambda t: t.energy if t.reason != "numerical-failure" else math.inf)
    return best, runs


def run_dynamics(
    initial: TriMesh,
    model: ModelParams,
    constraints: ConstraintParams,
    config: IntegratorConfig,
    scheme: str = "B",
    R_ref: float | None = None,
    snapshot: Callable[[int, TriMesh], None] | None = None,
) -> Trajectory:
    """Thermalized trajectory with dense sampling (same integrator as :func:`minimize`)."""
    return minimize(initial, model, constraints, config, scheme, R_ref, snapshot=snapshot)
