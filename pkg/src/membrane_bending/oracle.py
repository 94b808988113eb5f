"""Reference values independent of the triangulated schemes.

Axisymmetric surfaces are written as trigonometric profiles

    x(u1, u2) = (rho(u1) sin u2, rho(u1) cos u2, zeta(u1)),
    rho = sum_n b_n sin(n u1),  zeta = sum_n a_n cos(n u1),

so every derivative is available in closed form.  With this ordering
``x_1 x x_2`` points into the enclosed volume and the sphere has H > 0.
Curvatures come from the two fundamental forms evaluated on the 3-D
embedding; the surface Laplacian of H uses the meridian form of the
Laplace-Beltrami operator with H carried as a second-order jet.
Integrals use Gauss-Legendre in u1 and the trapezoid rule in u2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import BICONCAVE_COEFFS, TriMesh
from .params import ModelParams


# ---------------------------------------------------------------------------
# second-order jets (value, first and second derivative in u1)


@dataclass(frozen=True)
class Jet:
    v: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    def __add__(self, o):
        o = _jet(o)
        return Jet(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.d1, -self.d2)

    def __sub__(self, o):
        return self + (-_jet(o))

    def __rsub__(self, o):
        return _jet(o) - self

    def __mul__(self, o):
        o = _jet(o)
        return Jet(self.v * o.v, self.d1 * o.v + self.v * o.d1, self.d2 * o.v + 2 * self.d1 * o.d1 + self.v * o.d2)

    __rmul__ = __mul__

    def reciprocal(self):
        r = 1.0 / self.v
        return Jet(r, -self.d1 * r * r, (2 * self.d1 * self.d1 * r - self.d2) * r * r)

    def __truediv__(self, o):
        return self * _jet(o).reciprocal()

    def __rtruediv__(self, o):
        return _jet(o) * self.reciprocal()

    def sqrt(self):
        s = np.sqrt(self.v)
        d1 = self.d1 / (2 * s)
        return Jet(s, d1, (self.d2 - 2 * d1 * d1) / (2 * s))


def _jet(o) -> Jet:
    if isinstance(o, Jet):
        return o
    z = np.zeros_like(np.asarray(o, dtype=float))
    return Jet(np.asarray(o, dtype=float) + z, z, z)


# ---------------------------------------------------------------------------
# surfaces


class RevolutionSurface:
    """Axisymmetric closed surface with trigonometric-series profile."""

    def __init__(self, rho_sin: dict[int, float], zeta_cos: dict[int, float], name: str = "surface"):
        self.rho_sin = {int(k): float(v) for k, v in rho_sin.items()}
        self.zeta_cos = {int(k): float(v) for k, v in zeta_cos.items()}
        self.name = name

    @classmethod
    def sphere(cls, R: float = 1.0) -> "RevolutionSurface":
        return cls({1: R}, {1: R}, "sphere")

    @classmethod
    def spheroid(cls, a: float, c: float) -> "RevolutionSurface":
        return cls({1: a}, {1: c}, "spheroid")

    @classmethod
    def biconcave(cls, R: float = 1.0, coeffs=BICONCAVE_COEFFS) -> "RevolutionSurface":
        c0, c1, c2 = coeffs
        half = 0.5 * R
        return cls(
            {1: R},
            {1: half * (c0 + c1 / 4 + c2 / 8), 3: half * (-c1 / 4 - 3 * c2 / 16), 5: half * c2 / 16},
            "biconcave",
        )

    # profile derivatives ---------------------------------------------------

    def rho(self, u, k: int = 0):
        """k-th derivative of rho(u)."""
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for n, b in self.rho_sin.items():
            out += b * n**k * np.sin(n * u + k * np.pi / 2)
        return out

    def zeta(self, u, k: int = 0):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for n, a in self.zeta_cos.items():
            out += a * n**k * np.cos(n * u + k * np.pi / 2)
        return out

    # embedding --------------------------------------------------------------

    def position(self, u1, u2):
        r = self.rho(u1)
        return np.stack(np.broadcast_arrays(r * np.sin(u2), r * np.cos(u2), self.zeta(u1)), axis=-1)

    def derivatives(self, u1, u2):
        """``x_1, x_2, x_11, x_12, x_22``."""
        u1, u2 = np.broadcast_arrays(np.asarray(u1, float), np.asarray(u2, float))
        s, c = np.sin(u2), np.cos(u2)
        r, r1, r2 = self.rho(u1), self.rho(u1, 1), self.rho(u1, 2)
        z1, z2 = self.zeta(u1, 1), self.zeta(u1, 2)
        zero = np.zeros_like(u1)
        x1 = np.stack([r1 * s, r1 * c, z1], axis=-1)
        x2 = np.stack([r * c, -r * s, zero], axis=-1)
        x11 = np.stack([r2 * s, r2 * c, z2], axis=-1)
        x12 = np.stack([r1 * c, -r1 * s, zero], axis=-1)
        x22 = np.stack([-r * s, -r * c, zero], axis=-1)
        return x1, x2, x11, x12, x22

    def metric(self, u1, u2):
        x1, x2, *_ = self.derivatives(u1, u2)
        g11 = np.sum(x1 * x1, axis=-1)
        g12 = np.sum(x1 * x2, axis=-1)
        g22 = np.sum(x2 * x2, axis=-1)
        return g11, g12, g22, g11 * g22 - g12 * g12

    def normal(self, u1, u2):
        x1, x2, *_ = self.derivatives(u1, u2)
        n = np.cross(x1, x2)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def curvatures(self, u1, u2):
        """``(H, G)`` from the first and second fundamental forms."""
        x1, x2, x11, x12, x22 = self.derivatives(u1, u2)
        n = np.cross(x1, x2)
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        g11 = np.sum(x1 * x1, -1)
        g12 = np.sum(x1 * x2, -1)
        g22 = np.sum(x2 * x2, -1)
        b11 = np.sum(x11 * n, -1)
        b12 = np.sum(x12 * n, -1)
        b22 = np.sum(x22 * n, -1)
        g = g11 * g22 - g12 * g12
        H = 0.5 * (g22 * b11 - 2 * g12 * b12 + g11 * b22) / g
        G = (b11 * b22 - b12 * b12) / g
        return H, G

    def mean_curvature_jet(self, u) -> Jet:
        """H(u1) as a jet, from the meridian principal curvatures."""
        u = np.asarray(u, dtype=float)
        r = Jet(self.rho(u), self.rho(u, 1), self.rho(u, 2))
        r1 = Jet(self.rho(u, 1), self.rho(u, 2), self.rho(u, 3))
        r2 = Jet(self.rho(u, 2), self.rho(u, 3), self.rho(u, 4))
        z1 = Jet(self.zeta(u, 1), self.zeta(u, 2), self.zeta(u, 3))
        z2 = Jet(self.zeta(u, 2), self.zeta(u, 3), self.zeta(u, 4))
        s = (r1 * r1 + z1 * z1).sqrt()
        k_m = (z1 * r2 - r1 * z2) / (s * s * s)
        k_p = -z1 / (r * s)
        return 0.5 * (k_m + k_p)

    def laplace_H(self, u) -> np.ndarray:
        """Surface Laplacian of H: ``(1 / (rho s)) d/du (rho H' / s)``."""
        u = np.asarray(u, dtype=float)
        Hj = self.mean_curvature_jet(u)
        r, r1, r2 = self.rho(u), self.rho(u, 1), self.rho(u, 2)
        z1, z2 = self.zeta(u, 1), self.zeta(u, 2)
        s = np.sqrt(r1 * r1 + z1 * z1)
        ds = (r1 * r2 + z1 * z2) / s
        q = r / s
        dq = (r1 * s - r * ds) / (s * s)
        return (dq * Hj.d1 + q * Hj.d2) / (r * s)

    def sample_mesh(self, mesh: TriMesh) -> TriMesh:
        """Place an icosphere's vertices on this surface by polar angle."""
        p = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1, keepdims=True)
        u1 = np.arccos(np.clip(p[:, 2], -1, 1))
        u2 = np.arctan2(p[:, 0], p[:, 1])
        return mesh.with_vertices(self.position(u1, u2))


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureSpec:
    n1: int = 96
    n2: int = 16

    def __post_init__(self):
        if self.n1 < 8 or self.n2 < 8:
            raise ValueError("quadrature node counts must be >= 8")

    def refined(self) -> "QuadratureSpec":
        return QuadratureSpec(2 * self.n1, 2 * self.n2)

    def nodes(self):
        x, w = np.polynomial.legendre.leggauss(self.n1)
        u1 = 0.5 * np.pi * (x + 1.0)
        w1 = 0.5 * np.pi * w
        u2 = 2.0 * np.pi * np.arange(self.n2) / self.n2
        w2 = np.full(self.n2, 2.0 * np.pi / self.n2)
        U1, U2 = np.meshgrid(u1, u2, indexing="ij")
        return U1, U2, np.outer(w1, w2)


def integrate(surface: RevolutionSurface, integrand: Callable, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """``int f dA`` where ``f(u1, u2)`` is evaluated on the tensor grid."""
    U1, U2, W = quad.nodes()
    *_, g = surface.metric(U1, U2)
    return float(np.sum(W * np.sqrt(g) * integrand(U1, U2)))


@dataclass(frozen=True)
class ParametricMoments:
    M0: float
    M1: float
    M2: float
    volume: float

    def delta_A(self, D: float) -> float:
        return 2.0 * D * self.M1

    @property
    def R(self) -> float:
        return math.sqrt(self.M0 / (4 * math.pi))

    @property
    def reduced_volume(self) -> float:
        return 3.0 * self.volume / (4.0 * math.pi * self.R**3)


def parametric_moments(surface: RevolutionSurface, quad: QuadratureSpec = QuadratureSpec()) -> ParametricMoments:
    U1, U2, W = quad.nodes()
    *_, g = surface.metric(U1, U2)
    dA = W * np.sqrt(g)
    H, _ = surface.curvatures(U1, U2)
    # V = (1/3) int x . (outward normal) dA, with the outward normal = -n
    vol = float(np.sum(dA * np.sum(surface.position(U1, U2) * -surface.normal(U1, U2), -1)) / 3.0)
    return ParametricMoments(float(dA.sum()), float(np.sum(dA * H)), float(np.sum(dA * H * H)), vol)


@dataclass(frozen=True)
class ParametricEnergy:
    E_H: float
    E_AD: float
    moments: ParametricMoments

    @property
    def total(self) -> float:
        return self.E_H + self.E_AD


def parametric_energy(
    surface: RevolutionSurface, model: ModelParams, quad: QuadratureSpec = QuadratureSpec(), R: float | None = None
) -> ParametricEnergy:
    """Helfrich + ADE energy by direct integration of ``2 kappa (H - H0)^2``."""
    U1, U2, W = quad.nodes()
    *_, g = surface.metric(U1, U2)
    dA = W * np.sqrt(g)
    H, _ = surface.curvatures(U1, U2)
    mom = parametric_moments(surface, quad)
    E_H = float(np.sum(dA * 2.0 * model.kappa * (H - model.H0) ** 2))
    E_AD = 0.0
    if model.alpha:
        Rr = mom.R if R is None else R
        dA0 = model.delta_A0(Rr)
        E_AD = model.alpha * math.pi * model.kappa / (2.0 * mom.M0 * model.D**2) * (mom.delta_A(model.D) - dA0) ** 2
    return ParametricEnergy(E_H, E_AD, mom)


def converged_energy(surface, model, quad: QuadratureSpec = QuadratureSpec(), R=None) -> tuple[ParametricEnergy, float]:
    """Energy at ``quad`` plus the relative change on doubling the nodes."""
    e1 = parametric_energy(surface, model, quad, R)
    e2 = parametric_energy(surface, model, quad.refined(), R)
    return e2, abs(e2.total - e1.total) / max(abs(e2.total), 1e-300)


def parametric_force_density(
    surface: RevolutionSurface, model: ModelParams, u1, u2=0.0, quad: QuadratureSpec = QuadratureSpec(), R=None
):
    """``(f_H, f_AD)``: normal force density along the inward normal."""
    from .schemes import curvature_force_density

    H, G = surface.curvatures(u1, u2)
    lap = surface.laplace_H(np.broadcast_to(u1, np.shape(H)))
    mom = parametric_moments(surface, quad)
    Rr = mom.R if R is None else R
    return curvature_force_density(H, G, lap, mom.M0, mom.M1, model, Rr)


# ---------------------------------------------------------------------------
# closed forms and finite differences


def sphere_energy(model: ModelParams, R: float = 1.0) -> tuple[float, float]:
    """``(E_H, E_AD)`` of a radius-R sphere."""
    A = 4 * math.pi * R * R
    E_H = 2 * model.kappa * (1 / R - model.H0) ** 2 * A
    E_AD = 0.0
    if model.alpha:
        dA = 2 * model.D * 4 * math.pi * R
        E_AD = model.alpha * math.pi * model.kappa / (2 * A * model.D**2) * (dA - model.delta_A0(R)) ** 2
    return E_H, E_AD


def icosahedron_volume(circumradius: float = 1.0) -> float:
    a = 4.0 * circumradius / math.sqrt(10 + 2 * math.sqrt(5))
    return 5.0 / 12.0 * (3 + math.sqrt(5)) * a**3


def prolate_area(a: float, c: float) -> float:
    e = math.sqrt(1 - a * a / (c * c))
    return 2 * math.pi * a * a * (1 + c / (a * e) * math.asin(e))


def fd_gradient(energy: Callable[[np.ndarray], float], x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference force ``-dE/dx`` for every coordinate of ``x``."""
    x = np.array(x, dtype=float)
    F = np.zeros_like(x)
    flat = x.reshape(-1)
    out = F.reshape(-1)
    for n in range(flat.size):
        old = flat[n]
        flat[n] = old + step
        ep = energy(x)
        flat[n] = old - step
        em = energy(x)
        flat[n] = old
        out[n] = -(ep - em) / (2 * step)
    return F


def relative_error(a: np.ndarray, b: np.ndarray, eps: float = 1e-300) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), eps))
