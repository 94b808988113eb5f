"""Hot loops: scheme A/B bending, penalty terms, pairwise thermostat.

Every kernel exists as a numba-compiled loop (``*_nb``) and a vectorized
numpy twin (``*_np``); the public wrappers dispatch on
:data:`membrane_bending._backend.USE_NUMBA`.  Both variants return the
same numbers to rounding and are cross-checked in the test suite.

Coefficient packing (all float64 arrays):

* ``bend = [kappa, H0, alpha, D, dA0]`` with ``dA0`` the dimensional
  reference area difference.
* ``pen = [k_area_global, A0, k_area_local, k_volume, V0]``.
"""
from __future__ import annotations

import math

import numpy as np

from . import _backend
from ._backend import njit
from .geometry import _dot, area_gradients, dihedral_gradients, scatter, scatter_scalar, volume_gradients

B_TERMS = ("M0", "M1", "M2", "E_H", "E_AD")
PEN_TERMS = ("area", "volume", "E_area_g", "E_area_l", "E_vol")


# ---------------------------------------------------------------------------
# moment energy (shared by every moment-based scheme)


@njit
def moment_energy(M0, M1, M2, bend):
    """Return ``(E_H, E_AD, dE/dM0, dE/dM1, dE/dM2)``."""
    kappa, H0, alpha, D, dA0 = bend[0], bend[1], bend[2], bend[3], bend[4]
    E_H = 2.0 * kappa * (M2 - 2.0 * H0 * M1 + H0 * H0 * M0)
    E_AD = 0.0
    g0 = 2.0 * kappa * H0 * H0
    g1 = -4.0 * kappa * H0
    g2 = 2.0 * kappa
    if alpha != 0.0:
        K = alpha * math.pi * kappa / (2.0 * D * D)
        r = 2.0 * D * M1 - dA0
        E_AD = K * r * r / M0
        g0 -= K * r * r / (M0 * M0)
        g1 += 4.0 * K * r * D / M0
    return E_H, E_AD, g0, g1, g2


# ---------------------------------------------------------------------------
# scheme B


@njit
def scheme_b_nb(x, tri, ei, ej, ek, el, bend, want_force):
    nv = x.shape[0]
    nt = tri.shape[0]
    ne = ei.shape[0]
    At = np.empty(nt)
    U = np.empty((nt, 3))
    Av = np.zeros(nv)
    for t in range(nt):
        a, b, c = tri[t, 0], tri[t, 1], tri[t, 2]
        p0 = x[b, 0] - x[a, 0]
        p1 = x[b, 1] - x[a, 1]
        p2 = x[b, 2] - x[a, 2]
        q0 = x[c, 0] - x[a, 0]
        q1 = x[c, 1] - x[a, 1]
        q2 = x[c, 2] - x[a, 2]
        n0 = p1 * q2 - p2 * q1
        n1 = p2 * q0 - p0 * q2
        n2 = p0 * q1 - p1 * q0
        nn = math.sqrt(n0 * n0 + n1 * n1 + n2 * n2)
        At[t] = 0.5 * nn
        U[t, 0] = n0 / nn
        U[t, 1] = n1 / nn
        U[t, 2] = n2 / nn
        w = At[t] / 3.0
        Av[a] += w
        Av[b] += w
        Av[c] += w
    theta = np.empty(ne)
    length = np.empty(ne)
    h = np.zeros(nv)
    for e in range(ne):
        i, j, k, l = ei[e], ej[e], ek[e], el[e]
        d0 = x[j, 0] - x[i, 0]
        d1 = x[j, 1] - x[i, 1]
        d2 = x[j, 2] - x[i, 2]
        le = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        k0 = x[k, 0] - x[i, 0]
        k1 = x[k, 1] - x[i, 1]
        k2 = x[k, 2] - x[i, 2]
        l0 = x[l, 0] - x[j, 0]
        l1 = x[l, 1] - x[j, 1]
        l2 = x[l, 2] - x[j, 2]
        # n1 = d x (x_k - x_i), n2 = (-d) x (x_l - x_j)
        a0 = d1 * k2 - d2 * k1
        a1 = d2 * k0 - d0 * k2
        a2 = d0 * k1 - d1 * k0
        b0 = -(d1 * l2 - d2 * l1)
        b1 = -(d2 * l0 - d0 * l2)
        b2 = -(d0 * l1 - d1 * l0)
        c0 = a1 * b2 - a2 * b1
        c1 = a2 * b0 - a0 * b2
        c2 = a0 * b1 - a1 * b0
        th = math.atan2((c0 * d0 + c1 * d1 + c2 * d2) / le, a0 * b0 + a1 * b1 + a2 * b2)
        theta[e] = th
        length[e] = le
        q = 0.25 * le * th
        h[i] += q
        h[j] += q
    M0 = 0.0
    M1 = 0.0
    M2 = 0.0
    for v in range(nv):
        M0 += Av[v]
        M1 += h[v]
        M2 += h[v] * h[v] / Av[v]
    E_H, E_AD, g0, g1, g2 = moment_energy(M0, M1, M2, bend)
    terms = np.array([M0, M1, M2, E_H, E_AD])
    F = np.zeros((nv, 3))
    if not want_force:
        return terms, F
    gA = np.empty(nv)
    gh = np.empty(nv)
    for v in range(nv):
        Hv = h[v] / Av[v]
        gA[v] = g0 - g2 * Hv * Hv
        gh[v] = g1 + 2.0 * g2 * Hv
    for e in range(ne):
        i, j, k, l = ei[e], ej[e], ek[e], el[e]
        g = 0.25 * (gh[i] + gh[j])
        le = length[e]
        cl = g * theta[e] / le  # coefficient on d l / d x = +-d/le
        ct = g * le             # coefficient on d theta / d x
        d0 = (x[j, 0] - x[i, 0])
        d1 = (x[j, 1] - x[i, 1])
        d2 = (x[j, 2] - x[i, 2])
        e0, e1, e2 = d0 / le, d1 / le, d2 / le
        k0 = x[k, 0] - x[i, 0]
        k1 = x[k, 1] - x[i, 1]
        k2 = x[k, 2] - x[i, 2]
        l0 = x[l, 0] - x[j, 0]
        l1 = x[l, 1] - x[j, 1]
        l2 = x[l, 2] - x[j, 2]
        a0 = d1 * k2 - d2 * k1
        a1 = d2 * k0 - d0 * k2
        a2 = d0 * k1 - d1 * k0
        b0 = -(d1 * l2 - d2 * l1)
        b1 = -(d2 * l0 - d0 * l2)
        b2 = -(d0 * l1 - d1 * l0)
        sa = 1.0 / (a0 * a0 + a1 * a1 + a2 * a2)
        sb = 1.0 / (b0 * b0 + b1 * b1 + b2 * b2)
        w10, w11, w12 = a0 * sa, a1 * sa, a2 * sa
        w20, w21, w22 = b0 * sb, b1 * sb, b2 * sb
        # projections along the edge
        pk_i = k0 * e0 + k1 * e1 + k2 * e2                       # (x_k - x_i).e
        pl_j = l0 * e0 + l1 * e1 + l2 * e2                       # (x_l - x_j).e
        pk_j = pk_i - le                                         # (x_k - x_j).e
        pl_i = pl_j + le                                         # (x_l - x_i).e
        gk0, gk1, gk2 = -le * w10, -le * w11, -le * w12
        gl0, gl1, gl2 = -le * w20, -le * w21, -le * w22
        gi0 = -(pk_j * w10 + pl_j * w20)
        gi1 = -(pk_j * w11 + pl_j * w21)
        gi2 = -(pk_j * w12 + pl_j * w22)
        gj0 = pk_i * w10 + pl_i * w20
        gj1 = pk_i * w11 + pl_i * w21
        gj2 = pk_i * w12 + pl_i * w22
        F[i, 0] -= ct * gi0 - cl * d0
        F[i, 1] -= ct * gi1 - cl * d1
        F[i, 2] -= ct * gi2 - cl * d2
        F[j, 0] -= ct * gj0 + cl * d0
        F[j, 1] -= ct * gj1 + cl * d1
        F[j, 2] -= ct * gj2 + cl * d2
        F[k, 0] -= ct * gk0
        F[k, 1] -= ct * gk1
        F[k, 2] -= ct * gk2
        F[l, 0] -= ct * gl0
        F[l, 1] -= ct * gl1
        F[l, 2] -= ct * gl2
    for t in range(nt):
        a, b, c = tri[t, 0], tri[t, 1], tri[t, 2]
        g = 0.5 * (gA[a] + gA[b] + gA[c]) / 3.0
        u0, u1, u2 = U[t, 0], U[t, 1], U[t, 2]
        _add_area_grad(F, x, a, b, c, u0, u1, u2, -g)
    return terms, F


@njit
def _add_area_grad(F, x, a, b, c, u0, u1, u2, s):
    """F[m] += s * 2 dA/dx_m, i.e. s * (u x (opposite edge))."""
    # slot a: u x (x_c - x_b)
    r0 = x[c, 0] - x[b, 0]
    r1 = x[c, 1] - x[b, 1]
    r2 = x[c, 2] - x[b, 2]
    F[a, 0] += s * (u1 * r2 - u2 * r1)
    F[a, 1] += s * (u2 * r0 - u0 * r2)
    F[a, 2] += s * (u0 * r1 - u1 * r0)
    r0 = x[a, 0] - x[c, 0]
    r1 = x[a, 1] - x[c, 1]
    r2 = x[a, 2] - x[c, 2]
    F[b, 0] += s * (u1 * r2 - u2 * r1)
    F[b, 1] += s * (u2 * r0 - u0 * r2)
    F[b, 2] += s * (u0 * r1 - u1 * r0)
    r0 = x[b, 0] - x[a, 0]
    r1 = x[b, 1] - x[a, 1]
    r2 = x[b, 2] - x[a, 2]
    F[c, 0] += s * (u1 * r2 - u2 * r1)
    F[c, 1] += s * (u2 * r0 - u0 * r2)
    F[c, 2] += s * (u0 * r1 - u1 * r0)


def _theta_np(x, ei, ej, ek, el):
    d = x[ej] - x[ei]
    le = np.linalg.norm(d, axis=1)
    n1 = np.cross(d, x[ek] - x[ei])
    n2 = np.cross(-d, x[el] - x[ej])
    th = np.arctan2(_dot(np.cross(n1, n2), d) / le, _dot(n1, n2))
    return th, le


class _Edges:
    def __init__(self, ei, ej, ek, el):
        self.i, self.j, self.k, self.l = ei, ej, ek, el


class _EdgeHolder:
    def __init__(self, ei, ej, ek, el):
        self.edges = _Edges(ei, ej, ek, el)


def scheme_b_np(x, tri, ei, ej, ek, el, bend, want_force):
    nv = len(x)
    a, b, c = x[tri[:, 0]], x[tri[:, 1]], x[tri[:, 2]]
    N = np.cross(b - a, c - a)
    nn = np.linalg.norm(N, axis=1)
    At = 0.5 * nn
    Av = scatter_scalar(nv, tri, np.repeat(At[:, None] / 3.0, 3, axis=1))
    th, le = _theta_np(x, ei, ej, ek, el)
    q = 0.25 * le * th
    h = np.bincount(ei, q, nv) + np.bincount(ej, q, nv)
    M0, M1, M2 = Av.sum(), h.sum(), (h * h / Av).sum()
    E_H, E_AD, g0, g1, g2 = moment_energy(M0, M1, M2, bend)
    terms = np.array([M0, M1, M2, E_H, E_AD])
    if not want_force:
        return terms, np.zeros_like(x)
    H = h / Av
    gA = g0 - g2 * H * H
    gh = g1 + 2.0 * g2 * H
    g = 0.25 * (gh[ei] + gh[ej])
    holder = _EdgeHolder(ei, ej, ek, el)
    dth = dihedral_gradients(x, holder)
    uhat = (x[ej] - x[ei]) / le[:, None]
    grad_e = (g * le)[:, None, None] * dth
    grad_e[:, 0] -= (g * th)[:, None] * uhat
    grad_e[:, 1] += (g * th)[:, None] * uhat
    grad = scatter(nv, np.stack([ei, ej, ek, el], axis=1), grad_e)
    gt = (gA[tri[:, 0]] + gA[tri[:, 1]] + gA[tri[:, 2]]) / 3.0
    grad += scatter(nv, tri, gt[:, None, None] * area_gradients(x, tri, N / nn[:, None]))
    return terms, -grad


# ---------------------------------------------------------------------------
# scheme A


@njit
def scheme_a_nb(x, ei, ej, ek, el, kt, theta0, linearized, want_force):
    nv = x.shape[0]
    ne = ei.shape[0]
    F = np.zeros((nv, 3))
    E = 0.0
    for e in range(ne):
        i, j, k, l = ei[e], ej[e], ek[e], el[e]
        d0 = x[j, 0] - x[i, 0]
        d1 = x[j, 1] - x[i, 1]
        d2 = x[j, 2] - x[i, 2]
        le = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        k0 = x[k, 0] - x[i, 0]
        k1 = x[k, 1] - x[i, 1]
        k2 = x[k, 2] - x[i, 2]
        l0 = x[l, 0] - x[j, 0]
        l1 = x[l, 1] - x[j, 1]
        l2 = x[l, 2] - x[j, 2]
        a0 = d1 * k2 - d2 * k1
        a1 = d2 * k0 - d0 * k2
        a2 = d0 * k1 - d1 * k0
        b0 = -(d1 * l2 - d2 * l1)
        b1 = -(d2 * l0 - d0 * l2)
        b2 = -(d0 * l1 - d1 * l0)
        c0 = a1 * b2 - a2 * b1
        c1 = a2 * b0 - a0 * b2
        c2 = a0 * b1 - a1 * b0
        th = math.atan2((c0 * d0 + c1 * d1 + c2 * d2) / le, a0 * b0 + a1 * b1 + a2 * b2)
        dt = th - theta0
        if linearized:
            E += kt * dt * dt
            ct = 2.0 * kt * dt
        else:
            E += 2.0 * kt * (1.0 - math.cos(dt))
            ct = 2.0 * kt * math.sin(dt)
        if not want_force:
            continue
        e0, e1, e2 = d0 / le, d1 / le, d2 / le
        sa = 1.0 / (a0 * a0 + a1 * a1 + a2 * a2)
        sb = 1.0 / (b0 * b0 + b1 * b1 + b2 * b2)
        w10, w11, w12 = a0 * sa, a1 * sa, a2 * sa
        w20, w21, w22 = b0 * sb, b1 * sb, b2 * sb
        pk_i = k0 * e0 + k1 * e1 + k2 * e2
        pl_j = l0 * e0 + l1 * e1 + l2 * e2
        pk_j = pk_i - le
        pl_i = pl_j + le
        F[k, 0] += ct * le * w10
        F[k, 1] += ct * le * w11
        F[k, 2] += ct * le * w12
        F[l, 0] += ct * le * w20
        F[l, 1] += ct * le * w21
        F[l, 2] += ct * le * w22
        F[i, 0] += ct * (pk_j * w10 + pl_j * w20)
        F[i, 1] += ct * (pk_j * w11 + pl_j * w21)
        F[i, 2] += ct * (pk_j * w12 + pl_j * w22)
        F[j, 0] -= ct * (pk_i * w10 + pl_i * w20)
        F[j, 1] -= ct * (pk_i * w11 + pl_i * w21)
        F[j, 2] -= ct * (pk_i * w12 + pl_i * w22)
    return E, F


def scheme_a_np(x, ei, ej, ek, el, kt, theta0, linearized, want_force):
    th, _ = _theta_np(x, ei, ej, ek, el)
    dt = th - theta0
    if linearized:
        E = kt * float(np.sum(dt * dt))
        ct = 2.0 * kt * dt
    else:
        E = 2.0 * kt * float(np.sum(1.0 - np.cos(dt)))
        ct = 2.0 * kt * np.sin(dt)
    if not want_force:
        return E, np.zeros_like(x)
    dth = dihedral_gradients(x, _EdgeHolder(ei, ej, ek, el))
    return E, -scatter(len(x), np.stack([ei, ej, ek, el], axis=1), ct[:, None, None] * dth)


# ---------------------------------------------------------------------------
# area / volume penalties


@njit
def penalty_nb(x, tri, pen, at0, want_force):
    kag, A0, kal, kv, V0 = pen[0], pen[1], pen[2], pen[3], pen[4]
    nv = x.shape[0]
    nt = tri.shape[0]
    At = np.empty(nt)
    U = np.empty((nt, 3))
    A = 0.0
    V = 0.0
    for t in range(nt):
        a, b, c = tri[t, 0], tri[t, 1], tri[t, 2]
        p0 = x[b, 0] - x[a, 0]
        p1 = x[b, 1] - x[a, 1]
        p2 = x[b, 2] - x[a, 2]
        q0 = x[c, 0] - x[a, 0]
        q1 = x[c, 1] - x[a, 1]
        q2 = x[c, 2] - x[a, 2]
        n0 = p1 * q2 - p2 * q1
        n1 = p2 * q0 - p0 * q2
        n2 = p0 * q1 - p1 * q0
        nn = math.sqrt(n0 * n0 + n1 * n1 + n2 * n2)
        At[t] = 0.5 * nn
        U[t, 0] = n0 / nn
        U[t, 1] = n1 / nn
        U[t, 2] = n2 / nn
        A += At[t]
        V += (x[a, 0] * (x[b, 1] * x[c, 2] - x[b, 2] * x[c, 1])
              + x[a, 1] * (x[b, 2] * x[c, 0] - x[b, 0] * x[c, 2])
              + x[a, 2] * (x[b, 0] * x[c, 1] - x[b, 1] * x[c, 0])) / 6.0
    E_ag = 0.0
    E_al = 0.0
    E_v = 0.0
    if kag != 0.0:
        E_ag = kag * (A - A0) ** 2 / A0
    if kal != 0.0:
        for t in range(nt):
            E_al += kal * (At[t] - at0[t]) ** 2 / at0[t]
    if kv != 0.0:
        E_v = kv * (V - V0) ** 2 / V0
    terms = np.array([A, V, E_ag, E_al, E_v])
    F = np.zeros((nv, 3))
    if not want_force:
        return terms, F
    cg = 0.0
    if kag != 0.0:
        cg = 2.0 * kag * (A - A0) / A0
    cv = 0.0
    if kv != 0.0:
        cv = 2.0 * kv * (V - V0) / V0 / 6.0
    for t in range(nt):
        a, b, c = tri[t, 0], tri[t, 1], tri[t, 2]
        ca = cg
        if kal != 0.0:
            ca += 2.0 * kal * (At[t] - at0[t]) / at0[t]
        if ca != 0.0:
            _add_area_grad(F, x, a, b, c, U[t, 0], U[t, 1], U[t, 2], -0.5 * ca)
        if cv != 0.0:
            F[a, 0] -= cv * (x[b, 1] * x[c, 2] - x[b, 2] * x[c, 1])
            F[a, 1] -= cv * (x[b, 2] * x[c, 0] - x[b, 0] * x[c, 2])
            F[a, 2] -= cv * (x[b, 0] * x[c, 1] - x[b, 1] * x[c, 0])
            F[b, 0] -= cv * (x[c, 1] * x[a, 2] - x[c, 2] * x[a, 1])
            F[b, 1] -= cv * (x[c, 2] * x[a, 0] - x[c, 0] * x[a, 2])
            F[b, 2] -= cv * (x[c, 0] * x[a, 1] - x[c, 1] * x[a, 0])
            F[c, 0] -= cv * (x[a, 1] * x[b, 2] - x[a, 2] * x[b, 1])
            F[c, 1] -= cv * (x[a, 2] * x[b, 0] - x[a, 0] * x[b, 2])
            F[c, 2] -= cv * (x[a, 0] * x[b, 1] - x[a, 1] * x[b, 0])
    return terms, F


def penalty_np(x, tri, pen, at0, want_force):
    kag, A0, kal, kv, V0 = (float(v) for v in pen)
    a, b, c = x[tri[:, 0]], x[tri[:, 1]], x[tri[:, 2]]
    N = np.cross(b - a, c - a)
    nn = np.linalg.norm(N, axis=1)
    At = 0.5 * nn
    A = At.sum()
    V = (_dot(a, np.cross(b, c)) / 6.0).sum()
    E_ag = kag * (A - A0) ** 2 / A0 if kag else 0.0
    E_al = kal * float(np.sum((At - at0) ** 2 / at0)) if kal else 0.0
    E_v = kv * (V - V0) ** 2 / V0 if kv else 0.0
    terms = np.array([A, V, E_ag, E_al, E_v])
    if not want_force:
        return terms, np.zeros_like(x)
    ca = np.full(len(tri), 2.0 * kag * (A - A0) / A0 if kag else 0.0)
    if kal:
        ca = ca + 2.0 * kal * (At - at0) / at0
    grad = scatter(len(x), tri, ca[:, None, None] * area_gradients(x, tri, N / nn[:, None]))
    if kv:
        grad += scatter(len(x), tri, (2.0 * kv * (V - V0) / V0) * volume_gradients(x, tri))
    return terms, -grad


# ---------------------------------------------------------------------------
# pairwise thermostat


@njit
def thermostat_nb(x, v, ei, ej, gamma, noise):
    """Central pairwise damping plus pre-scaled pairwise noise along each edge."""
    F = np.zeros_like(x)
    for e in range(ei.shape[0]):
        i, j = ei[e], ej[e]
        d0 = x[j, 0] - x[i, 0]
        d1 = x[j, 1] - x[i, 1]
        d2 = x[j, 2] - x[i, 2]
        le = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        d0 /= le
        d1 /= le
        d2 /= le
        rv = d0 * (v[i, 0] - v[j, 0]) + d1 * (v[i, 1] - v[j, 1]) + d2 * (v[i, 2] - v[j, 2])
        s = -gamma * rv + noise[e]
        F[i, 0] += s * d0
        F[i, 1] += s * d1
        F[i, 2] += s * d2
        F[j, 0] -= s * d0
        F[j, 1] -= s * d1
        F[j, 2] -= s * d2
    return F


def thermostat_np(x, v, ei, ej, gamma, noise):
    d = x[ej] - x[ei]
    u = d / np.linalg.norm(d, axis=1)[:, None]
    s = -gamma * _dot(u, v[ei] - v[ej]) + noise
    f = s[:, None] * u
    return scatter(len(x), np.stack([ei, ej], axis=1), np.stack([f, -f], axis=1))


# ---------------------------------------------------------------------------
# dispatch


def scheme_b(x, tri, ei, ej, ek, el, bend, want_force=True):
    fn = scheme_b_nb if _backend.USE_NUMBA else scheme_b_np
    return fn(x, tri, ei, ej, ek, el, np.asarray(bend, dtype=float), want_force)


def scheme_a(x, ei, ej, ek, el, kt, theta0, linearized=False, want_force=True):
    fn = scheme_a_nb if _backend.USE_NUMBA else scheme_a_np
    return fn(x, ei, ej, ek, el, float(kt), float(theta0), bool(linearized), want_force)


def penalty(x, tri, pen, at0, want_force=True):
    fn = penalty_nb if _backend.USE_NUMBA else penalty_np
    return fn(x, tri, np.asarray(pen, dtype=float), np.asarray(at0, dtype=float), want_force)


def thermostat(x, v, ei, ej, gamma, noise):
    fn = thermostat_nb if _backend.USE_NUMBA else thermostat_np
    return fn(x, v, ei, ej, float(gamma), np.asarray(noise, dtype=float))
