"""Mode-wise semigroup ``exp(t Lambda^eps(k))``, its flat/sharp and NSF/wave parts, and Duhamel integrals."""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
import scipy.linalg as sla

from .collision import CollisionBackend, viscosities
from .fields import Grid
from .spectral import (BRANCHES, assemble_mode_operator, branches,
                       explicit_projectors, first_order_projector, frame_rotation)


class CoarseGridError(ValueError):
    pass


# -- cutoff profile -----------------------------------------------------------

def _h(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def chi(x) -> np.ndarray:
    """Smooth even cutoff: 1 on ``[0, 1/2]``, 0 on ``[1, inf)``."""
    x = np.abs(np.asarray(x, dtype=float))
    y = 2.0 * (1.0 - x)  # 1 at x=1/2, 0 at x=1
    a, b = _h(y), _h(1.0 - y)
    return a / (a + b)


@dataclass(frozen=True)
class CutoffProfile:
    kappa: float

    def __call__(self, x) -> np.ndarray:
        return chi(np.asarray(x, dtype=float) / self.kappa)


# -- exponentials ---------------------------------------------------------------

def phi_functions(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(e^Z, phi1(Z), phi2(Z))`` from one exponential of a block matrix."""
    n = Z.shape[0]
    A = np.zeros((3 * n, 3 * n), dtype=complex)
    I = np.eye(n)
    A[:n, :n] = Z
    A[:n, n:2 * n] = I
    A[n:2 * n, 2 * n:] = I
    X = sla.expm(A)
    return X[:n, :n], X[:n, n:2 * n], X[:n, 2 * n:]


def scalar_phi(z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Elementwise ``(e^z, phi1, phi2)`` with a series near zero."""
    z = np.asarray(z, dtype=complex)
    e = np.exp(z)
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    p1 = np.where(small, 0, (e - 1) / zs)
    p2 = np.where(small, 0, (e - 1 - zs) / zs**2)
    if np.any(small):
        zz = z[small] if z.ndim else z
        s1 = sum(zz**j / factorial(j + 1) for j in range(8))
        s2 = sum(zz**j / factorial(j + 2) for j in range(8))
        if z.ndim:
            p1 = p1.copy()
            p2 = p2.copy()
            p1[small] = s1
            p2[small] = s2
        else:
            p1, p2 = s1, s2
    return e, p1, p2


def propagator(backend: CollisionBackend, eps: float, k, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be nonnegative")
    return sla.expm(t * assemble_mode_operator(backend, k, eps).matrix)


def propagate(backend: CollisionBackend, eps: float, k, t: float, f: np.ndarray) -> np.ndarray:
    return propagator(backend, eps, k, t) @ f


@dataclass(frozen=True, eq=False)
class StepOperators:
    """``E = e^{dt Lambda}``, ``A1 = dt phi1``, ``A2 = dt phi2`` for every mode of a grid."""

    eps: float
    dt: float
    E: np.ndarray
    A1: np.ndarray
    A2: np.ndarray

    def step_linear(self, f: np.ndarray) -> np.ndarray:
        return np.einsum("kij,kj->ki", self.E, f)


def step_operators(backend: CollisionBackend, eps: float, kvecs: np.ndarray, dt: float) -> StepOperators:
    """Build the per-mode exponential integrator weights.

    One block exponential per distinct ``|k|`` in the frame ``k = |k| e1``,
    rotated to each wavevector; the Hermite space of bounded degree is
    rotation invariant, so the rotation is exact.
    """
    basis = backend.basis
    kvecs = np.asarray(kvecs, dtype=float)
    n, d = len(kvecs), backend.dim
    E = np.empty((n, d, d), complex)
    A1 = np.empty_like(E)
    A2 = np.empty_like(E)
    mags = np.round(np.linalg.norm(kvecs, axis=1), 12)
    for r in np.unique(mags):
        Z = dt * assemble_mode_operator(backend, (r, 0.0, 0.0), eps).matrix
        e, p1, p2 = phi_functions(Z)
        for i in np.flatnonzero(mags == r):
            if r == 0:
                R = None
            else:
                R = basis.rotation(frame_rotation(kvecs[i]))
            for out, M in ((E, e), (A1, p1), (A2, p2)):
                out[i] = M if R is None else R @ M @ R.T
    return StepOperators(float(eps), float(dt), E, dt * A1, dt * A2)


# -- semigroup parts ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SemigroupParts:
    full: np.ndarray
    flat: np.ndarray
    sharp: np.ndarray
    nsf: np.ndarray
    wave: np.ndarray
    remainder: np.ndarray


def nsf_propagator(backend: CollisionBackend, k, t: float, nu: tuple[float, float]) -> np.ndarray:
    """``e^{-nu_NS |k|^2 t} P0_NS + e^{-nu_heat |k|^2 t} P0_heat``; ``P0`` on the mean mode."""
    k = np.asarray(k, dtype=float)
    r2 = float(k @ k)
    if r2 == 0:
        return backend.basis.P0.copy()
    P = explicit_projectors(backend, k)
    return np.exp(-nu[0] * r2 * t) * P["NS"] + np.exp(-nu[1] * r2 * t) * P["heat"]


def semigroup_parts(backend: CollisionBackend, eps: float, k, t: float, kappa: float,
                    nu: tuple[float, float] | None = None) -> SemigroupParts:
    k = np.asarray(k, dtype=float)
    nu = nu or viscosities(backend)
    full = propagator(backend, eps, k, t)
    weight = float(chi(eps * np.linalg.norm(k) / kappa))
    d = backend.dim
    flat = np.zeros((d, d), complex)
    wave = np.zeros((d, d), complex)
    if weight > 0:
        mb = branches(backend, eps * k)
        for name in BRANCHES:
            term = weight * np.exp(mb.eigenvalues[name] * t / eps**2) * mb.projectors[name]
            flat += term
            if name.startswith("wave") and np.any(k != 0):
                wave += term
    nsf = nsf_propagator(backend, k, t, nu)
    return SemigroupParts(full, flat, full - flat, nsf, wave, flat - nsf - wave)


@dataclass(frozen=True)
class SharpDecay:
    rate: float  # decay rate in t, i.e. lambda0 / eps^2
    lambda0: float
    times: np.ndarray
    norms: np.ndarray


def sharp_decay_rate(backend: CollisionBackend, eps: float, k_set, kappa: float,
                     tau=None) -> SharpDecay:
    """Log-linear fit of ``sup_k ||U_sharp(t, k)||`` over ``t = eps^2 tau``."""
    tau = np.linspace(2.0, 12.0, 11) if tau is None else np.asarray(tau, dtype=float)
    times = eps**2 * tau
    k_set = np.atleast_2d(np.asarray(k_set, dtype=float))
    norms = np.zeros(len(times))
    for k in k_set:
        mb = None
        weight = float(chi(eps * np.linalg.norm(k) / kappa))
        if weight > 0:
            mb = branches(backend, eps * k)
        M = assemble_mode_operator(backend, k, eps).matrix
        for i, t in enumerate(times):
            U = sla.expm(t * M)
            if mb is not None:
                U = U - weight * sum(np.exp(mb.eigenvalues[n] * t / eps**2) * mb.projectors[n]
                                     for n in BRANCHES)
            norms[i] = max(norms[i], np.linalg.norm(U, 2))
    slope = np.polyfit(times, np.log(norms), 1)[0]
    rate = -float(slope)
    if rate <= 0:
        raise ArithmeticError(f"sharp part does not decay (fitted rate {rate:.3e})")
    return SharpDecay(rate, rate * eps**2, times, norms)


# -- Duhamel integrals --------------------------------------------------------

def check_grid(t_grid: np.ndarray, eps: float) -> float:
    """Uniform step of ``t_grid``; refuse steps that cannot resolve the acoustic time ``eps``."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 2:
        raise CoarseGridError("need at least two time points")
    dts = np.diff(t_grid)
    dt = float(dts[0])
    if not np.allclose(dts, dt, rtol=1e-10, atol=1e-14):
        raise CoarseGridError("time grid must be uniform")
    if dt > eps:
        raise CoarseGridError(f"dt={dt:.3g} exceeds eps={eps:.3g}; use at least "
                              f"{int(np.ceil(dt / eps))} substeps per interval")
    return dt


def duhamel_from_source(ops: StepOperators, source: np.ndarray, scale: float) -> np.ndarray:
    """``Y(t_n) = scale * int_0^{t_n} e^{(t_n-s) Lambda} S(s) ds`` for piecewise-linear ``S``.

    ``source`` has shape (n_times, n_modes, dim).
    """
    Y = np.zeros_like(source, dtype=complex)
    for n in range(len(source) - 1):
        Y[n + 1] = (np.einsum("kij,kj->ki", ops.E, Y[n])
                    + scale * (np.einsum("kij,kj->ki", ops.A1 - ops.A2, source[n])
                               + np.einsum("kij,kj->ki", ops.A2, source[n + 1])))
    return Y


def scalar_duhamel(z: np.ndarray, dt: float, source: np.ndarray, scale: float) -> np.ndarray:
    """Same recursion for a diagonal generator ``z`` (per mode), source shape (n_times, n_modes, dim)."""
    e, p1, p2 = scalar_phi(z * dt)
    a = (scale * dt * (p1 - p2))[:, None]
    b = (scale * dt * p2)[:, None]
    e = e[:, None]
    Y = np.zeros_like(source, dtype=complex)
    for n in range(len(source) - 1):
        Y[n + 1] = e * Y[n] + a * source[n] + b * source[n + 1]
    return Y


def gamma_trajectory(backend: CollisionBackend, grid: Grid, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
    from .kinetic import spatial_convolution_gamma

    return np.stack([spatial_convolution_gamma(backend, grid, a, b) for a, b in zip(f1, f2)])


def duhamel_psi(backend: CollisionBackend, eps: float, grid: Grid, f1: np.ndarray, f2: np.ndarray,
                t_grid, ops: StepOperators | None = None) -> np.ndarray:
    """``Psi^eps[f1, f2](t_n)`` on a uniform grid, trajectories of shape (n_times, n_modes, dim)."""
    dt = check_grid(t_grid, eps)
    ops = ops or step_operators(backend, eps, grid.wavevectors, dt)
    return duhamel_from_source(ops, gamma_trajectory(backend, grid, f1, f2), 1.0 / eps)


def psi_nsf_from_source(backend: CollisionBackend, grid: Grid, source: np.ndarray, dt: float,
                        nu: tuple[float, float]) -> np.ndarray:
    """``Psi_NSF`` from a microscopic source: decays ``-nu |k|^2`` against ``|k| P1_star(k/|k|)``."""
    out = np.zeros_like(source, dtype=complex)
    k = grid.wavevectors
    r = grid.kmag
    nz = np.flatnonzero(r > 0)
    for name, nu_s in (("NS", nu[0]), ("heat", nu[1])):
        proj = np.stack([first_order_projector(backend, k[i], name) for i in nz])
        projected = np.zeros_like(source, dtype=complex)
        projected[:, nz] = r[nz, None] * np.einsum("kij,tkj->tki", proj, source[:, nz])
        out += scalar_duhamel(-nu_s * r**2, dt, projected, 1.0)
    return out


def psi_parts(backend: CollisionBackend, eps: float, grid: Grid, f1: np.ndarray, f2: np.ndarray,
              t_grid, kappa: float, nu: tuple[float, float] | None = None,
              ops: StepOperators | None = None) -> dict:
    """Split ``Psi^eps`` into flat/sharp and NSF/wave/remainder pieces."""
    dt = check_grid(t_grid, eps)
    nu = nu or viscosities(backend)
    ops = ops or step_operators(backend, eps, grid.wavevectors, dt)
    src = gamma_trajectory(backend, grid, f1, f2)
    total = duhamel_from_source(ops, src, 1.0 / eps)
    flat = np.zeros_like(total)
    wave = np.zeros_like(total)
    weights = chi(eps * grid.kmag / kappa)
    for i in np.flatnonzero(weights > 0):
        mb = branches(backend, eps * grid.wavevectors[i])
        for name in BRANCHES:
            z = np.array([mb.eigenvalues[name] / eps**2])
            proj = weights[i] * np.einsum("ij,tj->ti", mb.projectors[name], src[:, i])
            piece = scalar_duhamel(z, dt, proj[:, None, :], 1.0 / eps)[:, 0]
            flat[:, i] += piece
            if name.startswith("wave") and grid.kmag[i] > 0:
                wave[:, i] += piece
    nsf = psi_nsf_from_source(backend, grid, src, dt, nu)
    return {"total": total, "flat": flat, "sharp": total - flat, "nsf": nsf,
            "wave": wave, "remainder": flat - nsf - wave}


def nsf_flow(backend: CollisionBackend, grid: Grid, h0: np.ndarray, t_grid,
             nu: tuple[float, float] | None = None) -> np.ndarray:
    """``U_NSF(t) h0`` on every mode, shape (n_times, n_modes, dim)."""
    t_grid = np.asarray(t_grid, dtype=float)
    nu = nu or viscosities(backend)
    out = np.zeros((len(t_grid),) + np.shape(h0), complex)
    r2 = grid.kmag**2
    for i, k in enumerate(grid.wavevectors):
        if not np.any(h0[i]):
            continue
        if r2[i] == 0:
            out[:, i] += backend.basis.P0 @ h0[i]
            continue
        P = explicit_projectors(backend, k)
        for name, nu_s in (("NS", nu[0]), ("heat", nu[1])):
            out[:, i] += np.exp(-nu_s * r2[i] * t_grid)[:, None] * (P[name] @ h0[i])[None, :]
    return out


def nsf_duhamel(backend: CollisionBackend, grid: Grid, g: np.ndarray, t_grid,
                nu: tuple[float, float] | None = None) -> np.ndarray:
    """``U_NSF(t) g(0) + Psi_NSF[g, g](t)`` for a kinetic-lifted trajectory ``g``."""
    t_grid = np.asarray(t_grid, dtype=float)
    dt = float(t_grid[1] - t_grid[0])
    nu = nu or viscosities(backend)
    src = gamma_trajectory(backend, grid, g, g)
    return psi_nsf_from_source(backend, grid, src, dt, nu) + nsf_flow(backend, grid, g[0], t_grid, nu)
