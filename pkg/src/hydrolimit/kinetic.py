"""Exponential-integrator solver for the scaled perturbation equation in Fourier x Hermite space."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .collision import CollisionBackend
from .fields import Grid, sobolev_norm
from .semigroup import StepOperators, duhamel_from_source, step_operators


class InstabilityError(ArithmeticError):
    pass


def spatial_convolution_gamma(backend: CollisionBackend, grid: Grid, f1: np.ndarray, f2: np.ndarray,
                              direct: bool = False) -> np.ndarray:
    """``Gamma_sym`` convolved over wavevectors: ``sum_{k'} Gamma_sym(f1(k - k'), f2(k'))``.

    The bilinear form factors through a rank-``r`` feature map, so only
    ``r^2`` scalar convolutions are needed.  ``direct=True`` uses the
    explicit double sum instead of the padded FFT.
    """
    form = backend.gamma
    G = 0.5 * (form.tensor + form.tensor.transpose(0, 2, 1))
    a = np.asarray(f1) @ form.features.T
    b = np.asarray(f2) @ form.features.T
    r = a.shape[1]
    pairs = a[:, :, None] * np.ones((1, 1, r))
    conv = grid.convolve_direct if direct else grid.convolve
    C = conv(pairs, np.broadcast_to(b[:, None, :], pairs.shape))
    return np.einsum("nab,kab->kn", G, C)


@dataclass(frozen=True)
class KineticRun:
    eps: float
    T: float
    dt: float
    store_every: int = 1
    gamma_enabled: bool = True

    def __post_init__(self):
        if not (self.eps > 0 and self.T >= 0 and self.dt > 0):
            raise ValueError("eps, dt must be positive and T nonnegative")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass
class KineticTrajectory:
    times: np.ndarray
    states: np.ndarray  # (n_stored, n_modes, dim)
    invariant_drift: float
    run: KineticRun
    extras: dict = field(default_factory=dict)


def solve_kinetic(backend: CollisionBackend, grid: Grid, f_in: np.ndarray, run: KineticRun,
                  ops: StepOperators | None = None,
                  observer: Callable[[float, np.ndarray], None] | None = None) -> KineticTrajectory:
    """ETD2RK: exact linear flow, trapezoidal-in-``Gamma`` exponential weights with an Euler predictor."""
    f = np.array(f_in, dtype=complex)
    if ops is None or ops.dt != run.dt or ops.eps != run.eps:
        ops = step_operators(backend, run.eps, grid.wavevectors, run.dt)
    inv = backend.basis.kernel_basis.T
    start = inv @ f[grid.zero]
    drift = 0.0
    scale = 1.0 / run.eps
    times, states = [0.0], [f.copy()]
    if observer:
        observer(0.0, f)
    norm = np.linalg.norm(f)

    def gamma(x):
        return spatial_convolution_gamma(backend, grid, x, x)

    for n in range(run.n_steps):
        lin = ops.step_linear(f)
        if run.gamma_enabled:
            g0 = gamma(f)
            pred = lin + scale * np.einsum("kij,kj->ki", ops.A1, g0)
            g1 = gamma(pred)
            f = lin + scale * (np.einsum("kij,kj->ki", ops.A1, g0)
                               + np.einsum("kij,kj->ki", ops.A2, g1 - g0))
        else:
            f = lin
        new_norm = np.linalg.norm(f)
        if not np.isfinite(new_norm) or new_norm > 2.0 * norm + 1e-300:
            raise InstabilityError(f"norm doubled within step {n + 1} (t={(n + 1) * run.dt:.4g})")
        norm = new_norm
        t = (n + 1) * run.dt
        drift = max(drift, float(np.max(np.abs(inv @ f[grid.zero] - start))))
        if observer:
            observer(t, f)
        if (n + 1) % run.store_every == 0:
            times.append(t)
            states.append(f.copy())
    return KineticTrajectory(np.array(times), np.stack(states), drift, run)


def residual_check(backend: CollisionBackend, grid: Grid, traj: KineticTrajectory,
                   ops: StepOperators | None = None) -> float:
    """``sup_t || f(t) - U(t) f(0) - Psi[f, f](t) ||_{H^{1/2} L^2}`` on the stored grid.

    Requires every step stored; the reconstruction uses the piecewise-linear
    Duhamel quadrature, so it differs from the predictor-corrector only by
    the predictor error.
    """
    run = traj.run
    if run.store_every != 1:
        raise ValueError("residual check needs every step stored")
    if ops is None or ops.dt != run.dt or ops.eps != run.eps:
        ops = step_operators(backend, run.eps, grid.wavevectors, run.dt)
    f = traj.states
    if run.gamma_enabled:
        src = np.stack([spatial_convolution_gamma(backend, grid, x, x) for x in f])
    else:
        src = np.zeros_like(f)
    recon = duhamel_from_source(ops, src, 1.0 / run.eps)
    lin = f[0]
    out = 0.0
    for n in range(len(f)):
        if n:
            lin = ops.step_linear(lin)
        out = max(out, sobolev_norm(grid, f[n] - lin - recon[n], 0.5))
    return out


def conserved_moments(backend: CollisionBackend, grid: Grid, f: np.ndarray) -> np.ndarray:
    """The five collision-invariant moments of the mean mode."""
    return backend.basis.kernel_basis.T @ f[grid.zero]
