"""Pseudo-spectral incompressible Navier-Stokes-Fourier solver and well-prepared data."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .collision import CollisionBackend
from .config import ConfigError
from .fields import Grid, sobolev_norm
from .semigroup import chi, nsf_duhamel
from .velocity import VelocityBasis


class CFLError(ValueError):
    pass


class BlowUpError(ArithmeticError):
    def __init__(self, t: float, value: float):
        super().__init__(f"H^(3/2) norm {value:.3e} beyond bound near t={t:.4g}")
        self.t = t
        self.value = value


@dataclass
class HydroField:
    grid: Grid
    rho: np.ndarray
    u: np.ndarray  # (n_modes, 3)
    theta: np.ndarray

    def copy(self) -> "HydroField":
        return HydroField(self.grid, self.rho.copy(), self.u.copy(), self.theta.copy())

    def stacked(self) -> np.ndarray:
        return np.column_stack([self.rho, self.u, self.theta])


def zero_field(grid: Grid) -> HydroField:
    n = grid.n_modes
    return HydroField(grid, np.zeros(n, complex), np.zeros((n, 3), complex), np.zeros(n, complex))


def leray_project(grid: Grid, u: np.ndarray) -> np.ndarray:
    k = grid.wavevectors
    r2 = grid.kmag**2
    kd = np.einsum("kj,kj->k", k, u)
    out = np.array(u, dtype=complex)
    nz = r2 > 0
    out[nz] -= k[nz] * (kd[nz] / r2[nz])[:, None]
    return out


def well_prepared(field: HydroField, tol: float = 1e-12) -> HydroField:
    """Incompressible, Boussinesq-compatible part: ``(2 rho - 3 theta)/5``, ``P u``, ``-rho_bar``."""
    g = field.grid
    mean = max(abs(field.rho[g.zero]), np.max(np.abs(field.u[g.zero])), abs(field.theta[g.zero]))
    if mean > tol:
        raise ConfigError("input must be mean-free")
    rho = 0.4 * field.rho - 0.6 * field.theta
    return HydroField(g, rho, leray_project(g, field.u), -rho)


def lift_kinetic(basis: VelocityBasis, field: HydroField) -> np.ndarray:
    """``{rho + u.v + theta (|v|^2-3)/2} mu^{1/2}`` per mode, shape (n_modes, dim)."""
    return field.stacked() @ basis.hydro_columns.T


def moments_field(basis: VelocityBasis, grid: Grid, f: np.ndarray) -> HydroField:
    m = np.asarray(f) @ basis.moment_rows.T
    return HydroField(grid, m[:, 0], m[:, 1:4], m[:, 4])


def mollifier(grid: Grid, eps: float, alpha: float, radius: float = 1.0) -> np.ndarray:
    """Per-mode multiplier ``psi(eps^alpha |k| / radius)`` with the same bump as the cutoff."""
    if not 0 < alpha < 0.25:
        raise ConfigError(f"alpha must lie in (0, 1/4), got {alpha}")
    return chi(eps**alpha * grid.kmag / radius)


def mollify(grid: Grid, coeffs: np.ndarray, eps: float, alpha: float, radius: float = 1.0) -> np.ndarray:
    m = mollifier(grid, eps, alpha, radius)
    c = np.asarray(coeffs)
    return c * m.reshape((-1,) + (1,) * (c.ndim - 1))


# -- solver ----------------------------------------------------------------

@dataclass
class HydroTrajectory:
    grid: Grid
    times: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    nu: tuple[float, float]
    energy_residual: float
    dissipation: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def at(self, n: int) -> HydroField:
        return HydroField(self.grid, self.rho[n], self.u[n], self.theta[n])

    def lift(self, basis: VelocityBasis) -> np.ndarray:
        stacked = np.concatenate([self.rho[..., None], self.u, self.theta[..., None]], axis=-1)
        return stacked @ basis.hydro_columns.T


def _nonlinear(grid: Grid, u: np.ndarray, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(-P(u.grad u), -u.grad theta)`` with exact truncated products."""
    ik = 1j * grid.wavevectors
    up = grid.to_physical(u)  # (..., 3)
    grads = grid.to_physical(np.concatenate([ik[:, :, None] * u[:, None, :],  # d_j u_i
                                             (ik * theta[:, None])[:, :, None]], axis=2))
    adv = np.einsum("...j,...ji->...i", up, grads)
    adv = grid.from_physical(adv)
    return -leray_project(grid, adv[:, :3]), -adv[:, 3]


def _log_mean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``(a - b) / log(a / b)``: exact step average of an exponentially decaying quantity."""
    out = 0.5 * (a + b)
    ok = (a > 0) & (b > 0) & (np.abs(a - b) > 1e-12 * (a + b))
    out[ok] = (a[ok] - b[ok]) / np.log(a[ok] / b[ok])
    return out


def max_stable_dt(grid: Grid, nu: tuple[float, float]) -> float:
    return 0.5 / (max(nu) * grid.K**2)


def solve_nsf(init: HydroField, nu: tuple[float, float], T: float, dt: float, store_every: int = 1,
              blowup_bound: float = 1e6, check_cfl: bool = True, tol: float = 1e-10) -> HydroTrajectory:
    """Integrating-factor Heun scheme: exact heat factors, RK2 on the quadratic terms."""
    grid = init.grid
    if check_cfl and dt > max_stable_dt(grid, nu) * (1 + 1e-12):
        raise CFLError(f"dt={dt:.3g} exceeds 0.5/(nu K^2)={max_stable_dt(grid, nu):.3g}")
    div = np.max(np.abs(np.einsum("kj,kj->k", grid.wavevectors, init.u)), initial=0.0)
    bous = np.max(np.abs(np.delete(init.rho + init.theta, grid.zero)), initial=0.0)
    mean = max(abs(init.rho[grid.zero]), abs(init.theta[grid.zero]), np.max(np.abs(init.u[grid.zero])))
    if max(div, bous, mean) > tol:
        raise ConfigError("initial data must be mean-free, divergence-free and Boussinesq")
    r2 = grid.kmag**2
    Eu = np.exp(-nu[0] * r2 * dt)[:, None]
    Et = np.exp(-nu[1] * r2 * dt)
    u, th = init.u.astype(complex), init.theta.astype(complex)
    n_steps = int(round(T / dt))
    times, us, ths = [0.0], [u.copy()], [th.copy()]
    e0 = float(np.sum(np.abs(u) ** 2))
    modal = np.sum(np.abs(u) ** 2, axis=1)
    diss = [float(np.sum(r2 * modal))]
    integral = 0.0
    worst = 0.0
    umax_k = grid.K
    for n in range(n_steps):
        Nu, Nt = _nonlinear(grid, u, th)
        au = Eu * (u + dt * Nu)
        at = Et * (th + dt * Nt)
        Nu2, Nt2 = _nonlinear(grid, au, at)
        u = Eu * u + 0.5 * dt * (Eu * Nu + Nu2)
        th = Et * th + 0.5 * dt * (Et * Nt + Nt2)
        u = leray_project(grid, u)
        new_modal = np.sum(np.abs(u) ** 2, axis=1)
        integral += dt * float(np.sum(r2 * _log_mean(modal, new_modal)))
        modal = new_modal
        diss.append(float(np.sum(r2 * modal)))
        energy = float(np.sum(np.abs(u) ** 2))
        worst = max(worst, energy + 2 * nu[0] * integral - e0)
        t = (n + 1) * dt
        h32 = sobolev_norm(grid, np.column_stack([u, th]), 1.5)
        if not np.isfinite(h32) or h32 > blowup_bound:
            raise BlowUpError(t, h32)
        if check_cfl:
            speed = float(np.sum(np.abs(u)))
            if dt * speed * umax_k > 1.0:
                raise CFLError(f"advective CFL violated at t={t:.4g}")
        if (n + 1) % store_every == 0:
            times.append(t)
            us.append(u.copy())
            ths.append(th.copy())
    U = np.stack(us)
    TH = np.stack(ths)
    return HydroTrajectory(grid, np.array(times), -TH, U, TH, tuple(nu), worst / max(e0, 1e-300),
                           np.array(diss))


def nsf_duhamel_residual(backend: CollisionBackend, traj: HydroTrajectory) -> float:
    """``sup_t || g(t) - U_NSF(t) g(0) - Psi_NSF[g, g](t) ||_{H^{1/2} L^2}`` for the lifted trajectory."""
    g = traj.lift(backend.basis)
    recon = nsf_duhamel(backend, traj.grid, g, traj.times, traj.nu)
    return max(sobolev_norm(traj.grid, g[n] - recon[n], 0.5) for n in range(len(g)))


def random_well_prepared(grid: Grid, amplitude: float, kmax: float = 2.0, seed: int = 0,
                         norm: float = 0.5) -> HydroField:
    """Real, band-limited, well-prepared data scaled to the given ``H^norm`` norm."""
    rng = np.random.default_rng(seed)
    n = grid.n_modes
    band = (grid.kmag > 0) & (grid.kmag <= kmax)
    f = zero_field(grid)
    f.rho = np.where(band, rng.standard_normal(n) + 1j * rng.standard_normal(n), 0)
    f.u = np.where(band[:, None], rng.standard_normal((n, 3)) + 1j * rng.standard_normal((n, 3)), 0)
    f.theta = np.where(band, rng.standard_normal(n) + 1j * rng.standard_normal(n), 0)
    f.rho, f.theta = grid.realify(f.rho), grid.realify(f.theta)
    f.u = grid.realify(f.u)
    wp = well_prepared(f)
    # L^2_v norm of the lift: rho^2 + |u|^2 + (3/2) theta^2
    scale = amplitude / sobolev_norm(grid, wp.stacked() * np.sqrt([1, 1, 1, 1, 1.5]), norm)
    return HydroField(grid, wp.rho * scale, wp.u * scale, wp.theta * scale)
