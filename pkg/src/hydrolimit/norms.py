"""Chemin-Lerner and time-integrated norms of mode-major trajectories.

A trajectory is an array of shape (n_times, n_modes, dim) sampled on a
time grid.  Velocity norms are quadratic forms ``Re f^H G f``; ``G=None``
means plain L^2.  Sups over time are taken on the grid, so every L-infinity
quantity is a lower bound of its continuous counterpart.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .fields import Grid


def modal_sq(traj: np.ndarray, G: np.ndarray | None = None) -> np.ndarray:
    """Squared velocity norm per (time, mode)."""
    traj = np.asarray(traj)
    if G is None:
        return np.sum(np.abs(traj) ** 2, axis=-1)
    return np.real(np.einsum("...i,ij,...j->...", traj.conj(), G, traj))


def chemin_lerner_norm(grid: Grid, traj: np.ndarray, m: float, G: np.ndarray | None = None) -> float:
    """``(sum_k <k>^{2m} sup_t ||f(t, k)||^2)^{1/2}``: sup per mode, then sum."""
    sup = np.max(modal_sq(traj, G), axis=0)
    return float(np.sqrt(np.sum(grid.bracket ** (2 * m) * sup)))


def sup_time_norm(grid: Grid, traj: np.ndarray, m: float, G: np.ndarray | None = None) -> float:
    """``sup_t ||f(t)||_{H^m}``, never larger than the Chemin-Lerner norm."""
    per_t = np.sum(grid.bracket ** (2 * m) * modal_sq(traj, G), axis=1)
    return float(np.sqrt(np.max(per_t)))


def l2_time_norm(grid: Grid, traj: np.ndarray, times: np.ndarray, m: float,
                 G: np.ndarray | None = None) -> float:
    """``(int ||f(t)||^2_{H^m} dt)^{1/2}`` by the trapezoidal rule."""
    if len(times) < 2:
        return 0.0
    per_t = np.sum(grid.bracket ** (2 * m) * modal_sq(traj, G), axis=1)
    return float(np.sqrt(trapezoid(per_t, times)))


def chemin_lerner_l4(grid: Grid, traj: np.ndarray, times: np.ndarray, m: float,
                     G: np.ndarray | None = None) -> float:
    """``(sum_k <k>^{2m} ||f(., k)||^2_{L^4_t})^{1/2}``."""
    if len(times) < 2:
        return 0.0
    l4 = trapezoid(modal_sq(traj, G) ** 2, times, axis=0) ** 0.25
    return float(np.sqrt(np.sum(grid.bracket ** (2 * m) * l4**2)))


def interpolation_check(grid: Grid, traj: np.ndarray, times: np.ndarray, n: float) -> float:
    """``||h||_{L4 H^n} / (||h||_{Linf H^{n-1/2}} ||h||_{L2 H^{n+1/2}})^{1/2}``; 0 for a zero field."""
    if n < 0.5:
        raise ValueError("n must be >= 1/2")
    lhs = chemin_lerner_l4(grid, traj, times, n)
    rhs = np.sqrt(chemin_lerner_norm(grid, traj, n - 0.5) * l2_time_norm(grid, traj, times, n + 0.5))
    if rhs == 0:
        return 0.0
    return float(lhs / rhs)


def check_exponents(alpha: float, beta: float, ell: float) -> None:
    if not 0 < alpha < 0.25:
        raise ValueError(f"alpha must lie in (0, 1/4), got {alpha}")
    if not 1.5 < ell <= 2:
        raise ValueError(f"ell must lie in (3/2, 2], got {ell}")
    lo = alpha * (ell - 0.5)
    if not lo < beta < 0.5:
        raise ValueError(f"beta must lie in ({lo:.4g}, 1/2), got {beta}")


@dataclass
class NormReport:
    """Unweighted pieces of the solution norm and the weights that combine them."""

    eps: float
    beta: float
    pieces: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        p = self.pieces
        low = p["linf_half"] + p["l2_three_halves_macro"] + p["l2_three_halves_micro"] / np.sqrt(self.eps)
        high = p["linf_ell"] + p["l2_ell_macro"] + p["l2_ell_micro"] / np.sqrt(self.eps)
        return float(low + self.eps**self.beta * high)


def x_eps_report(grid: Grid, traj: np.ndarray, times: np.ndarray, eps: float, beta: float, ell: float,
                 P0: np.ndarray, G: np.ndarray | None = None, alpha: float | None = None) -> NormReport:
    """All components of the ``X^eps`` norm on the sampled interval.

    ``G`` is the Gram matrix of the collision norm; ``P0`` the hydrodynamic
    projector.  When ``alpha`` is given the exponent constraints are checked.
    """
    if alpha is not None:
        check_exponents(alpha, beta, ell)
    elif not beta < 0.5:
        raise ValueError("beta must be < 1/2")
    macro = traj @ P0.T
    micro = traj - macro
    pieces = {
        "linf_half": chemin_lerner_norm(grid, traj, 0.5),
        "l2_three_halves_macro": l2_time_norm(grid, macro, times, 1.5, G),
        "l2_three_halves_micro": l2_time_norm(grid, micro, times, 1.5, G),
        "linf_ell": chemin_lerner_norm(grid, traj, ell),
        "l2_ell_macro": l2_time_norm(grid, macro, times, ell, G),
        "l2_ell_micro": l2_time_norm(grid, micro, times, ell, G),
    }
    return NormReport(eps, beta, pieces)


def x_eps_norm(grid: Grid, traj: np.ndarray, times: np.ndarray, eps: float, beta: float, ell: float,
               P0: np.ndarray, G: np.ndarray | None = None, alpha: float | None = None) -> float:
    return x_eps_report(grid, traj, times, eps, beta, ell, P0, G, alpha).total
