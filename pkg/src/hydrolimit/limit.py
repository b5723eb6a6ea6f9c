"""The remainder ``delta = f - g`` between kinetic and fluid solutions.

``delta`` solves ``delta = D + S + L[delta] + Psi[delta, delta]`` with

* ``D = U f_in - U_NSF P0 f_in``  (linear flows of the data),
* ``S = Psi[g, g] - Psi_NSF[g, g]`` (source driven by the fluid solution),
* ``L[h] = 2 Psi[g, h]``.

On a partition of ``[0, T]`` the equation is re-based at each left end
point and solved by Picard iteration in the solution norm of that window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .collision import CollisionBackend, viscosities
from .fields import Grid
from .fluid import (HydroField, HydroTrajectory, lift_kinetic, max_stable_dt, mollifier, mollify,
                    nsf_duhamel_residual, solve_nsf)
from .kinetic import KineticRun, residual_check, solve_kinetic
from .norms import chemin_lerner_norm, modal_sq, x_eps_norm
from .picard import (ContractionError, PicardProblem, estimate_bilinear_norm,
                     estimate_linear_norm, picard_solve)
from .semigroup import (StepOperators, duhamel_from_source, gamma_trajectory, nsf_flow, psi_nsf_from_source,
                        step_operators)


def nsf_on_grid(init: HydroField, nu: tuple[float, float], T: float, dt: float) -> HydroTrajectory:
    """Fluid solution stored on the kinetic grid ``t_n = n dt``, substepping for stability."""
    m = max(1, math.ceil(dt / max_stable_dt(init.grid, nu) - 1e-9))
    return solve_nsf(init, nu, T, dt / m, store_every=m)


def linear_flow(ops: StepOperators, h0: np.ndarray, n_times: int) -> np.ndarray:
    out = np.empty((n_times,) + h0.shape, complex)
    out[0] = h0
    for n in range(1, n_times):
        out[n] = ops.step_linear(out[n - 1])
    return out


@dataclass
class DeltaTerms:
    times: np.ndarray
    g: np.ndarray
    f_in: np.ndarray
    D: np.ndarray
    S: np.ndarray
    nu: tuple[float, float]


def assemble_delta_terms(backend: CollisionBackend, grid: Grid, ops: StepOperators, f_in: np.ndarray,
                         g: np.ndarray, times: np.ndarray, nu: tuple[float, float] | None = None) -> DeltaTerms:
    """``D`` and ``S`` on the grid; ``g`` is the lifted fluid trajectory with ``g(0) = P0 f_in``."""
    nu = nu or viscosities(backend)
    P0 = backend.basis.P0
    nt = len(times)
    D = linear_flow(ops, f_in, nt) - nsf_flow(backend, grid, f_in @ P0.T, times, nu)
    src = gamma_trajectory(backend, grid, g, g)
    S = duhamel_from_source(ops, src, 1.0 / ops.eps) - psi_nsf_from_source(backend, grid, src, ops.dt, nu)
    return DeltaTerms(np.asarray(times), g, f_in, D, S, nu)


@dataclass
class WindowNorm:
    """Solution norm restricted to a window of the time grid."""

    grid: Grid
    eps: float
    beta: float
    ell: float
    P0: np.ndarray
    G: np.ndarray | None = None

    def __call__(self, traj: np.ndarray, times: np.ndarray) -> float:
        return x_eps_norm(self.grid, traj, times, self.eps, self.beta, self.ell, self.P0, self.G)


@dataclass
class DeltaSolution:
    times: np.ndarray
    delta: np.ndarray
    partition: list
    L_norms: list
    B_norms: list
    iterations: list
    C0: list
    data_ratio: list = field(default_factory=list)


class _Window:
    def __init__(self, backend, grid, ops, g, times, norm, a, b):
        self.backend, self.grid, self.ops = backend, grid, ops
        self.g = g[a:b + 1]
        self.times = times[a:b + 1]
        self.norm_fn = norm

    def norm(self, x):
        return self.norm_fn(x, self.times)

    def duhamel(self, src):
        return duhamel_from_source(self.ops, src, 1.0 / self.ops.eps)

    def gamma(self, x, y):
        return gamma_trajectory(self.backend, self.grid, x, y)

    def linear(self, x):
        return self.duhamel(2 * self.gamma(self.g, x))

    def bilinear(self, x, y):
        return self.duhamel(self.gamma(x, y))

    def step(self, x0):
        return lambda x: x0 + self.duhamel(self.gamma(2 * self.g + x, x))

    def sampler(self, rng):
        shape = self.g.shape

        def sample():
            x = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
            x[0] = 0
            return x
        return sample


def delta_fixed_point(backend: CollisionBackend, grid: Grid, ops: StepOperators, terms: DeltaTerms,
                      norm: WindowNorm, tol: float = 1e-11, target: float = 0.5, seed: int = 0,
                      min_steps: int = 1) -> DeltaSolution:
    """Greedy partition (longest window whose ``||L||`` estimate is at most ``target``) plus Picard.

    Windows are shrunk by halving from the remaining interval; norms are
    randomized power-iteration estimates with a safety factor.
    """
    rng = np.random.default_rng(seed)
    times = terms.times
    nt = len(times)
    delta = np.zeros_like(terms.D)
    src_data = terms.D + terms.S
    delta[0] = src_data[0]  # every Duhamel term vanishes at t = 0
    out = DeltaSolution(times, delta, [0], [], [], [], [])
    a = 0
    while a < nt - 1:
        length = nt - 1 - a
        while True:
            b = a + length
            win = _Window(backend, grid, ops, terms.g, times, norm, a, b)
            Ln = estimate_linear_norm(win.linear, win.norm, win.sampler(rng))
            if Ln <= target:
                break
            if length <= min_steps:
                raise ContractionError(f"||L|| estimate {Ln:.3g} > {target} on a single step at t={times[a]:.4g}")
            length = max(min_steps, length // 2)
        Bn = estimate_bilinear_norm(win.bilinear, win.norm, win.sampler(rng), iters=6, restarts=2)
        # re-based data: U(t - t_a)(delta(t_a) - x(t_a)) + x(t) with x = D + S
        x0 = src_data[a:b + 1] + linear_flow(ops, delta[a] - src_data[a], b - a + 1)
        prob = PicardProblem(x0, win.linear, win.bilinear, win.norm, Ln, Bn)
        res = picard_solve(prob, tol=tol, start=None, step=win.step(x0))
        delta[a:b + 1] = res.x
        out.partition.append(b)
        out.L_norms.append(Ln)
        out.B_norms.append(Bn)
        out.iterations.append(res.iterations)
        out.C0.append(res.C0)
        out.data_ratio.append(win.norm(x0) / prob.data_bound)
        a = b
    return out


@dataclass
class CrossCheck:
    difference: float
    tolerance: float
    kinetic_residual: float
    fluid_residual: float
    solution: DeltaSolution

    @property
    def passed(self) -> bool:
        return self.difference <= self.tolerance


def cross_check(backend: CollisionBackend, grid: Grid, eps: float, init: HydroField, T: float, dt: float,
                micro: np.ndarray | None = None, beta: float = 0.1, ell: float = 2.0, factor: float = 5.0,
                tol: float = 1e-11) -> CrossCheck:
    """Compare ``g + delta`` with the direct kinetic solution in ``L~inf H^{1/2} L^2``."""
    nu = viscosities(backend)
    fluid = nsf_on_grid(init, nu, T, dt)
    g = fluid.lift(backend.basis)
    f_in = g[0] + (0 if micro is None else micro)
    ops = step_operators(backend, eps, grid.wavevectors, dt)
    terms = assemble_delta_terms(backend, grid, ops, f_in, g, fluid.times, nu)
    norm = WindowNorm(grid, eps, beta, ell, backend.basis.P0)
    sol = delta_fixed_point(backend, grid, ops, terms, norm, tol=tol)
    kin = solve_kinetic(backend, grid, f_in, KineticRun(eps, T, dt), ops=ops)
    diff = chemin_lerner_norm(grid, g + sol.delta - kin.states, 0.5)
    kres = residual_check(backend, grid, kin, ops=ops)
    fres = nsf_duhamel_residual(backend, fluid)
    return CrossCheck(diff, factor * (kres + fres + tol), kres, fres, sol)


# -- convergence in eps -------------------------------------------------------

@dataclass
class SweepResult:
    eps: np.ndarray
    errors: np.ndarray
    slope: float
    theoretical: float
    mollifier_gap: np.ndarray
    details: list = field(default_factory=list)

    def rows(self) -> list[dict]:
        return [{"eps": float(d["eps"]), "error": float(d["error"]), "linf_half": d["linf_half"],
                 "l2_three_halves": d["l2_three_halves"], "mollifier_gap": float(d["mollifier_gap"]),
                 "slope": self.slope} for d in self.details]


def limit_error(backend: CollisionBackend, grid: Grid, eps: float, init: HydroField, T: float, dt: float,
                alpha: float, psi_radius: float, micro: np.ndarray | None = None,
                fluid: HydroTrajectory | None = None, G: np.ndarray | None = None) -> dict:
    """``||f - g||_{L~inf H^{1/2} L^2} + ||f - g||_{L2 H^{3/2} H^{s,*}}`` for one ``eps``.

    ``f`` starts from the mollified lift of ``init`` plus ``micro``; ``g`` is
    the fluid solution from ``init`` itself.
    """
    nu = viscosities(backend)
    fluid = fluid or nsf_on_grid(init, nu, T, dt)
    g = fluid.lift(backend.basis)
    g_in = lift_kinetic(backend.basis, init)
    f_in = mollify(grid, g_in, eps, alpha, psi_radius)
    if micro is not None:
        f_in = f_in + micro
    sup = np.zeros(grid.n_modes)
    sq = []

    def observe(t, f):
        n = int(round(t / dt))
        diff = f - g[n]
        np.maximum(sup, modal_sq(diff), out=sup)
        sq.append(modal_sq(diff[None], G)[0])

    run = KineticRun(eps, T, dt, store_every=max(1, int(round(T / dt))))
    kin = solve_kinetic(backend, grid, f_in, run, observer=observe)
    linf = float(np.sqrt(np.sum(grid.bracket * sup)))
    l2 = float(np.sqrt(trapezoid(np.array(sq) @ grid.bracket**3, fluid.times)))
    gap = chemin_lerner_norm(grid, (mollify(grid, g_in, eps, alpha, psi_radius) - g_in)[None], 0.5)
    return {"eps": eps, "error": linf + l2, "linf_half": linf, "l2_three_halves": l2,
            "mollifier_gap": gap, "invariant_drift": kin.invariant_drift}


def convergence_sweep(backend: CollisionBackend, grid: Grid, eps_values, init: HydroField, T: float,
                      alpha: float = 0.05, psi_radius: float = 4.0, dt_max: float = 0.01,
                      steps_per_eps: float = 4.0, micro: np.ndarray | None = None,
                      G: np.ndarray | None = None) -> SweepResult:
    """Errors along decreasing ``eps`` and the least-squares slope of ``log e`` against ``log eps``.

    The kinetic step is ``min(dt_max, eps / steps_per_eps)`` rounded to divide ``T``.
    """
    eps_values = np.asarray(sorted(eps_values, reverse=True), dtype=float)
    nu = viscosities(backend)
    details = []
    for eps in eps_values:
        dt = T / math.ceil(T / min(dt_max, eps / steps_per_eps))
        fluid = nsf_on_grid(init, nu, T, dt)
        details.append(limit_error(backend, grid, eps, init, T, dt, alpha, psi_radius, micro, fluid, G))
    errors = np.array([d["error"] for d in details])
    slope = np.nan
    if len(errors) > 1 and np.all(errors > 0):
        slope = float(np.polyfit(np.log(eps_values), np.log(errors), 1)[0])
    return SweepResult(eps_values, errors, slope, 0.5 - 2 * alpha,
                       np.array([d["mollifier_gap"] for d in details]), details)


def microscopic_perturbation(backend: CollisionBackend, grid: Grid, amplitude: float, kmax: float = 2.0,
                             seed: int = 0) -> np.ndarray:
    """Real, band-limited ``P_perp`` data with ``||.||_{H^{1/2} L^2}`` equal to ``amplitude``."""
    from .fields import sobolev_norm

    rng = np.random.default_rng(seed)
    shape = (grid.n_modes, backend.dim)
    h = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    h[grid.kmag > kmax] = 0
    h = grid.realify(h @ backend.basis.P0_perp.T)
    return h * (amplitude / sobolev_norm(grid, h, 0.5))


def mollifier_inflation(grid: Grid, eps: float, alpha: float, m: float, radius: float = 1.0) -> float:
    """``eps^{alpha m} sup_k <k>^m psi(eps^alpha |k|)``: bounded uniformly in ``eps``."""
    return float(eps ** (alpha * m) * np.max(grid.bracket**m * mollifier(grid, eps, alpha, radius)))


def regularity_ratio(grid: Grid, fluid: HydroTrajectory, eps: float, alpha: float, ell: float,
                     basis) -> float:
    """``eps^{alpha(ell - 1/2)} ||g||_{L~inf H^ell} / ||g(0)||_{H^{1/2}}``."""
    g = fluid.lift(basis)
    top = chemin_lerner_norm(grid, g, ell)
    base = chemin_lerner_norm(grid, g[:1], 0.5)
    return float(eps ** (alpha * (ell - 0.5)) * top / base) if base > 0 else 0.0
