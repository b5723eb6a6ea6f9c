"""Linearized collision operators and their quadratic parts.

Every backend stores ``L`` as a dense matrix on Hermite coefficients and the
bilinear term in factored form

    Gamma(f1, f2) = sum_{a,b} G[:, a, b] (F f1)_a (F f2)_b

with a small feature map ``F`` (rank ``r``).  The factorization keeps the
spatial convolution of the Fourier-space solvers cheap: only ``r^2`` scalar
convolutions are needed per evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import sqrt

import numpy as np
from scipy.special import eval_genlaguerre, eval_legendre, sph_harm_y

from .velocity import VelocityBasis, norm_matrix

KERNEL_TOL = 1e-10
CONSERVATION_TOL = 1e-10


class BackendError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class BilinearForm:
    features: np.ndarray  # (r, dim)
    tensor: np.ndarray  # (dim, r, r)
    continuity: float | None = None

    def __call__(self, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
        a = np.asarray(f1) @ self.features.T
        b = np.asarray(f2) @ self.features.T
        return np.einsum("nab,...a,...b->...n", self.tensor, a, b)

    def symmetrized(self) -> "BilinearForm":
        T = 0.5 * (self.tensor + self.tensor.transpose(0, 2, 1))
        return replace(self, tensor=T)

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.tensor, self.tensor.transpose(0, 2, 1)))


@dataclass(frozen=True, eq=False)
class CollisionBackend:
    kind: str
    basis: VelocityBasis
    L: np.ndarray
    gamma: BilinearForm
    params: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.basis.dim

    def with_gamma(self, gamma: BilinearForm, kind: str | None = None) -> "CollisionBackend":
        return replace(self, gamma=gamma, kind=kind or self.kind)

    def describe(self) -> dict:
        return {"kind": self.kind, "max_degree": self.basis.max_degree, **self.params}


# -- hydrodynamic polynomials ------------------------------------------------

def _hydro_polys(basis: VelocityBasis) -> np.ndarray:
    """Nodal values of 1, v1, v2, v3, (|v|^2 - 3)/2 (columns of P0 f / mu^{1/2})."""
    v = basis.nodes
    return np.column_stack([np.ones(len(v)), v[:, 0], v[:, 1], v[:, 2],
                            0.5 * (np.sum(v**2, axis=1) - 3.0)])


def _polarize(basis: VelocityBasis, quad) -> np.ndarray:
    """Tensor ``G[:, a, b]`` of the symmetric bilinear form polarizing ``quad``.

    ``quad(m)`` returns nodal values of a polynomial quadratic in the moment
    vector ``m`` (shape (5, n_nodes) for batched ``m``).
    """
    E = np.eye(5)
    G = np.zeros((basis.dim, 5, 5))
    diag = [basis.project(quad(E[a])) for a in range(5)]
    for a in range(5):
        G[:, a, a] = diag[a]
        for b in range(a + 1, 5):
            val = 0.5 * (basis.project(quad(E[a] + E[b])) - diag[a] - diag[b])
            G[:, a, b] = G[:, b, a] = val
    return G


def bgk_second_order(basis: VelocityBasis, m: np.ndarray) -> np.ndarray:
    """Second-order term of ``mu^{-1/2}(M[mu + eps mu^{1/2} f] - mu)`` as a polynomial.

    ``m = (rho, u1, u2, u3, theta)`` are the moments of ``f``; the local
    Maxwellian is expanded in (density - 1, velocity, temperature - 1).
    """
    rho, u, theta = m[0], m[1:4], m[4]
    v = basis.nodes
    v2 = np.sum(v**2, axis=1)
    uv = v @ u
    A = rho + uv + theta * 0.5 * (v2 - 3.0)
    u2 = u @ u
    B = (-0.5 * rho**2 + 1.5 * rho * theta + 0.75 * theta**2
         - 0.5 * v2 * (rho * theta + u2 / 3.0 + theta**2)
         - (rho + theta) * uv)
    return 0.5 * A**2 + B


def bgk_backend(basis: VelocityBasis, nu: float = 1.0) -> CollisionBackend:
    """BGK relaxation ``L = nu (P0 - Id)`` with the local-Maxwellian quadratic term."""
    if not nu > 0:
        raise BackendError(f"BGK frequency must be positive, got {nu}")
    L = nu * (basis.P0 - np.eye(basis.dim))
    G = nu * _polarize(basis, lambda m: bgk_second_order(basis, m))
    gamma = BilinearForm(features=basis.moment_rows.copy(), tensor=G)
    return CollisionBackend("BGK", basis, L, gamma, {"nu": float(nu)})


def maxwellian_closure_gamma(basis: VelocityBasis, L: np.ndarray) -> BilinearForm:
    """``Gamma(f, f) = -1/2 L((P0 f)^2 / mu^{1/2})`` polarized.

    This is the exact quadratic term on hydrodynamic inputs for any collision
    operator annihilating local Maxwellians.
    """
    P = _hydro_polys(basis)
    G = np.zeros((basis.dim, 5, 5))
    for a in range(5):
        for b in range(a, 5):
            val = -0.5 * L @ basis.project(P[:, a] * P[:, b])
            G[:, a, b] = G[:, b, a] = val
    return BilinearForm(features=basis.moment_rows.copy(), tensor=G)


# -- Maxwell molecules ---------------------------------------------------------

def burnett_functions(basis: VelocityBasis) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Orthonormal Burnett functions ``L_r^{(l+1/2)}(|v|^2/2) |v|^l Y_lm mu^{1/2}``.

    Returns the (dim, dim) coefficient matrix (columns) and the (r, l) label of
    each column.
    """
    v = basis.nodes
    rad = np.linalg.norm(v, axis=1)
    polar = np.arccos(np.clip(v[:, 2] / rad, -1.0, 1.0))
    azim = np.arctan2(v[:, 1], v[:, 0])
    cols, labels = [], []
    N = basis.max_degree
    for l in range(N + 1):
        ylm = {}
        for m in range(0, l + 1):
            y = sph_harm_y(l, m, polar, azim)
            if m == 0:
                ylm[0] = y.real
            else:
                ylm[m] = sqrt(2.0) * (-1) ** m * y.real
                ylm[-m] = sqrt(2.0) * (-1) ** m * y.imag
        for r in range((N - l) // 2 + 1):
            radial = eval_genlaguerre(r, l + 0.5, 0.5 * rad**2) * rad**l
            for m in range(-l, l + 1):
                cols.append(basis.project(radial * ylm[m]))
                labels.append((r, l))
    B = np.column_stack(cols)
    B /= np.linalg.norm(B, axis=0)
    if B.shape[1] != basis.dim:
        raise BackendError("Burnett family does not match the Hermite dimension")
    return B, labels


def maxwell_eigenvalue(r: int, l: int, order: int) -> float:
    """Linearized Maxwell-molecule eigenvalue for a constant angular kernel ``1/(4 pi)``."""
    x, w = np.polynomial.legendre.leggauss(order)
    c = np.sqrt((1 + x) / 2)
    s = np.sqrt((1 - x) / 2)
    n = 2 * r + l
    integrand = (c**n * eval_legendre(l, c) + s**n * eval_legendre(l, s)
                 - 1.0 - (1.0 if (r, l) == (0, 0) else 0.0))
    return float(0.5 * np.sum(w * integrand))


def maxwell_cutoff_backend(basis: VelocityBasis, angular_quad_order: int = 16) -> CollisionBackend:
    """Maxwell molecules with integrable (constant) angular kernel, diagonal in Burnett modes."""
    if angular_quad_order < 16:
        raise BackendError("angular quadrature order must be >= 16")
    B, labels = burnett_functions(basis)
    eig = np.array([maxwell_eigenvalue(r, l, angular_quad_order) for r, l in labels])
    finer = np.array([maxwell_eigenvalue(r, l, 2 * angular_quad_order) for r, l in labels])
    if np.max(np.abs(eig - finer)) > 1e-6:
        raise BackendError("angular quadrature not converged")
    L = B @ np.diag(eig) @ B.T
    L = 0.5 * (L + L.T)
    gamma = maxwellian_closure_gamma(basis, L)
    return CollisionBackend("MaxwellCutoff", basis, L, gamma,
                            {"angular_quad_order": angular_quad_order,
                             "burnett_eigenvalues": {f"{r},{l}": float(e) for (r, l), e
                                                     in zip(labels, eig)}})


# -- synthetic bilinear term ---------------------------------------------------

def bilinear_norm(form: BilinearForm, iters: int = 50, seed: int = 0) -> float:
    """Alternating power iteration for ``sup ||Gamma(x, y)|| / (||x|| ||y||)``."""
    rng = np.random.default_rng(seed)
    dim = form.tensor.shape[0]
    y = rng.standard_normal(dim)
    y /= np.linalg.norm(y)
    best = 0.0
    Tf = np.einsum("nab,ai->nib", form.tensor, form.features)
    for _ in range(iters):
        My = Tf @ (form.features @ y)  # x -> Gamma(x, y)
        u, s, vh = np.linalg.svd(My)
        x = vh[0]
        Mx = np.einsum("nib,i,bj->nj", Tf, x, form.features)
        u, s2, vh = np.linalg.svd(Mx)
        y = vh[0]
        best = max(best, s[0], s2[0])
    return float(best)


def synthetic_gamma(basis: VelocityBasis, seed: int = 0, scale: float = 1.0, rank: int = 6) -> BilinearForm:
    """Random symmetric bilinear map with microscopic input and output, ``P0 Gamma = 0``."""
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((rank, basis.dim)) / sqrt(basis.dim)
    T = rng.standard_normal((basis.dim, rank, rank)) * scale / sqrt(basis.dim)
    T = np.einsum("nm,mab->nab", basis.P0_perp, T)
    form = BilinearForm(features=F, tensor=T).symmetrized()
    return replace(form, continuity=bilinear_norm(form, seed=seed))


def gamma_sym(backend: CollisionBackend, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
    # summing both orders keeps the result bitwise symmetric under a swap
    g = backend.gamma
    return 0.5 * (g(f1, f2) + g(f2, f1))


# -- derived quantities -----------------------------------------------------

@dataclass(frozen=True)
class FluxFunctions:
    Phi: np.ndarray  # (3, 3, dim) coefficients of mu^{1/2} Phi_jk
    Psi: np.ndarray  # (3, dim) coefficients of mu^{1/2} Psi_j
    residual: float


def solve_flux_functions(backend: CollisionBackend) -> FluxFunctions:
    """Solve ``L(mu^{1/2} Phi) = (|v|^2/3 Id - v x v) mu^{1/2}`` and the heat analogue on (Ker L)^perp."""
    basis = backend.basis
    v = basis.nodes
    v2 = np.sum(v**2, axis=1)
    A = backend.L - basis.P0
    try:
        lu = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise BackendError("L is singular on (Ker L)^perp") from exc
    Phi = np.empty((3, 3, basis.dim))
    Psi = np.empty((3, basis.dim))
    res = 0.0
    for j in range(3):
        rhs = basis.project(v[:, j] * (2.5 - 0.5 * v2))
        Psi[j] = lu @ rhs
        res = max(res, np.max(np.abs(backend.L @ Psi[j] - rhs)))
        for k in range(3):
            rhs = basis.project(v2 / 3.0 * (j == k) - v[:, j] * v[:, k])
            Phi[j, k] = lu @ rhs
            res = max(res, np.max(np.abs(backend.L @ Phi[j, k] - rhs)))
    if res > 1e-10:
        raise BackendError(f"flux-function residual {res:.2e} exceeds 1e-10")
    return FluxFunctions(Phi, Psi, float(res))


def viscosities(backend: CollisionBackend, flux: FluxFunctions | None = None) -> tuple[float, float]:
    """``(nu_NS, nu_heat)``, taken positive: ``-(1/10) <Phi, L Phi>``, ``-(2/15) <Psi, L Psi>``."""
    flux = flux or solve_flux_functions(backend)
    L = backend.L
    ns = -0.1 * sum(flux.Phi[j, k] @ L @ flux.Phi[j, k] for j in range(3) for k in range(3))
    heat = -(2.0 / 15.0) * sum(flux.Psi[j] @ L @ flux.Psi[j] for j in range(3))
    if ns <= 0 or heat <= 0:
        raise BackendError("nonpositive viscosity: L is not dissipative")
    return float(ns), float(heat)


@dataclass(frozen=True)
class ConservationReport:
    max_residual: float
    worst_sample: int
    samples: int
    passed: bool


def check_conservation(backend: CollisionBackend, sample_count: int = 1000, seed: int = 0,
                       threshold: float = CONSERVATION_TOL) -> ConservationReport:
    """Largest collision-invariant moment of ``Gamma_sym(f1, f2)`` over random pairs."""
    rng = np.random.default_rng(seed)
    d = backend.dim
    f1 = rng.standard_normal((sample_count, d)) + 1j * rng.standard_normal((sample_count, d))
    f2 = rng.standard_normal((sample_count, d)) + 1j * rng.standard_normal((sample_count, d))
    g = gamma_sym(backend, f1, f2)
    res = np.max(np.abs(g @ backend.basis.kernel_basis), axis=1)
    worst = int(np.argmax(res)) if sample_count else -1
    mx = float(res[worst]) if sample_count else 0.0
    return ConservationReport(mx, worst, sample_count, mx <= threshold)


def kernel_dimension(backend: CollisionBackend, tol: float = KERNEL_TOL) -> int:
    eig = np.linalg.eigvalsh(0.5 * (backend.L + backend.L.T))
    return int(np.sum(np.abs(eig) < tol))


def coercivity_constant(backend: CollisionBackend, s: int = 0, gamma: float = 0.0) -> float:
    """Best ``lambda2`` in ``<L f, f> <= -lambda2 ||P0^perp f||^2_{H^{s,*}}`` on the truncated space."""
    from scipy.linalg import eigh, null_space

    basis = backend.basis
    Qp = null_space(basis.kernel_basis.T)
    Ls = 0.5 * (backend.L + backend.L.T)
    A = -Qp.T @ Ls @ Qp
    B = Qp.T @ norm_matrix(basis, s, gamma) @ Qp
    lam = float(eigh(A, B, eigvals_only=True)[0])
    if lam <= 0:
        raise BackendError(f"nonpositive coercivity constant {lam:.3e}")
    return lam
