"""Tensor Hermite discretization of velocity space.

A velocity function is stored through its coefficients in the orthonormal
family ``phi_n(v) = h_{n1}(v1) h_{n2}(v2) h_{n3}(v3) mu^{1/2}(v)`` where
``h_n = He_n / sqrt(n!)`` are normalized probabilists' Hermite polynomials and
``mu`` is the standard Gaussian.  Multi-indices are truncated at total degree
``max_degree``; that space is invariant under rotations of ``v``.

All integrals use a tensor Gauss-Hermite rule with ``2 * max_degree + 2``
points per axis, exact for polynomial integrands of degree up to
``4 * max_degree + 3`` against ``mu``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb, sqrt

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

MIN_DEGREE = 4
GRAM_TOL = 1e-8


class BasisError(ValueError):
    pass


@dataclass(frozen=True)
class HydroMoments:
    rho: complex
    u: np.ndarray
    theta: complex

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.rho], self.u, [self.theta]])


def hermite_1d(x: np.ndarray, nmax: int) -> np.ndarray:
    """Normalized probabilists' Hermite polynomials ``h_0..h_nmax`` at ``x``.

    Returns an array of shape ``x.shape + (nmax + 1,)``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (nmax + 1,))
    out[..., 0] = 1.0
    if nmax >= 1:
        out[..., 1] = x
    for n in range(1, nmax):
        out[..., n + 1] = (x * out[..., n] - sqrt(n) * out[..., n - 1]) / sqrt(n + 1)
    return out


def multi_indices(max_degree: int) -> np.ndarray:
    """Multi-indices ordered by total degree, then lexicographically."""
    idx = []
    for d in range(max_degree + 1):
        for n1 in range(d, -1, -1):
            for n2 in range(d - n1, -1, -1):
                idx.append((n1, n2, d - n1 - n2))
    return np.array(idx, dtype=int)


@dataclass(frozen=True, eq=False)
class VelocityBasis:
    max_degree: int
    indices: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    evals: np.ndarray  # polynomial parts h_n at the nodes, (n_nodes, dim)
    _index_of: dict = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.indices)

    def index(self, n1: int, n2: int, n3: int) -> int:
        return self._index_of[(n1, n2, n3)]

    def unit(self, n1: int, n2: int, n3: int) -> np.ndarray:
        c = np.zeros(self.dim)
        c[self.index(n1, n2, n3)] = 1.0
        return c

    # -- quadrature helpers -------------------------------------------------

    def evaluate(self, coeffs: np.ndarray) -> np.ndarray:
        """Polynomial part ``f / mu^{1/2}`` of ``coeffs`` at the nodes."""
        return np.asarray(coeffs) @ self.evals.T

    def project(self, values: np.ndarray) -> np.ndarray:
        """Coefficients of ``p mu^{1/2}`` from nodal values of ``p``.

        Exact whenever ``p`` is a polynomial of degree at most ``max_degree``;
        otherwise the orthogonal projection onto the truncated space.
        """
        return (np.asarray(values) * self.weights) @ self.evals

    def eval_at(self, points: np.ndarray) -> np.ndarray:
        """Basis polynomial parts at arbitrary points, shape (n_points, dim)."""
        points = np.atleast_2d(points)
        h = hermite_1d(points, self.max_degree)
        i = self.indices
        return h[:, 0, i[:, 0]] * h[:, 1, i[:, 1]] * h[:, 2, i[:, 2]]

    def gram(self) -> np.ndarray:
        return self.evals.T @ (self.weights[:, None] * self.evals)

    # -- structural operators ----------------------------------------------

    @cached_property
    def multiplication(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Matrices of ``f -> v_j f`` truncated at ``max_degree``."""
        mats = []
        for j in range(3):
            V = np.zeros((self.dim, self.dim))
            for col, n in enumerate(self.indices):
                m = n.copy()
                m[j] += 1
                row = self._index_of.get(tuple(m))
                if row is not None:
                    V[row, col] = sqrt(n[j] + 1)
                if n[j] > 0:
                    m = n.copy()
                    m[j] -= 1
                    V[self._index_of[tuple(m)], col] = sqrt(n[j])
            mats.append(V)
        return tuple(mats)

    @cached_property
    def poly_derivative(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Matrices of ``p -> d p / d v_j`` on polynomial parts (``h_n' = sqrt(n) h_{n-1}``)."""
        mats = []
        for j in range(3):
            D = np.zeros((self.dim, self.dim))
            for col, n in enumerate(self.indices):
                if n[j] > 0:
                    m = n.copy()
                    m[j] -= 1
                    D[self._index_of[tuple(m)], col] = sqrt(n[j])
            mats.append(D)
        return tuple(mats)

    @cached_property
    def kernel_basis(self) -> np.ndarray:
        """Orthonormal basis of the collision invariants, shape (dim, 5).

        Columns: ``mu^{1/2}``, ``v_j mu^{1/2}``, ``(|v|^2 - 3)/sqrt(6) mu^{1/2}``.
        """
        K = np.zeros((self.dim, 5))
        K[self.index(0, 0, 0), 0] = 1.0
        K[self.index(1, 0, 0), 1] = 1.0
        K[self.index(0, 1, 0), 2] = 1.0
        K[self.index(0, 0, 1), 3] = 1.0
        # |v|^2 - 3 = sqrt(2) * sum_j h_2(v_j)
        for n in ((2, 0, 0), (0, 2, 0), (0, 0, 2)):
            K[self.index(*n), 4] = sqrt(2.0) / sqrt(6.0)
        return K

    @cached_property
    def P0(self) -> np.ndarray:
        K = self.kernel_basis
        return K @ K.T

    @cached_property
    def P0_perp(self) -> np.ndarray:
        return np.eye(self.dim) - self.P0

    @cached_property
    def moment_rows(self) -> np.ndarray:
        """Rows computing (rho, u1, u2, u3, theta) from coefficients, shape (5, dim)."""
        R = np.zeros((5, self.dim))
        R[0, self.index(0, 0, 0)] = 1.0
        R[1, self.index(1, 0, 0)] = 1.0
        R[2, self.index(0, 1, 0)] = 1.0
        R[3, self.index(0, 0, 1)] = 1.0
        for n in ((2, 0, 0), (0, 2, 0), (0, 0, 2)):
            R[4, self.index(*n)] = sqrt(2.0) / 3.0
        return R

    @cached_property
    def hydro_columns(self) -> np.ndarray:
        """Columns lifting (rho, u, theta) to ``{rho + u.v + theta (|v|^2-3)/2} mu^{1/2}``."""
        C = np.zeros((self.dim, 5))
        C[self.index(0, 0, 0), 0] = 1.0
        C[self.index(1, 0, 0), 1] = 1.0
        C[self.index(0, 1, 0), 2] = 1.0
        C[self.index(0, 0, 1), 3] = 1.0
        for n in ((2, 0, 0), (0, 2, 0), (0, 0, 2)):
            C[self.index(*n), 4] = 1.0 / sqrt(2.0)
        return C

    @cached_property
    def heat_flux_rows(self) -> np.ndarray:
        """Rows of ``M[f] = int f v (|v|^2 - 5) mu^{1/2}``, shape (3, dim)."""
        v = self.nodes
        v2 = np.sum(v**2, axis=1)
        return np.stack([self.project(v[:, j] * (v2 - 5.0)) for j in range(3)])

    @cached_property
    def stress_rows(self) -> np.ndarray:
        """Rows of ``Theta[f] = int f (v x v - Id) mu^{1/2}``, shape (3, 3, dim)."""
        v = self.nodes
        out = np.empty((3, 3, self.dim))
        for j in range(3):
            for k in range(3):
                out[j, k] = self.project(v[:, j] * v[:, k] - (j == k))
        return out

    @cached_property
    def radius_weight(self) -> np.ndarray:
        return 1.0 + np.sum(self.nodes**2, axis=1)

    def gradient_maps(self) -> list[np.ndarray]:
        """Nodal values of ``(grad_v f) / mu^{1/2}``: ``A_j c = d_j p - v_j p / 2``."""
        H = self.evals
        return [H @ D.T - 0.5 * self.nodes[:, j, None] * H
                for j, D in enumerate(self.poly_derivative)]

    def rotation(self, Q: np.ndarray) -> np.ndarray:
        """Matrix of ``f -> f(Q^T v)`` for an orthogonal ``Q``; itself orthogonal."""
        rotated = self.eval_at(self.nodes @ Q)  # Q^T v for each row v
        return self.evals.T @ (self.weights[:, None] * rotated)


def build_basis(max_degree: int) -> VelocityBasis:
    """Build the truncated tensor Hermite basis and check its orthonormality."""
    if max_degree < MIN_DEGREE:
        raise BasisError(f"max_degree must be >= {MIN_DEGREE}, got {max_degree}")
    q = 2 * max_degree + 2
    x, w = hermegauss(q)
    w = w / np.sqrt(2.0 * np.pi)
    X1, X2, X3 = np.meshgrid(x, x, x, indexing="ij")
    nodes = np.stack([X1.ravel(), X2.ravel(), X3.ravel()], axis=1)
    W1, W2, W3 = np.meshgrid(w, w, w, indexing="ij")
    weights = (W1 * W2 * W3).ravel()
    indices = multi_indices(max_degree)
    assert len(indices) == comb(max_degree + 3, 3)
    h = hermite_1d(nodes, max_degree)
    evals = h[:, 0, indices[:, 0]] * h[:, 1, indices[:, 1]] * h[:, 2, indices[:, 2]]
    basis = VelocityBasis(
        max_degree=max_degree,
        indices=indices,
        nodes=nodes,
        weights=weights,
        evals=evals,
        _index_of={tuple(int(a) for a in n): i for i, n in enumerate(indices)},
    )
    dev = np.max(np.abs(basis.gram() - np.eye(basis.dim)))
    if dev > GRAM_TOL:
        raise BasisError(f"Gram deviation {dev:.3e} exceeds {GRAM_TOL}")
    return basis


# -- moments and projector ---------------------------------------------------

def moments(basis: VelocityBasis, f: np.ndarray) -> HydroMoments:
    m = basis.moment_rows @ np.asarray(f)
    return HydroMoments(rho=m[0], u=m[1:4], theta=m[4])


def project_P0(basis: VelocityBasis, f: np.ndarray) -> np.ndarray:
    """Hydrodynamic part ``{rho + u.v + theta (|v|^2-3)/2} mu^{1/2}`` of ``f``."""
    return basis.hydro_columns @ (basis.moment_rows @ np.asarray(f))


def multiply_by_v(basis: VelocityBasis, f: np.ndarray, j: int) -> np.ndarray:
    return basis.multiplication[j] @ np.asarray(f)


def moment_M(basis: VelocityBasis, f: np.ndarray) -> np.ndarray:
    return basis.heat_flux_rows @ np.asarray(f)


def moment_Theta(basis: VelocityBasis, f: np.ndarray) -> np.ndarray:
    return basis.stress_rows @ np.asarray(f)


# -- weighted norms ----------------------------------------------------------

def norm_matrix(basis: VelocityBasis, s: int, gamma: float = 0.0) -> np.ndarray:
    """Real symmetric ``G`` with ``||f||^2_{H^{s,*}} = Re f^H G f`` for ``s`` in {0, 1}.

    Weights ``<v>^gamma`` are not polynomial for ``gamma != 0`` and the
    projection ``pr_v`` is rational, so those cases are quadrature
    approximations; ``s = 0, gamma = 0`` is exact.
    """
    if s not in (0, 1):
        raise ValueError(f"s must be 0 or 1 here, got {s}; use surrogate_norms")
    key = (s, float(gamma))
    cache = basis.__dict__.setdefault("_norm_cache", {})
    if key in cache:
        return cache[key]
    H, w, r2 = basis.evals, basis.weights, basis.radius_weight
    if s == 0:
        if gamma == 0.0:
            G = np.eye(basis.dim)
        else:
            G = H.T @ ((w * r2 ** (gamma / 2))[:, None] * H)
    else:
        A = basis.gradient_maps()
        vnorm = np.linalg.norm(basis.nodes, axis=1)
        R = sum((basis.nodes[:, j] / vnorm)[:, None] * A[j] for j in range(3))
        wg = w * r2 ** (gamma / 2)
        wg1 = w * r2 ** (gamma / 2 + 1)
        G = H.T @ (wg1[:, None] * H)
        G += R.T @ (wg[:, None] * R)
        G += sum(Aj.T @ (wg1[:, None] * Aj) for Aj in A) - R.T @ (wg1[:, None] * R)
        G = 0.5 * (G + G.T)
    cache[key] = G
    return G


def quad_norm(G: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``sqrt(Re f^H G f)`` along the last axis of ``f``."""
    f = np.asarray(f)
    val = np.real(np.einsum("...i,ij,...j->...", f.conj(), G, f))
    return np.sqrt(np.maximum(val, 0.0))


def weighted_norm(basis: VelocityBasis, f: np.ndarray, s: int, gamma: float = 0.0) -> float:
    return float(quad_norm(norm_matrix(basis, s, gamma), f))


SURROGATE_SLACK = 2.0


def _weighted_h1_pieces(basis: VelocityBasis, f: np.ndarray, a: float) -> tuple[float, float]:
    """(L^2, H^1) norms of ``<v>^a f`` by quadrature."""
    p = basis.evaluate(f)
    r2 = basis.radius_weight
    w = basis.weights
    wt = r2 ** (a / 2)
    l2 = np.sum(w * np.abs(wt * p) ** 2)
    grad2 = 0.0
    for j, Aj in enumerate(basis.gradient_maps()):
        g = wt * (Aj @ f) + a * r2 ** (a / 2 - 1) * basis.nodes[:, j] * p
        grad2 += np.sum(w * np.abs(g) ** 2)
    return float(np.sqrt(l2)), float(np.sqrt(l2 + grad2))


def _interp_hs(l2: float, h1: float, s: float) -> float:
    if l2 == 0.0:
        return 0.0
    return l2 ** (1 - s) * h1 ** s


def surrogate_norms(basis: VelocityBasis, f: np.ndarray, s: float, gamma: float = 0.0) -> tuple[float, float]:
    """Lower and upper surrogates of the fractional collision norm.

    ``H^s_v`` is realized by interpolation ``||h||_{L^2}^{1-s} ||h||_{H^1}^s``.
    Returns ``(||<v>^{g/2+s} f|| + ||<v>^{g/2} f||_{H^s}, ||<v>^{g/2+s} f||_{H^s})``.
    """
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    l2_a, h1_a = _weighted_h1_pieces(basis, f, gamma / 2 + s)
    l2_b, h1_b = _weighted_h1_pieces(basis, f, gamma / 2)
    lower = l2_a + _interp_hs(l2_b, h1_b, s)
    upper = _interp_hs(l2_a, h1_a, s)
    return lower, upper
