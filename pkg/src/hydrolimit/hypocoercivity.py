"""Mode-wise modified inner product and its decay estimates.

The correction ``psi[f1, f2](k)`` is stored as a Hermitian matrix ``W(k)``
with ``psi[f1, f2] = f2^H W f1``; the modified Gram matrix is
``H = I + eps W``.  Coercivity of ``Re <<Lambda f, f>>`` against
``eps^-2 |P_perp f|^2_{H^{s,*}} + |P0 f|^2`` becomes a generalized
Hermitian eigenvalue problem per mode.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, expm, null_space

from .collision import CollisionBackend
from .spectral import assemble_mode_operator
from .velocity import VelocityBasis, norm_matrix

DELTA_LADDER = 10.0 ** -np.arange(1.0, 4.01, 0.5)


class DeltaError(ValueError):
    pass


def _hermitian_pair(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Matrix of ``i (alpha f1).conj(beta f2) + conj(i (alpha f2).conj(beta f1))`` as ``f2^H W f1``."""
    a = alpha.reshape(-1, alpha.shape[-1])
    b = beta.reshape(-1, beta.shape[-1])
    return 1j * (b.T @ a - a.T @ b)


def psi_matrix(basis: VelocityBasis, k, deltas) -> np.ndarray:
    """Hermitian ``W(k)``; the three terms pair (k theta, M P_perp), ((k x u)^sym, Theta P_perp + theta Id), (k rho, u)."""
    d1, d2, d3 = deltas
    k = np.asarray(k, dtype=float)
    w = 1.0 / (1.0 + k @ k)
    R = basis.moment_rows
    rho, u, theta = R[0], R[1:4], R[4]
    Pp = basis.P0_perp
    M = basis.heat_flux_rows @ Pp
    Th = np.einsum("jkn,nm->jkm", basis.stress_rows, Pp)
    W = d1 * _hermitian_pair(k[:, None] * theta[None, :], M)
    ku = 0.5 * (k[:, None, None] * u[None, :, :] + k[None, :, None] * u[:, None, :])
    W += d2 * _hermitian_pair(ku, Th + np.eye(3)[:, :, None] * theta)
    W += d3 * _hermitian_pair(k[:, None] * rho[None, :], u)
    return w * W


def psi_functional(basis: VelocityBasis, f1: np.ndarray, f2: np.ndarray, k, deltas) -> complex:
    return complex(np.conj(f2) @ psi_matrix(basis, k, deltas) @ f1)


@dataclass
class HypoForm:
    basis: VelocityBasis
    deltas: tuple[float, float, float]
    eps: float

    def gram(self, k) -> np.ndarray:
        return np.eye(self.basis.dim) + self.eps * psi_matrix(self.basis, k, self.deltas)

    def inner(self, f1, f2, k) -> complex:
        return complex(np.conj(f2) @ self.gram(k) @ f1)

    def norm(self, f, k) -> float:
        return float(np.sqrt(max(self.inner(f, f, k).real, 0.0)))

    def equivalence(self, k) -> float:
        """Smallest ``c`` with ``(1-c)|f|^2 <= |||f|||^2 <= (1+c)|f|^2``."""
        return float(np.max(np.abs(np.linalg.eigvalsh(self.gram(k) - np.eye(self.basis.dim)))))


def _admissible(basis: VelocityBasis, k, micro_only: bool = False) -> np.ndarray:
    """Orthonormal basis of the admissible space: everything, or ``Ker L``-free at ``k = 0``."""
    if micro_only or not np.any(np.asarray(k) != 0):
        return null_space(basis.kernel_basis.T)
    return np.eye(basis.dim)


def coercivity_pencil(backend: CollisionBackend, form: HypoForm, k, s: int = 0, gamma: float = 0.0,
                      micro_only: bool = False) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(A, B, Q)`` with ``-Re<<Lambda f, f>> = x^H A x`` and the target ``x^H B x`` for ``f = Q x``."""
    basis = backend.basis
    Lam = assemble_mode_operator(backend, np.asarray(k, float), form.eps).matrix
    H = form.gram(k)
    HL = H @ Lam
    A = -0.5 * (HL + HL.conj().T)
    Pp = basis.P0_perp
    B = Pp.T @ norm_matrix(basis, s, gamma) @ Pp / form.eps**2 + basis.P0
    Q = _admissible(basis, k, micro_only)
    return Q.conj().T @ A @ Q, Q.conj().T @ B @ Q, Q


def mode_lambda3(backend: CollisionBackend, form: HypoForm, k, s: int = 0, gamma: float = 0.0,
                 micro_only: bool = False) -> float:
    """Exact infimum of the coercivity quotient at one mode; ``micro_only`` restricts to ``P0 f = 0``."""
    A, B, _ = coercivity_pencil(backend, form, k, s, gamma, micro_only)
    return float(eigh(A, B, eigvals_only=True)[0])


def lattice_representatives(kmax: float, d_x: int = 3) -> list[np.ndarray]:
    """One lattice vector per value of ``|k|^2`` in ``(0, kmax^2]``."""
    n = int(np.floor(kmax))
    reps = {}
    rng = range(-n, n + 1)
    axes = [rng] * d_x + [[0]] * (3 - d_x)
    for k in itertools.product(*axes):
        r2 = sum(c * c for c in k)
        if 0 < r2 <= kmax**2 and r2 not in reps:
            reps[r2] = np.array(k, dtype=float)
    return [reps[r2] for r2 in sorted(reps)]


@dataclass
class CoercivityReport:
    lambda3: float
    lambda3_sampled: float
    per_mode: list = field(default_factory=list)
    ratios: np.ndarray | None = None
    equivalence: float = 0.0

    @property
    def passed(self) -> bool:
        return self.lambda3 > 0 and self.equivalence < 1


def verify_coercivity(backend: CollisionBackend, deltas, eps_values, k_set, sample_count: int = 200,
                      s: int = 0, gamma: float = 0.0, seed: int = 0) -> CoercivityReport:
    """Exact per-mode infimum plus random samples of the Rayleigh quotient."""
    rng = np.random.default_rng(seed)
    basis = backend.basis
    exact, sampled, rows = np.inf, np.inf, []
    ratios = []
    equiv = 0.0
    for eps in np.atleast_1d(eps_values):
        form = HypoForm(basis, tuple(deltas), float(eps))
        for k in list(k_set) + [np.zeros(3)]:
            k = np.asarray(k, float)
            A, B, Q = coercivity_pencil(backend, form, k, s, gamma)
            lam = float(eigh(A, B, eigvals_only=True)[0])
            X = rng.standard_normal((Q.shape[1], sample_count)) + 1j * rng.standard_normal((Q.shape[1], sample_count))
            r = np.real(np.einsum("in,ij,jn->n", X.conj(), A, X)) / np.real(np.einsum("in,ij,jn->n", X.conj(), B, X))
            ratios.append(r)
            exact, sampled = min(exact, lam), min(sampled, float(r.min()))
            equiv = max(equiv, form.equivalence(k))
            rows.append({"eps": float(eps), "k": k.tolist(), "lambda3": lam, "sampled_min": float(r.min())})
    if not exact > 0:
        raise DeltaError(f"deltas {tuple(deltas)} give nonpositive lambda3 = {exact:.3g}")
    return CoercivityReport(exact, sampled, rows, np.concatenate(ratios), equiv)


def _min_lambda3(backend, deltas, eps_values, k_set, s, gamma) -> tuple[float, float]:
    lam, equiv = np.inf, 0.0
    for eps in eps_values:
        form = HypoForm(backend.basis, deltas, eps)
        for k in k_set:
            lam = min(lam, mode_lambda3(backend, form, k, s, gamma))
            equiv = max(equiv, form.equivalence(k))
    return lam, equiv


@dataclass
class DeltaScan:
    deltas: tuple[float, float, float]
    lambda3: float
    equivalence: float
    table: list


def tune_deltas(backend: CollisionBackend, eps_values=(1.0, 0.1), kmax: float = 8.0, d_x: int = 3,
                ladder=DELTA_LADDER, max_equivalence: float = 0.5, s: int = 0, gamma: float = 0.0) -> DeltaScan:
    """Grid search over strictly ordered ``d3 < d2 < d1`` from ``ladder``, maximizing the worst ``lambda3``."""
    k_set = lattice_representatives(kmax, d_x) + [np.zeros(3)]
    table = []
    best = None
    for d1, d2, d3 in itertools.combinations(sorted(ladder, reverse=True), 3):
        lam, equiv = _min_lambda3(backend, (d1, d2, d3), eps_values, k_set, s, gamma)
        table.append({"deltas": (d1, d2, d3), "lambda3": lam, "equivalence": equiv})
        if equiv <= max_equivalence and lam > 0 and (best is None or lam > best[1]):
            best = ((d1, d2, d3), lam, equiv)
    if best is None:
        raise DeltaError("no ordered delta triple satisfies the equivalence bound with lambda3 > 0")
    return DeltaScan(best[0], best[1], best[2], table)


# -- semigroup estimates -------------------------------------------------------

def _trajectory(Lam: np.ndarray, f: np.ndarray, times: np.ndarray) -> np.ndarray:
    E = expm(Lam * (times[1] - times[0]))
    out = np.empty((len(times), len(f)), complex)
    out[0] = f
    for n in range(1, len(times)):
        out[n] = E @ out[n - 1]
    return out


def _source_trajectory(Lam: np.ndarray, S: np.ndarray, times: np.ndarray) -> np.ndarray:
    """``h' = Lam h + S`` with constant ``S`` and ``h(0) = 0``, exact via the augmented exponential."""
    n = len(S)
    aug = np.zeros((n + 1, n + 1), complex)
    aug[:n, :n] = Lam
    aug[:n, n] = S
    E = expm(aug * (times[1] - times[0]))
    out = np.zeros((len(times), n), complex)
    y = np.zeros(n + 1, complex)
    y[n] = 1
    for t in range(1, len(times)):
        y = E @ y
        out[t] = y[:n]
    return out


def _l2t(values: np.ndarray, times: np.ndarray) -> float:
    return float(np.sqrt(np.trapezoid(values, times)))


@dataclass
class SemigroupEstimate:
    eps: float
    homogeneous: float
    source: float
    source_raw: float
    micro_weighted: float


def verify_semigroup_estimates(backend: CollisionBackend, eps: float, k, f: np.ndarray | None = None,
                               S: np.ndarray | None = None, T: float = 1.0, n_times: int = 2001,
                               s: int = 0, gamma: float = 0.0) -> SemigroupEstimate:
    """Measured constants for one mode.

    ``homogeneous``: ``(sup|Uf| + |P0 Uf|_{L2} + eps^-1 |P_perp Uf|_{L2 H^{s,*}}) / |f|``.
    ``source``: for ``h = int U S`` with ``P0 S = 0`` and constant ``S``,
    ``(sup|h| + |P0 h|_{L2} + eps^-1 |P_perp h|_{L2 H^{s,*}}) / (eps |S|_{L2 (H^{s,*})'})``;
    ``source_raw`` is the same numerator over ``|S|_{L2}`` alone.
    """
    basis = backend.basis
    k = np.asarray(k, float)
    Lam = assemble_mode_operator(backend, k, eps).matrix
    times = np.linspace(0.0, T, n_times)
    G = norm_matrix(basis, s, gamma)
    P0, Pp = basis.P0, basis.P0_perp

    def pieces(traj):
        mac = traj @ P0.T
        mic = traj @ Pp.T
        sup = float(np.sqrt(np.max(np.sum(np.abs(traj) ** 2, axis=1))))
        l2_mac = _l2t(np.sum(np.abs(mac) ** 2, axis=1), times)
        l2_mic = _l2t(np.real(np.einsum("ti,ij,tj->t", mic.conj(), G, mic)), times)
        return sup + l2_mac + l2_mic / eps, l2_mic / eps

    hom = micro = 0.0
    if f is not None:
        f = np.asarray(f, complex)
        if not np.any(k):
            f = f - P0 @ f
        num, micro = pieces(_trajectory(Lam, f, times))
        hom = num / np.linalg.norm(f)
        micro /= np.linalg.norm(f)
    src = raw = 0.0
    if S is not None:
        S = Pp @ np.asarray(S, complex)
        num, _ = pieces(_source_trajectory(Lam, S, times))
        dual = float(np.sqrt(np.real(S.conj() @ np.linalg.solve(G, S)))) * np.sqrt(T)
        src = num / (eps * dual)
        raw = num / (np.linalg.norm(S) * np.sqrt(T))
    return SemigroupEstimate(eps, hom, src, raw, micro)


def flow_decay(backend: CollisionBackend, form: HypoForm, k, f: np.ndarray, T: float = 1.0,
               n_times: int = 201) -> np.ndarray:
    """``|||U(t) f|||`` on a uniform grid; nonincreasing when the mode is coercive."""
    k = np.asarray(k, float)
    f = np.asarray(f, complex)
    if not np.any(k):
        f = f - form.basis.P0 @ f
    Lam = assemble_mode_operator(backend, k, form.eps).matrix
    traj = _trajectory(Lam, f, np.linspace(0.0, T, n_times))
    H = form.gram(k)
    return np.sqrt(np.real(np.einsum("ti,ij,tj->t", traj.conj(), H, traj)))
