"""Per-mode generator ``L - i eps v.k`` and its hydrodynamic eigenvalue branches.

Branch computations are done in the frame where ``k = |k| e1``.  There the
operator preserves the parity of ``(n2, n3)``, which splits the five
hydrodynamic eigenvalues into three independent sectors: the two transverse
(Navier-Stokes) modes sit alone in the ``(odd, even)`` and ``(even, odd)``
sectors, while heat and the two acoustic modes share ``(even, even)``.  The
sector split is what keeps the nearly degenerate NS and heat branches apart.

The diagonal similarity ``D = diag(i^{n1})`` turns the frame operator into a
real matrix, so real branches come out exactly real and the acoustic pair
exactly conjugate.  Results are rotated to the lab frame with the velocity
rotation matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np
import scipy.linalg as sla

from .collision import CollisionBackend, coercivity_constant

BRANCHES = ("NS", "heat", "wave+", "wave-")
NS_SECTORS = ((1, 0), (0, 1))
MAIN_SECTOR = (0, 0)


class BranchError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ModeOperator:
    k: np.ndarray
    eps: float
    matrix: np.ndarray

    def split(self) -> tuple[np.ndarray, np.ndarray]:
        """(Hermitian part, skew-Hermitian part) of the matrix."""
        M = self.matrix
        return 0.5 * (M + M.conj().T), 0.5 * (M - M.conj().T)


def transport_matrix(backend: CollisionBackend, k) -> np.ndarray:
    """``sum_j k_j V_j`` for a real 3-vector ``k``."""
    V = backend.basis.multiplication
    k = np.asarray(k, dtype=float)
    return k[0] * V[0] + k[1] * V[1] + k[2] * V[2]


def assemble_mode_operator(backend: CollisionBackend, k, eps: float) -> ModeOperator:
    k = np.asarray(k, dtype=float)
    M = (backend.L - 1j * transport_matrix(backend, eps * k)) / eps**2
    return ModeOperator(k, float(eps), M)


# -- frames ------------------------------------------------------------------

def frame_rotation(direction) -> np.ndarray:
    """Proper rotation ``Q`` with ``Q e1 = direction / |direction|``."""
    w = np.asarray(direction, dtype=float)
    w = w / np.linalg.norm(w)
    e1 = np.array([1.0, 0.0, 0.0])
    d = e1 - w
    nd = np.linalg.norm(d)
    if nd < 1e-14:
        return np.eye(3)
    d /= nd
    H = np.eye(3) - 2.0 * np.outer(d, d)
    return H @ np.diag([1.0, 1.0, -1.0])


class _Frame:
    """Cached per-backend data for the ``k = r e1`` frame."""

    def __init__(self, backend: CollisionBackend):
        basis = backend.basis
        idx = basis.indices
        self.phase = 1j ** (idx[:, 0] % 4)
        D = self.phase
        # D^{-1} (L - i r V1) D = L_real + r V1_real, both real
        self.L_real = np.real(backend.L * (D.conj()[:, None] * D[None, :]))
        V1 = basis.multiplication[0]
        self.V1_real = np.real(-1j * V1 * (D.conj()[:, None] * D[None, :]))
        self.sectors = {}
        for key in ((0, 0), (1, 0), (0, 1), (1, 1)):
            sel = np.flatnonzero((idx[:, 1] % 2 == key[0]) & (idx[:, 2] % 2 == key[1]))
            self.sectors[key] = sel
        K = basis.kernel_basis
        self.kernel = {key: (K[sel] * D.conj()[sel, None]) for key, sel in self.sectors.items()}
        self.lambda2 = coercivity_constant(backend)
        self.L_inv_perp = np.linalg.solve(backend.L - basis.P0, basis.P0_perp)
        self.basis = basis
        self.rotations: dict[tuple, np.ndarray] = {}

    def rotation(self, direction: np.ndarray) -> np.ndarray:
        key = tuple(np.round(direction / np.linalg.norm(direction), 14))
        R = self.rotations.get(key)
        if R is None:
            R = self.basis.rotation(frame_rotation(direction))
            self.rotations[key] = R
        return R


_FRAMES: dict[int, _Frame] = {}


def _frame(backend: CollisionBackend) -> _Frame:
    fr = _FRAMES.get(id(backend))
    if fr is None or fr.basis is not backend.basis:
        fr = _Frame(backend)
        _FRAMES[id(backend)] = fr
    return fr


def _sector_eig(fr: _Frame, key, r: float, m: int):
    """Hydrodynamic eigen-triples of one sector, picked by kernel overlap."""
    sel = fr.sectors[key]
    M = fr.L_real[np.ix_(sel, sel)] + r * fr.V1_real[np.ix_(sel, sel)]
    lam, W, V = sla.eig(M, left=True, right=True)
    ref = fr.kernel[key][:, np.any(fr.kernel[key] != 0, axis=0)]
    Q, _ = np.linalg.qr(ref)
    overlap = np.linalg.norm(Q.conj().T @ V, axis=0) / np.linalg.norm(V, axis=0)
    order = np.argsort(-overlap)
    hyd, rest = order[:m], order[m:]
    if m and rest.size and overlap[hyd[-1]] <= overlap[rest[0]] + 1e-12:
        raise BranchError(f"ambiguous hydrodynamic selection at r={r:.3g}")
    gap = np.inf
    if rest.size:
        gap = float(np.min(np.abs(lam[hyd][:, None] - lam[rest][None, :])))
    return lam[hyd], V[:, hyd], W[:, hyd], sel, gap, float(np.max(lam.real))


def _dyad(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.outer(v, w.conj()) / (w.conj() @ v)


@dataclass(frozen=True, eq=False)
class ModeBranches:
    k: np.ndarray
    eigenvalues: dict
    projectors: dict
    gap: float
    max_real: float

    def total_projector(self) -> np.ndarray:
        return sum(self.projectors.values())


def frame_branches(backend: CollisionBackend, r: float) -> ModeBranches:
    """Branches of ``L - i r v1`` in the frame (projectors in frame coordinates)."""
    fr = _frame(backend)
    dim = backend.dim
    D = fr.phase
    if r == 0:
        return _zero_branches(backend, np.array([1.0, 0.0, 0.0]), frame=True)
    eigs, projs = {}, {}
    gap, mx = np.inf, -np.inf
    P_ns = np.zeros((dim, dim), complex)
    lam_ns = []
    for key in NS_SECTORS:
        lam, V, W, sel, g, m = _sector_eig(fr, key, r, 1)
        gap, mx = min(gap, g), max(mx, m)
        P_ns[np.ix_(sel, sel)] += _dyad(V[:, 0], W[:, 0])
        lam_ns.append(lam[0])
    lam, V, W, sel, g, m = _sector_eig(fr, MAIN_SECTOR, r, 3)
    gap, mx = min(gap, g), max(mx, m)
    lam_ns = np.array(lam_ns)
    if np.any(lam_ns.imag != 0) or abs(lam_ns[0] - lam_ns[1]) > 1e-8 * max(1.0, abs(lam_ns[0])):
        raise BranchError("transverse branches are not a real double eigenvalue")
    eigs["NS"] = complex(lam_ns.real.mean())
    projs["NS"] = P_ns
    heat = int(np.argmin(np.abs(lam.imag)))
    others = [i for i in range(3) if i != heat]
    if lam[heat].imag != 0 or any(lam[i].imag == 0 for i in others):
        raise BranchError(f"acoustic pair not separated from heat at r={r:.3g}")
    plus = others[0] if lam[others[0]].imag > 0 else others[1]
    minus = others[1] if plus == others[0] else others[0]
    for name, i in (("heat", heat), ("wave+", plus), ("wave-", minus)):
        P = np.zeros((dim, dim), complex)
        P[np.ix_(sel, sel)] = _dyad(V[:, i], W[:, i])
        eigs[name] = complex(lam[i])
        projs[name] = P
    # back from the real form: P = D P_real D^{-1}
    for name in projs:
        projs[name] = D[:, None] * projs[name] * D.conj()[None, :]
    return ModeBranches(np.array([r, 0.0, 0.0]), eigs, projs, gap, mx)


def _zero_branches(backend: CollisionBackend, direction: np.ndarray, frame: bool = False) -> ModeBranches:
    P0 = explicit_projectors(backend, direction, c=acoustic_speed(backend))
    eigs = {name: 0j for name in BRANCHES}
    fr = _frame(backend)
    return ModeBranches(np.zeros(3), eigs, {n: P0[n].astype(complex) for n in BRANCHES},
                        fr.lambda2, 0.0)


def branches(backend: CollisionBackend, k) -> ModeBranches:
    """Branches of ``Lambda^1(k) = L - i v.k`` with lab-frame projectors.

    At ``k = 0`` the individual projectors are the leading-order ones along e1.
    """
    k = np.asarray(k, dtype=float)
    r = float(np.linalg.norm(k))
    if r == 0:
        return _zero_branches(backend, np.array([1.0, 0.0, 0.0]))
    fb = frame_branches(backend, r)
    R = _frame(backend).rotation(k)
    projs = {n: R @ P @ R.T for n, P in fb.projectors.items()}
    return ModeBranches(k, fb.eigenvalues, projs, fb.gap, fb.max_real)


def branch_projector(backend: CollisionBackend, k, name: str) -> np.ndarray:
    return branches(backend, k).projectors[name]


# -- explicit leading-order projectors ------------------------------------------

def acoustic_speed(backend: CollisionBackend) -> float:
    """Speed of sound of the linearized Euler block; ``sqrt(5/3)`` for every backend."""
    return sqrt(5.0 / 3.0)


def explicit_projectors(backend: CollisionBackend, direction, c: float | None = None) -> dict:
    """Leading-order branch projectors ``P0_star(omega)`` in closed form.

    NS: orthogonal projection on ``(v - (v.omega) omega).e mu^{1/2}``;
    heat: ``(2/5) |h><h|`` with ``h = (|v|^2 - 5)/2 mu^{1/2}``;
    wave+-: ``(3/10) |w><w|`` with ``w = (1 -+ c omega.v + (|v|^2-3)/3) mu^{1/2}``.
    The acoustic sign pairing follows from ``Im lambda_wave+ > 0``.
    """
    basis = backend.basis
    c = acoustic_speed(backend) if c is None else c
    w = np.asarray(direction, dtype=float)
    w = w / np.linalg.norm(w)
    cols = basis.hydro_columns  # lifts (rho, u, theta)
    vcols = cols[:, 1:4]
    T = np.eye(3) - np.outer(w, w)
    E, _, _ = np.linalg.svd(T)
    trans = vcols @ E[:, :2]
    out = {"NS": trans @ trans.T}
    h = cols[:, 4] - cols[:, 0]  # (|v|^2-3)/2 - 1
    out["heat"] = 0.4 * np.outer(h, h)
    iso = cols[:, 0] + (2.0 / 3.0) * cols[:, 4]  # 1 + (|v|^2-3)/3
    for name, sign in (("wave+", -1.0), ("wave-", 1.0)):
        prof = iso + sign * c * (vcols @ w)
        out[name] = 0.3 * np.outer(prof, prof)
    return out


def first_order_projector(backend: CollisionBackend, direction, name: str) -> np.ndarray:
    """``P1_star(omega)`` restricted to microscopic inputs: ``i P0_star (omega.v) L^{-1} P0^perp``."""
    w = np.asarray(direction, dtype=float)
    w = w / np.linalg.norm(w)
    Linv = _frame(backend).L_inv_perp
    P0s = explicit_projectors(backend, w)[name]
    return 1j * P0s @ transport_matrix(backend, w) @ Linv


# -- branch scans -------------------------------------------------------------

@dataclass
class BranchSpectrum:
    radii: np.ndarray
    directions: np.ndarray
    eigenvalues: dict  # name -> array over radii
    gaps: np.ndarray
    max_real: np.ndarray
    projectors: dict = field(default_factory=dict)  # (dir index, radius index) -> ModeBranches

    def rows(self):
        """Flat rows ``(|k|, direction index, branch, Re, Im)``."""
        for d in range(len(self.directions)):
            for i, r in enumerate(self.radii):
                for name in BRANCHES:
                    lam = self.eigenvalues[name][i]
                    yield r, d, name, lam.real, lam.imag


def eigen_branches(backend: CollisionBackend, radii, directions=None, keep_projectors: bool = False) -> BranchSpectrum:
    """Eigenvalue branches along each direction at the given radii.

    Radii are swept in increasing order; the hydrodynamic sector eigenvectors
    are selected by overlap with the collision invariants and checked for
    continuity with the previous radius.
    """
    radii = np.sort(np.asarray(radii, dtype=float))
    directions = np.atleast_2d(np.array([[1.0, 0.0, 0.0]] if directions is None else directions, dtype=float))
    eig = {n: np.zeros(len(radii), complex) for n in BRANCHES}
    gaps = np.zeros(len(radii))
    mxr = np.zeros(len(radii))
    projs = {}
    prev = None
    for i, r in enumerate(radii):
        fb = frame_branches(backend, r)
        if prev is not None and r > 0:
            for n in BRANCHES:
                step = np.linalg.norm(fb.projectors[n] - prev.projectors[n], 2)
                if step > 0.5:
                    raise BranchError(f"discontinuous {n} branch between radii at r={r:.3g}")
        prev = fb
        for n in BRANCHES:
            eig[n][i] = fb.eigenvalues[n]
        gaps[i] = fb.gap
        mxr[i] = fb.max_real
        if keep_projectors:
            for d, w in enumerate(directions):
                projs[(d, i)] = branches(backend, r * w / np.linalg.norm(w))
    return BranchSpectrum(radii, directions, eig, gaps, mxr, projs)


@dataclass(frozen=True)
class TransportFit:
    nu_NS: float
    nu_heat: float
    nu_wave: float
    c: float
    remainder_ok: bool
    max_remainder_ratio: float


def fit_transport_coefficients(spectrum: BranchSpectrum) -> TransportFit:
    """Fit ``lambda = +-i c r - nu r^2 + O(r^3)`` on the sampled radii."""
    r = spectrum.radii
    mask = r > 0
    r = r[mask]
    if r.size < 6:
        raise BranchError("need at least 6 nonzero radii for the transport fit")
    A = np.column_stack([r**2, r**4])

    def quad_coef(y):
        return float(np.linalg.lstsq(A, y, rcond=None)[0][0])

    ev = {n: spectrum.eigenvalues[n][mask] for n in BRANCHES}
    nu_ns = quad_coef(-ev["NS"].real)
    nu_heat = quad_coef(-ev["heat"].real)
    nu_wave = quad_coef(-ev["wave+"].real)
    B = np.column_stack([np.ones_like(r), r**2])
    c = float(np.linalg.lstsq(B, ev["wave+"].imag / r, rcond=None)[0][0])
    ratio = 0.0
    for n, nu, cc in (("NS", nu_ns, 0.0), ("heat", nu_heat, 0.0),
                      ("wave+", nu_wave, c), ("wave-", nu_wave, -c)):
        gamma = ev[n] - (1j * cc * r - nu * r**2)
        ratio = max(ratio, float(np.max(np.abs(gamma) / (0.5 * nu * r**2))))
    return TransportFit(nu_ns, nu_heat, nu_wave, c, ratio <= 1.0, ratio)


@dataclass(frozen=True, eq=False)
class ProjectorExpansion:
    direction: np.ndarray
    P0: dict
    P1: dict
    P2: dict
    residual: float


def expand_projectors(backend: CollisionBackend, radii, direction=(1.0, 0.0, 0.0)) -> ProjectorExpansion:
    """Fit ``P_star(r omega) = P0 + r P1 + r^2 P2 + ...`` along one direction.

    Each branch projector is analytic in the signed radius; the value at
    ``-r`` is the projector at ``-omega`` with the acoustic labels swapped.
    Sampling both signs and fitting a quartic cancels the leading odd/even
    contamination of the low-order coefficients; ``residual`` is the misfit
    of the plain quadratic model.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size < 3 or np.any(radii <= 0):
        raise BranchError("need at least 3 positive radii")
    w = np.asarray(direction, dtype=float)
    w = w / np.linalg.norm(w)
    swap = {"NS": "NS", "heat": "heat", "wave+": "wave-", "wave-": "wave+"}
    signed, samples = [], []
    for r in radii:
        samples.append(branches(backend, r * w).projectors)
        signed.append(r)
        neg = branches(backend, -r * w).projectors
        samples.append({n: neg[swap[n]] for n in BRANCHES})
        signed.append(-r)
    signed = np.array(signed)
    A = np.vander(signed, 5, increasing=True)
    P0, P1, P2 = {}, {}, {}
    resid = 0.0
    dim = backend.dim
    for n in BRANCHES:
        Y = np.stack([s[n].ravel() for s in samples])
        coef = np.linalg.lstsq(A, Y, rcond=None)[0]
        quad = np.linalg.lstsq(A[:, :3], Y, rcond=None)[0]
        resid = max(resid, float(np.max(np.abs(A[:, :3] @ quad - Y))))
        P0[n], P1[n], P2[n] = (coef[j].reshape(dim, dim) for j in range(3))
    return ProjectorExpansion(w, P0, P1, P2, resid)


def lattice_directions() -> np.ndarray:
    """The 26 nonzero vectors of ``{-1, 0, 1}^3``, normalized."""
    g = np.array([(a, b, c) for a in (-1, 0, 1) for b in (-1, 0, 1) for c in (-1, 0, 1)
                  if (a, b, c) != (0, 0, 0)], dtype=float)
    return g / np.linalg.norm(g, axis=1)[:, None]


@dataclass(frozen=True)
class KappaReport:
    kappa: float
    largest_certified: float
    lambda2: float
    scanned: tuple


def determine_kappa(backend: CollisionBackend, radii=None, fallback: float = 0.1) -> KappaReport:
    """Largest radius keeping a ``lambda2/4`` gap and a ``1e-3`` quadratic-expansion residual, halved."""
    radii = np.geomspace(0.005, 1.5, 60) if radii is None else np.asarray(radii, dtype=float)
    lam2 = coercivity_constant(backend)
    best = 0.0
    scanned = []
    for r in radii:
        try:
            fb = frame_branches(backend, r)
            sub = r * np.array([0.25, 0.5, 0.75, 1.0])
            res = expand_projectors(backend, sub).residual
        except BranchError:
            scanned.append((float(r), np.nan, np.nan))
            break
        scanned.append((float(r), fb.gap, res))
        if fb.gap >= lam2 / 4 and res <= 1e-3:
            best = float(r)
        else:
            break
    kappa = best / 2 if best > 0 else fallback
    return KappaReport(kappa, best, lam2, tuple(scanned))
