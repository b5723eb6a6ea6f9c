"""Truncated Fourier grids on the torus and exact truncated convolution.

Modes are stored flat, in C order over the centered box ``|k_j| <= K`` of
dimension ``d_x``.  Wavevectors are always 3-vectors (missing coordinates
are zero) so that velocity-space operators see the physical ``v.k``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    K: int
    d_x: int = 2

    def __post_init__(self):
        if self.d_x not in (2, 3):
            raise ValueError("d_x must be 2 or 3")
        if self.K < 1:
            raise ValueError("K must be positive")

    @property
    def side(self) -> int:
        return 2 * self.K + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.d_x

    @property
    def n_modes(self) -> int:
        return self.side**self.d_x

    @cached_property
    def wavevectors(self) -> np.ndarray:
        r = np.arange(-self.K, self.K + 1)
        mesh = np.meshgrid(*([r] * self.d_x), indexing="ij")
        k = np.zeros((self.n_modes, 3))
        for j in range(self.d_x):
            k[:, j] = mesh[j].ravel()
        return k

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.linalg.norm(self.wavevectors, axis=1)

    @cached_property
    def bracket(self) -> np.ndarray:
        """``<k> = (1 + |k|^2)^{1/2}``."""
        return np.sqrt(1.0 + self.kmag**2)

    @cached_property
    def zero(self) -> int:
        return self.n_modes // 2

    @cached_property
    def negate(self) -> np.ndarray:
        """Permutation sending the flat index of ``k`` to that of ``-k``."""
        return np.arange(self.n_modes)[::-1]

    def index(self, k) -> int:
        k = np.asarray(k, dtype=int)[: self.d_x]
        return int(np.ravel_multi_index(tuple(k + self.K), self.shape))

    @cached_property
    def pad(self) -> int:
        """FFT size per axis with no aliasing into ``|k_j| <= K`` for quadratic products."""
        return 3 * self.K + 1

    @cached_property
    def _wrap(self) -> tuple[np.ndarray, ...]:
        r = np.arange(-self.K, self.K + 1) % self.pad
        mesh = np.meshgrid(*([r] * self.d_x), indexing="ij")
        return tuple(m.ravel() for m in mesh)

    # -- transforms ----------------------------------------------------

    def to_physical(self, coeffs: np.ndarray) -> np.ndarray:
        """Values on the padded physical grid; ``coeffs`` has modes on axis 0."""
        coeffs = np.asarray(coeffs)
        trailing = coeffs.shape[1:]
        A = np.zeros((self.pad,) * self.d_x + trailing, dtype=complex)
        A[self._wrap] = coeffs
        axes = tuple(range(self.d_x))
        return np.fft.ifftn(A, axes=axes) * self.pad**self.d_x

    def from_physical(self, values: np.ndarray) -> np.ndarray:
        axes = tuple(range(self.d_x))
        A = np.fft.fftn(values, axes=axes) / self.pad**self.d_x
        return A[self._wrap]

    def convolve(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Truncated convolution ``c(k) = sum_{k'} a(k - k') b(k')`` over the box (elementwise in trailing axes)."""
        return self.from_physical(self.to_physical(a) * self.to_physical(b))

    def convolve_direct(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Same as ``convolve`` by explicit double sum; reference path for small ``K``."""
        a = np.asarray(a)
        b = np.asarray(b)
        k = self.wavevectors[:, : self.d_x].astype(int)
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=complex)
        lookup = {tuple(x): i for i, x in enumerate(k)}
        for i, kk in enumerate(k):
            acc = 0
            for j, kp in enumerate(k):
                m = lookup.get(tuple(kk - kp))
                if m is not None:
                    acc = acc + a[m] * b[j]
            out[i] = acc
        return out

    # -- Sobolev weights --------------------------------------------------

    def sobolev_weight(self, m: float) -> np.ndarray:
        return self.bracket**m

    def is_real(self, coeffs: np.ndarray, tol: float = 1e-12) -> bool:
        c = np.asarray(coeffs)
        return bool(np.max(np.abs(c[self.negate] - c.conj()), initial=0.0) <= tol * max(1.0, np.max(np.abs(c), initial=0.0)))

    def realify(self, coeffs: np.ndarray) -> np.ndarray:
        """Hermitian-symmetric part: ``(c(k) + conj c(-k)) / 2``."""
        c = np.asarray(coeffs)
        return 0.5 * (c + c[self.negate].conj())


def sobolev_norm(grid: Grid, coeffs: np.ndarray, m: float) -> float:
    """``H^m_x L^2`` norm of mode-major coefficients (velocity or component axes flattened)."""
    c = np.asarray(coeffs).reshape(grid.n_modes, -1)
    return float(np.sqrt(np.sum(grid.bracket ** (2 * m) * np.sum(np.abs(c) ** 2, axis=1))))
