"""Fixed points of ``x = x0 + L x + B(x, x)`` in a small ball."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

SAFETY = 1.2


class AdmissibilityError(ValueError):
    pass


class ContractionError(ArithmeticError):
    pass


@dataclass
class PicardProblem:
    x0: Any
    linear: Callable[[Any], Any]
    bilinear: Callable[[Any, Any], Any]
    norm: Callable[[Any], float]
    L_norm: float
    B_norm: float

    @property
    def radius(self) -> float:
        return (1 - self.L_norm) / (2 * self.B_norm) if self.B_norm > 0 else np.inf

    @property
    def data_bound(self) -> float:
        return (1 - self.L_norm) ** 2 / (4 * self.B_norm) if self.B_norm > 0 else np.inf

    def check(self) -> None:
        if not self.L_norm < 1:
            raise AdmissibilityError(f"||L|| = {self.L_norm:.4g} is not < 1")
        x0n = self.norm(self.x0)
        if not x0n < self.data_bound:
            raise AdmissibilityError(f"||x0|| = {x0n:.4g} not below (1-||L||)^2/(4||B||) = {self.data_bound:.4g}")


@dataclass
class PicardResult:
    x: Any
    iterations: int
    C0: float
    norm: float
    increments: list


def picard_solve(problem: PicardProblem, tol: float = 1e-12, start=None, max_iter: int = 10_000,
                 step: Callable[[Any], Any] | None = None) -> PicardResult:
    """Iterate from ``start`` (default 0) until the increment norm drops below ``tol``.

    ``step(x)`` may supply a fused evaluation of ``x0 + L x + B(x, x)``.
    """
    problem.check()
    x = 0 * problem.x0 if start is None else start
    step = step or (lambda y: problem.x0 + problem.linear(y) + problem.bilinear(y, y))
    incs = []
    for it in range(1, max_iter + 1):
        new = step(x)
        inc = problem.norm(new - x)
        incs.append(inc)
        x = new
        if inc <= tol:
            break
        if len(incs) >= 3 and incs[-1] >= incs[-2] >= incs[-3] and incs[-1] > tol:
            raise ContractionError(f"increments stopped shrinking at iteration {it}")
    else:
        raise ContractionError("no convergence within max_iter")
    xn = problem.norm(x)
    x0n = problem.norm(problem.x0)
    C0 = xn / x0n if x0n > 0 else 0.0
    return PicardResult(x, it, C0, xn, incs)


def estimate_linear_norm(apply: Callable[[Any], Any], norm: Callable[[Any], float], sample: Callable[[], Any],
                         iters: int = 8, restarts: int = 2) -> float:
    """Randomized power-iteration surrogate for ``||L||``, times the safety factor."""
    best = 0.0
    for _ in range(restarts):
        x = sample()
        nx = norm(x)
        if nx == 0:
            continue
        x = x / nx
        for _ in range(iters):
            y = apply(x)
            ny = norm(y)
            best = max(best, ny)
            if ny == 0:
                break
            x = y / ny
    return SAFETY * best


def estimate_bilinear_norm(apply: Callable[[Any, Any], Any], norm: Callable[[Any], float],
                           sample: Callable[[], Any], iters: int = 20, restarts: int = 4) -> float:
    """Alternating power iteration for ``sup ||B(x, y)||`` on unit pairs, times the safety factor."""
    best = 0.0
    for _ in range(restarts):
        x, y = sample(), sample()
        x, y = x / norm(x), y / norm(y)
        for _ in range(iters):
            z = apply(x, y)
            nz = norm(z)
            best = max(best, nz)
            x, y = y, z / nz if nz > 0 else y
    return SAFETY * best


def matrix_problem(L: np.ndarray, T: np.ndarray, x0: np.ndarray, L_norm: float | None = None,
                   B_norm: float | None = None, seed: int = 0) -> PicardProblem:
    """Euclidean problem with ``L`` a matrix and ``B(x, y)_i = T_ijk x_j y_k``."""
    rng = np.random.default_rng(seed)

    def B(x, y):
        return np.einsum("ijk,j,k->i", T, x, y)

    if L_norm is None:
        L_norm = float(np.linalg.norm(L, 2))
    if B_norm is None:
        B_norm = _bilinear_norm_euclid(T, rng)
    return PicardProblem(x0, lambda x: L @ x, B, lambda v: float(np.linalg.norm(v)), L_norm, B_norm)


def _bilinear_norm_euclid(T: np.ndarray, rng: np.random.Generator, restarts: int = 8, iters: int = 100) -> float:
    """``sup ||T(x, y)||`` by alternating top singular vectors, times the safety factor."""
    n = T.shape[1]
    best = 0.0
    for _ in range(restarts):
        y = rng.standard_normal(n)
        y /= np.linalg.norm(y)
        for _ in range(iters):
            _, s, vh = np.linalg.svd(np.einsum("ijk,k->ij", T, y))
            x = vh[0]
            _, s2, vh2 = np.linalg.svd(np.einsum("ijk,j->ik", T, x))
            y = vh2[0]
            best = max(best, s[0], s2[0])
    return SAFETY * best
