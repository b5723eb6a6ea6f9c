import numpy as np
import pytest

from hydrolimit import collision as col
from hydrolimit.collision import (
    BackendError, bgk_backend, check_conservation, coercivity_constant, gamma_sym, kernel_dimension,
    solve_flux_functions, synthetic_gamma, viscosities,
)


def test_bgk_spectrum(bgk):
    eig = np.sort(np.linalg.eigvalsh(bgk.L))
    assert np.allclose(eig[-5:], 0, atol=1e-12)
    assert np.allclose(eig[:-5], -1, atol=1e-12)
    assert kernel_dimension(bgk) == 5


def test_collision_invariants_in_kernel(bgk, maxwell):
    for backend in (bgk, maxwell):
        assert np.allclose(backend.L @ backend.basis.kernel_basis, 0, atol=1e-10)
        assert np.allclose(backend.L, backend.L.T, atol=1e-10)


def test_maxwell_negative_off_kernel(maxwell):
    eig = np.linalg.eigvalsh(maxwell.L)
    assert kernel_dimension(maxwell) == 5
    assert np.all(eig[np.abs(eig) > 1e-10] < 0)


def test_gamma_micro_input_vanishes(bgk, rng):
    f = bgk.basis.P0_perp @ rng.standard_normal(bgk.dim)
    assert np.allclose(gamma_sym(bgk, f, f), 0, atol=1e-14)


def test_gamma_sym_symmetric_and_diagonal(bgk, rng):
    f1, f2 = rng.standard_normal((2, bgk.dim))
    assert np.array_equal(gamma_sym(bgk, f1, f2), gamma_sym(bgk, f2, f1))
    assert np.allclose(gamma_sym(bgk, f1, f1), bgk.gamma(f1, f1), atol=1e-14)


@pytest.mark.parametrize("kind", ["bgk", "maxwell", "synthetic"])
def test_gamma_has_no_hydro_part(kind, bgk, maxwell, rng):
    backend = {"bgk": bgk, "maxwell": maxwell,
               "synthetic": bgk.with_gamma(synthetic_gamma(bgk.basis, seed=3), "synthetic")}[kind]
    f1 = rng.standard_normal((100, backend.dim))
    f2 = rng.standard_normal((100, backend.dim))
    out = gamma_sym(backend, f1, f2)
    assert np.max(np.abs(out @ backend.basis.P0)) <= 1e-12


def test_conservation_report(bgk):
    rep = check_conservation(bgk, 1000, seed=0, threshold=1e-12)
    assert rep.passed and rep.samples == 1000
    assert check_conservation(bgk, 0).max_residual == 0.0


def test_bilinear_norm_bound(bgk, rng):
    C = col.bilinear_norm(bgk.gamma)
    assert C > 0
    for _ in range(20):
        f1, f2 = rng.standard_normal((2, bgk.dim))
        lhs = np.linalg.norm(gamma_sym(bgk, f1, f2))
        assert lhs <= C * np.linalg.norm(f1) * np.linalg.norm(f2) * (1 + 1e-6)


def test_bgk_flux_functions_explicit(bgk):
    basis = bgk.basis
    flux = solve_flux_functions(bgk)
    v = basis.nodes
    v2 = np.sum(v**2, axis=1)
    for j in range(3):
        for k in range(3):
            expect = -basis.project(v2 / 3 * (j == k) - v[:, j] * v[:, k])
            assert np.allclose(flux.Phi[j, k], expect, atol=1e-10)
            assert np.allclose(basis.kernel_basis.T @ flux.Phi[j, k], 0, atol=1e-10)
    even = basis.indices.sum(axis=1) % 2 == 0
    assert np.allclose(flux.Psi[:, even], 0, atol=1e-12)


@pytest.mark.parametrize("nu, expect", [(1.0, 1.0), (2.0, 0.5)])
def test_bgk_viscosities(basis6, nu, expect):
    ns, heat = viscosities(bgk_backend(basis6, nu))
    assert ns == pytest.approx(expect, rel=1e-10)
    assert heat == pytest.approx(expect, rel=1e-10)


@pytest.mark.parametrize("nu", [1.0, 3.0])
def test_bgk_coercivity(basis6, nu):
    assert coercivity_constant(bgk_backend(basis6, nu)) == pytest.approx(nu, rel=1e-10)


def test_maxwell_coercivity_is_smallest_burnett(maxwell):
    eig = np.linalg.eigvalsh(maxwell.L)
    smallest = np.min(np.abs(eig[np.abs(eig) > 1e-10]))
    assert coercivity_constant(maxwell) == pytest.approx(smallest, rel=1e-8)


def test_bgk_rejects_nonpositive_rate(basis6):
    with pytest.raises((ValueError, BackendError)):
        bgk_backend(basis6, 0.0)
