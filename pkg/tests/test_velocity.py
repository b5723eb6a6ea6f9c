import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hydrolimit.velocity import (
    BasisError, build_basis, moment_M, moment_Theta, moments, multiply_by_v, norm_matrix,
    project_P0, surrogate_norms, weighted_norm,
)


def test_dimension_formula():
    assert build_basis(4).dim == 35
    assert build_basis(6).dim == 84


def test_low_degree_rejected():
    with pytest.raises(BasisError):
        build_basis(2)


def test_gram_is_identity(basis6):
    assert np.max(np.abs(basis6.gram() - np.eye(basis6.dim))) <= 1e-10


def test_moments_of_basic_profiles(basis6):
    cols = basis6.hydro_columns
    m = moments(basis6, cols[:, 0])
    assert m.rho == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(m.u, 0, atol=1e-12) and abs(m.theta) < 1e-12
    m = moments(basis6, cols[:, 1])
    assert np.allclose(m.u, [1, 0, 0], atol=1e-12) and abs(m.rho) < 1e-12
    m = moments(basis6, cols[:, 4])
    # (|v|^2-3)/2 mu^{1/2} carries temperature only, with theta normalized to 1
    assert m.theta == pytest.approx(1.0, abs=1e-12)
    assert abs(m.rho) < 1e-12


def test_P0_is_orthogonal_projector(basis6):
    P = basis6.P0
    assert np.allclose(P @ P, P, atol=1e-12)
    assert np.allclose(P, P.T, atol=1e-12)
    assert np.trace(P) == pytest.approx(5.0, abs=1e-10)
    assert np.allclose(basis6.P0_perp @ P, 0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=5, max_size=5))
def test_P0_fixes_hydrodynamic_lifts(basis6, coeffs):
    f = basis6.hydro_columns @ np.array(coeffs)
    assert np.allclose(project_P0(basis6, f), f, atol=1e-11)


def test_P0_annihilates_micro(basis6, rng):
    f = basis6.P0_perp @ rng.standard_normal(basis6.dim)
    assert np.allclose(project_P0(basis6, f), 0, atol=1e-12)


def test_multiplication_symmetric(basis6):
    for j in range(3):
        V = basis6.multiplication[j]
        assert np.allclose(V, V.T, atol=1e-12)


def test_heat_flux_vanishes_on_hydro(basis6):
    for c in basis6.hydro_columns.T:
        assert np.allclose(moment_M(basis6, c), 0, atol=1e-12)


def test_stress_of_hydro_lifts(basis6):
    cols = basis6.hydro_columns
    for j in range(4):
        assert np.allclose(moment_Theta(basis6, cols[:, j]), 0, atol=1e-12)
    # E[(v x v - Id)(|v|^2 - 3)/2] = Id
    assert np.allclose(moment_Theta(basis6, cols[:, 4]), np.eye(3), atol=1e-12)


def test_stress_moment_of_traceless_profile(basis6):
    v = basis6.nodes
    f = basis6.project(v[:, 0] * v[:, 1])
    Th = moment_Theta(basis6, f)
    assert Th.shape == (3, 3)
    assert Th[0, 1] == pytest.approx(1.0, abs=1e-10) and Th[1, 0] == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(np.diag(Th), 0, atol=1e-12)


def test_v_times_phi0_is_velocity_lift(basis6):
    phi0 = basis6.hydro_columns[:, 0]
    assert np.allclose(multiply_by_v(basis6, phi0, 2), basis6.hydro_columns[:, 3], atol=1e-12)


def test_norm_matrices(basis6, rng):
    assert np.allclose(norm_matrix(basis6, 0), np.eye(basis6.dim))
    G1 = norm_matrix(basis6, 1)
    assert np.allclose(G1, G1.T)
    assert np.min(np.linalg.eigvalsh(G1)) > 0
    f = rng.standard_normal(basis6.dim)
    assert weighted_norm(basis6, f, 1) >= weighted_norm(basis6, f, 0) - 1e-12
    with pytest.raises(ValueError):
        norm_matrix(basis6, 2)


def test_surrogate_norms_ordered(basis6, rng):
    f = rng.standard_normal(basis6.dim) * 0.3 ** basis6.indices.sum(axis=1)
    lower, upper = surrogate_norms(basis6, f, 0.5)
    assert 0 < upper and lower > 0
    with pytest.raises(ValueError):
        surrogate_norms(basis6, f, 1.0)
