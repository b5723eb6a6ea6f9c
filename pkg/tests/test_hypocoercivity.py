import numpy as np
import pytest

from hydrolimit.hypocoercivity import (
    DELTA_LADDER, DeltaError, HypoForm, flow_decay, lattice_representatives, mode_lambda3, psi_functional,
    psi_matrix, tune_deltas, verify_coercivity, verify_semigroup_estimates,
)

DELTAS = (0.1, 0.0316, 0.01)


def test_psi_is_hermitian(basis6):
    W = psi_matrix(basis6, (1.0, -2.0, 0.5), DELTAS)
    assert np.allclose(W, W.conj().T, atol=1e-14)
    assert np.allclose(psi_matrix(basis6, (0, 0, 0), DELTAS), 0)


def test_psi_vanishes_without_moments(basis6, rng):
    # a degree-6 mode carries no hydrodynamic, heat-flux or stress moment
    f = np.zeros(basis6.dim)
    f[basis6.index(2, 2, 2)] = 1.0
    g = rng.standard_normal(basis6.dim)
    k = (1.0, 1.0, 0.0)
    assert psi_functional(basis6, f, f, k, DELTAS) == 0
    assert abs(psi_functional(basis6, f, g, k, DELTAS)) < 1e-14


def test_psi_real_on_diagonal(basis6, rng):
    f = rng.standard_normal(basis6.dim) + 1j * rng.standard_normal(basis6.dim)
    assert abs(psi_functional(basis6, f, f, (2.0, 0.0, 1.0), DELTAS).imag) < 1e-13


def test_equivalence_scales_with_eps(basis6):
    k = (3.0, 0.0, 0.0)
    a = HypoForm(basis6, DELTAS, 1.0).equivalence(k)
    b = HypoForm(basis6, DELTAS, 0.1).equivalence(k)
    assert b == pytest.approx(0.1 * a, rel=1e-10)
    assert a <= 0.5


def test_lattice_representatives():
    reps = lattice_representatives(2.0, 3)
    assert [int(k @ k) for k in reps] == [1, 2, 3, 4]
    assert all(k[2] == 0 for k in lattice_representatives(3.0, 2))


def test_exact_infimum_below_samples(bgk):
    rep = verify_coercivity(bgk, DELTAS, [1.0, 0.1], lattice_representatives(2.0), sample_count=200)
    assert rep.lambda3 > 0
    assert rep.lambda3 <= rep.lambda3_sampled
    assert rep.passed
    assert len(rep.per_mode) == 2 * (4 + 1)


def test_bad_deltas_rejected(bgk):
    with pytest.raises(DeltaError):
        verify_coercivity(bgk, (0.1, 1e-3, 3e-4), [1.0, 0.1], lattice_representatives(8.0), sample_count=10)


def test_tuned_deltas_small_box(bgk):
    scan = tune_deltas(bgk, (1.0, 0.1), kmax=2.0)
    d1, d2, d3 = scan.deltas
    assert d1 > d2 > d3 and all(d in DELTA_LADDER for d in scan.deltas)
    assert scan.lambda3 > 0 and scan.equivalence <= 0.5
    assert scan.lambda3 == max(r["lambda3"] for r in scan.table if r["equivalence"] <= 0.5)


def test_micro_lambda_scales_with_rate(basis6):
    from hydrolimit.collision import bgk_backend

    form = HypoForm(basis6, DELTAS, 0.1)
    k = (1.0, 0.0, 0.0)
    lams = [mode_lambda3(bgk_backend(basis6, nu), form, k, micro_only=True) for nu in (1.0, 2.0)]
    assert lams[1] / lams[0] == pytest.approx(2.0, rel=0.01)


def test_modified_norm_decays(bgk, rng):
    form = HypoForm(bgk.basis, DELTAS, 0.5)
    f = rng.standard_normal(bgk.dim) + 1j * rng.standard_normal(bgk.dim)
    for k in ((1.0, 0.0, 0.0), (0.0, 2.0, 1.0), (0.0, 0.0, 0.0)):
        norms = flow_decay(bgk, form, k, f)
        assert np.all(np.diff(norms) <= 1e-12)


def test_homogeneous_estimate_uniform_in_eps(bgk, rng):
    f = rng.standard_normal(bgk.dim)
    vals = [verify_semigroup_estimates(bgk, eps, (1.0, 1.0, 0.0), f=f, n_times=4001).homogeneous
            for eps in (0.5, 0.1, 0.05)]
    assert max(vals) <= 1.5 * min(vals)


def test_micro_part_weighted_l2_at_zero_mode(bgk, rng):
    # BGK at k = 0: P_perp U f = e^{-t/eps^2} f, so eps^-1 |.|_{L2} -> 1/sqrt(2)
    f = bgk.basis.P0_perp @ rng.standard_normal(bgk.dim)
    est = verify_semigroup_estimates(bgk, 0.1, (0, 0, 0), f=f, n_times=20001)
    assert est.micro_weighted == pytest.approx(1 / np.sqrt(2), rel=1e-3)


def test_source_estimate_uniform_and_raw_gains_eps(bgk, rng):
    S = rng.standard_normal(bgk.dim)
    ests = [verify_semigroup_estimates(bgk, eps, (1.0, 0.0, 0.0), S=S, n_times=4001) for eps in (0.2, 0.1, 0.05)]
    src = [e.source for e in ests]
    assert max(src) <= 2 * min(src)
    raw = [e.source_raw for e in ests]
    assert raw[0] / raw[1] == pytest.approx(2.0, rel=0.15)
    assert raw[1] / raw[2] == pytest.approx(2.0, rel=0.15)
