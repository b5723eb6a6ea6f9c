import numpy as np
import pytest

from hydrolimit.collision import viscosities
from hydrolimit.fields import Grid
from hydrolimit.semigroup import (
    CoarseGridError, CutoffProfile, chi, check_grid, duhamel_from_source, duhamel_psi, nsf_flow,
    nsf_propagator, propagate, propagator, psi_parts, scalar_duhamel, semigroup_parts,
    sharp_decay_rate, step_operators,
)


@pytest.fixture(scope="module")
def grid2():
    return Grid(2, 2)


@pytest.fixture(scope="module")
def small_traj(bgk, grid2):
    rng = np.random.default_rng(7)
    n_t = 11
    f = 0.1 * (rng.standard_normal((n_t, grid2.n_modes, bgk.dim))
               + 1j * rng.standard_normal((n_t, grid2.n_modes, bgk.dim)))
    f *= np.exp(-0.3 * bgk.basis.indices.sum(axis=1))
    return f, np.linspace(0.0, 0.1, n_t)


def test_cutoff_profile():
    assert chi(0.0) == 1.0 and chi(0.5) == 1.0
    assert chi(1.0) == 0.0 and chi(3.0) == 0.0
    assert 0 < chi(0.75) < 1
    assert CutoffProfile(0.2)(0.05) == 1.0


def test_propagator_identity_and_kernel(bgk):
    assert np.allclose(propagator(bgk, 0.3, (1, 2, 0), 0.0), np.eye(bgk.dim))
    f = bgk.basis.kernel_basis @ np.arange(1.0, 6.0)
    assert np.allclose(propagate(bgk, 0.1, (0, 0, 0), 5.0, f), f, atol=1e-12)
    with pytest.raises(ValueError):
        propagator(bgk, 0.1, (0, 0, 0), -1.0)


def test_scaling_identity_lattice(bgk):
    worst = 0.0
    for eps in (1.0, 0.5, 0.1):
        for k in ((1, 0, 0), (0, 2, -1), (3, 1, 1)):
            for t in (0.01, 0.2):
                a = propagator(bgk, eps, k, t)
                b = propagator(bgk, 1.0, eps * np.array(k, float), t / eps**2)
                worst = max(worst, np.abs(a - b).max())
    assert worst <= 1e-10


def test_step_operators_match_propagator(bgk):
    kv = np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 0.0], [-2.0, 1.0, 0.0]])
    ops = step_operators(bgk, 0.2, kv, 0.01)
    for i, k in enumerate(kv):
        assert np.allclose(ops.E[i], propagator(bgk, 0.2, k, 0.01), atol=1e-12)


def test_sharp_part_at_zero_mode_decays_like_bgk_rate(bgk):
    dec = sharp_decay_rate(bgk, 1.0, [(0, 0, 0)], kappa=0.1)
    assert dec.rate == pytest.approx(1.0, rel=1e-6)
    sp = semigroup_parts(bgk, 1.0, (0, 0, 0), 0.0, kappa=0.1)
    assert np.linalg.norm(sp.sharp, 2) <= 1 + np.linalg.norm(sp.flat, 2)


def test_sharp_decay_scales_with_eps(bgk):
    base = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 1.0], [2.0, 1.0, 0.0]])
    rates = []
    for eps in (0.2, 0.1):
        # eps k held fixed, so only the 1/eps^2 time scale changes
        rates.append(sharp_decay_rate(bgk, eps, base * (0.2 / eps), kappa=0.1).rate)
    assert rates[1] / rates[0] == pytest.approx(4.0, rel=0.05)


def test_semigroup_parts_consistent(bgk):
    nu = viscosities(bgk)
    sp = semigroup_parts(bgk, 0.1, (1, 0, 0), 0.05, kappa=0.2, nu=nu)
    assert np.allclose(sp.flat + sp.sharp, sp.full)
    assert np.allclose(sp.nsf + sp.wave + sp.remainder, sp.flat)
    assert np.allclose(nsf_propagator(bgk, (0, 0, 0), 1.0, nu), bgk.basis.P0)


def test_check_grid_refuses_coarse_steps():
    with pytest.raises(CoarseGridError, match="substeps"):
        check_grid(np.linspace(0, 1, 3), 0.1)
    with pytest.raises(CoarseGridError):
        check_grid(np.array([0.0, 0.01, 0.03]), 0.1)
    assert check_grid(np.linspace(0, 0.1, 11), 0.1) == pytest.approx(0.01)


def test_duhamel_zero_input(bgk, grid2, small_traj):
    f, t = small_traj
    out = duhamel_psi(bgk, 0.5, grid2, np.zeros_like(f), f, t)
    assert np.all(out == 0)


def test_duhamel_constant_source_closed_form(bgk):
    # k = 0, BGK: (1/eps) int_0^t e^{(t-s) L / eps^2} g ds = eps (1 - e^{-t/eps^2}) g on micro g
    eps, dt, n = 0.3, 0.01, 21
    ops = step_operators(bgk, eps, np.zeros((1, 3)), dt)
    g = bgk.basis.P0_perp @ np.random.default_rng(1).standard_normal(bgk.dim)
    src = np.broadcast_to(g, (n, 1, bgk.dim)).astype(complex)
    Y = duhamel_from_source(ops, src, 1.0 / eps)
    t = dt * np.arange(n)
    expect = eps * (1 - np.exp(-t / eps**2))[:, None] * g
    assert np.allclose(Y[:, 0], expect, atol=1e-12)


def test_scalar_duhamel_matches_matrix_recursion(bgk):
    eps, dt, n = 0.3, 0.01, 11
    ops = step_operators(bgk, eps, np.zeros((1, 3)), dt)
    src = np.random.default_rng(2).standard_normal((n, 1, bgk.dim)) @ bgk.basis.P0_perp
    Y = duhamel_from_source(ops, src, 1.0 / eps)
    Z = scalar_duhamel(np.array([-1.0 / eps**2]), dt, src, 1.0 / eps)
    assert np.allclose(Y, Z, atol=1e-12)


def test_duhamel_splitting_at_intermediate_time(bgk, grid2, small_traj):
    f, t = small_traj
    eps = 0.5
    dt = t[1] - t[0]
    ops = step_operators(bgk, eps, grid2.wavevectors, dt)
    full = duhamel_psi(bgk, eps, grid2, f, f, t, ops=ops)
    from hydrolimit.semigroup import gamma_trajectory
    src = gamma_trajectory(bgk, grid2, f, f)
    m = 4
    tail = duhamel_from_source(ops, src[m:], 1.0 / eps)
    carried = full[m]
    for j in range(len(t) - m):
        if j:
            carried = ops.step_linear(carried)
        assert np.max(np.abs(full[m + j] - carried - tail[j])) <= 1e-10


def test_psi_parts_telescope(bgk, grid2, small_traj):
    f, t = small_traj
    parts = psi_parts(bgk, 0.5, grid2, f, f, t, kappa=0.2)
    assert np.allclose(parts["flat"] + parts["sharp"], parts["total"], atol=1e-8)
    assert np.allclose(parts["nsf"] + parts["wave"] + parts["remainder"], parts["flat"], atol=1e-8)
    # Gamma has no hydrodynamic part, so the mean mode is all sharp
    z = grid2.zero
    assert np.allclose(parts["total"][:, z], parts["sharp"][:, z], atol=1e-12)


def test_nsf_flow_mean_mode_is_P0(bgk, grid2, rng):
    h0 = np.zeros((grid2.n_modes, bgk.dim))
    h0[grid2.zero] = rng.standard_normal(bgk.dim)
    out = nsf_flow(bgk, grid2, h0, [0.0, 1.0])
    assert np.allclose(out[:, grid2.zero], bgk.basis.P0 @ h0[grid2.zero])


def test_nsf_flow_on_wave_free_data_has_no_fast_oscillation(bgk):
    grid = Grid(2, 2)
    h0 = np.zeros((grid.n_modes, bgk.dim))
    i = grid.index((1, 0))
    h0[i] = bgk.basis.hydro_columns[:, 2]  # transverse velocity: pure NS mode
    t = np.linspace(0, 1, 65)
    out = nsf_flow(bgk, grid, h0, t)
    sig = out[:, i, 2].real
    assert np.all(np.diff(sig) < 0)
    assert np.allclose(sig, np.exp(-t) * h0[i, 2])
