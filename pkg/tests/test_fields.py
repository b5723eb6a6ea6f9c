import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hydrolimit.fields import Grid, sobolev_norm


def test_grid_layout():
    g = Grid(3, 2)
    assert g.side == 7 and g.n_modes == 49
    assert np.all(g.wavevectors[g.zero] == 0)
    assert g.index((1, -2)) == g.index((1, -2, 0))
    assert np.all(g.wavevectors[g.negate] == -g.wavevectors)
    with pytest.raises(ValueError):
        Grid(3, 1)
    with pytest.raises(ValueError):
        Grid(0, 2)


def test_transform_round_trip(rng):
    g = Grid(4, 2)
    c = rng.standard_normal((g.n_modes, 3)) + 1j * rng.standard_normal((g.n_modes, 3))
    assert np.allclose(g.from_physical(g.to_physical(c)), c, atol=1e-12)


@pytest.mark.parametrize("d_x", [2, 3])
def test_fft_convolution_matches_direct_sum(rng, d_x):
    g = Grid(3 if d_x == 2 else 2, d_x)
    a = rng.standard_normal(g.n_modes) + 1j * rng.standard_normal(g.n_modes)
    b = rng.standard_normal(g.n_modes) + 1j * rng.standard_normal(g.n_modes)
    assert np.allclose(g.convolve(a, b), g.convolve_direct(a, b), atol=1e-10)


def test_convolution_with_delta_is_identity(rng):
    g = Grid(4, 2)
    a = rng.standard_normal(g.n_modes)
    delta = np.zeros(g.n_modes)
    delta[g.zero] = 1.0
    assert np.allclose(g.convolve(a, delta), a, atol=1e-12)


def test_realify_gives_real_field(rng):
    g = Grid(3, 2)
    c = g.realify(rng.standard_normal(g.n_modes) + 1j * rng.standard_normal(g.n_modes))
    assert g.is_real(c)
    assert np.allclose(g.to_physical(c).imag, 0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1, 3), st.floats(0.1, 10))
def test_sobolev_norm_homogeneous(m, scale):
    g = Grid(2, 2)
    c = np.arange(g.n_modes, dtype=float)
    assert sobolev_norm(g, scale * c, m) == pytest.approx(scale * sobolev_norm(g, c, m), rel=1e-12)


def test_sobolev_norm_single_mode():
    g = Grid(3, 2)
    c = np.zeros((g.n_modes, 2))
    c[g.index((1, 2)), 0] = 2.0
    assert sobolev_norm(g, c, 1.5) == pytest.approx(2.0 * 6.0**0.75)
