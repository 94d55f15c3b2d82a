import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from beltrami_waves.errors import GridError
from beltrami_waves.grid import HorizontalGrid, VerticalGrid

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


# --- 水平格子 ---

def test_fft_roundtrip(grid, rng):
    f = rng.standard_normal(grid.shape)
    assert_allclose(grid.fft_inverse(grid.fft_forward(f)), f, atol=1e-13)


def test_forward_normalisation(grid):
    # f = sum f^_k e^{ik.x} なので cos(x) の係数は 1/2
    fh = grid.fft_forward(grid.mode(1, 0))
    assert fh[1, 0] == pytest.approx(0.5)
    assert fh[0, 0] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("m, n", [(1, 0), (0, 2), (3, -2), (-5, 4)])
def test_derivatives_of_single_mode(grid, m, n):
    f = grid.mode(m, n)
    k1 = 2.0 * np.pi * m / grid.Lx
    k3 = 2.0 * np.pi * n / grid.Lz
    s = np.sin(k1 * grid.X + k3 * grid.Z)
    assert_allclose(grid.deriv_x(f), -k1 * s, atol=1e-12)
    assert_allclose(grid.deriv_z(f), -k3 * s, atol=1e-12)
    assert_allclose(grid.laplacian(f), -(k1 ** 2 + k3 ** 2) * f, atol=1e-11)


def test_nyquist_has_zero_wavenumber(grid):
    assert np.all(grid.k1[grid.Nx // 2, :] == 0.0)
    assert np.all(grid.k3[:, -1] == 0.0)
    assert grid.zero_modes[0, 0]


def test_nyquist_rows_are_zero_modes(grid):
    assert np.all(grid.nyquist_modes[grid.Nx // 2, :])
    assert np.all(grid.nyquist_modes[:, -1])
    assert np.all(grid.zero_modes[grid.nyquist_modes])
    assert not grid.zero_modes[1, 1]
    assert np.all(grid.inv_laplacian_symbol[grid.nyquist_modes] == 0.0)


def test_integrate_and_mean(grid):
    assert grid.integrate(np.ones(grid.shape)) == pytest.approx(grid.area)
    assert grid.integrate(grid.mode(2, 1)) == pytest.approx(0.0, abs=1e-12)
    assert grid.mean(3.0 + grid.mode(1, 1)) == pytest.approx(3.0)


def test_parseval(grid, rng):
    f = grid.random_field(rng, max_mode=4)
    assert grid.sobolev_norm(f, 0.0) == pytest.approx(grid.l2_norm(f), rel=1e-12)


def test_sobolev_norm_of_single_mode(grid):
    f = grid.mode(3, 4)
    # |k|^2 = 25
    expected = np.sqrt(26.0) * grid.l2_norm(f)
    assert grid.sobolev_norm(f, 1.0) == pytest.approx(expected, rel=1e-12)


def test_sobolev_index_out_of_range(grid):
    with pytest.raises(GridError):
        grid.sobolev_norm(np.zeros(grid.shape), 5.0)


def test_shape_mismatch(grid):
    with pytest.raises(GridError):
        grid.fft_forward(np.zeros((8, 8)))


@pytest.mark.parametrize("Nx, Nz, L", [(15, 16, 1.0), (16, 6, 1.0), (16, 16, 0.0)])
def test_invalid_horizontal_grid(Nx, Nz, L):
    with pytest.raises(GridError):
        HorizontalGrid(Nx, Nz, L, 1.0)


def test_random_field_is_band_limited(grid, rng):
    f = grid.random_field(rng, max_mode=2, leading=(2,))
    fh = grid.fft_forward(f)
    outside = (np.abs(grid.m) > 2) | (np.abs(grid.n) > 2)
    assert np.max(np.abs(fh[..., outside])) < 1e-14
    assert_allclose(grid.mean(f), 0.0, atol=1e-15)


def test_dealias_removes_upper_third(grid):
    f = grid.mode(7, 0) + grid.mode(1, 1)
    assert_allclose(grid.dealias(f), grid.mode(1, 1), atol=1e-13)


@given(v=arrays(float, (2, 8, 8), elements=finite), w=arrays(float, (2, 8, 8), elements=finite))
@settings(max_examples=50, deadline=None)
def test_perp_preserves_dot_product(v, w):
    lhs = np.sum(HorizontalGrid.perp(v) * HorizontalGrid.perp(w), axis=0)
    assert_allclose(lhs, np.sum(v * w, axis=0), rtol=1e-12, atol=1e-9)


@given(v=arrays(float, (2, 8, 8), elements=finite))
@settings(max_examples=50, deadline=None)
def test_perp_is_a_quarter_turn(v):
    assert_allclose(HorizontalGrid.perp(HorizontalGrid.perp(v)), -v)
    assert_allclose(np.sum(HorizontalGrid.perp(v) * v, axis=0), 0.0, atol=1e-9)


def test_grad_and_perp_grad_are_orthogonal(grid, rng):
    a = grid.random_field(rng)
    b = grid.random_field(rng)
    value = grid.inner(grid.grad_h(a), grid.perp_grad(b))
    assert abs(value) < 1e-12 * grid.l2_norm(grid.grad_h(a)) * grid.l2_norm(grid.grad_h(b))


# --- 鉛直格子 ---

def test_vertical_nodes(vgrid):
    assert vgrid.y[0] == -1.0
    assert vgrid.y[-1] == 0.0
    assert np.all(np.diff(vgrid.y) > 0)


def test_chebyshev_derivative_is_exact_for_polynomials(vgrid):
    y = vgrid.y
    f = (y ** 3 - 2.0 * y)[:, None, None]
    assert_allclose(vgrid.dy(f)[:, 0, 0], 3.0 * y ** 2 - 2.0, atol=1e-11)
    assert_allclose(vgrid.dyy(f)[:, 0, 0], 6.0 * y, atol=1e-9)


def test_clenshaw_curtis(vgrid):
    y = vgrid.y
    assert vgrid.integrate((y ** 2)[:, None, None])[0, 0] == pytest.approx(1.0 / 3.0, rel=1e-13)
    assert vgrid.integrate(np.cos(y)[:, None, None])[0, 0] == pytest.approx(np.sin(1.0), rel=1e-12)


def test_cumulative_integration(vgrid):
    y = vgrid.y
    assert_allclose(vgrid.cumulative @ np.ones(vgrid.Ny), y + 1.0, atol=1e-13)
    assert_allclose(vgrid.cumulative @ (2.0 * y), y ** 2 - 1.0, atol=1e-13)


@pytest.mark.parametrize("Ny, h", [(3, 1.0), (65, 1.0), (8, 0.0)])
def test_invalid_vertical_grid(Ny, h):
    with pytest.raises(GridError):
        VerticalGrid(Ny, h)
