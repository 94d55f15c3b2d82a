import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from beltrami_waves.errors import NonZeroMean
from beltrami_waves.grid import HorizontalGrid
from beltrami_waves.hodge import (grad_inv_div, grad_part, hodge_decompose, inv_laplacian,
                                  perp_grad_inv_div, perp_grad_part, reconstruct)

GRID = HorizontalGrid(16, 16, 2.0 * np.pi, 3.0 * np.pi)
seeds = st.integers(0, 2 ** 32 - 1)


def test_inverse_laplacian_of_single_mode():
    f = GRID.mode(2, 1)
    k2 = (2.0 * np.pi * 2 / GRID.Lx) ** 2 + (2.0 * np.pi / GRID.Lz) ** 2
    assert_allclose(inv_laplacian(f, GRID), -f / k2, atol=1e-13)


def test_inverse_laplacian_rejects_mean():
    with pytest.raises(NonZeroMean):
        inv_laplacian(1.0 + GRID.mode(1, 0), GRID)


def test_inverse_laplacian_drops_mean_when_not_strict():
    f = GRID.mode(1, 1)
    assert_allclose(inv_laplacian(2.0 + f, GRID, strict=False), inv_laplacian(f, GRID), atol=1e-13)


@given(seed=seeds)
@settings(max_examples=25, deadline=None)
def test_decomposition_reconstructs(seed):
    rng = np.random.default_rng(seed)
    f = GRID.random_field(rng, leading=(2,), mean_zero=False)
    parts = hodge_decompose(f, GRID)
    assert_allclose(reconstruct(parts, GRID), f, atol=1e-12)
    assert_allclose(parts.mean, GRID.mean(f), atol=1e-14)
    assert abs(GRID.mean(parts.phi)) < 1e-14
    assert abs(GRID.mean(parts.psi)) < 1e-14


@given(seed=seeds)
@settings(max_examples=25, deadline=None)
def test_parts_are_orthogonal(seed):
    rng = np.random.default_rng(seed)
    f = GRID.random_field(rng, leading=(2,))
    g, p = grad_part(f, GRID), perp_grad_part(f, GRID)
    assert abs(GRID.inner(g, p)) <= 1e-11 * GRID.inner(f, f)
    # 勾配部分は渦なし、直交勾配部分は発散なし
    assert_allclose(GRID.div_h(p), 0.0, atol=1e-11)
    assert_allclose(GRID.div_h(GRID.perp(g)), 0.0, atol=1e-11)


@given(seed=seeds)
@settings(max_examples=25, deadline=None)
def test_perp_pairing_identity(seed):
    # int P(g^perp).f - int P(f^perp).g = int f.g^perp、平均つきの場でも
    rng = np.random.default_rng(seed)
    f = GRID.random_field(rng, leading=(2,), mean_zero=False)
    g = GRID.random_field(rng, leading=(2,), mean_zero=False)
    t1 = GRID.inner(grad_inv_div(GRID.perp(g), GRID), f)
    t2 = GRID.inner(grad_inv_div(GRID.perp(f), GRID), g)
    t3 = GRID.inner(f, GRID.perp(g))
    assert t1 - t2 == pytest.approx(t3, abs=1e-11 * (abs(t1) + abs(t2) + abs(t3)))


def test_gradient_field_has_no_perp_part(rng):
    phi = GRID.random_field(rng)
    parts = hodge_decompose(GRID.grad_h(phi), GRID)
    assert_allclose(parts.phi, phi, atol=1e-12)
    assert_allclose(parts.psi, 0.0, atol=1e-12)


def test_projection_splits_mean_in_half():
    f = np.stack([np.full(GRID.shape, 2.0), np.full(GRID.shape, -4.0)])
    assert_allclose(grad_inv_div(f, GRID), 0.5 * f, atol=1e-14)
    assert_allclose(perp_grad_inv_div(f, GRID), 0.5 * GRID.perp(f), atol=1e-14)


@given(seed=seeds)
@settings(max_examples=25, deadline=None)
def test_projection_is_symmetric(seed):
    rng = np.random.default_rng(seed)
    f = GRID.random_field(rng, leading=(2,), mean_zero=False)
    g = GRID.random_field(rng, leading=(2,), mean_zero=False)
    a = GRID.inner(grad_inv_div(f, GRID), g)
    b = GRID.inner(f, grad_inv_div(g, GRID))
    assert a == pytest.approx(b, abs=1e-12 * (abs(a) + abs(b) + 1.0))
