import numpy as np
import pytest
from numpy.testing import assert_allclose

from beltrami_waves.errors import ConfigError
from beltrami_waves.flattening import curl_std
from beltrami_waves.variational import (BackgroundFlow, astar_divergence_identity, background,
                                        cos_minus_one_over, el_residuals, el_residuals_raw, gamma,
                                        gradient_consistency, lagrangian_surface, lagrangian_volume,
                                        sin_minus_linear_over, sin_over)
from beltrami_waves.verify import random_eta

Y = np.linspace(-1.0, 0.0, 11)


# --- 安定な評価 ---

@pytest.mark.parametrize("alpha", [0.5, 1.3])
def test_stable_helpers_match_direct_formulas(alpha):
    assert_allclose(cos_minus_one_over(alpha, Y), (np.cos(alpha * Y) - 1.0) / alpha, atol=1e-14)
    assert_allclose(sin_over(alpha, Y), np.sin(alpha * Y) / alpha, atol=1e-14)
    assert_allclose(sin_minus_linear_over(alpha, Y), (np.sin(alpha * Y) - alpha * Y) / alpha, atol=1e-14)


def test_stable_helpers_at_small_alpha():
    assert_allclose(cos_minus_one_over(0.0, Y), 0.0)
    assert_allclose(sin_over(0.0, Y), Y)
    assert_allclose(sin_minus_linear_over(0.0, Y), 0.0)
    alpha = 1e-5
    assert_allclose(sin_minus_linear_over(alpha, Y), -alpha ** 2 * Y ** 3 / 6.0, rtol=1e-8, atol=1e-300)
    assert_allclose(cos_minus_one_over(alpha, Y), -alpha * Y ** 2 / 2.0, rtol=1e-8, atol=1e-300)


# --- 背景流 ---

def test_background_flow_is_beltrami(grid, vgrid):
    flow = BackgroundFlow(0.7, 0.5, -0.2)
    u, A = flow.on_strip(grid, vgrid)
    assert_allclose(curl_std(A, grid, vgrid), u, atol=1e-10)
    assert_allclose(curl_std(u, grid, vgrid), 0.7 * u, atol=1e-10)
    assert_allclose(A[:, -1], 0.0, atol=1e-15)


def test_background_from_params(params):
    flow = background(params)
    assert flow.speed_sq == pytest.approx(0.5 ** 2 + 0.1 ** 2)
    assert_allclose(flow.velocity(0.0), [0.5, 0.0, 0.1])


def test_astar_divergence_identity(grid, params, rng):
    eta = random_eta(grid, rng, 0.05)
    lhs, rhs = astar_divergence_identity(eta, background(params), grid)
    assert np.max(np.abs(lhs - rhs)) < 1e-7 * np.max(np.abs(rhs))


def test_gamma_vanishes_on_flat_surface(grid, params):
    assert gamma(np.zeros(grid.shape), background(params), grid) == 0.0


# --- 汎関数と残差 ---

def test_trivial_state(solver, grid, params):
    zero = np.zeros(grid.shape)
    assert lagrangian_surface(zero, zero, params, solver).L_surface == 0.0
    res = el_residuals(zero, zero, params, solver)
    assert np.max(np.abs(res.R1)) == 0.0
    assert np.max(np.abs(res.R2)) == 0.0


def test_raw_and_operator_residuals_agree_on_flat_surface(solver, grid, params, rng):
    zero = np.zeros(grid.shape)
    phi = grid.random_field(rng, max_mode=2)
    hk = el_residuals(zero, phi, params, solver)
    raw = el_residuals_raw(zero, phi, params, solver)
    assert_allclose(raw.R1, hk.R1, atol=1e-10)
    assert np.max(np.abs(raw.R2 - hk.R2)) < 1e-8 * np.max(np.abs(hk.R2))


@pytest.mark.slow
def test_volume_and_surface_forms_agree(solver, grid, params, rng):
    eta = random_eta(grid, rng, 0.02)
    phi = grid.random_field(rng, max_mode=2)
    value = lagrangian_volume(eta, phi, params, solver)
    assert value.L_volume == pytest.approx(value.L_surface, rel=1e-6)
    assert set(value.parts) >= {"kinetic", "coupling", "astar", "gamma", "gravity", "capillary"}


@pytest.mark.parametrize("epsilon", [1e-2, 1e-7])
def test_epsilon_outside_range(solver, grid, params, epsilon):
    zero = np.zeros(grid.shape)
    with pytest.raises(ConfigError):
        gradient_consistency(zero, zero, zero, zero, epsilon, params, solver)


def test_potential_gradient_is_kinematic_residual(solver, grid, params, rng):
    eta = random_eta(grid, rng, 0.02)
    phi = grid.random_field(rng, max_mode=2)
    check = gradient_consistency(eta, phi, np.zeros(grid.shape), grid.mode(1, 1), 1e-4, params, solver)
    assert check.relative_error < 1e-5


@pytest.mark.slow
def test_surface_gradient_is_dynamic_residual(solver, grid, params, rng):
    eta = random_eta(grid, rng, 0.02)
    phi = grid.random_field(rng, max_mode=2)
    check = gradient_consistency(eta, phi, grid.mode(1, 0, phase=0.2), np.zeros(grid.shape), 1e-4,
                                 params, solver)
    assert check.relative_error < 1e-3


@pytest.mark.slow
def test_gradient_error_decreases_quadratically(solver, grid, params, rng):
    eta = random_eta(grid, rng, 0.005)
    phi = 0.05 * grid.random_field(rng)
    d_eta = random_eta(grid, rng, 0.25)
    d_phi = grid.random_field(rng)
    errors = [gradient_consistency(eta, phi, d_eta, d_phi, e, params, solver, tol=1e-12).relative_error
              for e in (1e-3, 1e-4)]
    assert np.log10(errors[0] / errors[1]) >= 1.9
