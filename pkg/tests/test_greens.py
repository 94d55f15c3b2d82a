import numpy as np
import pytest
from numpy.testing import assert_allclose

from beltrami_waves.errors import AlphaTooLarge, GridError, ZeroWavenumber
from beltrami_waves import greens
from beltrami_waves.greens import (ESTIMATE_FAMILIES, GROWTH_LIMIT, blocks_to_array, check_alpha,
                                   closed_form_blocks, divided_differences, estimate_check, eval_blocks,
                                   eval_scalar_kernels, greens_G, greens_G_dy, mode_operator)
from beltrami_waves.grid import VerticalGrid

H = 1.0
K1 = np.array([1.0, 0.0, 2.0, -1.5])
K3 = np.array([0.0, 0.7, 1.0, 2.0])
KMAG = np.hypot(K1, K3)


@pytest.fixture(scope="module")
def column():
    return VerticalGrid(32, H)


@pytest.fixture(scope="module", params=[0.0, 0.4, 1.4])
def blocks(request, column):
    return eval_blocks(K1, K3, request.param, H, column.y)


def test_alpha_limit():
    check_alpha(1.5, 1.0)
    with pytest.raises(AlphaTooLarge):
        check_alpha(np.pi / 2, 1.0)
    with pytest.raises(AlphaTooLarge):
        eval_blocks([1.0], [0.0], -1.6, 1.0, [0.0])


def test_zero_wavenumber_is_rejected():
    with pytest.raises(ZeroWavenumber):
        eval_blocks([0.0, 1.0], [0.0, 0.0], 0.1, 1.0, [-1.0, 0.0])


def test_large_kh_is_rejected():
    with pytest.raises(GridError):
        eval_blocks([61.0], [0.0], 0.1, 1.0, [0.0])


def test_gradient_column_of_U(blocks, column):
    t = column.y + H
    for i, K in enumerate(KMAG):
        assert_allclose(blocks.U[i, :, 1, 0], np.cosh(K * t), rtol=1e-10)
        assert_allclose(blocks.U[i, :, 0, 0], 1j * K1[i] * np.sinh(K * t) / K, rtol=1e-10, atol=1e-12)


def test_gradient_column_of_W(blocks, column):
    for i, K in enumerate(KMAG):
        assert_allclose(blocks.W[i, :, 1, 0], np.sinh(K * column.y), rtol=1e-10, atol=1e-12)


def test_boundary_conditions(blocks):
    # 底: A1 = A3 = 0, A2' = 0
    assert_allclose(blocks.U[:, 0, 0, :], 0.0, atol=1e-14)
    assert_allclose(blocks.U[:, 0, 2, :], 0.0, atol=1e-14)
    assert_allclose(blocks.dU[:, 0, 1, :], 0.0, atol=1e-14)
    # 表面: A2 = 0
    assert_allclose(blocks.W[:, -1, 1, :], 0.0, atol=1e-14)


def test_columns_solve_the_mode_equation(blocks, column):
    for i in range(KMAG.size):
        for F in (blocks.U[i], blocks.W[i]):
            res = mode_operator(F, column.dy(F), column.dyy(F), K1[i], K3[i], blocks.alpha)
            scale = max(np.max(np.abs(column.dyy(F))), KMAG[i] ** 2 * np.max(np.abs(F)))
            assert np.max(np.abs(res)) < 1e-8 * scale


@pytest.mark.parametrize("alpha", [0.0, 0.9])
def test_mode_operator_annihilates_gradients(alpha):
    # A = grad(sinh(|k| t)/|k| e^{ik.x}) は任意の alpha で解
    k1, k3 = 0.6, -1.2
    K = np.hypot(k1, k3)
    t = np.linspace(0.0, 1.0, 7)
    sh, ch = np.sinh(K * t), np.cosh(K * t)
    F = np.stack([1j * k1 * sh / K, ch, 1j * k3 * sh / K])[:, :, None]
    dF = np.stack([1j * k1 * ch, K * sh, 1j * k3 * ch])[:, :, None]
    d2F = np.stack([1j * k1 * K * sh, K ** 2 * ch, 1j * k3 * K * sh])[:, :, None]
    F, dF, d2F = (np.moveaxis(a, 0, 1) for a in (F, dF, d2F))
    assert_allclose(mode_operator(F, dF, d2F, k1, k3, alpha), 0.0, atol=1e-12)


def test_green_matrix_is_continuous_with_unit_jump(blocks, rng):
    for i in range(KMAG.size):
        for zeta in rng.uniform(-H, 0.0, size=3):
            lower = greens_G(blocks, zeta, zeta, index=i, branch="lower")
            upper = greens_G(blocks, zeta, zeta, index=i, branch="upper")
            assert_allclose(lower, upper, rtol=1e-8, atol=1e-10)
            jump = (greens_G_dy(blocks, zeta, zeta, index=i, branch="lower")
                    - greens_G_dy(blocks, zeta, zeta, index=i, branch="upper"))
            assert_allclose(jump, -np.eye(3), atol=1e-8)


def test_green_matrix_branch_symmetry(blocks):
    G = greens_G(blocks, -0.2, -0.7, index=2)
    G_swapped = greens_G(blocks, -0.7, -0.2, index=2)
    assert_allclose(G_swapped, G.conj().T, rtol=1e-12, atol=1e-14)


def test_unknown_branch(blocks):
    with pytest.raises(ValueError):
        greens_G(blocks, -0.5, -0.5, branch="middle")


def test_divided_differences_match_direct_formula():
    alpha = 0.5
    K = np.array([2.0, 3.0])
    y = np.linspace(-1.0, 0.0, 9)
    d1c, d1s, d1t = divided_differences(K, alpha, y)
    lam = K ** 2 - alpha ** 2
    kap = np.sqrt(lam)[:, None]
    Kc = K[:, None]
    denom = -alpha ** 2
    assert_allclose(d1c, (np.cosh(kap * y) - np.cosh(Kc * y)) / denom, rtol=1e-9, atol=1e-14)
    assert_allclose(d1s, (np.sinh(kap * y) / kap - np.sinh(Kc * y) / Kc) / denom, rtol=1e-9, atol=1e-14)
    assert_allclose(d1t, (kap * np.sinh(kap * y) - Kc * np.sinh(Kc * y)) / denom, rtol=1e-9, atol=1e-14)


def test_scalar_kernels_across_branch_point():
    # |k| = alpha の前後で c(y) は連続
    alpha = 1.0
    y = np.linspace(-1.0, 0.0, 5)
    ks = eval_scalar_kernels(np.array([alpha - 1e-9, alpha, alpha + 1e-9]), alpha, y)
    assert_allclose(ks.c[0], ks.c[1], atol=1e-8)
    assert_allclose(ks.c[2], ks.c[1], atol=1e-8)
    assert_allclose(ks.s1[1], y, atol=1e-15)


def test_estimate_families_pass():
    results = estimate_check(np.geomspace(0.1, 12.0, 8), [0.0, 0.5, 1.2], H)
    assert [r.name for r in results] == list(ESTIMATE_FAMILIES)
    assert all(r.passed for r in results)
    assert all(np.isfinite(r.worst_ratio) for r in results)
    assert all(r.refined_ratio <= 2.0 * r.worst_ratio + 1e-14 for r in results)
    assert all(r.growth <= GROWTH_LIMIT for r in results)


def test_blocks_to_array_layout(column):
    blocks = eval_blocks(K1, K3, 0.2, H, column.y)
    packed = blocks_to_array(blocks)
    assert packed.shape == (KMAG.size, 1, column.Ny, 36)
    assert_allclose(packed[:, 0, :, 3], blocks.U[:, :, 1, 0].real)


def test_growing_ratio_fails_estimate(monkeypatch):
    # 比が |k| に比例して増えると、定数は 2 倍以内でも傾きで落ちる
    monkeypatch.setattr(greens, "_estimate_ratios", lambda name, K, alpha, h, y: np.asarray(K, dtype=float))
    results = estimate_check(np.geomspace(1.0, 12.0, 6), [0.0, 0.5], H, families=["cosh_difference"])
    assert results[0].growth > GROWTH_LIMIT
    assert not results[0].passed


# --- 閉じた形 ---

@pytest.mark.parametrize("alpha", [0.0, 0.3, 1.2])
def test_closed_forms_match_propagated_blocks(column, alpha):
    blocks = eval_blocks(K1, K3, alpha, H, column.y)
    U, W, C = closed_form_blocks(K1, K3, alpha, H, column.y)
    for ref, got in ((blocks.U, U), (blocks.W, W), (blocks.C, C)):
        assert_allclose(got, ref, rtol=0.0, atol=1e-9 * np.max(np.abs(ref)))


def test_closed_form_signs_of_u32_and_c21():
    # k = (0.7, 0.4), alpha = 0.3, h = 1 での値
    U, _, C = closed_form_blocks([0.7], [0.4], 0.3, H, [0.0])
    blocks = eval_blocks([0.7], [0.4], 0.3, H, [0.0])
    assert U[0, 0, 2, 1].real == pytest.approx(-0.701, abs=2e-3)
    assert blocks.U[0, 0, 2, 1].real == pytest.approx(-0.701, abs=2e-3)
    assert C[0, 1, 0].real == pytest.approx(0.0246, abs=3e-4)
    assert blocks.C[0, 1, 0].real == pytest.approx(0.0246, abs=3e-4)


def test_closed_forms_reject_zero_wavenumber():
    with pytest.raises(ZeroWavenumber):
        closed_form_blocks([0.0], [0.0], 0.3, H, [0.0])


def test_blocks_follow_first_order_series_in_alpha(column):
    # alpha -> 0 で u12, u13, C は |k| と sech, tanh の式に alpha の一次補正を足したもの
    alpha = 1e-6
    blocks = eval_blocks(K1, K3, alpha, H, column.y)
    K = KMAG[:, None]
    p, q = K1[:, None], K3[:, None]
    t = column.y[None, :] + H
    sh = np.sinh(K * t)
    u12 = q * sh / K + alpha * p * t * sh / (2.0 * K)
    u13 = -1j * p * sh / K + 1j * alpha * q * t * sh / (2.0 * K)
    assert_allclose(blocks.U[..., 0, 1], u12, rtol=0.0, atol=1e-10 * np.max(np.abs(u12)))
    assert_allclose(blocks.U[..., 0, 2], u13, rtol=0.0, atol=1e-10 * np.max(np.abs(u13)))

    sig = 1.0 / np.cosh(KMAG * H)
    tau = np.tanh(KMAG * H)
    C = blocks.C
    assert_allclose(C[:, 0, 0], -sig / (2.0 * KMAG), rtol=1e-9)
    assert_allclose(C[:, 0, 1] / alpha, -0.5j * sig / KMAG * (H + tau / KMAG), rtol=1e-5)
    assert_allclose(C[:, 1, 0] / alpha, 0.5 * sig / KMAG * (H - tau / KMAG), rtol=1e-5)
    assert_allclose(C[:, 0, 2], -sig / KMAG, rtol=1e-9)
    assert_allclose(C[:, 1, 1], 1j * sig / KMAG, rtol=1e-9)
    assert_allclose(C[:, 2, 0], 1j * sig / KMAG, rtol=1e-9)
    assert_allclose(C[:, 1, 2], 0.0, atol=1e-12)
    assert_allclose(C[:, 2, 1], 0.0, atol=1e-12)
    assert_allclose(C[:, 2, 2], 0.0, atol=1e-12)
