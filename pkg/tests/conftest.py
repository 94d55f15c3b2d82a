"""
テスト共通のフィクスチャ。

BVP を解くテストは 16x16 以下の小さな格子を使います。
"""
import numpy as np
import pytest

from beltrami_waves.bvp import BeltramiSolver
from beltrami_waves.config import PhysicalParams
from beltrami_waves.grid import HorizontalGrid, VerticalGrid

TWO_PI = 2.0 * np.pi


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid():
    # 周期 2 pi なので波数は整数
    return HorizontalGrid(16, 16, TWO_PI, TWO_PI)


@pytest.fixture
def tiny_grid():
    return HorizontalGrid(8, 8, TWO_PI, TWO_PI)


@pytest.fixture
def vgrid():
    return VerticalGrid(12, 1.0)


@pytest.fixture
def params():
    return PhysicalParams(alpha=0.3, h=1.0, g=1.0, sigma=0.25, c1=0.5, c3=0.1)


@pytest.fixture
def solver(grid, vgrid, params):
    return BeltramiSolver(grid, vgrid, params.alpha, tol=1e-12, maxit=200)


@pytest.fixture
def irrotational_solver(grid, vgrid):
    return BeltramiSolver(grid, vgrid, 0.0, tol=1e-12, maxit=200)


@pytest.fixture
def strip_multiplier():
    """|k| tanh(|k| h) を掛ける関数。"""
    def apply(grid, f, h=1.0):
        return grid.fft_inverse(grid.kmag * np.tanh(grid.kmag * h) * grid.fft_forward(f))
    return apply
