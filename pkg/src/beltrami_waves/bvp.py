"""
beltrami-waves BVP: 平坦化された非線形境界値問題の不動点反復。

  A^(n+1) = solve_flat(H^eta(A^(n)), g^eta(A^(n)), h^eta(A^(n)) + grad Phi)

eta の幾何はすべて外力 H^eta, g^eta, h^eta に押し込まれているので、
各反復は定数係数の FlatSolver を 1 回呼ぶだけです。
"""
import logging
from typing import List, Optional

import numpy as np

from .errors import NoConvergence, TestFieldInvalid
from .flat_solver import FlatSolver
from .flattening import (FlatteningCoeffs, curl_eta, curl_std, div_eta, horizontal_trace,
                         laplace_eta, laplace_std, normal_trace, tangential_parallel)
from .grid import HorizontalGrid, VerticalGrid
from .hodge import grad_inv_div, perp_grad_inv_div
from .schema import BvpSolution, FlatResidual, ForcingData, IterationRecord, WeakResidual

logger = logging.getLogger(__name__)

TINY = np.finfo(float).tiny


def _rms(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(a))))


# --- 外力 ---

def forcing_H_eta(A: np.ndarray, co: FlatteningCoeffs, alpha: float) -> np.ndarray:
    """Lap^eta A + alpha curl^eta A - Lap A - alpha curl A"""
    if co.is_flat:
        return np.zeros_like(A)
    grid, vgrid = co.grid, co.vgrid
    return (laplace_eta(A, co) - laplace_std(A, grid, vgrid)
            + alpha * (curl_eta(A, co) - curl_std(A, grid, vgrid)))


def forcing_g_eta(A: np.ndarray, co: FlatteningCoeffs) -> np.ndarray:
    """grad(eta) . A_h (y = 0)"""
    return co.mul(co.eta_x, A[0, -1]) + co.mul(co.eta_z, A[2, -1])


def _tilt(A: np.ndarray, co: FlatteningCoeffs) -> np.ndarray:
    """grad(eta)^perp A2 (y = 0)"""
    A2_top = A[1, -1]
    return np.stack([-co.mul(co.eta_z, A2_top), co.mul(co.eta_x, A2_top)])


def forcing_h_eta(A: np.ndarray, co: FlatteningCoeffs, alpha: float) -> np.ndarray:
    """
    (curl A)_h - (curl^eta A)_par - alpha (P(grad(eta)^perp A2))^perp (y = 0)

    P は hodge.grad_inv_div の周期箱射影 (平均の半分を含む)。
    """
    grid = co.grid
    if co.is_flat:
        return np.zeros((2,) + grid.shape)
    curl_flat = curl_std(A, grid, co.vgrid)
    curl_top = np.stack([curl_flat[0, -1], curl_flat[2, -1]])
    nonlocal_term = perp_grad_inv_div(_tilt(A, co), grid)
    return curl_top - tangential_parallel(curl_eta(A, co), co) - alpha * nonlocal_term


# --- 全系の残差 ---

def parallel_perp(A: np.ndarray, co: FlatteningCoeffs) -> np.ndarray:
    """A_par^perp = A_h^perp + grad(eta)^perp A2 (y = 0)"""
    return co.grid.perp(horizontal_trace(A)) + _tilt(A, co)


def parallel_perp_divergence(A: np.ndarray, co: FlatteningCoeffs) -> np.ndarray:
    """div(A_par^perp) (y = 0)"""
    return co.grid.div_h(parallel_perp(A, co))


def surface_operator_eta(A: np.ndarray, co: FlatteningCoeffs, alpha: float) -> np.ndarray:
    """(curl^eta A)_par + alpha (P(A_par^perp))^perp"""
    nonlocal_term = perp_grad_inv_div(parallel_perp(A, co), co.grid)
    return tangential_parallel(curl_eta(A, co), co) + alpha * nonlocal_term


def residual_system(A: np.ndarray, co: FlatteningCoeffs, Phi: np.ndarray,
                    alpha: float) -> FlatResidual:
    """平坦化された全系 (微分形) の RMS 残差。体積方程式は内部節点のみ。"""
    grid, vgrid = co.grid, co.vgrid
    pde = -laplace_eta(A, co) - alpha * curl_eta(A, co)
    dA2 = vgrid.dy(A[1])
    bottom = np.stack([A[0, 0], A[2, 0], dA2[0]])
    surface_h = surface_operator_eta(A, co, alpha) - grid.grad_h(Phi)
    surface = np.concatenate([normal_trace(A, co)[None], surface_h])
    return FlatResidual(pde_res=_rms(pde[:, 1:-1]), bottom_res=_rms(bottom), surface_res=_rms(surface))


# --- ソルバ ---

class BeltramiSolver:
    """
    固定した (grid, vgrid, alpha) で H(eta) の評価を繰り返すためのソルバ。
    FlatSolver の Green ブロックは初期化時に一度だけ作ります。
    """

    def __init__(self, grid: HorizontalGrid, vgrid: VerticalGrid, alpha: float,
                 tol: float = 1e-10, maxit: int = 100, relax: float = 1.0,
                 h_min_ratio: float = 0.1, zero_mode: str = "accept",
                 floor_tol: float = 1e-6, stall_window: int = 3):
        if not 0.0 < relax <= 1.0:
            raise ValueError(f"relax must lie in (0, 1] (got {relax})")
        self.grid = grid
        self.vgrid = vgrid
        self.alpha = float(alpha)
        self.tol = tol
        self.maxit = maxit
        self.relax = relax
        self.floor_tol = floor_tol
        self.stall_window = stall_window
        self.h_min_ratio = h_min_ratio
        self.flat = FlatSolver(grid, vgrid, alpha, zero_mode=zero_mode)

    def coefficients(self, eta: np.ndarray) -> FlatteningCoeffs:
        return FlatteningCoeffs(eta, self.grid, self.vgrid, self.h_min_ratio)

    def _gauges(self, A: np.ndarray, co: FlatteningCoeffs, scale: float):
        return _rms(div_eta(A, co)) / scale, _rms(normal_trace(A, co)) / scale

    def solve_bvp(self, eta: np.ndarray, Phi: np.ndarray, tol: Optional[float] = None,
                  maxit: Optional[int] = None) -> BvpSolution:
        tol = self.tol if tol is None else tol
        maxit = self.maxit if maxit is None else maxit
        co = self.coefficients(eta)
        grad_phi = self.grid.grad_h(Phi)
        scale = max(_rms(grad_phi), TINY)
        zeros_H = np.zeros((3, self.vgrid.Ny) + self.grid.shape)
        zeros_g = np.zeros(self.grid.shape)

        A = self.flat.solve(ForcingData(H=zeros_H, g=zeros_g, hvec=grad_phi))
        history: List[float] = []
        records: List[IterationRecord] = []
        status = "converged"
        best, since_best = np.inf, 0

        if co.is_flat:
            history.append(0.0)
            gd, gn = self._gauges(A, co, scale)
            records.append(IterationRecord(iteration=1, residual=0.0, gauge_div=gd, gauge_normal=gn))
        else:
            for it in range(1, maxit + 1):
                data = ForcingData(
                    H=forcing_H_eta(A, co, self.alpha),
                    g=forcing_g_eta(A, co),
                    hvec=forcing_h_eta(A, co, self.alpha) + grad_phi,
                )
                A_new = self.flat.solve(data)
                if self.relax < 1.0:
                    A_new = self.relax * A_new + (1.0 - self.relax) * A
                norm_new = float(np.linalg.norm(A_new))
                corr = float(np.linalg.norm(A_new - A)) / max(norm_new, TINY)
                A = A_new
                history.append(corr)
                gd, gn = self._gauges(A, co, scale)
                records.append(IterationRecord(iteration=it, residual=corr, gauge_div=gd, gauge_normal=gn))
                logger.debug("bvp iteration %d: correction=%.3e div=%.3e normal=%.3e", it, corr, gd, gn)
                if not np.isfinite(corr) or corr > 1e6:
                    raise NoConvergence(f"fixed-point iteration diverged at iteration {it}", corr)
                if corr <= tol:
                    break
                if corr < best:
                    best, since_best = corr, 0
                else:
                    since_best += 1
                # 丸め誤差やエイリアシングの水準で修正量が下がらなくなった
                if best <= self.floor_tol and since_best >= self.stall_window:
                    status = "floor"
                    logger.warning("bvp correction stalled at %.2e (tol %.1e) after %d iterations",
                                   best, tol, it)
                    break
            else:
                raise NoConvergence(f"no convergence within {maxit} iterations", history[-1])

        gd, gn = self._gauges(A, co, scale)
        flat_residual = residual_system(A, co, Phi, self.alpha)
        residual_scaled = max(flat_residual.pde_res, flat_residual.bottom_res,
                              flat_residual.surface_res) / scale
        if residual_scaled > self.floor_tol:
            logger.warning("bvp: scaled residual %.2e of the flattened system exceeds %.1e",
                           residual_scaled, self.floor_tol)
        solution = BvpSolution(
            A_tilde=A,
            iterations=len(history),
            residual_history=history,
            gauge_div=gd,
            gauge_normal=gn,
            diagnostics=records,
            flat_residual=flat_residual,
            residual_scaled=residual_scaled,
            status=status,
        )
        logger.info("bvp %s in %d iterations (correction %.2e, residual %.2e, div %.2e, normal %.2e)",
                    status, solution.iterations, history[-1], residual_scaled, gd, gn)
        return solution


def solve_bvp(eta: np.ndarray, Phi: np.ndarray, alpha: float, grid: HorizontalGrid,
              vgrid: VerticalGrid, tol: float = 1e-10, maxit: int = 100,
              relax: float = 1.0) -> BvpSolution:
    solver = BeltramiSolver(grid, vgrid, alpha, tol=tol, maxit=maxit, relax=relax)
    return solver.solve_bvp(eta, Phi)


# --- 弱形式 ---

def admissible_test_field(co: FlatteningCoeffs, rng: np.random.Generator,
                          max_mode: int = 3) -> np.ndarray:
    """
    底で B1 = B3 = 0、表面で B.N = 0 を満たす帯域制限された試験場。
    """
    grid, vgrid = co.grid, co.vgrid
    h = vgrid.h
    ybar = vgrid.column / h
    f = grid.random_field(rng, max_mode=max_mode, leading=(5,), mean_zero=False)
    B1 = (1.0 + ybar) * (f[0] + f[1] * ybar)
    B3 = (1.0 + ybar) * (f[2] + f[3] * ybar)
    top = co.mul(co.eta_x, B1[-1]) + co.mul(co.eta_z, B3[-1])
    B2 = -f[4] * ybar + top
    return np.stack([B1, B2, B3])


def _check_test_field(B: np.ndarray, co: FlatteningCoeffs, tol: float) -> None:
    scale = max(float(np.max(np.abs(B))), TINY)
    bottom = max(float(np.max(np.abs(B[0, 0]))), float(np.max(np.abs(B[2, 0]))))
    if bottom > tol * scale:
        raise TestFieldInvalid(f"test field violates B1 = B3 = 0 at the bottom ({bottom:.3e})")
    normal = float(np.max(np.abs(normal_trace(B, co))))
    if normal > tol * scale:
        raise TestFieldInvalid(f"test field violates B.N = 0 at the surface ({normal:.3e})")


def weak_residual(A: np.ndarray, co: FlatteningCoeffs, Phi: np.ndarray, B: np.ndarray,
                  alpha: float, tol: float = 1e-10) -> WeakResidual:
    """
    int (curl A . curl B - alpha curl A . B + div A div B)
      - alpha int P(A_par^perp) . B_par - int grad^perp Phi . B_par
    を平坦化座標で評価します (P = grad Lap^-1 div + 平均の半分)。
    """
    _check_test_field(B, co, tol)
    grid = co.grid
    curl_A = curl_eta(A, co)
    curl_B = curl_eta(B, co)
    vol_curl = co.volume_integral(np.sum(curl_A * curl_B, axis=0))
    vol_alpha = -alpha * co.volume_integral(np.sum(curl_A * B, axis=0))
    vol_div = co.volume_integral(div_eta(A, co) * div_eta(B, co))

    B_par = tangential_parallel(B, co)
    surf_alpha = -alpha * grid.inner(grad_inv_div(parallel_perp(A, co), grid), B_par)
    surf_phi = -grid.inner(grid.perp_grad(Phi), B_par)

    terms = (vol_curl, vol_alpha, vol_div, surf_alpha, surf_phi)
    value = float(sum(terms))
    scale = float(sum(abs(t) for t in terms)) + TINY
    return WeakResidual(value=value, scale=scale, relative=abs(value) / scale)

