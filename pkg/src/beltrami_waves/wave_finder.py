"""
beltrami-waves WaveFinder: 定常波方程式 F(eta, Phi) = (R1 + mean(Phi), R2) = 0 の Newton-Krylov 解法。

Jacobian の作用は前進差分で近似し、内部の線形系は GMRES で解きます。
前処理には平坦状態 (eta = 0, Phi = 0) で線形化したモードごとの 2x2 ブロックの逆を右から掛けます。
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .bvp import BeltramiSolver
from .config import NewtonConfig, PhysicalParams
from .errors import Breakdown, NoConvergence
from .grid import HorizontalGrid
from .schema import NewtonStep, WaveSolveResult
from .surface_operator import flat_symbol
from .variational import el_residuals

logger = logging.getLogger(__name__)

TINY = np.finfo(float).tiny


# --- 状態ベクトル ---

def pack(eta: np.ndarray, Phi: np.ndarray) -> np.ndarray:
    return np.concatenate([eta.ravel(), Phi.ravel()])


def unpack(x: np.ndarray, grid: HorizontalGrid) -> Tuple[np.ndarray, np.ndarray]:
    n = grid.Nx * grid.Nz
    return x[:n].reshape(grid.shape), x[n:].reshape(grid.shape)


def wave_residual(x: np.ndarray, params: PhysicalParams, solver: BeltramiSolver,
                  bvp_tol: Optional[float] = None) -> np.ndarray:
    """F(x) = (R1 + mean(Phi), R2)。mean(Phi) の項が Phi の定数自由度を固定します。"""
    grid = solver.grid
    eta, Phi = unpack(x, grid)
    res = el_residuals(eta, Phi, params, solver, tol=bvp_tol)
    return pack(res.R1 + grid.mean(Phi), res.R2)


def _residual_norms(F: np.ndarray, grid: HorizontalGrid) -> Tuple[float, float]:
    F1, F2 = unpack(F, grid)
    return float(np.max(np.abs(F1))), float(np.max(np.abs(F2)))


# --- 前処理 ---

class FlatStatePreconditioner:
    """
    平坦状態での線形化のモードごとの逆。
      R1^ = h(k) Phi^ - i (k.c) eta^
      R2^ = i (k.c) Phi^ + (g + sigma |k|^2 - alpha (k^perp.c)(k.c)/|k|^2) eta^
    k = 0 型のモードは diag(1, g) (g = 0 なら 1) です。
    """

    def __init__(self, symbol: np.ndarray, params: PhysicalParams, grid: HorizontalGrid):
        self.grid = grid
        kc = grid.k1 * params.c1 + grid.k3 * params.c3
        kpc = -grid.k3 * params.c1 + grid.k1 * params.c3
        ksq = np.where(grid.zero_modes, 1.0, grid.ksq)
        a11 = symbol.astype(complex)
        a12 = -1j * kc
        a21 = 1j * kc
        a22 = (params.g + params.sigma * grid.ksq - params.alpha * kpc * kc / ksq).astype(complex)

        det = a11 * a22 - a12 * a21
        scale = np.abs(a11 * a22) + np.abs(a12 * a21) + TINY
        # 共鳴に近いモードや k = 0 型は対角で代用
        fallback = grid.zero_modes | (np.abs(det) < 1e-10 * scale)
        gravity = params.g if params.g > 0 else 1.0
        a11 = np.where(fallback, 1.0, a11)
        a22 = np.where(fallback, np.where(grid.zero_modes, gravity, a22), a22)
        a12 = np.where(fallback, 0.0, a12)
        a21 = np.where(fallback, 0.0, a21)
        a22 = np.where(np.abs(a22) < TINY, 1.0, a22)
        det = a11 * a22 - a12 * a21

        self.inv11 = a22 / det
        self.inv12 = -a12 / det
        self.inv21 = -a21 / det
        self.inv22 = a11 / det
        self.n_fallback = int(np.count_nonzero(fallback & ~grid.zero_modes))

    def apply(self, w: np.ndarray) -> np.ndarray:
        grid = self.grid
        w1, w2 = unpack(w, grid)
        r1 = grid.fft_forward(w1)
        r2 = grid.fft_forward(w2)
        # 未知数は (eta, Phi)、方程式は (R1, R2)
        phi_h = self.inv11 * r1 + self.inv12 * r2
        eta_h = self.inv21 * r1 + self.inv22 * r2
        return pack(grid.fft_inverse(eta_h), grid.fft_inverse(phi_h))


def _jacobian_operator(x: np.ndarray, F0: np.ndarray, params: PhysicalParams, solver: BeltramiSolver,
                       newton: NewtonConfig, precond: FlatStatePreconditioner) -> LinearOperator:
    """w -> J(x) P^-1 w。J の作用は前進差分。"""
    norm_x = float(np.linalg.norm(x))

    def matvec(w):
        v = precond.apply(np.asarray(w, dtype=float).ravel())
        norm_v = float(np.linalg.norm(v))
        if norm_v == 0.0:
            return np.zeros_like(v)
        delta = newton.fd_step * (1.0 + norm_x) / norm_v
        F1 = wave_residual(x + delta * v, params, solver, newton.bvp_tol)
        return (F1 - F0) / delta

    n = x.size
    return LinearOperator((n, n), matvec=matvec, dtype=float)


# --- Newton 反復 ---

def find_wave(eta0: np.ndarray, phi0: np.ndarray, params: PhysicalParams, solver: BeltramiSolver,
              newton: Optional[NewtonConfig] = None,
              symbol: Optional[np.ndarray] = None) -> WaveSolveResult:
    """
    (eta0, phi0) から Newton-Krylov 反復で F = 0 を解きます。
    失敗時は NoConvergence (反復の履歴は logger に出力済み) か Breakdown を送出します。
    """
    newton = newton or NewtonConfig()
    grid = solver.grid
    symbol = flat_symbol(solver) if symbol is None else symbol
    precond = FlatStatePreconditioner(symbol, params, grid)
    if precond.n_fallback:
        logger.warning("%d modes are near resonance at c = (%g, %g); using diagonal blocks there",
                       precond.n_fallback, params.c1, params.c3)

    x = pack(np.asarray(eta0, dtype=float), np.asarray(phi0, dtype=float))
    trace: List[NewtonStep] = []
    F = wave_residual(x, params, solver, newton.bvp_tol)
    r1, r2 = _residual_norms(F, grid)
    trace.append(NewtonStep(step=0, residual_R1=r1, residual_R2=r2, gmres_iterations=0, step_norm=0.0))
    logger.info("newton step 0: |R1|=%.3e |R2|=%.3e", r1, r2)

    for step in range(1, newton.maxit + 1):
        if max(r1, r2) <= newton.tol:
            break
        J = _jacobian_operator(x, F, params, solver, newton, precond)
        counter = {"n": 0}

        def _count(_):
            counter["n"] += 1

        w, info = gmres(J, -F, rtol=newton.gmres_rtol, atol=0.0, restart=newton.gmres_restart,
                        maxiter=newton.gmres_maxiter, callback=_count, callback_type="pr_norm")
        if info < 0:
            raise Breakdown(f"GMRES breakdown at Newton step {step} (info={info})")
        if info > 0:
            logger.warning("GMRES did not reach rtol=%.1e in step %d; taking the inexact step",
                           newton.gmres_rtol, step)
        dx = precond.apply(w)
        if not np.all(np.isfinite(dx)):
            raise Breakdown(f"non-finite Newton update at step {step}")

        x = x + dx
        F = wave_residual(x, params, solver, newton.bvp_tol)
        r1, r2 = _residual_norms(F, grid)
        step_norm = float(np.linalg.norm(dx))
        trace.append(NewtonStep(step=step, residual_R1=r1, residual_R2=r2,
                                gmres_iterations=counter["n"], step_norm=step_norm))
        logger.info("newton step %d: |R1|=%.3e |R2|=%.3e gmres=%d |dx|=%.3e",
                    step, r1, r2, counter["n"], step_norm)
        if not np.isfinite(r1) or not np.isfinite(r2):
            raise NoConvergence(f"Newton iteration produced non-finite residuals at step {step}", float("nan"))

    converged = max(r1, r2) <= newton.tol
    eta, Phi = unpack(x, grid)
    result = WaveSolveResult(eta=eta.copy(), phi=Phi.copy(), residual_R1=r1, residual_R2=r2,
                             converged=converged, speed=[params.c1, params.c3], trace=trace)
    if not converged:
        raise NoConvergence(f"Newton iteration: no convergence within {newton.maxit} steps", max(r1, r2))
    return result


def continue_in_speed(speeds: Sequence[float], eta0: np.ndarray, phi0: np.ndarray,
                      params: PhysicalParams, solver: BeltramiSolver,
                      newton: Optional[NewtonConfig] = None) -> List[WaveSolveResult]:
    """c1 を speeds の順に動かし、前の収束解を次の初期値にして find_wave を繰り返します。"""
    results: List[WaveSolveResult] = []
    symbol = flat_symbol(solver)
    eta, Phi = eta0, phi0
    for c1 in speeds:
        params_c = params.model_copy(update={"c1": float(c1)})
        logger.info("continuation: c1 = %g", c1)
        result = find_wave(eta, Phi, params_c, solver, newton, symbol=symbol)
        results.append(result)
        eta, Phi = result.eta, result.phi
    return results


def linear_seed(params: PhysicalParams, solver: BeltramiSolver, amplitude: float,
                mode: Tuple[int, int] = (1, 0),
                symbol: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    eta = a cos(k0.x) と、平坦状態で線形化した運動学的条件 h(k0) Phi^ = i (k0.c) eta^ を満たす Phi。
    """
    grid = solver.grid
    m, n = mode
    eta = amplitude * grid.mode(m, n)
    symbol = flat_symbol(solver) if symbol is None else symbol
    kc = grid.k1 * params.c1 + grid.k3 * params.c3
    eta_h = grid.fft_forward(eta)
    safe = np.where(np.abs(symbol) > TINY, symbol, 1.0)
    phi_h = np.where(np.abs(symbol) > TINY, 1j * kc * eta_h / safe, 0.0)
    return eta, grid.fft_inverse(phi_h)


def observed_order(residuals: Sequence[float], floor: float) -> float:
    """
    残差列の最初の 3 点 (floor を超えるもの) から収束次数
    log(r2/r1) / log(r1/r0) を求めます。3 点に満たなければ NaN です。
    """
    r = [float(x) for x in residuals if x > floor]
    if len(r) < 3:
        return float("nan")
    r0, r1, r2 = r[:3]
    if not r1 < r0:
        return float("nan")
    return float(np.log(r2 / r1) / np.log(r1 / r0))
