"""
beltrami-waves Variational: 背景流、汎関数 L(eta, Phi) と Euler-Lagrange 残差。

表面の項は点ごとに評価し、打ち切りは行いません (離散汎関数の正確な微分を保つため)。
"""
import logging
from typing import Dict, Optional, Tuple

import numpy as np

from .bvp import BeltramiSolver, parallel_perp, parallel_perp_divergence
from .config import PhysicalParams
from .errors import ConfigError
from .flattening import FlatteningCoeffs, curl_eta, tangential_parallel
from .grid import HorizontalGrid, VerticalGrid
from .hodge import grad_inv_div, inv_laplacian
from .schema import ELResiduals, FunctionalValue, GradientCheck
from .surface_operator import apply_H

logger = logging.getLogger(__name__)

TINY = np.finfo(float).tiny


# --- alpha -> 0 で安定な評価 ---

def cos_minus_one_over(alpha: float, y) -> np.ndarray:
    """(cos(alpha y) - 1)/alpha"""
    y = np.asarray(y, dtype=float)
    return -np.sin(0.5 * alpha * y) * y * np.sinc(alpha * y / (2.0 * np.pi))


def sin_over(alpha: float, y) -> np.ndarray:
    """sin(alpha y)/alpha"""
    y = np.asarray(y, dtype=float)
    return y * np.sinc(alpha * y / np.pi)


def sin_minus_linear_over(alpha: float, y) -> np.ndarray:
    """(sin(alpha y) - alpha y)/alpha"""
    y = np.asarray(y, dtype=float)
    x = alpha * y
    series = -alpha ** 2 * y ** 3 / 6.0 + alpha ** 4 * y ** 5 / 120.0
    if alpha == 0.0:
        return np.zeros_like(y)
    direct = (np.sin(x) - x) / alpha
    return np.where(np.abs(x) < 1e-3, series, direct)


# --- 背景流 ---

class BackgroundFlow:
    """
    自明解 u* = c1 (cos ay, 0, sin ay) + c3 (-sin ay, 0, cos ay) と
    そのベクトルポテンシャル A* (curl A* = u*, A*(0) = 0)。
    """

    def __init__(self, alpha: float, c1: float, c3: float):
        self.alpha = float(alpha)
        self.c1 = float(c1)
        self.c3 = float(c3)

    @property
    def speed_sq(self) -> float:
        return self.c1 ** 2 + self.c3 ** 2

    def velocity(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        ca, sa = np.cos(self.alpha * y), np.sin(self.alpha * y)
        return np.stack([self.c1 * ca - self.c3 * sa, np.zeros_like(y), self.c1 * sa + self.c3 * ca])

    def potential(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        cm = cos_minus_one_over(self.alpha, y)
        so = sin_over(self.alpha, y)
        return np.stack([self.c1 * cm - self.c3 * so, np.zeros_like(y), self.c1 * so + self.c3 * cm])

    def on_strip(self, grid: HorizontalGrid, vgrid: VerticalGrid) -> Tuple[np.ndarray, np.ndarray]:
        """eta = 0 の帯上の (u*, A*)。形状 (3, Ny, Nx, Nz)。"""
        y = np.broadcast_to(vgrid.column, (vgrid.Ny,) + grid.shape)
        return self.velocity(y), self.potential(y)

    # 表面 y = eta でのトレース (A*_2 = u*_2 = 0 なので par 成分は水平成分そのもの)

    def astar_parallel(self, eta: np.ndarray) -> np.ndarray:
        A = self.potential(eta)
        return np.stack([A[0], A[2]])

    def ustar_parallel(self, eta: np.ndarray) -> np.ndarray:
        u = self.velocity(eta)
        return np.stack([u[0], u[2]])


def background(params: PhysicalParams) -> BackgroundFlow:
    return BackgroundFlow(params.alpha, params.c1, params.c3)


def astar_divergence_identity(eta: np.ndarray, flow: BackgroundFlow,
                              grid: HorizontalGrid) -> Tuple[np.ndarray, np.ndarray]:
    """(div(A*_par^perp), -grad(eta).u*_par)。両者は一致するはず。"""
    lhs = grid.div_h(grid.perp(flow.astar_parallel(eta)))
    grad_eta = grid.grad_h(eta)
    rhs = -np.sum(grad_eta * flow.ustar_parallel(eta), axis=0)
    return lhs, rhs


# --- 汎関数 ---

def gamma(eta: np.ndarray, flow: BackgroundFlow, grid: HorizontalGrid) -> float:
    """
    Gamma(eta) = int (-alpha/2 grad Lap^-1 div(A*_par^perp) . A*_par
                      + |c|^2/(2 alpha) (sin(alpha eta) - alpha eta))
    """
    P = flow.astar_parallel(eta)
    nonlocal_term = -0.5 * flow.alpha * grid.inner(grad_inv_div(grid.perp(P), grid), P)
    local = 0.5 * flow.speed_sq * float(grid.integrate(sin_minus_linear_over(flow.alpha, eta)))
    return nonlocal_term + local


def _surface_terms(eta: np.ndarray, Phi: np.ndarray, flow: BackgroundFlow,
                   params: PhysicalParams, grid: HorizontalGrid) -> Dict[str, float]:
    grad_eta = grid.grad_h(eta)
    astar_perp = grid.perp(flow.astar_parallel(eta))
    return {
        "astar": -grid.inner(grid.grad_h(Phi), astar_perp),
        "gamma": gamma(eta, flow, grid),
        "gravity": 0.5 * params.g * float(grid.integrate(eta ** 2)),
        "capillary": params.sigma * float(grid.integrate(np.sqrt(1.0 + np.sum(grad_eta ** 2, axis=0)) - 1.0)),
    }


def lagrangian_volume(eta: np.ndarray, Phi: np.ndarray, params: PhysicalParams,
                      solver: BeltramiSolver) -> FunctionalValue:
    """平坦化された体積積分による L(eta, Phi)。"""
    grid = solver.grid
    alpha = params.alpha
    flow = background(params)
    solution = solver.solve_bvp(eta, Phi)
    co = solver.coefficients(eta)
    A = solution.A_tilde
    curl_A = curl_eta(A, co)

    kinetic = 0.5 * co.volume_integral(np.sum(curl_A ** 2, axis=0))
    coupling = -0.5 * alpha * co.volume_integral(np.sum(A * curl_A, axis=0))
    surface_coupling = -0.5 * alpha * grid.inner(grad_inv_div(parallel_perp(A, co), grid),
                                                 tangential_parallel(A, co))

    parts = {"kinetic": kinetic, "coupling": coupling + surface_coupling}
    parts.update(_surface_terms(eta, Phi, flow, params, grid))
    total = float(sum(parts.values()))
    surface = lagrangian_surface(eta, Phi, params, solver).L_surface
    return FunctionalValue(L_volume=total, L_surface=surface, Gamma=parts["gamma"], parts=parts)


def lagrangian_surface(eta: np.ndarray, Phi: np.ndarray, params: PhysicalParams,
                       solver: BeltramiSolver, tol: Optional[float] = None) -> FunctionalValue:
    """int (Phi H Phi / 2 - grad Phi . A*_par^perp + Gamma + g eta^2/2 + 表面張力)"""
    grid = solver.grid
    flow = background(params)
    Hphi = apply_H(eta, Phi, solver, tol=tol).Hphi
    parts = {"kinetic": 0.5 * grid.inner(Phi, Hphi)}
    parts.update(_surface_terms(eta, Phi, flow, params, grid))
    total = float(sum(parts.values()))
    return FunctionalValue(L_volume=float("nan"), L_surface=total, Gamma=parts["gamma"], parts=parts)


# --- Euler-Lagrange 残差 ---

def capillary_term(eta: np.ndarray, grid: HorizontalGrid) -> np.ndarray:
    """div(grad eta / sqrt(1 + |grad eta|^2))"""
    grad_eta = grid.grad_h(eta)
    return grid.div_h(grad_eta / np.sqrt(1.0 + np.sum(grad_eta ** 2, axis=0)))


def _kinematic(Hphi: np.ndarray, eta: np.ndarray, flow: BackgroundFlow,
               grid: HorizontalGrid) -> np.ndarray:
    return Hphi + grid.div_h(grid.perp(flow.astar_parallel(eta)))


def _off_shell(R1: np.ndarray, shift: np.ndarray, ustar: np.ndarray, alpha: float,
               grid: HorizontalGrid) -> np.ndarray:
    """(alpha grad^perp Lap^-1 R1 - shift).u*_par。shift は定数ベクトル (2,)。"""
    field = alpha * grid.perp_grad(inv_laplacian(R1, grid, strict=False)) - shift[:, None, None]
    return np.sum(field * ustar, axis=0)


def el_residuals(eta: np.ndarray, Phi: np.ndarray, params: PhysicalParams,
                 solver: BeltramiSolver, tol: Optional[float] = None) -> ELResiduals:
    """
    H/K 形式の残差。
      R1 = H Phi + u*.N
      R2 = |K Phi|^2/2 - (H Phi + K Phi.grad eta)^2 / (2 (1 + |grad eta|^2))
           + K Phi.u*_h + alpha (P((A_par + A*_par)^perp))^perp.u*_h + g eta - sigma div(...)
    P の平均の半分のうち A_par の分は K Phi の調和成分と打ち消し合うので、
    非局所項は alpha grad^perp Lap^-1 (R1) - harmonic - alpha mean(A*_par)/2 になります。
    R2 は eta に関する L の勾配そのものです。
    """
    grid = solver.grid
    flow = background(params)
    app = apply_H(eta, Phi, solver, tol=tol)
    Hphi, Kphi = app.Hphi, app.Kphi
    grad_eta = grid.grad_h(eta)
    ustar = flow.ustar_parallel(eta)

    R1 = _kinematic(Hphi, eta, flow, grid)
    slope = 1.0 + np.sum(grad_eta ** 2, axis=0)
    normal_part = Hphi + np.sum(Kphi * grad_eta, axis=0)
    shift = app.harmonic + 0.5 * params.alpha * grid.mean(flow.astar_parallel(eta))
    off_shell = _off_shell(R1, shift, ustar, params.alpha, grid)
    R2 = (0.5 * np.sum(Kphi ** 2, axis=0)
          - normal_part ** 2 / (2.0 * slope)
          + np.sum(Kphi * ustar, axis=0)
          + off_shell
          + params.g * eta
          - params.sigma * capillary_term(eta, grid))
    return ELResiduals(R1=R1, R2=R2)


def el_residuals_raw(eta: np.ndarray, Phi: np.ndarray, params: PhysicalParams,
                     solver: BeltramiSolver, tol: Optional[float] = None) -> ELResiduals:
    """
    ベクトルポテンシャルのトレースから直接評価する残差。
      R1 = div(A_par^perp) + div(A*_par^perp)
      R2 = v2 (-div(A_par^perp) + grad eta.u*_par) + alpha (P((A_par + A*_par)^perp))^perp.u*_par
           + |v|^2/2 + v_h.u*_par + g eta - sigma div(...),  v = curl A (y = eta)
    """
    grid = solver.grid
    flow = background(params)
    solution = solver.solve_bvp(eta, Phi, tol=tol)
    co: FlatteningCoeffs = solver.coefficients(eta)
    A = solution.A_tilde
    v = curl_eta(A, co)[:, -1]
    v_h = np.stack([v[0], v[2]])
    div_perp = parallel_perp_divergence(A, co)
    div_perp = div_perp - grid.mean(div_perp)
    ustar = flow.ustar_parallel(eta)
    grad_eta = grid.grad_h(eta)

    R1 = _kinematic(div_perp, eta, flow, grid)
    mean_par = grid.mean(tangential_parallel(A, co)) + grid.mean(flow.astar_parallel(eta))
    off_shell = _off_shell(R1, 0.5 * params.alpha * mean_par, ustar, params.alpha, grid)
    R2 = (v[1] * (-div_perp + np.sum(grad_eta * ustar, axis=0))
          + off_shell
          + 0.5 * np.sum(v ** 2, axis=0)
          + np.sum(v_h * ustar, axis=0)
          + params.g * eta
          - params.sigma * capillary_term(eta, grid))
    return ELResiduals(R1=R1, R2=R2)


# --- 勾配の整合性 ---

def first_variation(eta: np.ndarray, Phi: np.ndarray, d_eta: np.ndarray, d_Phi: np.ndarray,
                    params: PhysicalParams, solver: BeltramiSolver, tol: Optional[float] = None) -> float:
    """int (R1 dPhi + R2 deta)"""
    res = el_residuals(eta, Phi, params, solver, tol=tol)
    grid = solver.grid
    return grid.inner(res.R1, d_Phi) + grid.inner(res.R2, d_eta)


def gradient_consistency(eta: np.ndarray, Phi: np.ndarray, d_eta: np.ndarray, d_Phi: np.ndarray,
                         epsilon: float, params: PhysicalParams,
                         solver: BeltramiSolver, tol: Optional[float] = None) -> GradientCheck:
    """
    中心差分による方向微分と int (R1 dPhi + R2 deta) の比較。

    中心差分の誤差は epsilon^2 で減るので、方向 (d_eta, d_Phi) は O(1) 程度に取り、
    BVP の許容値 tol は差分の丸めに埋もれないよう厳しくします。
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ConfigError(f"epsilon={epsilon} outside [1e-6, 1e-3]")
    plus = lagrangian_surface(eta + epsilon * d_eta, Phi + epsilon * d_Phi, params, solver, tol=tol).L_surface
    minus = lagrangian_surface(eta - epsilon * d_eta, Phi - epsilon * d_Phi, params, solver, tol=tol).L_surface
    fd = (plus - minus) / (2.0 * epsilon)
    predicted = first_variation(eta, Phi, d_eta, d_Phi, params, solver, tol=tol)
    rel = abs(fd - predicted) / max(abs(fd), abs(predicted), TINY)
    logger.info("gradient check eps=%.1e: fd=%.8e predicted=%.8e rel=%.2e", epsilon, fd, predicted, rel)
    return GradientCheck(epsilon=epsilon, finite_difference=fd, predicted=predicted, relative_error=rel)
