"""
beltrami-waves SurfaceOperator: 非局所作用素 H(eta), K(eta) と渦なし極限 G(eta)。

H(eta) Phi = div(A_par^perp) (y = 0)
K(eta) Phi = grad Phi - alpha grad^perp Lap^-1 (H(eta) Phi) + alpha mean(A_par)/2
"""
import logging
from typing import List, Optional, Tuple

import numpy as np

from .bvp import BeltramiSolver, parallel_perp, parallel_perp_divergence
from .errors import NoConvergence
from .flattening import (FlatteningCoeffs, curl_eta, grad_eta_op, laplace_eta, laplace_std,
                         normal_trace, tangential_parallel)
from .grid import HorizontalGrid, VerticalGrid
from .hodge import grad_inv_div, inv_laplacian
from .schema import EnergyIdentity, OperatorApplication

logger = logging.getLogger(__name__)

TINY = np.finfo(float).tiny


# --- H と K ---

def apply_H(eta: np.ndarray, Phi: np.ndarray, solver: BeltramiSolver,
            tol: Optional[float] = None) -> OperatorApplication:
    """
    H(eta) Phi と K(eta) Phi。

    周期箱では表面速度 (curl^eta A)_par に定数の調和成分 alpha mean(A_par)/2 が残るので、
    K(eta) Phi はそれを含めた表面速度そのものです。
    """
    grid = solver.grid
    solution = solver.solve_bvp(eta, Phi, tol=tol)
    co = solver.coefficients(eta)
    Hphi = parallel_perp_divergence(solution.A_tilde, co)
    Hphi = Hphi - grid.mean(Hphi)
    psi = -solver.alpha * inv_laplacian(Hphi, grid, strict=False)
    harmonic = 0.5 * solver.alpha * grid.mean(tangential_parallel(solution.A_tilde, co))
    Kphi = grid.grad_h(Phi) + grid.perp_grad(psi) + harmonic[:, None, None]
    return OperatorApplication(Hphi=Hphi, Kphi=Kphi, psi=psi, harmonic=harmonic, solution=solution)


def apply_K(eta: np.ndarray, Phi: np.ndarray, solver: BeltramiSolver) -> np.ndarray:
    return apply_H(eta, Phi, solver).Kphi


def hphi_from_normal_curl(A: np.ndarray, co: FlatteningCoeffs) -> np.ndarray:
    """(curl^eta A).N (y = 0)。div(A_par^perp) と一致するはずの別経路。"""
    return normal_trace(curl_eta(A, co), co)


# --- 行列表現 ---

def mode_basis(grid: HorizontalGrid, max_mode: Optional[int] = None) -> List[Tuple[int, int, str]]:
    """
    平均ゼロの実 cos/sin 基底。波数格子の半分 (n > 0、または n = 0 かつ m > 0) を使い、
    Nyquist モードは除きます。
    """
    limit_m = grid.Nx // 2 - 1
    limit_n = grid.Nz // 2 - 1
    if max_mode is not None:
        limit_m = min(limit_m, max_mode)
        limit_n = min(limit_n, max_mode)
    modes = []
    for m in range(-limit_m, limit_m + 1):
        for n in range(0, limit_n + 1):
            if n == 0 and m <= 0:
                continue
            modes.append((m, n, "cos"))
            modes.append((m, n, "sin"))
    return modes


def basis_function(grid: HorizontalGrid, mode: Tuple[int, int, str]) -> np.ndarray:
    m, n, kind = mode
    phase = 0.0 if kind == "cos" else -0.5 * np.pi
    return np.sqrt(2.0 / grid.area) * grid.mode(m, n, phase)


def assemble_H_matrix(eta: np.ndarray, solver: BeltramiSolver,
                      max_mode: Optional[int] = None) -> Tuple[np.ndarray, List[Tuple[int, int, str]]]:
    """M_ij = <b_i, H(eta) b_j> の Galerkin 行列。列ごとに BVP を 1 回解きます。"""
    grid = solver.grid
    modes = mode_basis(grid, max_mode)
    basis = np.stack([basis_function(grid, mode) for mode in modes])
    M = np.empty((len(modes), len(modes)))
    for j, b in enumerate(basis):
        Hb = apply_H(eta, b, solver).Hphi
        M[:, j] = [grid.inner(bi, Hb) for bi in basis]
        logger.debug("assemble_H_matrix: column %d/%d", j + 1, len(modes))
    return M, modes


def symmetry_defect(M: np.ndarray) -> float:
    return float(np.linalg.norm(M - M.T) / max(np.linalg.norm(M), TINY))


# --- エネルギー恒等式 ---

def _volume_pairing(B: np.ndarray, C: np.ndarray, co: FlatteningCoeffs, alpha: float):
    curl_B = curl_eta(B, co)
    curl_C = curl_eta(C, co)
    cc = co.volume_integral(np.sum(curl_B * curl_C, axis=0))
    bc = co.volume_integral(np.sum(curl_B * C, axis=0))
    cb = co.volume_integral(np.sum(curl_C * B, axis=0))
    return cc, bc, cb


def energy_identity_check(eta: np.ndarray, Phi1: np.ndarray, Phi2: np.ndarray,
                          solver: BeltramiSolver) -> EnergyIdentity:
    """
    int Phi1 H Phi2 を体積表現
      int curl B.curl C - alpha/2 int (curl B.C + curl C.B)
        - alpha/2 int (P(B_par^perp).C_par + P(C_par^perp).B_par)
    と比べます (B, C はそれぞれ Phi1, Phi2 の解、P = hodge.grad_inv_div)。
    片側表現 int curl B.curl C - alpha int curl B.C - alpha int P(B_par^perp).C_par
    もあわせて返します。
    """
    grid = solver.grid
    alpha = solver.alpha
    co = solver.coefficients(eta)
    app1 = apply_H(eta, Phi1, solver)
    app2 = apply_H(eta, Phi2, solver)
    B = app1.solution.A_tilde
    C = app2.solution.A_tilde

    lhs = grid.inner(Phi1, app2.Hphi)
    cc, bc, cb = _volume_pairing(B, C, co, alpha)
    B_par = tangential_parallel(B, co)
    C_par = tangential_parallel(C, co)
    cross1 = -grid.inner(grad_inv_div(parallel_perp(B, co), grid), C_par)
    cross2 = -grid.inner(grad_inv_div(parallel_perp(C, co), grid), B_par)

    symmetric = cc - 0.5 * alpha * (bc + cb) + 0.5 * alpha * (cross1 + cross2)
    one_sided = cc - alpha * bc + alpha * cross1
    scale = abs(lhs) + abs(cc) + abs(alpha) * (abs(bc) + abs(cb) + abs(cross1) + abs(cross2)) + TINY
    result = EnergyIdentity(
        lhs=lhs, symmetric=symmetric, one_sided=one_sided,
        relative_residual=abs(lhs - symmetric) / scale,
        asymmetry=abs(one_sided - symmetric) / scale,
    )
    logger.info("energy identity: lhs=%.6e symmetric=%.6e residual=%.2e",
                lhs, symmetric, result.relative_residual)
    return result


# --- 平坦状態のシンボル ---

def flat_symbol(solver: BeltramiSolver) -> np.ndarray:
    """
    H(0) の Fourier 乗数 h(k) (形状は grid.spectral_shape)。
    原点のインパルスを 1 回解いて求めます。
    """
    grid = solver.grid
    impulse = np.zeros(grid.shape)
    impulse[0, 0] = 1.0
    impulse -= grid.mean(impulse)
    Hphi = apply_H(np.zeros(grid.shape), impulse, solver).Hphi
    Ph = grid.fft_forward(impulse)
    Hh = grid.fft_forward(Hphi)
    symbol = np.where(grid.zero_modes, 0.0, np.real(Hh / np.where(grid.zero_modes, 1.0, Ph)))
    return symbol


# --- 渦なし極限 G(eta) ---

class ScalarLaplaceSolver:
    """
    帯 D_0 上の -Lap phi = F, phi_y(-h) = 0, phi(0) = Phi を
    モードごとの Chebyshev 選点法で解きます。
    """

    def __init__(self, grid: HorizontalGrid, vgrid: VerticalGrid):
        self.grid = grid
        self.vgrid = vgrid
        n = vgrid.Ny
        base = -vgrid.D2[None, None] + grid.ksq[..., None, None] * np.eye(n)
        base = np.array(base)
        base[..., 0, :] = vgrid.D[0]
        base[..., -1, :] = 0.0
        base[..., -1, -1] = 1.0
        self._inv = np.linalg.inv(base)

    def solve(self, F: np.ndarray, Phi: np.ndarray) -> np.ndarray:
        Fh = np.moveaxis(self.grid.fft_forward(F), 0, -1)
        Fh[..., 0] = 0.0
        Fh[..., -1] = self.grid.fft_forward(Phi)
        sol = np.einsum("abij,abj->abi", self._inv, Fh)
        return self.grid.fft_inverse(np.moveaxis(sol, -1, 0))


def apply_G(eta: np.ndarray, Phi: np.ndarray, grid: HorizontalGrid, vgrid: VerticalGrid,
            tol: float = 1e-10, maxit: int = 100, h_min_ratio: float = 0.1,
            laplace: Optional[ScalarLaplaceSolver] = None) -> np.ndarray:
    """
    Dirichlet-Neumann 作用素 G(eta) Phi = (grad^eta phi).N (y = 0)。
    Lap^eta phi = 0 を -Lap phi = Lap^eta phi - Lap phi の不動点反復で解きます。
    """
    co = FlatteningCoeffs(eta, grid, vgrid, h_min_ratio)
    laplace = laplace or ScalarLaplaceSolver(grid, vgrid)
    zeros = np.zeros((vgrid.Ny,) + grid.shape)
    phi = laplace.solve(zeros, Phi)
    if not co.is_flat:
        for it in range(1, maxit + 1):
            forcing = laplace_eta(phi, co) - laplace_std(phi, grid, vgrid)
            phi_new = laplace.solve(forcing, Phi)
            corr = float(np.linalg.norm(phi_new - phi)) / max(float(np.linalg.norm(phi_new)), TINY)
            phi = phi_new
            logger.debug("apply_G iteration %d: correction=%.3e", it, corr)
            if not np.isfinite(corr) or corr > 1e6:
                raise NoConvergence(f"scalar Laplace iteration diverged at iteration {it}", corr)
            if corr <= tol:
                break
        else:
            raise NoConvergence(f"scalar Laplace iteration: no convergence within {maxit} iterations", corr)
    return normal_trace(grad_eta_op(phi, co), co)
