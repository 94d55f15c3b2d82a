"""
beltrami-waves FlatSolver: 平坦な帯 D_0 上の定数係数境界値問題。

  -Lap A - alpha curl A = H                         (-h < y < 0)
  A1 = A3 = 0, A2' = 0                              (y = -h)
  A2 = g                                            (y = 0)
  curl_h A + alpha (P A_h^perp)^perp = hvec                (y = 0)

P = grad Lap^-1 div + 平均の半分 (hodge.grad_inv_div) なので、平均モードの
表面条件は (A3', -A1') - alpha A_h / 2 = hvec になります。

|k| > 0 のモードは Green 表現
  A^(y) = int G(y, zeta) H^(zeta) dzeta - G(y, 0) v^ - G_zeta(y, 0) (0, g^, 0)
  v = -(hvec^perp + grad g)
で、平均モードは Chebyshev 選点法で解き、Nyquist の行と列はゼロにします。
"""
import logging
from typing import Tuple

import numpy as np

from .errors import ZeroModeInconsistent
from .grid import HorizontalGrid, VerticalGrid
from .greens import check_alpha, eval_blocks
from .hodge import perp_grad_inv_div
from .flattening import curl_std, laplace_std
from .schema import FlatResidual, ForcingData

logger = logging.getLogger(__name__)


def _herm(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def _rms(a: np.ndarray) -> float:
    a = np.asarray(a)
    return float(np.sqrt(np.mean(np.abs(a) ** 2))) if a.size else 0.0


# --- 選点法 (|k| = 0 モードと検算用) ---

def collocation_matrix(k1: float, k3: float, alpha: float, vgrid: VerticalGrid) -> np.ndarray:
    """単一モードの 3Ny x 3Ny 選点行列。並びは成分優先 (成分 * Ny + 節点)。"""
    n = vgrid.Ny
    D, D2 = vgrid.D, vgrid.D2
    I = np.eye(n)
    ksq = k1 ** 2 + k3 ** 2
    Z = np.zeros((n, n), dtype=complex)
    L = [[Z.copy() for _ in range(3)] for _ in range(3)]
    for p in range(3):
        L[p][p] = -D2 + ksq * I
    L[0][2] = -alpha * D
    L[0][1] = alpha * 1j * k3 * I
    L[1][0] = -alpha * 1j * k3 * I
    L[1][2] = alpha * 1j * k1 * I
    L[2][1] = -alpha * 1j * k1 * I
    L[2][0] = alpha * D
    M = np.block(L).astype(complex)

    bot, top = 0, n - 1
    # 底: A1 = 0, A3 = 0, A2' = 0
    for p in (0, 2):
        M[p * n + bot] = 0.0
        M[p * n + bot, p * n + bot] = 1.0
    M[n + bot] = 0.0
    M[n + bot, n:2 * n] = D[bot]

    # 表面: A2 = g
    M[n + top] = 0.0
    M[n + top, n + top] = 1.0

    r1 = np.zeros(3 * n, dtype=complex)
    r1[2 * n:3 * n] = D[top]
    r1[n + top] += -1j * k3
    r3 = np.zeros(3 * n, dtype=complex)
    r3[0:n] = -D[top]
    r3[n + top] += 1j * k1
    if ksq > 0.0:
        r1[top] += -alpha * k3 ** 2 / ksq
        r1[2 * n + top] += alpha * k1 * k3 / ksq
        r3[top] += alpha * k1 * k3 / ksq
        r3[2 * n + top] += -alpha * k1 ** 2 / ksq
    else:
        # 平均モードでは (P A_h^perp)^perp = -A_h / 2
        r1[top] += -0.5 * alpha
        r3[2 * n + top] += -0.5 * alpha
    M[top] = r1
    M[2 * n + top] = r3
    return M


def collocation_mode_solve(k1: float, k3: float, alpha: float, vgrid: VerticalGrid,
                           H: np.ndarray, g: complex, hvec: np.ndarray) -> np.ndarray:
    """
    単一モードの二点境界値問題を選点法で解きます。

    H は (3, Ny) の係数、hvec は (2,) で、戻り値は (3, Ny)。
    """
    n = vgrid.Ny
    rhs = np.array(H, dtype=complex).reshape(3 * n)
    rhs[0] = 0.0
    rhs[2 * n] = 0.0
    rhs[n] = 0.0
    rhs[2 * n - 1] = g
    rhs[n - 1] = hvec[0]
    rhs[3 * n - 1] = hvec[1]
    sol = np.linalg.solve(collocation_matrix(k1, k3, alpha, vgrid), rhs)
    return sol.reshape(3, n)


# --- Green 表現による平坦ソルバ ---

class FlatSolver:
    """
    (grid, vgrid, alpha) ごとに Green ブロックを前計算しておき、
    同じ帯で繰り返し解くためのソルバ。

    zero_mode="accept" では hvec の平均を受け入れ、"strict" では
    ZeroModeInconsistent を送出します。
    """

    def __init__(self, grid: HorizontalGrid, vgrid: VerticalGrid, alpha: float,
                 zero_mode: str = "accept", mean_tol: float = 1e-10):
        check_alpha(alpha, vgrid.h)
        if zero_mode not in ("accept", "strict"):
            raise ValueError(f"zero_mode must be 'accept' or 'strict' (got {zero_mode!r})")
        self.grid = grid
        self.vgrid = vgrid
        self.alpha = float(alpha)
        self.zero_mode = zero_mode
        self.mean_tol = mean_tol

        self._nz = np.nonzero(~grid.zero_modes)
        k1 = grid.k1[self._nz]
        k3 = grid.k3[self._nz]
        self.k1, self.k3 = k1, k3

        blocks = eval_blocks(k1, k3, self.alpha, vgrid.h, vgrid.y)
        self.blocks = blocks
        C = blocks.C[:, None]
        self._WC = blocks.W @ C
        self._UCH = blocks.U @ _herm(C)
        self._UH = _herm(blocks.U)
        self._WH = _herm(blocks.W)
        # G(y, 0) と G_zeta(y, 0)
        self._G_top = self._UCH @ _herm(blocks.W[:, -1])[:, None]
        self._Gz_top = self._UCH @ _herm(blocks.dW[:, -1])[:, None]

        self._mean_op = np.linalg.inv(collocation_matrix(0.0, 0.0, self.alpha, vgrid))
        logger.debug("FlatSolver: %d Green modes, %d Nyquist modes zeroed, alpha=%g",
                     k1.size, int(np.count_nonzero(grid.nyquist_modes)), self.alpha)

    # --- スペクトル配列の出し入れ ---

    def _gather(self, Fh: np.ndarray) -> np.ndarray:
        """(3, Ny, Nx, Nzh) -> (Nk, Ny, 3)"""
        return np.transpose(Fh[:, :, self._nz[0], self._nz[1]], (2, 1, 0))

    def _scatter(self, Ak: np.ndarray, out: np.ndarray = None) -> np.ndarray:
        if out is None:
            out = np.zeros((3, self.vgrid.Ny) + self.grid.spectral_shape, dtype=complex)
        out[:, :, self._nz[0], self._nz[1]] = np.transpose(Ak, (2, 1, 0))
        return out

    def _surface_vector_hat(self, hvec_hat: np.ndarray, g_hat: np.ndarray) -> np.ndarray:
        """v^ = (h3^ - i k1 g^, 0, -h1^ - i k3 g^) を (Nk, 3) で。"""
        k1, k3 = self.grid.k1, self.grid.k3
        vx = hvec_hat[1] - 1j * k1 * g_hat
        vz = -hvec_hat[0] - 1j * k3 * g_hat
        vk = np.zeros((self.k1.size, 3), dtype=complex)
        vk[:, 0] = vx[self._nz]
        vk[:, 2] = vz[self._nz]
        return vk

    # --- 三つの解写像 ---

    def _g1_modes(self, Hh: np.ndarray) -> np.ndarray:
        Hk = self._gather(Hh)
        Q, w = self.vgrid.cumulative, self.vgrid.weights
        a = np.einsum("kyij,kyj->kyi", self._UH, Hk)
        lower = np.einsum("yz,kzi->kyi", Q, a)
        b = np.einsum("kyij,kyj->kyi", self._WH, Hk)
        upper = np.einsum("z,kzi->ki", w, b)[:, None, :] - np.einsum("yz,kzi->kyi", Q, b)
        return (np.einsum("kyij,kyj->kyi", self._WC, lower)
                + np.einsum("kyij,kyj->kyi", self._UCH, upper))

    def _g2_modes(self, vk: np.ndarray) -> np.ndarray:
        return np.einsum("kyij,kj->kyi", self._G_top, vk)

    def _g3_modes(self, g_hat: np.ndarray) -> np.ndarray:
        gk = np.zeros((self.k1.size, 3), dtype=complex)
        gk[:, 1] = g_hat[self._nz]
        return np.einsum("kyij,kj->kyi", self._Gz_top, gk)

    def _to_physical(self, Ak: np.ndarray) -> np.ndarray:
        return self.grid.fft_inverse(self._scatter(Ak))

    def g1(self, H: np.ndarray) -> np.ndarray:
        """int G H dzeta (|k| > 0 のモードのみ)。"""
        return self._to_physical(self._g1_modes(self.grid.fft_forward(H)))

    def g2(self, v: np.ndarray) -> np.ndarray:
        """G(y, 0) (v_x, 0, v_z)。v は (2, Nx, Nz) の表面ベクトル。"""
        vh = self.grid.fft_forward(v)
        vk = np.zeros((self.k1.size, 3), dtype=complex)
        vk[:, 0] = vh[0][self._nz]
        vk[:, 2] = vh[1][self._nz]
        return self._to_physical(self._g2_modes(vk))

    def g3(self, g: np.ndarray) -> np.ndarray:
        """G_zeta(y, 0) (0, g, 0)。"""
        return self._to_physical(self._g3_modes(self.grid.fft_forward(g)))

    def surface_vector(self, hvec: np.ndarray, g: np.ndarray) -> np.ndarray:
        """v = -(hvec^perp + grad g) = (h3 - g_x, -h1 - g_z)。"""
        grad_g = self.grid.grad_h(g)
        return np.stack([hvec[1] - grad_g[0], -hvec[0] - grad_g[1]])

    # --- ゼロモード ---

    def _check_zero_mode(self, hvec_hat: np.ndarray, hvec: np.ndarray) -> None:
        if self.zero_mode != "strict":
            return
        scale = max(_rms(hvec), np.finfo(float).tiny)
        mean = np.abs(hvec_hat[:, 0, 0])
        if np.any(mean > self.mean_tol * scale):
            raise ZeroModeInconsistent(
                f"mean of hvec is ({hvec_hat[0, 0, 0].real:.3e}, {hvec_hat[1, 0, 0].real:.3e})")

    def _mean_mode_into(self, out: np.ndarray, Hh, g_hat, hvec_hat) -> None:
        n = self.vgrid.Ny
        rhs = np.array(Hh[:, :, 0, 0], dtype=complex).reshape(3 * n)
        rhs[0] = 0.0
        rhs[n] = 0.0
        rhs[2 * n] = 0.0
        rhs[2 * n - 1] = g_hat[0, 0]
        rhs[n - 1] = hvec_hat[0, 0, 0]
        rhs[3 * n - 1] = hvec_hat[1, 0, 0]
        out[:, :, 0, 0] = (self._mean_op @ rhs).reshape(3, n)

    # --- 全体 ---

    def solve(self, data: ForcingData) -> np.ndarray:
        grid = self.grid
        Hh = grid.fft_forward(data.H)
        g_hat = grid.fft_forward(data.g)
        hvec_hat = grid.fft_forward(data.hvec)
        self._check_zero_mode(hvec_hat, data.hvec)

        vk = self._surface_vector_hat(hvec_hat, g_hat)
        Ak = self._g1_modes(Hh) - self._g2_modes(vk) - self._g3_modes(g_hat)
        # Nyquist の行と列は _scatter で書かれずゼロのまま残る
        out = self._scatter(Ak)
        self._mean_mode_into(out, Hh, g_hat, hvec_hat)
        return grid.fft_inverse(out)


def solve_flat(data: ForcingData, alpha: float, grid: HorizontalGrid, vgrid: VerticalGrid,
               zero_mode: str = "accept") -> np.ndarray:
    return FlatSolver(grid, vgrid, alpha, zero_mode=zero_mode).solve(data)


# --- 残差 ---

def surface_operator_std(A: np.ndarray, alpha: float, grid: HorizontalGrid,
                         vgrid: VerticalGrid) -> np.ndarray:
    """y = 0 での curl_h A + alpha (P A_h^perp)^perp。"""
    curl_top = curl_std(A, grid, vgrid)[:, -1]
    A_h = np.stack([A[0, -1], A[2, -1]])
    nonlocal_term = perp_grad_inv_div(grid.perp(A_h), grid)
    return np.stack([curl_top[0], curl_top[2]]) + alpha * nonlocal_term


def residual_flat(A: np.ndarray, data: ForcingData, alpha: float, grid: HorizontalGrid,
                  vgrid: VerticalGrid) -> FlatResidual:
    """各条件の RMS。体積方程式は内部節点だけで評価します。"""
    pde = -laplace_std(A, grid, vgrid) - alpha * curl_std(A, grid, vgrid) - data.H
    dA2 = vgrid.dy(A[1])
    bottom = np.stack([A[0, 0], A[2, 0], dA2[0]])
    surface_h = surface_operator_std(A, alpha, grid, vgrid) - data.hvec
    surface = np.concatenate([(A[1, -1] - data.g)[None], surface_h])
    return FlatResidual(
        pde_res=_rms(pde[:, 1:-1]),
        bottom_res=_rms(bottom),
        surface_res=_rms(surface),
    )


def split_forcing(data: ForcingData) -> Tuple[ForcingData, ForcingData]:
    """(H のみ, 境界データのみ) に分けます。線形性の確認用。"""
    zero_h = np.zeros_like(data.H)
    return (
        ForcingData(H=data.H, g=np.zeros_like(data.g), hvec=np.zeros_like(data.hvec)),
        ForcingData(H=zero_h, g=data.g, hvec=data.hvec),
    )
