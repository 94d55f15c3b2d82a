"""
beltrami-waves Hodge-Weyl: 二次元逆ラプラシアンと Hodge-Weyl 分解。

周期箱では k = 0 の調和成分 (定数) が R^2 と異なり残るため、
それは HodgeParts.mean として別に保持します。境界条件に現れる
grad Lap^-1 div は、その平均を勾配側と直交勾配側に半分ずつ配ります。
"""
import numpy as np

from .errors import NonZeroMean
from .grid import HorizontalGrid
from .schema import HodgeParts


def inv_laplacian(f: np.ndarray, grid: HorizontalGrid, strict: bool = True,
                  tol: float = 1e-12) -> np.ndarray:
    """
    シンボル -1/|k|^2 による Lap^-1。

    strict=True では入力の平均がゼロでなければ NonZeroMean を送出し、
    strict=False では平均を黙って捨てます (内部の発散量に使う)。
    """
    fh = grid.fft_forward(f)
    if strict:
        scale = max(float(np.sqrt(np.mean(np.square(f)))), np.finfo(float).tiny)
        mean = np.abs(fh[..., 0, 0])
        if np.any(mean > tol * scale):
            raise NonZeroMean(f"k = 0 coefficient {float(np.max(mean)):.3e} exceeds {tol:g} x norm")
    return grid.fft_inverse(fh * grid.inv_laplacian_symbol)


def hodge_decompose(f: np.ndarray, grid: HorizontalGrid) -> HodgeParts:
    """f = grad(phi) + grad^perp(psi) + mean"""
    fh = grid.fft_forward(f)
    div_hat = 1j * grid.k1 * fh[0] + 1j * grid.k3 * fh[1]
    # grad^perp . f = -d_z f1 + d_x f3
    curl_hat = -1j * grid.k3 * fh[0] + 1j * grid.k1 * fh[1]
    phi = grid.fft_inverse(div_hat * grid.inv_laplacian_symbol)
    psi = grid.fft_inverse(curl_hat * grid.inv_laplacian_symbol)
    return HodgeParts(phi=phi, psi=psi, mean=np.real(fh[:, 0, 0]).copy())


def grad_part(f: np.ndarray, grid: HorizontalGrid) -> np.ndarray:
    return grid.grad_h(hodge_decompose(f, grid).phi)


def perp_grad_part(f: np.ndarray, grid: HorizontalGrid) -> np.ndarray:
    return grid.perp_grad(hodge_decompose(f, grid).psi)


def reconstruct(parts: HodgeParts, grid: HorizontalGrid) -> np.ndarray:
    return grid.grad_h(parts.phi) + grid.perp_grad(parts.psi) + parts.mean[:, None, None]


def grad_inv_div(f: np.ndarray, grid: HorizontalGrid) -> np.ndarray:
    """
    周期箱上の射影 P f = grad Lap^-1 (div f) + mean(f)/2。境界項に現れる形。

    平均の半分を勾配側に、残り半分を直交勾配側に割り振ると
      int P(g^perp).f - int P(f^perp).g = int f.g^perp
    が平均ゼロでない f, g でも成り立ち、P 自身も対称のままです。
    """
    half_mean = 0.5 * grid.mean(f)[..., None, None]
    return grid.grad_h(inv_laplacian(grid.div_h(f), grid, strict=False)) + half_mean


def perp_grad_inv_div(f: np.ndarray, grid: HorizontalGrid) -> np.ndarray:
    """(P f)^perp = grad^perp Lap^-1 (div f) + mean(f)^perp / 2"""
    return grid.perp(grad_inv_div(f, grid))
