"""
beltrami-waves Greens: 波数ごとの Green 行列。

各水平波数 k について、帯 [-h, 0] 上の 3x3 常微分作用素
  L[A] = -A'' + |k|^2 A - alpha curl_k A,
  curl_k A = (A3' - i k3 A2, i k3 A1 - i k1 A3, i k1 A2 - A1')
の基本解を扱います。

  U(t), t = y + h : 底の条件 A1 = A3 = 0, A2' = 0 を満たす 3 本の解
  W(y)            : 表面の条件 A2 = 0, curl_h A + alpha grad^perp Lap^-1 div(A_h^perp) = 0
                    を満たす 3 本の解

各列は閉じた形の Cauchy データから 6x6 の一階系の行列指数関数で伝播させます。
C は y = zeta = 0 での連続条件と跳び条件 (-I) から数値的に定めます。
"""
import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import expm

from .errors import AlphaTooLarge, GridError, ZeroWavenumber
from .schema import EstimateResult, GreensBlocks, ScalarKernels

logger = logging.getLogger(__name__)

ALPHA_MARGIN = 1e-6
MAX_KH = 60.0


def check_alpha(alpha: float, h: float) -> None:
    if abs(alpha) * h >= np.pi / 2 - ALPHA_MARGIN:
        raise AlphaTooLarge(alpha, h)


# --- スカラー核 ---

def _branch_pair(lam: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """cosh(sqrt(lam) y) と sinh(sqrt(lam) y)/sqrt(lam) (lam < 0 では cos, sin)。"""
    lam = np.asarray(lam, dtype=float)
    y = np.asarray(y, dtype=float)
    kappa = np.sqrt(np.abs(lam))
    arg = kappa * y
    pos = lam >= 0
    c = np.where(pos, np.cosh(arg), np.cos(arg))
    small = np.abs(arg) < 1e-8
    safe = np.where(small, 1.0, arg)
    sinhc = np.where(small, 1.0 + arg ** 2 / 6.0, np.sinh(safe) / safe)
    sinc = np.sinc(arg / np.pi)
    s1 = y * np.where(pos, sinhc, sinc)
    return c, s1


def eval_scalar_kernels(kmag, alpha: float, y, h: Optional[float] = None) -> ScalarKernels:
    """
    c(y), s1(y), s2(y) と s, t1, t2 を評価します。

    kmag は (Nk,)、y は (Ny,) で、結果は (Nk, Ny) です。
    定数 s, t1, t2 は深さ h (既定では -y の最大値) で評価します。
    """
    kmag = np.atleast_1d(np.asarray(kmag, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if h is None:
        h = float(np.max(np.abs(y)))
    check_alpha(alpha, h)

    lam = kmag ** 2 - alpha ** 2
    c, s1 = _branch_pair(lam[:, None], y[None, :])
    ch, sh = _branch_pair(lam, np.full_like(lam, h))
    return ScalarKernels(
        c=c, s1=s1, s2=lam[:, None] * s1,
        s=1.0 / ch, t1=sh / ch, t2=lam * sh / ch,
    )


def divided_differences(kmag, alpha: float, y) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    lam = |k|^2 - alpha^2 と |k|^2 の間の一階差分商
      D1C = (cosh(sqrt(lam) y) - cosh(|k| y)) / (lam - |k|^2)
      D1S = (s1 - sinh(|k| y)/|k|) / (lam - |k|^2)
      D1T = (lam s1 - |k| sinh(|k| y)) / (lam - |k|^2)
    を冪級数で求めます。alpha -> 0 や |k| = alpha でも桁落ちしません。
    """
    kmag = np.atleast_1d(np.asarray(kmag, dtype=float))[:, None]
    y = np.atleast_1d(np.asarray(y, dtype=float))[None, :]
    mu0 = kmag ** 2 * y ** 2
    mu1 = (kmag ** 2 - alpha ** 2) * y ** 2
    n_terms = int(20 + 2.5 * np.sqrt(max(float(np.max(np.abs(mu0))), float(np.max(np.abs(mu1))), 0.0)))

    def series(a1, rho):
        P = np.full(np.broadcast(mu0, mu1).shape, a1)
        B = P.copy()
        total = P.copy()
        for n in range(2, n_terms + 1):
            r = rho(n)
            P = r * (mu1 * P + mu0 * B)
            B = r * mu0 * B
            total = total + P
        return total

    d1c = y ** 2 * series(0.5, lambda n: 1.0 / ((2 * n) * (2 * n - 1)))
    d1s = y ** 3 * series(1.0 / 6.0, lambda n: 1.0 / ((2 * n + 1) * (2 * n)))
    d1t = y * series(1.0, lambda n: 1.0 / ((2 * n - 1) * (2 * n - 2)))
    return d1c, d1s, d1t


# --- 基本行列 ---

def system_matrix(k1, k3, alpha: float) -> np.ndarray:
    """Y = (A, A') に対する一階系 Y' = M Y の M。形状 (Nk, 6, 6)。"""
    k1 = np.atleast_1d(np.asarray(k1, dtype=float))
    k3 = np.atleast_1d(np.asarray(k3, dtype=float))
    nk = k1.shape[0]
    ksq = k1 ** 2 + k3 ** 2
    M = np.zeros((nk, 6, 6), dtype=complex)
    M[:, 0:3, 3:6] = np.eye(3)

    curl0 = np.zeros((nk, 3, 3), dtype=complex)
    curl0[:, 0, 1] = -1j * k3
    curl0[:, 1, 0] = 1j * k3
    curl0[:, 1, 2] = -1j * k1
    curl0[:, 2, 1] = 1j * k1
    M[:, 3:6, 0:3] = ksq[:, None, None] * np.eye(3) - alpha * curl0
    # curl の A' 部分: (A3', 0, -A1')
    M[:, 3, 5] = -alpha
    M[:, 5, 3] = alpha
    return M


def bottom_cauchy_data(k1, k3) -> np.ndarray:
    """t = 0 での U の Cauchy データ (A; A')。形状 (Nk, 6, 3)。"""
    k1 = np.atleast_1d(np.asarray(k1, dtype=float))
    k3 = np.atleast_1d(np.asarray(k3, dtype=float))
    Y = np.zeros((k1.shape[0], 6, 3), dtype=complex)
    # grad(sinh(|k| t)/|k|)
    Y[:, 1, 0] = 1.0
    Y[:, 3, 0] = 1j * k1
    Y[:, 5, 0] = 1j * k3
    Y[:, 3, 1] = k3
    Y[:, 5, 1] = -k1
    Y[:, 3, 2] = -1j * k1
    Y[:, 5, 2] = -1j * k3
    return Y


def top_cauchy_data(k1, k3, alpha: float) -> np.ndarray:
    """y = 0 での W の Cauchy データ (A; A')。形状 (Nk, 6, 3)。"""
    k1 = np.atleast_1d(np.asarray(k1, dtype=float))
    k3 = np.atleast_1d(np.asarray(k3, dtype=float))
    K = np.sqrt(k1 ** 2 + k3 ** 2)
    Y = np.zeros((k1.shape[0], 6, 3), dtype=complex)
    # grad(cosh(|k| y)/|k|)
    Y[:, 0, 0] = 1j * k1 / K
    Y[:, 2, 0] = 1j * k3 / K
    Y[:, 4, 0] = K
    Y[:, 0, 1] = -1j * k3 / K
    Y[:, 2, 1] = 1j * k1 / K
    Y[:, 3, 1] = -1j * alpha * k1 / K
    Y[:, 5, 1] = -1j * alpha * k3 / K
    Y[:, 0, 2] = k1 / (2 * K)
    Y[:, 2, 2] = k3 / (2 * K)
    Y[:, 4, 2] = 0.5j * K
    return Y


def propagate(M: np.ndarray, Y0: np.ndarray, points) -> Tuple[np.ndarray, np.ndarray]:
    """exp(M s) Y0 を点 s ごとに。戻り値は (F, F')、形状 (Nk, Np, 3, 3)。"""
    points = np.atleast_1d(np.asarray(points, dtype=float))
    E = expm(M[:, None, :, :] * points[None, :, None, None])
    Y = E @ Y0[:, None, :, :]
    return Y[..., 0:3, :], Y[..., 3:6, :]


def _connection_matrix(U_h, dU_h, W_0, dW_0) -> np.ndarray:
    """
    W(0) X = U(h) Y, W'(0) X - U'(h) Y = -I を解き、X = C U(h)^H から C を得ます。
    """
    nk = U_h.shape[0]
    lhs = np.zeros((nk, 6, 6), dtype=complex)
    lhs[:, 0:3, 0:3] = U_h
    lhs[:, 0:3, 3:6] = -W_0
    lhs[:, 3:6, 0:3] = dU_h
    lhs[:, 3:6, 3:6] = -dW_0
    rhs = np.zeros((nk, 6, 3), dtype=complex)
    rhs[:, 3:6, :] = np.eye(3)
    sol = np.linalg.solve(lhs, rhs)
    X = sol[:, 3:6, :]
    CH = np.linalg.solve(U_h, np.conj(np.swapaxes(X, -1, -2)))
    return np.conj(np.swapaxes(CH, -1, -2))


def eval_blocks(k1, k3, alpha: float, h: float, y) -> GreensBlocks:
    """鉛直節点 y 上の U(y+h), W(y) とその導関数、および C。"""
    k1 = np.atleast_1d(np.asarray(k1, dtype=float))
    k3 = np.atleast_1d(np.asarray(k3, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    check_alpha(alpha, h)
    K = np.sqrt(k1 ** 2 + k3 ** 2)
    if np.any(K == 0.0):
        raise ZeroWavenumber("C is singular at k = 0; the zero mode is solved separately")
    if float(np.max(K)) * h > MAX_KH:
        raise GridError(f"|k|_max h = {float(np.max(K)) * h:.3g} exceeds {MAX_KH:g}")

    M = system_matrix(k1, k3, alpha)
    Yu = bottom_cauchy_data(k1, k3)
    Yw = top_cauchy_data(k1, k3, alpha)
    U, dU = propagate(M, Yu, y + h)
    W, dW = propagate(M, Yw, y)

    U_h, dU_h = propagate(M, Yu, [h])
    C = _connection_matrix(U_h[:, 0], dU_h[:, 0], Yw[:, 0:3, :], Yw[:, 3:6, :])
    logger.debug("eval_blocks: %d modes, %d nodes, max|C| = %.3e", k1.size, y.size, float(np.max(np.abs(C))))

    return GreensBlocks(
        k1=k1, k3=k3, alpha=float(alpha), h=float(h), y=y,
        U=U, dU=dU, W=W, dW=dW, C=C,
        kernels=eval_scalar_kernels(K, alpha, y, h=h),
    )


def closed_form_blocks(k1, k3, alpha: float, h: float, y) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    U(y+h), W(y), C の閉じた形。戻り値の形状は eval_blocks と同じです。

    c(y) - cosh(|k| y) などの差は divided_differences の差分商で書くので、
    alpha -> 0 でも alpha で割る箇所がありません。
    u32 の最後の項は -k1 sinh(|k| t)/|k|、c21 の第 2 項は -|k| sech (t1 - tanh/|k|) / alpha です
    (どちらも t = 0 の Cauchy データと接続条件から決まる符号)。
    """
    k1 = np.atleast_1d(np.asarray(k1, dtype=float))
    k3 = np.atleast_1d(np.asarray(k3, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    check_alpha(alpha, h)
    K = np.sqrt(k1 ** 2 + k3 ** 2)
    if np.any(K == 0.0):
        raise ZeroWavenumber("closed forms are singular at k = 0")
    a = float(alpha)
    nk, ny = K.size, y.size
    Kc, p, q = K[:, None], k1[:, None], k3[:, None]

    t = y + h
    d1c, d1s, d1t = divided_differences(K, a, t)
    ch, sh = np.cosh(Kc * t), np.sinh(Kc * t)
    U = np.zeros((nk, ny, 3, 3), dtype=complex)
    U[..., 0, 0] = 1j * p * sh / Kc
    U[..., 0, 1] = p * a * d1c - q * a ** 2 * d1s + q * sh / Kc
    U[..., 0, 2] = 1j * q * a * d1c - 0.5j * p * sh / Kc + 1j * p * (-d1t + 0.5 * t * ch)
    U[..., 1, 0] = ch
    U[..., 1, 1] = -1j * Kc ** 2 * a * d1s
    U[..., 1, 2] = Kc ** 2 * (-d1c + 0.5 * t * sh / Kc)
    U[..., 2, 0] = 1j * q * sh / Kc
    U[..., 2, 1] = q * a * d1c + p * a ** 2 * d1s - p * sh / Kc
    U[..., 2, 2] = -1j * p * a * d1c - 0.5j * q * sh / Kc + 1j * q * (-d1t + 0.5 * t * ch)

    d1c, d1s, d1t = divided_differences(K, a, y)
    ch, sh = np.cosh(Kc * y), np.sinh(Kc * y)
    W = np.zeros((nk, ny, 3, 3), dtype=complex)
    W[..., 0, 0] = 1j * p * ch / Kc
    W[..., 0, 1] = 1j * q * a ** 2 * d1c / Kc - 1j * q * ch / Kc - 1j * p * a * d1t / Kc
    W[..., 0, 2] = 0.5 * p * ch / Kc - Kc * q * a * d1s - Kc * p * (-d1c + 0.5 * y * sh / Kc)
    W[..., 1, 0] = sh
    W[..., 1, 1] = -Kc * a * d1c
    W[..., 1, 2] = 1j * Kc ** 3 * (-d1s + 0.5 * y * ch / Kc ** 2)
    W[..., 2, 0] = 1j * q * ch / Kc
    W[..., 2, 1] = -1j * p * a ** 2 * d1c / Kc + 1j * p * ch / Kc - 1j * q * a * d1t / Kc
    W[..., 2, 2] = 0.5 * q * ch / Kc + Kc * p * a * d1s - Kc * q * (-d1c + 0.5 * y * sh / Kc)

    # 定数 s, t1, t2 の sech, tanh/|k|, |k| tanh からのずれを alpha^2 で割ったもの
    d1c, d1s, d1t = (d[:, 0] for d in divided_differences(K, a, [h]))
    sig = 1.0 / np.cosh(K * h)
    tau = np.tanh(K * h)
    s = 1.0 / (np.cosh(K * h) - a ** 2 * d1c)
    ds = d1c * s * sig
    dt1 = s * (d1c * tau / K - d1s)
    dt2 = s * (d1c * K * tau - d1t)
    C = np.zeros((nk, 3, 3), dtype=complex)
    C[:, 0, 0] = (-0.5 * sig / K + K * ds + 0.5 * h * sig * tau - 2.0 * K * tau ** 2 * ds
                  + 2.0 * sig * tau * dt2 + a ** 2 * sig * tau * dt1 + sig * tau ** 2 / K)
    C[:, 0, 1] = 1j * a * (-tau * ds + sig * dt2 / K)
    C[:, 0, 2] = -sig / K
    C[:, 1, 0] = a * (tau * ds - K * sig * dt1)
    C[:, 1, 1] = 1j * s / K
    C[:, 2, 0] = 1j * sig / K
    return U, W, C


def _herm(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def greens_G(blocks: GreensBlocks, y: float, zeta: float, index: int = 0,
             branch: str = "auto") -> np.ndarray:
    """
    G(y, zeta) を 1 つの波数について評価します。

    branch="lower" は W(y) C U(zeta+h)^H、"upper" は U(y+h) C^H W(zeta)^H を
    強制します。"auto" は zeta <= y なら前者を選びます。
    """
    k1 = blocks.k1[index:index + 1]
    k3 = blocks.k3[index:index + 1]
    M = system_matrix(k1, k3, blocks.alpha)
    Yu = bottom_cauchy_data(k1, k3)
    Yw = top_cauchy_data(k1, k3, blocks.alpha)
    C = blocks.C[index]
    if branch == "auto":
        branch = "lower" if zeta <= y else "upper"
    if branch == "lower":
        W, _ = propagate(M, Yw, [y])
        U, _ = propagate(M, Yu, [zeta + blocks.h])
        return W[0, 0] @ C @ _herm(U[0, 0])
    if branch == "upper":
        U, _ = propagate(M, Yu, [y + blocks.h])
        W, _ = propagate(M, Yw, [zeta])
        return U[0, 0] @ _herm(C) @ _herm(W[0, 0])
    raise ValueError(f"unknown branch {branch!r}")


def greens_G_dy(blocks: GreensBlocks, y: float, zeta: float, index: int = 0,
                branch: str = "auto") -> np.ndarray:
    """d/dy G(y, zeta)。跳び条件の確認に使います。"""
    k1 = blocks.k1[index:index + 1]
    k3 = blocks.k3[index:index + 1]
    M = system_matrix(k1, k3, blocks.alpha)
    Yu = bottom_cauchy_data(k1, k3)
    Yw = top_cauchy_data(k1, k3, blocks.alpha)
    C = blocks.C[index]
    if branch == "auto":
        branch = "lower" if zeta <= y else "upper"
    if branch == "lower":
        _, dW = propagate(M, Yw, [y])
        U, _ = propagate(M, Yu, [zeta + blocks.h])
        return dW[0, 0] @ C @ _herm(U[0, 0])
    U, dU = propagate(M, Yu, [y + blocks.h])
    W, _ = propagate(M, Yw, [zeta])
    return dU[0, 0] @ _herm(C) @ _herm(W[0, 0])


def mode_operator(F: np.ndarray, dF: np.ndarray, d2F: np.ndarray, k1: float, k3: float,
                  alpha: float) -> np.ndarray:
    """
    -F'' + |k|^2 F - alpha curl_k F を列ごとに。F は (..., 3, m)。
    """
    A1, A2, A3 = F[..., 0, :], F[..., 1, :], F[..., 2, :]
    curl = np.stack([
        dF[..., 2, :] - 1j * k3 * A2,
        1j * k3 * A1 - 1j * k1 * A3,
        1j * k1 * A2 - dF[..., 0, :],
    ], axis=-2)
    return -d2F + (k1 ** 2 + k3 ** 2) * F - alpha * curl


# --- 一様評価の経験的確認 ---

ESTIMATE_ANGLE = 0.4
GROWTH_LIMIT = 0.25


def _oblique(K: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return K * np.cos(ESTIMATE_ANGLE), K * np.sin(ESTIMATE_ANGLE)


def _estimate_ratios(name: str, K: np.ndarray, alpha: float, h: float, y: np.ndarray) -> np.ndarray:
    if name == "cosh_difference":
        d1c, _, _ = divided_differences(K, alpha, y)
        num = alpha ** 2 * np.abs(d1c)
        den = max(alpha ** 2, np.finfo(float).tiny) * np.exp(K[:, None] * np.abs(y)) / K[:, None]
        return np.max(num / den, axis=1)
    if name == "sinh_difference":
        _, d1s, _ = divided_differences(K, alpha, y)
        num = alpha ** 2 * np.abs(d1s)
        den = max(alpha ** 2, np.finfo(float).tiny) * np.exp(K[:, None] * np.abs(y)) / K[:, None] ** 2
        return np.max(num / den, axis=1)
    if name == "cosh_derivative_difference":
        _, _, d1t = divided_differences(K, alpha, y)
        num = alpha ** 2 * np.abs(d1t)
        den = max(alpha ** 2, np.finfo(float).tiny) * np.exp(K[:, None] * np.abs(y))
        return np.max(num / den, axis=1)
    if name == "fundamental_growth":
        # |d^i u_mn(t)| <= C |k|^i e^{|k| t}, |d^i w_mn(y)| <= C |k|^i e^{|k||y|}, i = 0, 1
        blocks = eval_blocks(*_oblique(K), alpha, h, y)
        gu = np.exp(K[:, None] * (y + h))[..., None, None]
        gw = np.exp(K[:, None] * np.abs(y))[..., None, None]
        kk = K[:, None, None, None]
        parts = [np.abs(blocks.U) / gu, np.abs(blocks.dU) / (kk * gu),
                 np.abs(blocks.W) / gw, np.abs(blocks.dW) / (kk * gw)]
        return np.max(np.stack(parts).reshape(4, K.size, -1), axis=(0, 2))
    if name == "connection_decay":
        blocks = eval_blocks(*_oblique(K), alpha, h, [0.0])
        return np.max(np.abs(blocks.C).reshape(K.size, -1), axis=1) * K * np.cosh(K * h)
    if name == "bottom_to_top_decay":
        blocks = eval_blocks(K, np.zeros_like(K), alpha, h, [-h, 0.0])
        out = np.empty(K.shape)
        for i in range(K.size):
            G = greens_G(blocks, -h, 0.0, index=i)
            out[i] = np.max(np.abs(G)) * K[i] * np.exp(K[i] * h)
        return out
    if name == "small_k_fundamental":
        blocks = eval_blocks(*_oblique(K), alpha, h, y)
        parts = [np.abs(blocks.U), np.abs(blocks.dU), np.abs(blocks.W), np.abs(blocks.dW)]
        return np.max(np.stack(parts).reshape(4, K.size, -1), axis=(0, 2))
    if name == "small_k_connection":
        blocks = eval_blocks(*_oblique(K), alpha, h, [0.0])
        return np.max(np.abs(blocks.C).reshape(K.size, -1), axis=1) * K
    if name == "small_k_scaled_green":
        blocks = eval_blocks(K, np.zeros_like(K), alpha, h, [-h, 0.0])
        out = np.empty(K.shape)
        nodes = (-h, -0.5 * h, 0.0)
        for i in range(K.size):
            out[i] = K[i] * max(np.max(np.abs(greens_G(blocks, a, b, index=i))) for a in nodes for b in nodes)
        return out
    raise ValueError(f"unknown estimate {name!r}")


ESTIMATE_FAMILIES = (
    "cosh_difference",
    "sinh_difference",
    "cosh_derivative_difference",
    "fundamental_growth",
    "connection_decay",
    "bottom_to_top_decay",
    "small_k_fundamental",
    "small_k_connection",
    "small_k_scaled_green",
)
SMALL_K_FAMILIES = ("small_k_fundamental", "small_k_connection", "small_k_scaled_green")


def _k_range(name: str, k_samples: np.ndarray, alpha: float, h: float) -> np.ndarray:
    if name in SMALL_K_FAMILIES:
        return k_samples[k_samples * h <= 1.0]
    return k_samples[k_samples >= max(1.0, np.sqrt(2.0) * abs(alpha))]


def _extend(name: str, ks: np.ndarray, h: float) -> np.ndarray:
    """評価が効く側 (|k| -> 0 または |k| -> 大) へ標本範囲を広げ、点も倍に増やします。"""
    lo, hi = float(ks.min()), float(ks.max())
    if name in SMALL_K_FAMILIES:
        lo = lo / 16.0
    else:
        hi = min(2.0 * hi, 0.5 * MAX_KH / h)
    extended = np.geomspace(lo, max(hi, lo), 2 * ks.size + 1)
    return np.unique(np.concatenate([ks, extended]))


def _growth(name: str, K: np.ndarray, ratios: np.ndarray) -> float:
    """
    広げた側の半分で log(比) を log|k| に当てはめた傾き。
    比が有界なら 0 に近く、評価が破れていれば |k| の冪で増えます。
    """
    order = np.argsort(K)
    K, ratios = K[order], ratios[order]
    half = K.size // 2
    K, ratios = (K[:half + 1], ratios[:half + 1]) if name in SMALL_K_FAMILIES else (K[half:], ratios[half:])
    if K.size < 2 or not np.all(ratios > 0.0):
        return 0.0
    slope = float(np.polyfit(np.log(K), np.log(ratios), 1)[0])
    return -slope if name in SMALL_K_FAMILIES else slope


def estimate_check(k_samples, alpha_samples, h: float, Ny: int = 17,
                   families: Optional[List[str]] = None) -> List[EstimateResult]:
    """
    各評価族について、与えた標本での最大比 (定数の推定) と、
    範囲を広げて細かくした標本での最大比、および広げた側での比の増え方を求めます。
    比が有限で、広げても定数が 2 倍を超えず、増え方の傾きが GROWTH_LIMIT 以下なら合格です。
    大きい |k| 向けの族は |k| >= max(1, sqrt(2) alpha)、small_k_* は |k| h <= 1 の標本を使います。
    """
    y = -0.5 * h * (1.0 + np.cos(np.pi * np.arange(Ny) / (Ny - 1)))
    k_samples = np.sort(np.asarray(k_samples, dtype=float))
    alpha_samples = np.asarray(alpha_samples, dtype=float)
    alpha_fine = np.linspace(alpha_samples.min(), alpha_samples.max(), 2 * alpha_samples.size - 1)
    results = []
    for name in families or ESTIMATE_FAMILIES:
        worst = refined = growth = 0.0
        for alpha in alpha_samples:
            check_alpha(alpha, h)
            ks = _k_range(name, k_samples, alpha, h)
            if ks.size >= 2:
                worst = max(worst, float(np.max(_estimate_ratios(name, ks, alpha, h, y))))
        for alpha in alpha_fine:
            ks = _k_range(name, k_samples, alpha, h)
            if ks.size < 2:
                continue
            wide = _extend(name, ks, h)
            ratios = _estimate_ratios(name, wide, alpha, h, y)
            refined = max(refined, float(np.max(ratios)))
            growth = max(growth, _growth(name, wide, ratios))
        passed = bool(np.isfinite(worst) and np.isfinite(refined) and refined <= 2.0 * worst + 1e-14
                      and growth <= GROWTH_LIMIT)
        logger.info("estimate %s: constant=%.3e extended=%.3e growth=%.3f", name, worst, refined, growth)
        results.append(EstimateResult(name=name, worst_ratio=worst, refined_ratio=refined,
                                      growth=growth, passed=passed))
    return results


def blocks_to_array(blocks: GreensBlocks) -> np.ndarray:
    """
    デバッグ出力用に (Nk, 1, Ny, 36) の実数配列へ詰めます。
    成分は U, W の実部・虚部を行優先で並べたものです。
    """
    nk, ny = blocks.U.shape[:2]
    U = blocks.U.reshape(nk, ny, 9)
    W = blocks.W.reshape(nk, ny, 9)
    packed = np.concatenate([U.real, U.imag, W.real, W.imag], axis=-1)
    return packed[:, None, :, :]
