"""
beltrami-waves Grid: 水平周期格子と鉛直 Chebyshev 格子。

R^2 の代わりに Lx x Lz の周期箱を使い、鉛直方向 [-h, 0] は
Chebyshev-Gauss-Lobatto 点で離散化します。

配列の形状規約:
  - 表面スカラー場      (Nx, Nz)
  - 表面ベクトル場      (2, Nx, Nz)   成分順は (x, z)
  - 体積スカラー場      (Ny, Nx, Nz)
  - 体積ベクトル場      (3, Ny, Nx, Nz) 成分順は (x, y, z)
水平方向の演算はすべて末尾 2 軸に作用するので、先頭の軸は自由に重ねられます。
"""
import numpy as np
from numpy.polynomial import chebyshev as cheb

from .errors import GridError


# --- 水平周期格子 ---

class HorizontalGrid:
    """二重周期の水平格子と、その上のスペクトル演算。"""

    def __init__(self, Nx: int, Nz: int, Lx: float, Lz: float):
        if Nx % 2 or Nz % 2 or Nx < 8 or Nz < 8:
            raise GridError(f"Nx, Nz must be even and >= 8 (got {Nx}, {Nz})")
        if Lx <= 0 or Lz <= 0:
            raise GridError(f"box lengths must be positive (got {Lx}, {Lz})")

        self.Nx, self.Nz = int(Nx), int(Nz)
        self.Lx, self.Lz = float(Lx), float(Lz)
        self.shape = (self.Nx, self.Nz)
        self.spectral_shape = (self.Nx, self.Nz // 2 + 1)
        self.cell_area = self.Lx * self.Lz / (self.Nx * self.Nz)
        self.area = self.Lx * self.Lz

        self.x = np.arange(self.Nx) * self.Lx / self.Nx
        self.z = np.arange(self.Nz) * self.Lz / self.Nz
        self.X, self.Z = np.meshgrid(self.x, self.z, indexing="ij")

        m = np.fft.fftfreq(self.Nx, 1.0 / self.Nx)[:, None]
        n = np.fft.rfftfreq(self.Nz, 1.0 / self.Nz)[None, :]
        self.m, self.n = m, n

        # Nyquist 成分は一階微分で実数性を壊すので波数をゼロに落とす
        k1 = 2.0 * np.pi * m / self.Lx
        k3 = 2.0 * np.pi * n / self.Lz
        k1[m == -self.Nx // 2] = 0.0
        k3[n == self.Nz // 2] = 0.0
        self.k1 = np.broadcast_to(k1, self.spectral_shape).copy()
        self.k3 = np.broadcast_to(k3, self.spectral_shape).copy()
        self.ksq = self.k1 ** 2 + self.k3 ** 2
        self.kmag = np.sqrt(self.ksq)
        # Nyquist の行と列は片方の波数しか残らないので、平均と同じく |k| = 0 型として扱う
        self.nyquist_modes = np.broadcast_to((m == -self.Nx // 2) | (n == self.Nz // 2),
                                             self.spectral_shape).copy()
        self.zero_modes = (self.ksq == 0.0) | self.nyquist_modes

        self.dealias_mask = (np.abs(m) < self.Nx / 3.0) & (np.abs(n) < self.Nz / 3.0)

        weights = np.full(self.spectral_shape, 2.0)
        weights[:, 0] = 1.0
        weights[:, -1] = 1.0
        self.spectral_weights = weights

        safe = np.where(self.zero_modes, 1.0, self.ksq)
        self.inv_laplacian_symbol = np.where(self.zero_modes, 0.0, -1.0 / safe)

    # --- 変換 ---

    def fft_forward(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape[-2:] != self.shape:
            raise GridError(f"field shape {f.shape[-2:]} does not match grid {self.shape}")
        return np.fft.rfft2(f, axes=(-2, -1), norm="forward")

    def fft_inverse(self, fh: np.ndarray) -> np.ndarray:
        if fh.shape[-2:] != self.spectral_shape:
            raise GridError(f"spectrum shape {fh.shape[-2:]} does not match {self.spectral_shape}")
        return np.fft.irfft2(fh, s=self.shape, axes=(-2, -1), norm="forward")

    def dealias(self, f: np.ndarray) -> np.ndarray:
        """2/3 則による打ち切り。"""
        return self.fft_inverse(self.fft_forward(f) * self.dealias_mask)

    def product(self, a, b) -> np.ndarray:
        return self.dealias(np.multiply(a, b))

    # --- 水平微分 ---

    def deriv_x(self, f: np.ndarray) -> np.ndarray:
        return self.fft_inverse(1j * self.k1 * self.fft_forward(f))

    def deriv_z(self, f: np.ndarray) -> np.ndarray:
        return self.fft_inverse(1j * self.k3 * self.fft_forward(f))

    def grad_h(self, f: np.ndarray) -> np.ndarray:
        fh = self.fft_forward(f)
        return np.stack([self.fft_inverse(1j * self.k1 * fh), self.fft_inverse(1j * self.k3 * fh)])

    def div_h(self, v: np.ndarray) -> np.ndarray:
        vh = self.fft_forward(v)
        return self.fft_inverse(1j * self.k1 * vh[0] + 1j * self.k3 * vh[1])

    @staticmethod
    def perp(v: np.ndarray) -> np.ndarray:
        """v^perp = (-v_3, v_1)"""
        return np.stack([-v[1], v[0]])

    def perp_grad(self, f: np.ndarray) -> np.ndarray:
        """nabla^perp f = (-f_z, f_x)"""
        fh = self.fft_forward(f)
        return np.stack([self.fft_inverse(-1j * self.k3 * fh), self.fft_inverse(1j * self.k1 * fh)])

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.fft_inverse(-self.ksq * self.fft_forward(f))

    # --- 積分とノルム ---

    def integrate(self, f: np.ndarray) -> np.ndarray:
        """周期台形則による dx dz 積分 (末尾 2 軸)。"""
        return self.cell_area * np.sum(f, axis=(-2, -1))

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(self.integrate(np.sum(np.multiply(f, g).reshape(-1, *self.shape), axis=0)))

    def l2_norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(f, f), 0.0)))

    def sobolev_norm(self, f: np.ndarray, s: float) -> float:
        """(sum_k (1+|k|^2)^s |f_k|^2)^(1/2), Parseval 規格化つき。"""
        if not -2.0 <= s <= 4.0:
            raise GridError(f"Sobolev index s={s} outside [-2, 4]")
        fh = self.fft_forward(f)
        total = self.area * np.sum(self.spectral_weights * (1.0 + self.ksq) ** s * np.abs(fh) ** 2)
        return float(np.sqrt(total))

    def mean(self, f: np.ndarray) -> np.ndarray:
        return np.mean(f, axis=(-2, -1))

    # --- テスト用の場の生成 ---

    def mode(self, m: int, n: int, phase: float = 0.0) -> np.ndarray:
        """cos(k.x + phase), k = 2 pi (m/Lx, n/Lz)"""
        k1 = 2.0 * np.pi * m / self.Lx
        k3 = 2.0 * np.pi * n / self.Lz
        return np.cos(k1 * self.X + k3 * self.Z + phase)

    def random_field(self, rng: np.random.Generator, max_mode: int = 3,
                     leading: tuple = (), mean_zero: bool = True) -> np.ndarray:
        """|m|, |n| <= max_mode に帯域制限された実数乱数場。"""
        max_mode = min(max_mode, int(self.Nx / 3.0) - 1, int(self.Nz / 3.0) - 1)
        shape = tuple(leading) + self.spectral_shape
        coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        band = (np.abs(self.m) <= max_mode) & (np.abs(self.n) <= max_mode)
        # irfft2 が n = 0 列の Hermite 対称性を整える
        field = self.fft_inverse(coeffs * band) * (0.5 / max(max_mode, 1))
        if mean_zero:
            field = field - self.mean(field)[..., None, None]
        return field


# --- 鉛直 Chebyshev 格子 ---

def _cheb_diff_matrix(N: int) -> np.ndarray:
    """x_j = cos(pi j / N) 上の Chebyshev 微分行列。"""
    x = np.cos(np.pi * np.arange(N + 1) / N)
    c = np.ones(N + 1)
    c[0] = c[N] = 2.0
    c *= (-1.0) ** np.arange(N + 1)
    X = np.tile(x, (N + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    return D - np.diag(np.sum(D, axis=1))


def _clenshaw_curtis_weights(N: int) -> np.ndarray:
    theta = np.pi * np.arange(N + 1) / N
    w = np.zeros(N + 1)
    ii = np.arange(1, N)
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N ** 2 - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * theta[ii]) / (4 * k ** 2 - 1)
        v -= np.cos(N * theta[ii]) / (N ** 2 - 1)
    else:
        w[0] = w[N] = 1.0 / N ** 2
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[ii]) / (4 * k ** 2 - 1)
    w[ii] = 2.0 * v / N
    return w


class VerticalGrid:
    """[-h, 0] 上の Chebyshev-Gauss-Lobatto 点 (y_0 = -h, y_{Ny-1} = 0)。"""

    def __init__(self, Ny: int, h: float):
        if not 4 <= Ny <= 64:
            raise GridError(f"Ny must lie in [4, 64] (got {Ny})")
        if h <= 0:
            raise GridError(f"depth h must be positive (got {h})")
        self.Ny = int(Ny)
        self.h = float(h)
        N = self.Ny - 1

        # 昇順の節点 x_j = -cos(pi j / N)
        self.xi = -np.cos(np.pi * np.arange(self.Ny) / N)
        self.y = 0.5 * self.h * (self.xi - 1.0)
        self.y[0], self.y[-1] = -self.h, 0.0

        Dx = _cheb_diff_matrix(N)[::-1, ::-1]
        self.D = (2.0 / self.h) * Dx
        self.D2 = self.D @ self.D
        self.weights = 0.5 * self.h * _clenshaw_curtis_weights(N)

        V = cheb.chebvander(self.xi, N)
        V_up = cheb.chebvander(self.xi, N + 1)
        integ = cheb.chebint(np.eye(self.Ny), lbnd=-1, axis=0)
        self.cumulative = 0.5 * self.h * (V_up @ integ @ np.linalg.inv(V))

    @property
    def column(self) -> np.ndarray:
        """体積場にブロードキャストできる (Ny, 1, 1) の節点列。"""
        return self.y[:, None, None]

    def dy(self, f: np.ndarray) -> np.ndarray:
        return np.einsum("ij,...jab->...iab", self.D, f)

    def dyy(self, f: np.ndarray) -> np.ndarray:
        return np.einsum("ij,...jab->...iab", self.D2, f)

    def integrate(self, f: np.ndarray) -> np.ndarray:
        """Clenshaw-Curtis による int_{-h}^0 (軸 -3)。"""
        return np.einsum("j,...jab->...ab", self.weights, f)
