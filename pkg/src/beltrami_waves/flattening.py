"""
beltrami-waves Flattening: 平坦化写像と平坦化された微分作用素。

流体領域 D_eta = {-h < y < eta} を固定帯 D_0 = {-h < y~ < 0} に
  y~ = h (y - eta) / (h + eta)
で写し、幾何を係数 K1, K2, K3 に押し込みます。
係数と場の積はすべて 2/3 則で打ち切ります。
"""
import numpy as np

from .errors import DomainDegenerate
from .grid import HorizontalGrid, VerticalGrid


# --- 標準作用素 (帯 D_0 上) ---

def curl_std(F: np.ndarray, grid: HorizontalGrid, vgrid: VerticalGrid) -> np.ndarray:
    Fy = vgrid.dy(F)
    return np.stack([
        Fy[2] - grid.deriv_z(F[1]),
        grid.deriv_z(F[0]) - grid.deriv_x(F[2]),
        grid.deriv_x(F[1]) - Fy[0],
    ])


def div_std(F: np.ndarray, grid: HorizontalGrid, vgrid: VerticalGrid) -> np.ndarray:
    return grid.deriv_x(F[0]) + vgrid.dy(F[1]) + grid.deriv_z(F[2])


def grad_std(f: np.ndarray, grid: HorizontalGrid, vgrid: VerticalGrid) -> np.ndarray:
    return np.stack([grid.deriv_x(f), vgrid.dy(f), grid.deriv_z(f)])


def laplace_std(f: np.ndarray, grid: HorizontalGrid, vgrid: VerticalGrid) -> np.ndarray:
    """スカラーにもベクトル (成分ごと) にも作用します。"""
    return grid.laplacian(f) + vgrid.dyy(f)


# --- 平坦化係数 ---

class FlatteningCoeffs:
    """
    与えられた eta に対する K1, K2, K3 と関連する係数場。

    K1 = (h + y~)/(h + eta), K2 = eta/(h + eta), K3 = 1/(h + eta)
    構築後は不変です。
    """

    def __init__(self, eta: np.ndarray, grid: HorizontalGrid, vgrid: VerticalGrid,
                 h_min_ratio: float = 0.1):
        self.grid = grid
        self.vgrid = vgrid
        self.h = vgrid.h
        self.eta = np.asarray(eta, dtype=float)
        depth = self.h + self.eta
        h_min = h_min_ratio * self.h
        if float(np.min(depth)) <= h_min:
            raise DomainDegenerate(f"min(h + eta) = {float(np.min(depth)):.4g} <= h_min = {h_min:.4g}")

        self.eta_x = grid.deriv_x(self.eta)
        self.eta_z = grid.deriv_z(self.eta)
        self.grad_eta = np.stack([self.eta_x, self.eta_z])
        self.lap_eta = grid.laplacian(self.eta)
        self.grad_eta_sq = grid.product(self.eta_x, self.eta_x) + grid.product(self.eta_z, self.eta_z)

        self.K3 = grid.dealias(1.0 / depth)
        self.K2 = grid.dealias(self.eta / depth)
        stretch = (self.h + vgrid.y)[:, None, None]
        self.K1 = stretch * self.K3

        # K1 eta_x, K1 eta_z
        self.a_x = stretch * grid.product(self.K3, self.eta_x)
        self.a_z = stretch * grid.product(self.K3, self.eta_z)

        s_grad = grid.product(self.K3 ** 2, self.grad_eta_sq)
        s_lap = grid.product(self.K3, self.lap_eta)
        self.c_yy = stretch ** 2 * s_grad + grid.product(self.K2, self.K2 - 2.0)
        self.c_y = 2.0 * stretch * s_grad - stretch * s_lap

        self.normal = np.stack([-self.eta_x, np.ones_like(self.eta), -self.eta_z])
        self.jacobian = 1.0 + self.eta / self.h

    @property
    def is_flat(self) -> bool:
        return not np.any(self.eta)

    def mul(self, coef, f) -> np.ndarray:
        return self.grid.product(coef, f)

    def physical_y(self) -> np.ndarray:
        """y~ 節点に対応する物理座標 y = eta + y~ (h + eta)/h。"""
        return self.eta + self.vgrid.column * (self.h + self.eta) / self.h

    def volume_integral(self, f: np.ndarray) -> float:
        """int_{D_eta} f dV を平坦座標で (Jacobian 1 + eta/h つき)。"""
        return float(self.grid.integrate(self.vgrid.integrate(f * self.jacobian)))

    def surface_integral(self, f: np.ndarray) -> float:
        return float(self.grid.integrate(f))


# --- 平坦化作用素 ---

def curl_eta(F: np.ndarray, co: FlatteningCoeffs) -> np.ndarray:
    base = curl_std(F, co.grid, co.vgrid)
    if co.is_flat:
        return base
    Fy = co.vgrid.dy(F)
    return base + np.stack([
        -co.mul(co.K2, Fy[2]) + co.mul(co.a_z, Fy[1]),
        co.mul(co.a_x, Fy[2]) - co.mul(co.a_z, Fy[0]),
        co.mul(co.K2, Fy[0]) - co.mul(co.a_x, Fy[1]),
    ])


def div_eta(F: np.ndarray, co: FlatteningCoeffs) -> np.ndarray:
    base = div_std(F, co.grid, co.vgrid)
    if co.is_flat:
        return base
    Fy = co.vgrid.dy(F)
    return base - co.mul(co.a_x, Fy[0]) - co.mul(co.a_z, Fy[2]) - co.mul(co.K2, Fy[1])


def grad_eta_op(f: np.ndarray, co: FlatteningCoeffs) -> np.ndarray:
    base = grad_std(f, co.grid, co.vgrid)
    if co.is_flat:
        return base
    fy = co.vgrid.dy(f)
    return base - np.stack([co.mul(co.a_x, fy), co.mul(co.K2, fy), co.mul(co.a_z, fy)])


def laplace_eta(f: np.ndarray, co: FlatteningCoeffs) -> np.ndarray:
    """スカラー場 (Ny, Nx, Nz) にもベクトル場 (3, Ny, Nx, Nz) にも作用します。"""
    base = laplace_std(f, co.grid, co.vgrid)
    if co.is_flat:
        return base
    fy = co.vgrid.dy(f)
    fyy = co.vgrid.dyy(f)
    return (base
            + co.mul(co.c_yy, fyy)
            + co.mul(co.c_y, fy)
            - 2.0 * co.mul(co.a_x, co.grid.deriv_x(fy))
            - 2.0 * co.mul(co.a_z, co.grid.deriv_z(fy)))


# --- 表面トレース ---

def tangential_parallel(F: np.ndarray, co: FlatteningCoeffs) -> np.ndarray:
    """F_par = F_h + F_2 grad(eta) (y~ = 0 でのトレース)。"""
    top = F[:, -1]
    return np.stack([
        top[0] + co.mul(top[1], co.eta_x),
        top[2] + co.mul(top[1], co.eta_z),
    ])


def normal_trace(F: np.ndarray, co: FlatteningCoeffs) -> np.ndarray:
    """表面での F.N、N = (-eta_x, 1, -eta_z)。"""
    top = F[:, -1]
    return top[1] - co.mul(co.eta_x, top[0]) - co.mul(co.eta_z, top[2])


def horizontal_trace(F: np.ndarray) -> np.ndarray:
    """(F_1, F_3) の y~ = 0 トレース。"""
    return np.stack([F[0, -1], F[2, -1]])
