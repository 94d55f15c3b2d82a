"""
beltrami-waves 共有データスキーマ定義。

各モジュール間で受け渡される計算結果を Pydantic モデルとして定義します。
numpy 配列を保持するため arbitrary_types_allowed を有効にしています。
"""
from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class _ArrayModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


# --- Hodge-Weyl ---

class HodgeParts(_ArrayModel):
    """f = grad(phi) + grad^perp(psi) + mean の分解結果。"""
    phi: np.ndarray = Field(..., description="勾配部分のポテンシャル (平均ゼロ)。")
    psi: np.ndarray = Field(..., description="直交勾配部分の流線関数 (平均ゼロ)。")
    mean: np.ndarray = Field(..., description="入力の k = 0 成分 (2 成分)。")


# --- Green 行列 ---

class ScalarKernels(_ArrayModel):
    """c(y), s1(y), s2(y) と定数 s, t1, t2。"""
    c: np.ndarray = Field(..., description="c(y)。形状 (..., Ny)。")
    s1: np.ndarray = Field(..., description="s1(y)。")
    s2: np.ndarray = Field(..., description="s2(y) = (|k|^2 - alpha^2) s1(y)。")
    s: np.ndarray = Field(..., description="sec / sech 因子。")
    t1: np.ndarray = Field(..., description="tan / tanh 因子を平方根で割ったもの。")
    t2: np.ndarray = Field(..., description="t2 = (|k|^2 - alpha^2) t1。")


class GreensBlocks(_ArrayModel):
    """波数ごとの基本行列 U(y+h), W(y) と接続行列 C。"""
    k1: np.ndarray = Field(..., description="波数の x 成分 (Nk,)。")
    k3: np.ndarray = Field(..., description="波数の z 成分 (Nk,)。")
    alpha: float
    h: float
    y: np.ndarray = Field(..., description="鉛直節点 (Ny,)。")
    U: np.ndarray = Field(..., description="U(y_j + h)。形状 (Nk, Ny, 3, 3)。")
    dU: np.ndarray = Field(..., description="U'(y_j + h)。")
    W: np.ndarray = Field(..., description="W(y_j)。形状 (Nk, Ny, 3, 3)。")
    dW: np.ndarray = Field(..., description="W'(y_j)。")
    C: np.ndarray = Field(..., description="接続行列 C。形状 (Nk, 3, 3)。")
    kernels: ScalarKernels


class EstimateResult(BaseModel):
    """一様評価の経験的定数チェック 1 件分。"""
    name: str
    worst_ratio: float = Field(..., description="与えた標本での最大比 (定数の推定)。")
    refined_ratio: float = Field(..., description="範囲を広げて細かくした標本での最大比。")
    growth: float = Field(0.0, description="広げた側での log(比) の log|k| に対する傾き。")
    passed: bool


# --- 平坦領域ソルバと BVP ---

class ForcingData(_ArrayModel):
    """平坦領域ソルバへの入力 (H, g, hvec)。"""
    H: np.ndarray = Field(..., description="体積外力 (3, Ny, Nx, Nz)。")
    g: np.ndarray = Field(..., description="表面での A2 の値 (Nx, Nz)。")
    hvec: np.ndarray = Field(..., description="表面の接線データ (2, Nx, Nz)。")


class FlatResidual(BaseModel):
    pde_res: float = Field(..., description="内部節点での -Lap A - alpha curl A - H の RMS。")
    bottom_res: float = Field(..., description="y = -h での A1, A3, A2' の RMS。")
    surface_res: float = Field(..., description="y = 0 での A2 - g と表面条件の RMS。")


class IterationRecord(BaseModel):
    iteration: int
    residual: float
    gauge_div: float
    gauge_normal: float


class BvpSolution(_ArrayModel):
    """平坦化 BVP の収束解と反復の診断情報。"""
    A_tilde: np.ndarray = Field(..., description="平坦化ベクトルポテンシャル (3, Ny, Nx, Nz)。")
    iterations: int
    residual_history: List[float]
    gauge_div: float = Field(..., description="div^eta A の RMS (データで規格化)。")
    gauge_normal: float = Field(..., description="表面での A.N の RMS (データで規格化)。")
    diagnostics: List[IterationRecord] = Field(default_factory=list)
    flat_residual: Optional[FlatResidual] = None
    residual_scaled: float = Field(0.0, description="flat_residual の最大値を grad Phi の RMS で割ったもの。")
    status: Literal["converged", "floor"] = Field(
        "converged", description="converged: 修正量が tol 以下。floor: 修正量が floor_tol 以下で停滞。"
    )


class WeakResidual(BaseModel):
    value: float
    scale: float
    relative: float


# --- 表面作用素と変分 ---

class OperatorApplication(_ArrayModel):
    Hphi: np.ndarray = Field(..., description="H(eta) Phi。平均ゼロ。")
    Kphi: np.ndarray = Field(..., description="K(eta) Phi = grad Phi + grad^perp Psi + harmonic。")
    psi: np.ndarray = Field(..., description="Psi = -alpha Lap^-1 H Phi。")
    harmonic: np.ndarray = Field(..., description="表面速度の定数成分 alpha mean(A_par)/2 (2 成分)。")
    solution: BvpSolution


class EnergyIdentity(BaseModel):
    """int Phi1 H(eta) Phi2 と体積表現の比較。"""
    lhs: float = Field(..., description="int Phi1 H(eta) Phi2 dx dz。")
    symmetric: float = Field(..., description="対称化した体積表現。")
    one_sided: float = Field(..., description="片側の体積表現。")
    relative_residual: float
    asymmetry: float = Field(..., description="片側表現と対称表現の差 (相対)。")


class FunctionalValue(BaseModel):
    L_volume: float
    L_surface: float
    Gamma: float
    parts: Dict[str, float] = Field(default_factory=dict, description="項ごとの内訳。")


class ELResiduals(_ArrayModel):
    R1: np.ndarray = Field(..., description="運動学的条件の残差 (平均ゼロ)。")
    R2: np.ndarray = Field(..., description="力学的条件の残差。")


class GradientCheck(BaseModel):
    epsilon: float
    finite_difference: float
    predicted: float
    relative_error: float


# --- 検証レポートと波探索 ---

class CheckResult(BaseModel):
    suite: str
    check: str
    value: float
    bound: float
    passed: bool


class SuiteReport(BaseModel):
    seed: int
    checks: List[CheckResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)


class NewtonStep(BaseModel):
    step: int
    residual_R1: float
    residual_R2: float
    gmres_iterations: int
    step_norm: float


class WaveSolveResult(_ArrayModel):
    eta: np.ndarray
    phi: np.ndarray
    residual_R1: float
    residual_R2: float
    converged: bool
    speed: List[float] = Field(..., description="(c1, c3)。")
    trace: List[NewtonStep] = Field(default_factory=list)
