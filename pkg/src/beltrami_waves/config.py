"""
beltrami-waves Configuration: 実行設定の読み込みと検証を行います。

設定は YAML 文書 (セクション physical, grid, solver, newton, fields, verify) で、
pydantic モデル RunConfig に検証されます。--config が無い場合は
パッケージ同梱の default_config.yaml を使います。
"""
import copy
import logging
import os
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

from .errors import AlphaTooLarge, ConfigError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(__file__), 'default_config.yaml')
ENV_FILE = os.path.join('env', 'bwave.env')
ALPHA_MARGIN = 1e-6
MAX_KH = 60.0


# --- 設定モデル ---

class PhysicalParams(BaseModel):
    alpha: float = Field(0.1, description="Beltrami 定数 (curl u = alpha u)。")
    h: float = Field(1.0, gt=0, description="静水深。")
    g: float = Field(1.0, ge=0, description="重力加速度。")
    sigma: float = Field(0.25, ge=0, description="表面張力係数。")
    c1: float = Field(0.5, description="背景流の x 方向速度成分。")
    c3: float = Field(0.0, description="背景流の z 方向速度成分。")


class GridConfig(BaseModel):
    Nx: int = Field(32, ge=8, description="x 方向の格子点数 (偶数)。")
    Nz: int = Field(32, ge=8, description="z 方向の格子点数 (偶数)。")
    Ny: int = Field(24, ge=4, le=64, description="鉛直 Chebyshev 点数。")
    Lx: float = Field(16.0, gt=0, description="x 方向の周期長。")
    Lz: float = Field(16.0, gt=0, description="z 方向の周期長。")

    @field_validator('Nx', 'Nz')
    @classmethod
    def _even(cls, v: int) -> int:
        if v % 2:
            raise ValueError("must be even")
        return v


class SolverConfig(BaseModel):
    tol: float = Field(1e-10, gt=0, description="Picard 反復の相対修正量の許容値。")
    maxit: int = Field(100, ge=1, description="Picard 反復の最大回数。")
    relax: float = Field(1.0, gt=0, le=1.0, description="緩和係数 (0, 1]。")
    floor_tol: float = Field(
        1e-6, gt=0, description="修正量が停滞したとき離散化の床への収束とみなす上限、および規格化残差の許容値。"
    )
    stall_window: int = Field(3, ge=1, description="修正量の最小値が更新されない反復がこの回数続けば停滞とみなす。")
    h_min_ratio: float = Field(0.1, gt=0, lt=1.0, description="h + eta の下限 (h に対する比)。")
    zero_mode: Literal["accept", "strict"] = Field(
        "accept", description="hvec の平均を受け入れるか (accept) 拒否するか (strict)。"
    )


class NewtonConfig(BaseModel):
    tol: float = Field(1e-9, gt=0, description="max(|R1|, |R2|) の許容値。")
    maxit: int = Field(20, ge=1, description="Newton 反復の最大回数。")
    fd_step: float = Field(1e-7, gt=0, description="方向差分の基準ステップ。")
    bvp_tol: float = Field(1e-12, gt=0, description="残差評価時の BVP 許容値 (差分 Jacobian 用に厳しめ)。")
    gmres_rtol: float = Field(1e-8, gt=0, description="GMRES の相対許容値。")
    gmres_restart: int = Field(40, ge=1, description="GMRES の再始動間隔。")
    gmres_maxiter: int = Field(200, ge=1, description="GMRES の最大反復回数。")
    seed_amplitude: float = Field(0.0, ge=0, description="線形化シードの振幅 (h 単位、0 で平坦な初期値)。")
    seed_mode: Tuple[int, int] = Field((1, 0), description="線形化シードのモード (m, n)。")
    speeds: List[float] = Field(default_factory=list, description="速度 c1 の継続計算の値列。")


class FieldConfig(BaseModel):
    eta_file: Optional[str] = Field(None, description="eta のバイナリ場ファイル。")
    phi_file: Optional[str] = Field(None, description="Phi のバイナリ場ファイル。")
    eta_amplitude: float = Field(0.02, ge=0, description="ファイルが無いときの乱数 eta の振幅 (h 単位)。")
    phi_amplitude: float = Field(0.1, ge=0, description="ファイルが無いときの乱数 Phi の振幅。")
    max_mode: int = Field(3, ge=1, description="乱数場の最大モード番号。")


class VerifyConfig(BaseModel):
    suites: List[str] = Field(
        default_factory=lambda: ["identity", "greens", "flat", "bvp", "adjoint", "limit", "variational", "newton"],
        description="実行する検証スイート。",
    )
    n_fields: int = Field(50, ge=1, description="恒等式スイートの乱数場の数。")
    n_forcings: int = Field(20, ge=1, description="平坦ソルバの単一モード外力の数。")
    n_test_fields: int = Field(10, ge=1, description="弱形式の試験場の数。")
    n_pairs: int = Field(10, ge=1, description="エネルギー恒等式の組の数。")
    basis_max_mode: int = Field(2, ge=1, description="H 行列の基底の最大モード番号。")
    reduced_grid: GridConfig = Field(
        default_factory=lambda: GridConfig(Nx=16, Nz=16, Ny=16, Lx=16.0, Lz=16.0),
        description="adjoint スイートの H 行列の組み立て (列ごとに BVP を解く) に使う縮小格子。",
    )


class RunConfig(BaseModel):
    physical: PhysicalParams = Field(default_factory=PhysicalParams)
    grid: GridConfig = Field(default_factory=GridConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    newton: NewtonConfig = Field(default_factory=NewtonConfig)
    fields: FieldConfig = Field(default_factory=FieldConfig)
    verify: VerifyConfig = Field(default_factory=VerifyConfig)


# --- 上書きオプションと設定キーの対応 ---

OVERRIDE_KEYS: Dict[str, Tuple[str, str]] = {
    'alpha': ('physical', 'alpha'),
    'h': ('physical', 'h'),
    'g': ('physical', 'g'),
    'sigma': ('physical', 'sigma'),
    'c1': ('physical', 'c1'),
    'c3': ('physical', 'c3'),
    'nx': ('grid', 'Nx'),
    'nz': ('grid', 'Nz'),
    'ny': ('grid', 'Ny'),
    'lx': ('grid', 'Lx'),
    'lz': ('grid', 'Lz'),
    'tol': ('solver', 'tol'),
    'maxit': ('solver', 'maxit'),
    'relax': ('solver', 'relax'),
}


def max_wavenumber(grid: GridConfig) -> float:
    """Nyquist を除いた格子の最大 |k|。"""
    k1 = 2.0 * np.pi * (grid.Nx // 2 - 1) / grid.Lx
    k3 = 2.0 * np.pi * (grid.Nz // 2 - 1) / grid.Lz
    return float(np.hypot(k1, k3))


def check_physical(physical: PhysicalParams, grids: List[GridConfig]) -> None:
    """alpha h < pi/2 と |k|_max h <= 60 を確認します。"""
    if abs(physical.alpha) * physical.h >= np.pi / 2 - ALPHA_MARGIN:
        raise AlphaTooLarge(physical.alpha, physical.h)
    for grid in grids:
        kh = max_wavenumber(grid) * physical.h
        if kh > MAX_KH:
            raise ConfigError(f"|k|_max h = {kh:.3g} exceeds {MAX_KH:g}; refine Lx/Lz or reduce Nx/Nz")


def apply_overrides(doc: Dict[str, Any], overrides: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """CLI の上書き値を検証前の生文書に書き込みます。None の値は無視します。"""
    doc = copy.deepcopy(doc) if doc else {}
    for name, value in (overrides or {}).items():
        if value is None:
            continue
        if name not in OVERRIDE_KEYS:
            raise ConfigError(f"unknown override '{name}'")
        section, key = OVERRIDE_KEYS[name]
        doc.setdefault(section, {})
        if doc[section] is None:
            doc[section] = {}
        doc[section][key] = value
    return doc


def read_yaml(path: str) -> Dict[str, Any]:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            doc = yaml.safe_load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed YAML in {path}: {e}") from e
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping of sections")
    return doc


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    YAML を読み、上書きを適用して RunConfig に検証します。
    pydantic の検証エラーは ConfigError に変換します。
    """
    path = path or DEFAULT_CONFIG_PATH
    doc = apply_overrides(read_yaml(path), overrides)
    try:
        config = RunConfig.model_validate(doc)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first['loc'])
        raise ConfigError(f"{where}: {first['msg']}") from e
    check_physical(config.physical, [config.grid, config.verify.reduced_grid])
    logger.debug("loaded config from %s", path)
    return config


# --- 環境変数 ---

def load_environment(env_file: str = ENV_FILE) -> Dict[str, Optional[str]]:
    """
    env/bwave.env があれば読み込み、BWAVE_CONFIG, BWAVE_OUT_DIR, BWAVE_SEED を返します。
    既に設定済みの環境変数は上書きしません。
    """
    if os.path.exists(env_file):
        load_dotenv(env_file, override=False)
    return {key: os.environ.get(key) for key in ('BWAVE_CONFIG', 'BWAVE_OUT_DIR', 'BWAVE_SEED')}


# --- 構築ヘルパ ---

def build_grids(grid: GridConfig, physical: PhysicalParams):
    from .grid import HorizontalGrid, VerticalGrid
    return HorizontalGrid(grid.Nx, grid.Nz, grid.Lx, grid.Lz), VerticalGrid(grid.Ny, physical.h)


def build_solver(config: RunConfig, grid: Optional[GridConfig] = None):
    """設定から BeltramiSolver を作ります。grid を渡すとそちらの格子を使います。"""
    from .bvp import BeltramiSolver
    hgrid, vgrid = build_grids(grid or config.grid, config.physical)
    s = config.solver
    return BeltramiSolver(hgrid, vgrid, config.physical.alpha, tol=s.tol, maxit=s.maxit,
                          relax=s.relax, h_min_ratio=s.h_min_ratio, zero_mode=s.zero_mode,
                          floor_tol=s.floor_tol, stall_window=s.stall_window)
