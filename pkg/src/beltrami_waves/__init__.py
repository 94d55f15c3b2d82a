"""
beltrami-waves: Beltrami 流に乗る定常水面波の一般化 Dirichlet-Neumann 作用素 H(eta) を
擬スペクトル法で計算し、変分構造と作用素恒等式を数値的に検証するライブラリと CLI。
"""
from .bvp import BeltramiSolver
from .config import RunConfig, load_config
from .grid import HorizontalGrid, VerticalGrid
from .main import cli_main
from .surface_operator import apply_G, apply_H, apply_K
from .variational import el_residuals, lagrangian_surface, lagrangian_volume
from .wave_finder import find_wave

__all__ = [
    "BeltramiSolver",
    "HorizontalGrid",
    "RunConfig",
    "VerticalGrid",
    "apply_G",
    "apply_H",
    "apply_K",
    "cli_main",
    "el_residuals",
    "find_wave",
    "lagrangian_surface",
    "lagrangian_volume",
    "load_config",
]
