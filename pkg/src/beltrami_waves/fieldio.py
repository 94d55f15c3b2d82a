"""
beltrami-waves FieldIO: バイナリ場ファイル (BWAV) と CSV / gnuplot 出力。

BWAV 形式:
  magic "BWAV" | version u32 | Nx, Nz, Ny, ncomp (u32 little-endian) | float64 little-endian
本体は (Nx, Nz, Ny, ncomp) の行優先配列です。
"""
import logging
import os
from typing import Dict, Iterable, List, Sequence

import numpy as np

from .errors import FieldFormatError
from .grid import HorizontalGrid
from .schema import BvpSolution, FunctionalValue, NewtonStep

logger = logging.getLogger(__name__)

MAGIC = b"BWAV"
VERSION = 1
HEADER_BYTES = 24
_U32 = np.dtype('<u4')
_F64 = np.dtype('<f8')


# --- 配列の形状と (Nx, Nz, Ny, ncomp) の対応 ---

def to_layout(field: np.ndarray) -> np.ndarray:
    """
    表面スカラー (Nx, Nz), 表面ベクトル (2, Nx, Nz), 体積スカラー (Ny, Nx, Nz),
    体積ベクトル (3, Ny, Nx, Nz) を (Nx, Nz, Ny, ncomp) に並べ替えます。
    """
    field = np.asarray(field, dtype=float)
    if field.ndim == 2:
        return field[:, :, None, None]
    if field.ndim == 3 and field.shape[0] == 2:
        return np.transpose(field, (1, 2, 0))[:, :, None, :]
    if field.ndim == 3:
        return np.transpose(field, (1, 2, 0))[:, :, :, None]
    if field.ndim == 4:
        return np.transpose(field, (2, 3, 1, 0))
    raise FieldFormatError(f"cannot store an array of shape {field.shape}", 0)


def from_layout(data: np.ndarray) -> np.ndarray:
    """to_layout の逆。Ny = 1 は表面場として扱います。"""
    Nx, Nz, Ny, ncomp = data.shape
    if Ny == 1 and ncomp == 1:
        return data[:, :, 0, 0]
    if Ny == 1 and ncomp == 2:
        return np.transpose(data[:, :, 0, :], (2, 0, 1))
    if ncomp == 1:
        return np.transpose(data[:, :, :, 0], (2, 0, 1))
    return np.transpose(data, (3, 2, 0, 1))


# --- バイナリ ---

def write_raw(path: str, data: np.ndarray) -> None:
    """(Nx, Nz, Ny, ncomp) の 4 次元配列をそのまま書き出します。"""
    data = np.ascontiguousarray(data, dtype=_F64)
    if data.ndim != 4:
        raise FieldFormatError(f"raw dumps need a 4-d array (got shape {data.shape})", 0)
    header = MAGIC + np.array([VERSION, *data.shape], dtype=_U32).tobytes()
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'wb') as f:
        f.write(header)
        f.write(data.tobytes(order='C'))
    logger.debug("wrote %s with dims %s", path, data.shape)


def write_field(path: str, field: np.ndarray) -> None:
    write_raw(path, to_layout(field))


def read_raw(path: str) -> np.ndarray:
    with open(path, 'rb') as f:
        blob = f.read()
    return parse_raw(blob)


def parse_raw(blob: bytes) -> np.ndarray:
    """バイト列を検証して (Nx, Nz, Ny, ncomp) 配列を返します。"""
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise FieldFormatError("bad magic (expected 'BWAV')", 0)
    if len(blob) < HEADER_BYTES:
        raise FieldFormatError("truncated header", len(blob))
    version, *dims = np.frombuffer(blob, dtype=_U32, count=5, offset=4).tolist()
    if version != VERSION:
        raise FieldFormatError(f"unsupported version {version}", 4)
    for i, d in enumerate(dims):
        if d == 0:
            raise FieldFormatError(f"zero dimension in header (index {i})", 8 + 4 * i)
    expected = int(np.prod(dims)) * _F64.itemsize
    body = len(blob) - HEADER_BYTES
    if body < expected:
        raise FieldFormatError(f"body has {body} bytes, expected {expected}", len(blob))
    if body > expected:
        raise FieldFormatError(f"{body - expected} trailing bytes after the body", HEADER_BYTES + expected)
    data = np.frombuffer(blob, dtype=_F64, offset=HEADER_BYTES).reshape(dims)
    return data.copy()


def read_field(path: str) -> np.ndarray:
    return from_layout(read_raw(path))


def read_surface_field(path: str, grid: HorizontalGrid) -> np.ndarray:
    """表面スカラー場を読み、格子と形状が合うか確認します。"""
    data = read_raw(path)
    if data.shape != (grid.Nx, grid.Nz, 1, 1):
        raise FieldFormatError(
            f"{path}: dims {data.shape} do not match a ({grid.Nx}, {grid.Nz}) surface scalar", 8
        )
    return from_layout(data)


# --- CSV / gnuplot ---

def write_surface_csv(path: str, field: np.ndarray, grid: HorizontalGrid) -> None:
    """ヘッダ x,z,value と Nx*Nz 行。"""
    rows = np.column_stack([grid.X.ravel(), grid.Z.ravel(), np.asarray(field, dtype=float).ravel()])
    np.savetxt(path, rows, fmt='%.17g', delimiter=',', header='x,z,value', comments='')


def write_gnuplot(path: str, field: np.ndarray, grid: HorizontalGrid) -> None:
    """x ごとに空行で区切った splot 用ブロック。"""
    field = np.asarray(field, dtype=float)
    with open(path, 'w', encoding='utf-8') as f:
        f.write('# x z value\n')
        for i in range(grid.Nx):
            block = np.column_stack([grid.X[i], grid.Z[i], field[i]])
            np.savetxt(f, block, fmt='%.17g', delimiter=' ')
            f.write('\n')


def write_table_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        f.write(','.join(header) + '\n')
        for row in rows:
            f.write(','.join(_fmt(v) for v in row) + '\n')


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return 'true' if v else 'false'
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return '%.17g' % float(v)
    return str(v)


def write_functional_csv(path: str, value: FunctionalValue) -> None:
    rows: List[Sequence] = [(name, v) for name, v in value.parts.items()]
    rows += [('L_volume', value.L_volume), ('L_surface', value.L_surface)]
    write_table_csv(path, ('term', 'value'), rows)


def write_diagnostics_csv(path: str, solution: BvpSolution) -> None:
    rows = [(r.iteration, r.residual, r.gauge_div, r.gauge_normal) for r in solution.diagnostics]
    write_table_csv(path, ('iteration', 'residual', 'gauge_div', 'gauge_normal'), rows)


def write_newton_csv(path: str, trace: Sequence[NewtonStep]) -> None:
    rows = [(s.step, s.residual_R1, s.residual_R2, s.gmres_iterations, s.step_norm) for s in trace]
    write_table_csv(path, ('step', 'residual_R1', 'residual_R2', 'gmres_iterations', 'step_norm'), rows)


def write_summary_csv(path: str, values: Dict[str, float]) -> None:
    write_table_csv(path, ('quantity', 'value'), list(values.items()))
