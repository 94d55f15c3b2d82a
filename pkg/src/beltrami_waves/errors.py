"""
beltrami-waves 例外定義。

ライブラリ内で送出される例外をここに集約します。
各例外クラスは CLI が使う終了コード (exit_code) を持ちます。
"""
from typing import Optional


class BeltramiError(Exception):
    """パッケージ共通の基底例外。"""
    exit_code = 1


# --- 設定・入力の誤り (exit 2) ---

class ConfigError(BeltramiError):
    """設定ファイルまたは上書き値が不正。"""
    exit_code = 2


class AlphaTooLarge(ConfigError):
    """|alpha| h < pi/2 の制約に違反している。"""

    def __init__(self, alpha: float, h: float):
        self.alpha = alpha
        self.h = h
        super().__init__(f"|alpha|*h = {abs(alpha) * h:.6g} must be below pi/2 - 1e-6")


class GridError(ConfigError):
    """格子サイズや配列形状の不整合。"""


class FieldFormatError(BeltramiError):
    """バイナリ場ファイルの形式エラー。不正箇所のバイトオフセットを保持します。"""
    exit_code = 2

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


# --- 数値計算の失敗 (exit 3) ---

class NumericalError(BeltramiError):
    exit_code = 3


class NonZeroMean(NumericalError):
    """平均ゼロを要求する入力に k = 0 成分が残っている。"""


class DomainDegenerate(NumericalError):
    """h + eta が下限 h_min 以下になり、平坦化写像が退化する。"""


class ZeroWavenumber(NumericalError):
    """k = 0 では C 行列が定義できない。"""


class ZeroModeInconsistent(NumericalError):
    """strict モードで hvec の平均がゼロでない。"""


class NoConvergence(NumericalError):
    """反復が許容誤差に到達しなかった。"""

    def __init__(self, message: str, last_residual: Optional[float] = None):
        self.last_residual = last_residual
        suffix = "" if last_residual is None else f" (last residual {last_residual:.3e})"
        super().__init__(message + suffix)


class Breakdown(NumericalError):
    """Krylov 内部反復の破綻。"""


class TestFieldInvalid(NumericalError):
    """弱形式の試験場が境界条件を満たしていない。"""
    __test__ = False


# --- 検証の失敗 (exit 3) ---

class VerificationFailed(NumericalError):
    """検証スイートに不合格のチェックがある。"""

    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__(f"{len(self.failed)} check(s) failed: {', '.join(self.failed)}")
