"""
beltrami-waves のコマンドライン実行モジュール。

サブコマンド:
  verify     検証スイートを実行し、(suite, check, value, bound, passed) のレポートを書き出す
  apply-h    H(eta) Phi, K(eta) Phi, Psi を計算する
  solve-bvp  平坦化 BVP を解き、反復の診断情報を書き出す
  find-wave  定常波方程式を Newton-Krylov 法で解く
  export     場・汎関数の内訳・診断情報を CSV / バイナリ / gnuplot 形式で書き出す

終了コード: 0 正常, 1 検証不合格または想定外のエラー, 2 設定・入力の誤り, 3 数値計算の失敗
"""
import argparse
import importlib.metadata
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from . import fieldio
from .bvp import BeltramiSolver
from .config import OVERRIDE_KEYS, RunConfig, build_solver, load_config, load_environment
from .errors import BeltramiError, ConfigError, VerificationFailed
from .greens import blocks_to_array
from .schema import SuiteReport, WaveSolveResult
from .surface_operator import apply_H, assemble_H_matrix
from .variational import el_residuals, lagrangian_volume
from .verify import SUITES, random_eta, run_verify
from .wave_finder import continue_in_speed, find_wave, linear_seed

logger = logging.getLogger(__name__)

console = Console()
DEFAULT_OUT_DIR = 'bwave_out'


def get_version() -> str:
    try:
        return importlib.metadata.version("beltrami-waves")
    except importlib.metadata.PackageNotFoundError:
        return "dev (not installed)"


# --- 引数 ---

def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='PATH', help="YAML 設定ファイル (既定: 同梱の default_config.yaml)")
    common.add_argument('--out', metavar='DIR', help=f"出力ディレクトリ (既定: {DEFAULT_OUT_DIR})")
    common.add_argument('--seed', type=int, help="乱数 seed (既定: 0)")
    common.add_argument('-v', '--verbose', action='count', default=0, help="-v で INFO, -vv で DEBUG")
    group = common.add_argument_group("設定の上書き")
    for name, (section, key) in OVERRIDE_KEYS.items():
        kind = int if key in ('Nx', 'Nz', 'Ny', 'maxit') else float
        group.add_argument(f'--{name}', type=kind, metavar=key.upper(), help=f"{section}.{key}")
    return common


def _field_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--eta', metavar='FILE', help="eta のバイナリ場ファイル (BWAV)")
    parser.add_argument('--phi', metavar='FILE', help="Phi のバイナリ場ファイル (BWAV)")


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog='bwave',
        description="Beltrami 流上の定常水面波に対する一般化 Dirichlet-Neumann 作用素の計算と検証",
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {get_version()}")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('verify', parents=[common], help="検証スイートを実行する")
    p.add_argument('--suite', action='append', choices=list(SUITES), help="実行するスイート (複数指定可)")

    p = sub.add_parser('apply-h', parents=[common], help="H(eta) Phi と K(eta) Phi を計算する")
    _field_options(p)

    p = sub.add_parser('solve-bvp', parents=[common], help="平坦化 BVP を解く")
    _field_options(p)

    p = sub.add_parser('find-wave', parents=[common], help="定常波を Newton-Krylov 法で探す")
    _field_options(p)
    p.add_argument('--seed-amplitude', type=float, help="線形化シードの振幅 (newton.seed_amplitude)")
    p.add_argument('--speeds', type=float, nargs='+', help="c1 の継続計算の値列 (newton.speeds)")

    p = sub.add_parser('export', parents=[common], help="場と診断情報を書き出す")
    _field_options(p)
    p.add_argument('--greens', action='store_true', help="Green 行列の基本解をバイナリで書き出す")
    p.add_argument('--h-matrix', action='store_true', help="H(eta) の Fourier 基底行列を書き出す")
    return parser


def setup_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


# --- 実行環境の解決 ---

def resolve_run(args: argparse.Namespace) -> Tuple[RunConfig, str, int]:
    """コマンドライン > 環境変数 (env/bwave.env) > 既定値 の順で設定・出力先・seed を決めます。"""
    env = load_environment()
    overrides = {name: getattr(args, name, None) for name in OVERRIDE_KEYS}
    config = load_config(args.config or env.get('BWAVE_CONFIG'), overrides)

    updates: Dict[str, object] = {}
    if getattr(args, 'eta', None):
        updates['eta_file'] = args.eta
    if getattr(args, 'phi', None):
        updates['phi_file'] = args.phi
    if updates:
        config = config.model_copy(update={'fields': config.fields.model_copy(update=updates)})
    newton_updates: Dict[str, object] = {}
    if getattr(args, 'seed_amplitude', None) is not None:
        newton_updates['seed_amplitude'] = args.seed_amplitude
    if getattr(args, 'speeds', None):
        newton_updates['speeds'] = list(args.speeds)
    if newton_updates:
        config = config.model_copy(update={'newton': config.newton.model_copy(update=newton_updates)})

    out_dir = args.out or env.get('BWAVE_OUT_DIR') or DEFAULT_OUT_DIR
    if args.seed is not None:
        seed = args.seed
    elif env.get('BWAVE_SEED'):
        try:
            seed = int(env['BWAVE_SEED'])
        except ValueError as e:
            raise ConfigError(f"BWAVE_SEED must be an integer (got {env['BWAVE_SEED']!r})") from e
    else:
        seed = 0
    return config, out_dir, seed


def load_fields(config: RunConfig, solver: BeltramiSolver,
                rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """ファイルがあれば読み、無ければ seed から帯域制限の乱数場を作ります。"""
    grid = solver.grid
    fields = config.fields
    if fields.eta_file:
        eta = fieldio.read_surface_field(fields.eta_file, grid)
    else:
        eta = random_eta(grid, rng, fields.eta_amplitude * config.physical.h, fields.max_mode)
    if fields.phi_file:
        Phi = fieldio.read_surface_field(fields.phi_file, grid)
    else:
        f = grid.random_field(rng, max_mode=fields.max_mode)
        Phi = fields.phi_amplitude * f / max(float(np.max(np.abs(f))), np.finfo(float).tiny)
    return eta, Phi


def _out(out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _summary_table(title: str, values: Dict[str, float]) -> None:
    table = Table(title=title)
    table.add_column("quantity")
    table.add_column("value", justify="right")
    for key, value in values.items():
        table.add_row(key, f"{value:.6e}" if isinstance(value, float) else str(value))
    console.print(table)


# --- サブコマンド ---

def cmd_verify(config: RunConfig, out_dir: str, seed: int, suites: Optional[Sequence[str]] = None) -> SuiteReport:
    report = run_verify(config, seed, suites)
    rows = [(report.seed, c.suite, c.check, c.value, c.bound, c.passed) for c in report.checks]
    fieldio.write_table_csv(_out(out_dir, 'verify_report.csv'),
                            ('seed', 'suite', 'check', 'value', 'bound', 'passed'), rows)

    table = Table(title=f"verification (seed={report.seed})")
    for name in ("suite", "check", "value", "bound", "result"):
        table.add_column(name, justify="right" if name in ("value", "bound") else "left")
    for c in report.checks:
        table.add_row(c.suite, c.check, f"{c.value:.3e}", f"{c.bound:.1e}",
                      "[green]pass[/green]" if c.passed else "[red]FAIL[/red]")
    console.print(table)

    if not report.passed:
        raise VerificationFailed(f"{c.suite}/{c.check}" for c in report.checks if not c.passed)
    return report


def cmd_apply_h(config: RunConfig, out_dir: str, rng: np.random.Generator) -> Dict[str, float]:
    solver = build_solver(config)
    grid = solver.grid
    eta, Phi = load_fields(config, solver, rng)
    result = apply_H(eta, Phi, solver)

    fieldio.write_field(_out(out_dir, 'Hphi.bwav'), result.Hphi)
    fieldio.write_field(_out(out_dir, 'Kphi.bwav'), result.Kphi)
    fieldio.write_field(_out(out_dir, 'psi.bwav'), result.psi)
    fieldio.write_surface_csv(_out(out_dir, 'Hphi.csv'), result.Hphi, grid)
    fieldio.write_diagnostics_csv(_out(out_dir, 'diagnostics.csv'), result.solution)

    summary = {
        'mean_Hphi': float(grid.mean(result.Hphi)),
        'max_abs_Hphi': float(np.max(np.abs(result.Hphi))),
        'bvp_iterations': result.solution.iterations,
        'gauge_div': result.solution.gauge_div,
        'gauge_normal': result.solution.gauge_normal,
    }
    fieldio.write_summary_csv(_out(out_dir, 'summary.csv'), summary)
    _summary_table("apply-h", summary)
    return summary


def cmd_solve_bvp(config: RunConfig, out_dir: str, rng: np.random.Generator) -> Dict[str, float]:
    solver = build_solver(config)
    eta, Phi = load_fields(config, solver, rng)
    solution = solver.solve_bvp(eta, Phi)

    fieldio.write_field(_out(out_dir, 'A_tilde.bwav'), solution.A_tilde)
    fieldio.write_diagnostics_csv(_out(out_dir, 'diagnostics.csv'), solution)
    summary = {
        'iterations': solution.iterations,
        'final_correction': solution.residual_history[-1],
        'gauge_div': solution.gauge_div,
        'gauge_normal': solution.gauge_normal,
    }
    if solution.flat_residual is not None:
        summary.update(solution.flat_residual.model_dump())
    fieldio.write_summary_csv(_out(out_dir, 'summary.csv'), summary)
    _summary_table("solve-bvp", summary)
    return summary


def _write_wave(out_dir: str, prefix: str, result: WaveSolveResult, solver: BeltramiSolver) -> None:
    fieldio.write_field(_out(out_dir, f'{prefix}eta.bwav'), result.eta)
    fieldio.write_field(_out(out_dir, f'{prefix}phi.bwav'), result.phi)
    fieldio.write_surface_csv(_out(out_dir, f'{prefix}eta.csv'), result.eta, solver.grid)
    fieldio.write_newton_csv(_out(out_dir, f'{prefix}newton.csv'), result.trace)


def cmd_find_wave(config: RunConfig, out_dir: str, rng: np.random.Generator) -> List[WaveSolveResult]:
    params = config.physical
    newton = config.newton
    solver = build_solver(config)
    grid = solver.grid

    if config.fields.eta_file or config.fields.phi_file:
        eta0, phi0 = load_fields(config, solver, rng)
    elif newton.seed_amplitude > 0.0:
        eta0, phi0 = linear_seed(params, solver, newton.seed_amplitude * params.h, newton.seed_mode)
    else:
        eta0, phi0 = np.zeros(grid.shape), np.zeros(grid.shape)

    if newton.speeds:
        results = continue_in_speed(newton.speeds, eta0, phi0, params, solver, newton)
        for i, result in enumerate(results):
            _write_wave(out_dir, f'c{i:03d}_', result, solver)
    else:
        results = [find_wave(eta0, phi0, params, solver, newton)]
        _write_wave(out_dir, '', results[0], solver)

    rows = [(r.speed[0], r.speed[1], r.residual_R1, r.residual_R2, len(r.trace) - 1,
             float(np.max(np.abs(r.eta)))) for r in results]
    fieldio.write_table_csv(_out(out_dir, 'waves.csv'),
                            ('c1', 'c3', 'residual_R1', 'residual_R2', 'newton_steps', 'max_abs_eta'), rows)
    table = Table(title="find-wave")
    for name in ('c1', 'c3', '|R1|', '|R2|', 'steps', 'max|eta|'):
        table.add_column(name, justify="right")
    for row in rows:
        table.add_row(*(f"{v:.4g}" if isinstance(v, float) else str(v) for v in row))
    console.print(table)
    return results


def cmd_export(config: RunConfig, out_dir: str, rng: np.random.Generator,
               greens: bool = False, h_matrix: bool = False) -> Dict[str, float]:
    params = config.physical
    solver = build_solver(config)
    grid = solver.grid
    eta, Phi = load_fields(config, solver, rng)

    for name, field in (('eta', eta), ('phi', Phi)):
        fieldio.write_field(_out(out_dir, f'{name}.bwav'), field)
        fieldio.write_surface_csv(_out(out_dir, f'{name}.csv'), field, grid)
        fieldio.write_gnuplot(_out(out_dir, f'{name}.dat'), field, grid)

    value = lagrangian_volume(eta, Phi, params, solver)
    fieldio.write_functional_csv(_out(out_dir, 'functional.csv'), value)
    res = el_residuals(eta, Phi, params, solver)
    fieldio.write_field(_out(out_dir, 'R1.bwav'), res.R1)
    fieldio.write_field(_out(out_dir, 'R2.bwav'), res.R2)
    fieldio.write_diagnostics_csv(_out(out_dir, 'diagnostics.csv'), solver.solve_bvp(eta, Phi))

    if greens:
        fieldio.write_raw(_out(out_dir, 'greens.bwav'), blocks_to_array(solver.flat.blocks))
    if h_matrix:
        M, modes = assemble_H_matrix(eta, solver, max_mode=config.verify.basis_max_mode)
        fieldio.write_raw(_out(out_dir, 'h_matrix.bwav'), M[:, :, None, None])
        fieldio.write_table_csv(_out(out_dir, 'h_matrix_modes.csv'), ('index', 'm', 'n', 'kind'),
                                [(i, m, n, kind) for i, (m, n, kind) in enumerate(modes)])

    summary = {'L_volume': value.L_volume, 'L_surface': value.L_surface, 'Gamma': value.Gamma,
               'max_abs_R1': float(np.max(np.abs(res.R1))), 'max_abs_R2': float(np.max(np.abs(res.R2)))}
    fieldio.write_summary_csv(_out(out_dir, 'summary.csv'), summary)
    _summary_table("export", summary)
    return summary


def run(args: argparse.Namespace) -> int:
    config, out_dir, seed = resolve_run(args)
    rng = np.random.default_rng(seed)
    logger.info("bwave %s: out=%s seed=%d", args.command, out_dir, seed)
    if args.command == 'verify':
        cmd_verify(config, out_dir, seed, args.suite)
    elif args.command == 'apply-h':
        cmd_apply_h(config, out_dir, rng)
    elif args.command == 'solve-bvp':
        cmd_solve_bvp(config, out_dir, rng)
    elif args.command == 'find-wave':
        cmd_find_wave(config, out_dir, rng)
    elif args.command == 'export':
        cmd_export(config, out_dir, rng, greens=args.greens, h_matrix=args.h_matrix)
    return 0


def _one_line(message: object) -> str:
    return " ".join(str(message).split())


def main(argv: Optional[Sequence[str]] = None) -> int:
    """引数を解析して 1 つのサブコマンドを実行し、終了コードを返します。"""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        return run(args)
    except BeltramiError as e:
        print(f"error: {type(e).__name__}: {_one_line(e)}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        print("error: KeyboardInterrupt: interrupted by user", file=sys.stderr)
        return 1
    except Exception as e:
        logger.debug("unexpected error", exc_info=True)
        print(f"error: {type(e).__name__}: {_one_line(e)}", file=sys.stderr)
        return 1


def cli_main():
    sys.exit(main())


if __name__ == "__main__":
    cli_main()
