"""
beltrami-waves Verify: 恒等式・Green 行列・平坦ソルバ・BVP・自己共役性・極限・変分構造・
Newton 法の各検証スイート。

各スイートは CheckResult (suite, check, value, bound, passed) のリストを返します。
乱数はすべて seed から作った numpy.random.Generator で生成し、seed はレポートに残します。
"""
import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .bvp import BeltramiSolver, admissible_test_field, weak_residual
from .config import GridConfig, RunConfig, build_grids
from .errors import ConfigError
from .flat_solver import FlatSolver, collocation_mode_solve, residual_flat
from .flattening import (FlatteningCoeffs, curl_eta, curl_std, div_std, grad_std,
                         laplace_eta, div_eta, grad_eta_op, normal_trace, tangential_parallel)
from .greens import (GROWTH_LIMIT, closed_form_blocks, estimate_check, eval_blocks, greens_G, greens_G_dy,
                     mode_operator)
from .grid import HorizontalGrid, VerticalGrid
from .hodge import grad_inv_div, hodge_decompose, reconstruct
from .schema import CheckResult, ForcingData, SuiteReport
from .surface_operator import apply_G, apply_H, assemble_H_matrix, energy_identity_check, symmetry_defect
from .variational import (astar_divergence_identity, background, el_residuals, el_residuals_raw,
                          gradient_consistency, lagrangian_surface, lagrangian_volume)
from .wave_finder import find_wave, linear_seed, observed_order

logger = logging.getLogger(__name__)

TINY = np.finfo(float).tiny
GRADIENT_BVP_TOL = 1e-12
NEWTON_SEED_AMPLITUDE = 2e-2


def _rel(a, b, scale=None) -> float:
    diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
    if scale is None:
        scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return diff / max(scale, TINY)


class _Collector:
    def __init__(self, suite: str):
        self.suite = suite
        self.checks: List[CheckResult] = []

    def upper(self, name: str, value: float, bound: float) -> None:
        """value <= bound で合格。"""
        value = float(value)
        passed = bool(np.isfinite(value) and value <= bound)
        self.checks.append(CheckResult(suite=self.suite, check=name, value=value, bound=bound, passed=passed))

    def lower(self, name: str, value: float, bound: float) -> None:
        """value >= bound で合格。"""
        value = float(value)
        passed = bool(not np.isnan(value) and value >= bound)
        self.checks.append(CheckResult(suite=self.suite, check=name, value=value, bound=bound, passed=passed))


# --- 乱数場 ---

def random_eta(grid: HorizontalGrid, rng: np.random.Generator, amplitude: float, max_mode: int = 2) -> np.ndarray:
    """最大振幅が amplitude になる平均ゼロの帯域制限場。"""
    f = grid.random_field(rng, max_mode=max_mode)
    return amplitude * f / max(float(np.max(np.abs(f))), TINY)


def random_volume_field(grid: HorizontalGrid, vgrid: VerticalGrid, rng: np.random.Generator,
                        max_mode: int = 3, degree: int = 3) -> np.ndarray:
    """水平は帯域制限、鉛直は degree 次多項式の体積ベクトル場 (3, Ny, Nx, Nz)。"""
    coeffs = grid.random_field(rng, max_mode=max_mode, leading=(3, degree + 1), mean_zero=False)
    ybar = vgrid.y / vgrid.h
    powers = np.stack([ybar ** p for p in range(degree + 1)])
    return np.einsum("cpxz,py->cyxz", coeffs, powers)


# --- 恒等式 ---

def suite_identity(config: RunConfig, rng: np.random.Generator) -> List[CheckResult]:
    out = _Collector("identity")
    grid, vgrid = build_grids(config.grid, config.physical)
    h = config.physical.h
    flow = background(config.physical)
    worst = {k: 0.0 for k in ("perp_dot", "grad_perp_orthogonal", "integration_by_parts", "perp_pairing",
                              "hodge_reconstruct", "hodge_orthogonal", "surface_curl_flat",
                              "surface_curl_flattened", "normal_trace", "astar_divergence")}
    for _ in range(config.verify.n_fields):
        f = grid.random_field(rng, leading=(2,))
        g = grid.random_field(rng, leading=(2,))
        chi1 = grid.random_field(rng)
        chi2 = grid.random_field(rng)

        fg = np.sum(f * g, axis=0)
        worst["perp_dot"] = max(worst["perp_dot"], _rel(np.sum(grid.perp(f) * grid.perp(g), axis=0), fg))

        g1, g2 = grid.grad_h(chi1), grid.perp_grad(chi2)
        orth = abs(grid.inner(g1, g2)) / max(grid.l2_norm(g1) * grid.l2_norm(g2), TINY)
        worst["grad_perp_orthogonal"] = max(worst["grad_perp_orthogonal"], orth)

        a, b = grid.inner(f, grid.grad_h(chi1)), -grid.inner(chi1, grid.div_h(f))
        worst["integration_by_parts"] = max(worst["integration_by_parts"], abs(a - b) / max(abs(a) + abs(b), TINY))

        # 平均つきの場でも成り立つこと
        fm = f + rng.standard_normal((2, 1, 1))
        gm = g + rng.standard_normal((2, 1, 1))
        t1 = grid.inner(grad_inv_div(grid.perp(gm), grid), fm)
        t2 = grid.inner(grad_inv_div(grid.perp(fm), grid), gm)
        t3 = grid.inner(fm, grid.perp(gm))
        scale = abs(t1) + abs(t2) + abs(t3)
        worst["perp_pairing"] = max(worst["perp_pairing"], abs(t1 - t2 - t3) / max(scale, TINY))

        parts = hodge_decompose(f, grid)
        worst["hodge_reconstruct"] = max(worst["hodge_reconstruct"], _rel(reconstruct(parts, grid), f))
        gp, pp = grid.grad_h(parts.phi), grid.perp_grad(parts.psi)
        worst["hodge_orthogonal"] = max(worst["hodge_orthogonal"],
                                        abs(grid.inner(gp, pp)) / max(grid.inner(f, f), TINY))

        F = random_volume_field(grid, vgrid, rng)
        flat = FlatteningCoeffs(np.zeros(grid.shape), grid, vgrid)
        lhs = grid.div_h(grid.perp(tangential_parallel(F, flat)))
        rhs = normal_trace(curl_eta(F, flat), flat)
        worst["surface_curl_flat"] = max(worst["surface_curl_flat"], _rel(lhs, rhs))

        eta = random_eta(grid, rng, 0.01 * h)
        co = FlatteningCoeffs(eta, grid, vgrid)
        lhs = grid.div_h(grid.perp(tangential_parallel(F, co)))
        rhs = normal_trace(curl_eta(F, co), co)
        worst["surface_curl_flattened"] = max(worst["surface_curl_flattened"], _rel(lhs, rhs))

        top = F[:, -1]
        explicit = top[1] - co.eta_x * top[0] - co.eta_z * top[2]
        worst["normal_trace"] = max(worst["normal_trace"], _rel(normal_trace(F, co), explicit))

        lhs, rhs = astar_divergence_identity(eta, flow, grid)
        worst["astar_divergence"] = max(worst["astar_divergence"], _rel(lhs, rhs))

    bounds = {"surface_curl_flattened": 1e-7, "astar_divergence": 1e-8, "hodge_reconstruct": 1e-11,
              "hodge_orthogonal": 1e-11}
    for name, value in worst.items():
        out.upper(name, value, bounds.get(name, 1e-9))

    # 平坦化作用素の整合性
    F = random_volume_field(grid, vgrid, rng)
    f = F[0]
    out.upper("curl_grad", _rel(curl_std(grad_std(f, grid, vgrid), grid, vgrid), 0.0,
                                 scale=float(np.max(np.abs(grad_std(f, grid, vgrid))))), 1e-9)
    out.upper("div_curl", _rel(div_std(curl_std(F, grid, vgrid), grid, vgrid), 0.0,
                                scale=float(np.max(np.abs(curl_std(F, grid, vgrid))))), 1e-9)
    u_star, a_star = flow.on_strip(grid, vgrid)
    out.upper("background_beltrami", _rel(curl_std(u_star, grid, vgrid), config.physical.alpha * u_star,
                                          scale=max(float(np.max(np.abs(u_star))), 1.0)), 1e-10)
    out.upper("background_potential", _rel(curl_std(a_star, grid, vgrid), u_star,
                                           scale=max(float(np.max(np.abs(u_star))), 1.0)), 1e-10)
    eta = random_eta(grid, rng, 0.01 * h)
    co = FlatteningCoeffs(eta, grid, vgrid)
    out.upper("laplace_composition", _rel(laplace_eta(f, co), div_eta(grad_eta_op(f, co), co)), 1e-8)
    return out.checks


# --- Green 行列 ---

def suite_greens(config: RunConfig, rng: np.random.Generator) -> List[CheckResult]:
    out = _Collector("greens")
    h = config.physical.h
    alpha_max = 0.9 * np.pi / (2.0 * h)
    vgrid = VerticalGrid(32, h)
    K = rng.uniform(0.5, 5.0, size=5) / h
    theta = rng.uniform(0.0, 2.0 * np.pi, size=5)
    k1, k3 = K * np.cos(theta), K * np.sin(theta)

    cont = jump = ode = bottom = u21 = w21 = closed = 0.0
    for alpha in (0.0, config.physical.alpha, alpha_max):
        blocks = eval_blocks(k1, k3, alpha, h, vgrid.y)
        U, W, C = closed_form_blocks(k1, k3, alpha, h, vgrid.y)
        closed = max(closed, _rel(blocks.U, U), _rel(blocks.W, W), _rel(blocks.C, C))
        for i in range(K.size):
            yy = float(rng.uniform(-h, 0.0))
            lower = greens_G(blocks, yy, yy, index=i, branch="lower")
            upper = greens_G(blocks, yy, yy, index=i, branch="upper")
            cont = max(cont, _rel(lower, upper))
            dplus = greens_G_dy(blocks, yy, yy, index=i, branch="lower")
            dminus = greens_G_dy(blocks, yy, yy, index=i, branch="upper")
            jump = max(jump, float(np.max(np.abs(dplus - dminus + np.eye(3)))))

            # 基本行列の列を Chebyshev 微分して常微分方程式に代入
            for F in (blocks.U[i], blocks.W[i]):
                dF, d2F = vgrid.dy(F), vgrid.dyy(F)
                res = mode_operator(F, dF, d2F, k1[i], k3[i], alpha)
                scale = max(float(np.max(np.abs(d2F))), K[i] ** 2 * float(np.max(np.abs(F))), TINY)
                ode = max(ode, float(np.max(np.abs(res[1:-1]))) / scale)

            U0, dU0 = blocks.U[i, 0], blocks.dU[i, 0]
            bottom = max(bottom, float(np.max(np.abs(U0[0]))), float(np.max(np.abs(U0[2]))),
                         float(np.max(np.abs(dU0[1]))))
            u21 = max(u21, _rel(blocks.U[i, :, 1, 0], np.cosh(K[i] * (vgrid.y + h))))
            w21 = max(w21, abs(blocks.W[i, 0, 1, 0] + np.sinh(K[i] * h)) / np.sinh(K[i] * h))

    out.upper("branch_continuity", cont, 1e-8)
    out.upper("derivative_jump", jump, 1e-8)
    out.upper("ode_residual", ode, 1e-7)
    out.upper("bottom_conditions", bottom, 1e-10)
    out.upper("u21_cosh", u21, 1e-10)
    out.upper("w21_sinh", w21, 1e-10)
    out.upper("closed_form", closed, 1e-9)

    k_samples = np.geomspace(0.05, 20.0, 12) / h
    alphas = np.linspace(0.0, alpha_max, 4)
    for est in estimate_check(k_samples, alphas, h):
        ratio = est.refined_ratio / est.worst_ratio if est.worst_ratio > 0 else 0.0
        out.upper(f"estimate_{est.name}", ratio, 2.0)
        out.upper(f"estimate_{est.name}_growth", est.growth, GROWTH_LIMIT)
    return out.checks


# --- 平坦ソルバ ---

def _single_mode(grid: HorizontalGrid, m: int, n: int, amp: np.ndarray) -> np.ndarray:
    """Re(amp e^{i k.x}) を amp の形状 + grid.shape で。"""
    k1 = 2.0 * np.pi * m / grid.Lx
    k3 = 2.0 * np.pi * n / grid.Lz
    phase = np.exp(1j * (k1 * grid.X + k3 * grid.Z))
    return np.real(np.asarray(amp)[..., None, None] * phase)


def suite_flat(config: RunConfig, rng: np.random.Generator) -> List[CheckResult]:
    out = _Collector("flat")
    grid, vgrid = build_grids(config.grid, config.physical)
    alpha = config.physical.alpha
    solver = FlatSolver(grid, vgrid, alpha)
    ybar = vgrid.y / vgrid.h
    oracle_err = res_err = 0.0
    for _ in range(config.verify.n_forcings):
        m = int(rng.integers(-3, 4))
        n = int(rng.integers(1, 4))
        cH = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
        H_amp = np.einsum("cp,py->cy", cH, np.stack([ybar ** p for p in range(4)]))
        g_amp = complex(rng.standard_normal() + 1j * rng.standard_normal())
        h_amp = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        data = ForcingData(H=_single_mode(grid, m, n, H_amp), g=_single_mode(grid, m, n, g_amp),
                           hvec=_single_mode(grid, m, n, h_amp))
        A = solver.solve(data)
        A_hat = grid.fft_forward(A)[:, :, m % grid.Nx, n]
        k1 = 2.0 * np.pi * m / grid.Lx
        k3 = 2.0 * np.pi * n / grid.Lz
        ref = collocation_mode_solve(k1, k3, alpha, vgrid, 0.5 * H_amp, 0.5 * g_amp, 0.5 * h_amp)
        oracle_err = max(oracle_err, _rel(A_hat, ref))
        r = residual_flat(A, data, alpha, grid, vgrid)
        scale = max(float(np.max(np.abs(A))), float(np.max(np.abs(data.H))), TINY)
        res_err = max(res_err, max(r.pde_res, r.bottom_res, r.surface_res) / scale)
    out.upper("collocation_oracle", oracle_err, 1e-8)
    out.upper("residual_flat", res_err, 1e-8)
    return out.checks


# --- BVP ---

def suite_bvp(config: RunConfig, rng: np.random.Generator) -> List[CheckResult]:
    out = _Collector("bvp")
    solver = _solver(config)
    grid = solver.grid
    h = config.physical.h
    decay = div = normal = weak = scaled = 0.0
    for amp in (0.01, 0.03, 0.05):
        eta = random_eta(grid, rng, amp * h)
        Phi = grid.random_field(rng)
        sol = solver.solve_bvp(eta, Phi)
        # 丸めの床付近の揺らぎは減衰率に含めない
        hist = [r for r in sol.residual_history if r > 100.0 * solver.tol]
        if len(hist) > 1:
            decay = max(decay, max(b / a for a, b in zip(hist[:-1], hist[1:])))
        div = max(div, sol.gauge_div)
        normal = max(normal, sol.gauge_normal)
        scaled = max(scaled, sol.residual_scaled)
        co = solver.coefficients(eta)
        for _ in range(max(1, config.verify.n_test_fields // 3)):
            B = admissible_test_field(co, rng)
            weak = max(weak, weak_residual(sol.A_tilde, co, Phi, B, config.physical.alpha).relative)
    out.upper("geometric_decay", decay, 1.0)
    out.upper("gauge_div", div, 1e-6)
    out.upper("gauge_normal", normal, 1e-8)
    out.upper("weak_residual", weak, 1e-7)
    out.upper("flat_residual", scaled, 1e-7)
    return out.checks


def _solver(config: RunConfig, grid: Optional[GridConfig] = None,
            alpha: Optional[float] = None) -> BeltramiSolver:
    """既定では config.grid 上のソルバ。H 行列の組み立てだけは reduced_grid を渡します。"""
    hgrid, vgrid = build_grids(grid or config.grid, config.physical)
    s = config.solver
    a = config.physical.alpha if alpha is None else alpha
    return BeltramiSolver(hgrid, vgrid, a, tol=s.tol, maxit=s.maxit, relax=s.relax,
                          h_min_ratio=s.h_min_ratio, zero_mode=s.zero_mode,
                          floor_tol=s.floor_tol, stall_window=s.stall_window)


# --- 自己共役性 ---

def suite_adjoint(config: RunConfig, rng: np.random.Generator) -> List[CheckResult]:
    out = _Collector("adjoint")
    h = config.physical.h
    # 列ごとに BVP を解くので、行列は縮小格子で組み立てる
    reduced = _solver(config, grid=config.verify.reduced_grid)
    eta = random_eta(reduced.grid, rng, 0.02 * h)
    M, _ = assemble_H_matrix(eta, reduced, max_mode=config.verify.basis_max_mode)
    out.upper("matrix_symmetry", symmetry_defect(M), 1e-7)

    solver = _solver(config)
    grid = solver.grid
    eta = random_eta(grid, rng, 0.02 * h)
    worst = 0.0
    for _ in range(config.verify.n_pairs):
        res = energy_identity_check(eta, grid.random_field(rng), grid.random_field(rng), solver)
        worst = max(worst, res.relative_residual)
    out.upper("energy_identity", worst, 1e-7)
    return out.checks


# --- 渦なし極限 ---

def _fitted_order(alphas: Sequence[float], errors: Sequence[float]) -> float:
    a = np.log(np.asarray(alphas, dtype=float))
    e = np.log(np.maximum(np.asarray(errors, dtype=float), TINY))
    return float(np.polyfit(a, e, 1)[0])


def suite_limit(config: RunConfig, rng: np.random.Generator) -> List[CheckResult]:
    out = _Collector("limit")
    h = config.physical.h
    base = _solver(config, alpha=0.0)
    grid, vgrid = base.grid, base.vgrid
    Phi = grid.random_field(rng)
    zero = np.zeros(grid.shape)
    strip = grid.fft_inverse(grid.kmag * np.tanh(grid.kmag * h) * grid.fft_forward(Phi))
    norm = grid.l2_norm(Phi)
    out.upper("strip_symbol", grid.l2_norm(apply_H(zero, Phi, base).Hphi - strip) / norm, 1e-8)

    eta = random_eta(grid, rng, 0.02 * h)
    G_eta = apply_G(eta, Phi, grid, vgrid, tol=config.solver.tol, maxit=config.solver.maxit)
    H0_eta = apply_H(eta, Phi, base).Hphi
    out.upper("irrotational_agreement", grid.l2_norm(H0_eta - G_eta) / norm, 1e-6)

    alphas = [0.1 / h, 0.01 / h, 0.001 / h]
    flat_err, curved_err = [], []
    for alpha in alphas:
        solver = _solver(config, alpha=alpha)
        flat_err.append(grid.l2_norm(apply_H(zero, Phi, solver).Hphi - strip) / norm)
        curved_err.append(grid.l2_norm(apply_H(eta, Phi, solver).Hphi - G_eta) / norm)
    out.upper("flat_alpha_bound", max(e / a for e, a in zip(flat_err, alphas)), 10.0 * h ** 2)
    out.lower("flat_alpha_order", _fitted_order(alphas, flat_err), 0.9)
    out.lower("curved_alpha_order", _fitted_order(alphas, curved_err), 0.9)
    return out.checks


# --- 変分構造 ---

def suite_variational(config: RunConfig, rng: np.random.Generator) -> List[CheckResult]:
    out = _Collector("variational")
    params = config.physical
    solver = _solver(config)
    grid = solver.grid
    h = params.h
    zero = np.zeros(grid.shape)

    L0 = lagrangian_surface(zero, zero, params, solver).L_surface
    res0 = el_residuals(zero, zero, params, solver)
    out.upper("trivial_functional", abs(L0), 1e-12)
    out.upper("trivial_residuals", max(float(np.max(np.abs(res0.R1))), float(np.max(np.abs(res0.R2)))), 1e-12)

    worst = 0.0
    for _ in range(3):
        eta = random_eta(grid, rng, 0.02 * h)
        Phi = 0.1 * grid.random_field(rng)
        value = lagrangian_volume(eta, Phi, params, solver)
        worst = max(worst, abs(value.L_volume - value.L_surface) / max(abs(value.L_surface), TINY))
    out.upper("volume_surface", worst, 1e-7)

    Phi = 0.1 * grid.random_field(rng)
    hk = el_residuals(zero, Phi, params, solver)
    raw = el_residuals_raw(zero, Phi, params, solver)
    out.upper("raw_vs_hk_flat", max(_rel(hk.R1, raw.R1), _rel(hk.R2, raw.R2)), 1e-8)

    # 小さな基準状態から大きな方向へ。差分誤差 eps^2 L''' が丸めより十分大きくなる
    eta = random_eta(grid, rng, 0.005 * h)
    Phi = 0.05 * grid.random_field(rng)
    d_eta = random_eta(grid, rng, 0.25 * h)
    d_Phi = grid.random_field(rng)
    tol = min(config.solver.tol, GRADIENT_BVP_TOL)
    eps = (1e-3, 1e-4, 1e-5)
    errors = [gradient_consistency(eta, Phi, d_eta, d_Phi, e, params, solver, tol=tol).relative_error
              for e in eps]
    out.upper("gradient_mismatch", min(errors), 1e-6)
    # 次数は最初の組 (1e-3, 1e-4) の一段分の減り方
    out.lower("gradient_order", float(np.log10(errors[0] / max(errors[1], TINY))), 1.9)
    return out.checks


# --- Newton 法 ---

def suite_newton(config: RunConfig, rng: np.random.Generator) -> List[CheckResult]:
    out = _Collector("newton")
    params = config.physical
    newton = config.newton
    solver = _solver(config)
    grid = solver.grid
    zero = np.zeros(grid.shape)

    result = find_wave(zero, zero, params, solver, newton)
    out.upper("trivial_steps", len(result.trace) - 1, 2)

    eta0 = 1e-4 * params.h * grid.random_field(rng)
    phi0 = 1e-4 * grid.random_field(rng)
    result = find_wave(eta0, phi0, params, solver, newton)
    out.upper("basin_return", max(float(np.max(np.abs(result.eta))), float(np.max(np.abs(result.phi)))), 1e-7)

    params0 = params.model_copy(update={"alpha": 0.0})
    solver0 = _solver(config, alpha=0.0)
    # 振幅 2e-2 h なら床に届くまで少なくとも 3 つの残差が残る
    eta_s, phi_s = linear_seed(params0, solver0, NEWTON_SEED_AMPLITUDE * params.h, newton.seed_mode)
    result = find_wave(eta_s, phi_s, params0, solver0, newton)
    res = [max(s.residual_R1, s.residual_R2) for s in result.trace]
    floor = max(1e-10, 10.0 * newton.bvp_tol)
    out.lower("superlinear_order", observed_order(res, floor), 1.5)
    return out.checks


SUITES: Dict[str, Callable[[RunConfig, np.random.Generator], List[CheckResult]]] = {
    "identity": suite_identity,
    "greens": suite_greens,
    "flat": suite_flat,
    "bvp": suite_bvp,
    "adjoint": suite_adjoint,
    "limit": suite_limit,
    "variational": suite_variational,
    "newton": suite_newton,
}


def run_verify(config: RunConfig, seed: int, suites: Optional[Sequence[str]] = None) -> SuiteReport:
    """指定したスイートを順に実行し、1 つのレポートにまとめます。"""
    names = list(suites or config.verify.suites)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ConfigError(f"unknown verification suite(s): {', '.join(unknown)}")
    report = SuiteReport(seed=seed)
    for name in names:
        rng = np.random.default_rng([seed, list(SUITES).index(name)])
        logger.info("running suite %s", name)
        checks = SUITES[name](config, rng)
        report.checks.extend(checks)
        failed = [c.check for c in checks if not c.passed]
        if failed:
            logger.warning("suite %s: %d check(s) failed: %s", name, len(failed), ", ".join(failed))
    return report
