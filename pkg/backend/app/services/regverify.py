"""
正则性指数的经验验证

对解或特征展开的范数-时间曲线做对数回归，与定理给出的衰减指数比较；
另外提供求解器对特征展开的收敛阶、稳定性比值与记忆项比值（3.1-first/3.1-second）的趋势。
"""

import logging
from dataclasses import replace

import numpy as np
from scipy import stats

from app.models.mesh import SpaceMesh, TimeSeries
from app.models.problem import ProblemSpec, SchemeConfig, Trajectory
from app.models.reports import RateEstimate, RatePrediction, RateReport
from app.services.femcore import decompose, gradient_norm, hmu_norm, l2_norm, mass_matrix, stiffness_matrix
from app.services.quadfunc import InnerProduct, check_inequality
from app.services.solver import (
    f_rhs, frac_time_derivative, solve_spectral_const, solve_weak, time_derivative, trajectory_series
)
from app.utils.config import config
from app.utils.report_helpers import ErrorCodes, LabError
from app.utils.validators import validate_selector, validate_window

logger = logging.getLogger(__name__)

MIN_SAMPLES = 8
WINDOW_FRACTIONS = (1e-3, 1e-1)

QUANTITIES = ('deriv', 'weighted_grad_deriv', 'frac_deriv', 'frac_deriv_w', 'continuity', 'hmu_deriv')


def _cor34(quantity, m, alpha, mu, nu):
    return {
        'deriv': (-m, 'bound'),
        'weighted_grad_deriv': (-m - alpha / 2, 'bound'),
        'frac_deriv': (alpha - m, 'sharp'),
    }.get(quantity)


def _thm42(quantity, m, alpha, mu, nu):
    return {
        'deriv': (alpha * mu / 2 - m, 'sharp'),
        'weighted_grad_deriv': (alpha * mu / 2 - m - alpha / 2, 'bound'),
        'continuity': (alpha * mu / 2, 'sharp'),
        'frac_deriv_w': (alpha - m + alpha * mu / 2, 'sharp'),
    }.get(quantity)


def _thm4x(quantity, m, alpha, mu, nu):
    # u₀ ∈ Ḣ^μ 时 ‖u^{(m)}‖_ν ~ t^{-m-(ν-μ)α/2}；μ=0 与 ν=2 是两个端点
    if quantity != 'hmu_deriv':
        return None
    return (-m - (nu - mu) * alpha / 2, 'sharp')


PREDICTIONS = {
    'cor3.4': _cor34,
    'thm4.1': _thm4x,
    'thm4.2': _thm42,
    'thm4.3': _thm4x,
}

DEFAULT_QUANTITY = {'cor3.4': 'deriv', 'thm4.1': 'hmu_deriv', 'thm4.2': 'deriv', 'thm4.3': 'hmu_deriv'}


def predict(theorem: str, quantity: str, m: int, alpha: float, mu: float = 0.0, nu: float = 2.0) -> RatePrediction:
    """预测指数表：唯一的真值来源"""
    if not validate_selector(theorem, PREDICTIONS):
        raise LabError(ErrorCodes.UNKNOWN_SELECTOR, f'未知定理 {theorem}，可选 {list(PREDICTIONS)}')
    entry = PREDICTIONS[theorem](quantity, m, alpha, mu, nu)
    if entry is None:
        raise LabError(ErrorCodes.UNKNOWN_SELECTOR, f'{theorem} 不预测量 {quantity}')
    exponent, check = entry
    return RatePrediction(theorem, quantity, float(exponent), check)


def initial_layer_horizon(alpha: float, lam1: float, level: float = 0.1) -> float:
    """满足 λ₁T^α = level 的 T，使拟合窗口落在初始层内"""
    return float((level / lam1) ** (1.0 / alpha))


def estimate_exponent(samples, window=None) -> RateEstimate:
    """
    log(value) 对 log(t) 的最小二乘斜率

    Args:
        samples: (t, value) 对的序列或形状 (n, 2) 的数组
        window: (t_lo, t_hi)；缺省使用全部样本
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise LabError(ErrorCodes.FIT_FAILURE, '样本必须是 (t, value) 对')

    t, values = data[:, 0], data[:, 1]
    if window is None:
        window = (float(np.min(t)), float(np.max(t)))
    if not validate_window(window):
        raise LabError(ErrorCodes.FIT_FAILURE, f'退化的拟合窗口 {window}')

    lo, hi = window
    inside = (t >= lo) & (t <= hi)
    if np.count_nonzero(inside) < MIN_SAMPLES:
        raise LabError(ErrorCodes.FIT_FAILURE, f'窗口内只有 {np.count_nonzero(inside)} 个样本，至少需要 {MIN_SAMPLES}')
    if np.any(values[inside] <= 0) or not np.all(np.isfinite(values[inside])):
        raise LabError(ErrorCodes.FIT_FAILURE, '窗口内存在非正或非有限的取值')

    fit = stats.linregress(np.log(t[inside]), np.log(values[inside]))
    stderr = float(fit.stderr) if np.isfinite(fit.stderr) else 0.0
    return RateEstimate(float(fit.slope), stderr, (float(lo), float(hi)), int(np.count_nonzero(inside)))


def quantity_series(trajectory: Trajectory, quantity: str, m: int, nu: float = 2.0, kappa=None) -> np.ndarray:
    """
    指定范数在各节点上的取值（t=0 处为 NaN）

    特征展开轨迹使用解析导数，其余轨迹使用差商。
    """
    if not validate_selector(quantity, QUANTITIES):
        raise LabError(ErrorCodes.UNKNOWN_SELECTOR, f'未知量 {quantity}，可选 {list(QUANTITIES)}')

    analytic = trajectory.spectral is not None
    space = trajectory.space

    if quantity == 'continuity':
        values = l2_norm(space, trajectory.states - trajectory.states[0])
    elif quantity == 'frac_deriv':
        values = l2_norm(space, _interior(frac_time_derivative(trajectory, m, analytic=analytic)))
    elif quantity == 'frac_deriv_w':
        series = frac_time_derivative(trajectory, m, analytic=analytic, subtract_initial=True)
        values = l2_norm(space, _interior(series))
    else:
        series = time_derivative(trajectory, m, analytic=analytic) if m > 0 else trajectory_series(trajectory)
        states = _interior(series)
        if quantity == 'deriv':
            values = l2_norm(space, states)
        elif quantity == 'weighted_grad_deriv':
            values = gradient_norm(space, states)
        else:
            values = hmu_norm(nu, states, decompose(space, kappa))

    values = np.array(values, dtype=float)
    values[0] = np.nan
    return values


def _interior(series: TimeSeries) -> np.ndarray:
    values = np.array(series.values)
    values[0] = 0.0
    return values


def _samples(trajectory: Trajectory, values: np.ndarray) -> np.ndarray:
    return np.column_stack([trajectory.mesh.nodes[1:], values[1:]])


def _uses_oracle(problem: ProblemSpec) -> bool:
    return not problem.coefficients.has_lower_order_terms and problem.is_homogeneous


def _run(problem: ProblemSpec, scheme: SchemeConfig, oracle: bool) -> Trajectory:
    return solve_spectral_const(problem, scheme) if oracle else solve_weak(problem, scheme)


def verify_rate(theorem: str, problem: ProblemSpec, m: int, mu: float, scheme: SchemeConfig,
                quantity: str = None, nu: float = 2.0, experiment_id: str = None,
                check: str = None, refine: bool = True) -> RateReport:
    """
    测量一个正则性指数并与预测比较

    Args:
        theorem: 预测表中的定理编号
        problem: 问题；T 会被初始层时间尺度替换
        m: 导数阶
        mu: 初值正则性（不超过问题声明的 u0 正则性）
        scheme: 离散参数；refine 为真时再以加密参数重算以检查网格无关性

    Returns:
        RateReport
    """
    quantity = quantity or DEFAULT_QUANTITY.get(theorem)
    prediction = predict(theorem, quantity, m, problem.alpha, mu, nu)
    if mu > problem.u0.regularity_mu + 1e-12:
        raise LabError(
            ErrorCodes.HYPOTHESIS_VIOLATION,
            f'μ={mu} 超过初值 {problem.u0.name} 的正则性 {problem.u0.regularity_mu}'
        )

    oracle = _uses_oracle(problem)
    space = SpaceMesh(scheme.n_x)
    lam1 = decompose(space, problem.coefficients.kappa).lambda1
    horizon = initial_layer_horizon(problem.alpha, lam1)
    problem = replace(problem, T=horizon)
    window = (WINDOW_FRACTIONS[0] * horizon, WINDOW_FRACTIONS[1] * horizon)

    boundary = problem.u0.regularity_mu <= 0.5
    tol = config.TOL_RATE_SPECTRAL if oracle and not boundary else config.TOL_RATE_WEAK
    experiment_id = experiment_id or f'{theorem}-{quantity}-a{problem.alpha}-mu{mu}-m{m}'
    notes = ['oracle=spectral' if oracle else 'oracle=weak']
    if quantity == 'frac_deriv_w':
        notes.append('fractional bound verified for u - u0')
    if boundary:
        notes.append('regularity boundary: widened tolerance')

    if problem.u0.is_zero and problem.is_homogeneous:
        estimate = RateEstimate(prediction.exponent, 0.0, window, 0)
        notes.append('zero solution')
        return RateReport(experiment_id, theorem, quantity, problem.alpha, mu, m, prediction.exponent,
                          estimate, tol, check or prediction.check, None, notes)

    kappa = problem.coefficients.kappa
    trajectory = _run(problem, scheme, oracle)
    estimate = estimate_exponent(_samples(trajectory, quantity_series(trajectory, quantity, m, nu, kappa)), window)

    refined_exponent = None
    if refine:
        refined = _run(problem, scheme.refined(), oracle)
        refined_exponent = estimate_exponent(
            _samples(refined, quantity_series(refined, quantity, m, nu, kappa)), window).exponent

    report = RateReport(experiment_id, theorem, quantity, problem.alpha, mu, m, prediction.exponent,
                        estimate, tol, check or prediction.check, refined_exponent, notes)
    logger.info("指数 %s: 预测 %.4f 实测 %.4f ± %.4f", experiment_id, report.predicted, report.measured,
                estimate.stderr)
    return report


def verify_u_continuity(problem: ProblemSpec, mu: float, scheme: SchemeConfig, refine: bool = True) -> RateReport:
    """‖u(t) - u₀‖ ~ t^{αμ/2}（g ≡ 0）"""
    if mu <= 0:
        raise LabError(ErrorCodes.HYPOTHESIS_VIOLATION, f'连续性指数要求 μ > 0，收到 {mu}')
    return verify_rate('thm4.2', problem, 0, mu, scheme, quantity='continuity', refine=refine,
                       experiment_id=f'thm4.2-continuity-a{problem.alpha}-mu{mu}')


def stability_ratios(trajectory: Trajectory, problem: ProblemSpec) -> dict:
    """
    sup_n ‖u(t_n)‖/(‖u₀‖ + M t_n^η) 与 sup_n t_n^{α/2}‖∇u(t_n)‖/(‖u₀‖ + M t_n^η)
    """
    t = trajectory.mesh.nodes[1:]
    states = trajectory.states[1:]
    driver = float(l2_norm(trajectory.space, trajectory.states[0])) + problem.source.M * t ** problem.source.eta
    driver = np.maximum(driver, 1e-300)
    return {
        'l2': float(np.max(l2_norm(trajectory.space, states) / driver)),
        'grad': float(np.max(t ** (problem.alpha / 2) * gradient_norm(trajectory.space, states) / driver)),
    }


def stability_trend(problem: ProblemSpec, schemes, slack: float = 1e-3) -> dict:
    """各网格上的稳定性比值；non_increasing 允许 slack 的相对增长"""
    rows = []
    for scheme in schemes:
        ratios = stability_ratios(solve_weak(problem, scheme), problem)
        rows.append(dict(ratios, N=scheme.N, n_x=scheme.n_x))
    non_increasing = all(
        rows[i + 1][key] <= rows[i][key] * (1 + slack)
        for i in range(len(rows) - 1) for key in ('l2', 'grad')
    )
    return {'rows': rows, 'non_increasing': non_increasing,
            'bounded': all(np.isfinite(row['l2']) and np.isfinite(row['grad']) for row in rows)}


def memory_ratio_trend(problem: ProblemSpec, schemes, m: int = 1, growth: float = 1.25) -> dict:
    """
    3.1-first 与 3.1-second 两个比值在加密下的统计

    比值含未知常数，只检查逐次加密时增长不超过 growth 倍。
    """
    reports = []
    for scheme in schemes:
        trajectory = solve_weak(problem, scheme)
        space = trajectory.space
        inputs = {
            'u': trajectory_series(trajectory),
            'f': f_rhs(problem, trajectory.mesh, space),
            'mass_inner': InnerProduct(mass_matrix(space), 'mass'),
            'grad_inner': InnerProduct(stiffness_matrix(space), 'grad'),
        }
        params = {'alpha': problem.alpha, 'm': m}
        reports.append({
            'N': scheme.N,
            'first': check_inequality('3.1-first', params, inputs),
            'second': check_inequality('3.1-second', params, inputs),
        })

    bounded = all(
        reports[i + 1][key].ratio <= growth * reports[i][key].ratio
        for i in range(len(reports) - 1) for key in ('first', 'second')
    ) and all(np.isfinite(r[key].ratio) for r in reports for key in ('first', 'second'))
    return {'reports': reports, 'bounded': bounded}


def convergence_study(problem: ProblemSpec, schemes) -> list:
    """
    弱求解器对特征展开的 L∞(L₂) 误差与观测阶

    两者共用同一有限元空间，误差只反映时间离散。
    """
    rows = []
    for scheme in schemes:
        weak = solve_weak(problem, scheme)
        oracle = solve_spectral_const(problem, scheme)
        error = float(np.max(l2_norm(weak.space, weak.states - oracle.states)))
        row = {'N': scheme.N, 'n_x': scheme.n_x, 'gamma': weak.mesh.gamma, 'error': error, 'order': None}
        if rows and rows[-1]['error'] > 0 and error > 0:
            row['order'] = float(np.log(rows[-1]['error'] / error) / np.log(scheme.N / rows[-1]['N']))
        rows.append(row)
        logger.info("收敛研究 N=%d 误差 %.3e", scheme.N, error)
    return rows
