"""
分数阶微积分离散核
提供 ω_μ 权函数、分级网格、乘积积分形式的分数阶积分、Riemann-Liouville 导数、
Mittag-Leffler 函数求值以及 Caputo/RL 初值平移恒等式
"""

import logging
from functools import lru_cache

import numpy as np
from scipy import special

from app.models.mesh import GradedMesh, TimeSeries
from app.utils.config import config
from app.utils.report_helpers import (
    ErrorCodes, LabError, MittagLefflerError, SingularAtOriginError
)
from app.utils.validators import (
    validate_finite, validate_grading, validate_order, validate_positive_time, validate_step_count
)

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps

# 级数与围道积分的切换点及交叉校验带
ML_SERIES_LIMIT = -1.0
ML_CROSS_CHECK_BAND = (-1.5, -0.5)
ML_AGREEMENT = 1e-8
_ML_MAX_TERMS = 4096
_ML_CHUNK = 4096


def omega(mu, t):
    """
    计算 ω_μ(t) = t^{μ-1}/Γ(μ)

    Args:
        mu: 阶数，μ 为非正整数时结果恒为 0
        t: 正时间（标量或数组）

    Returns:
        与 t 同形状的权值
    """
    if not validate_finite(mu, t):
        raise LabError(ErrorCodes.NON_FINITE_INPUT, 'omega 的输入必须为有限数')
    if not validate_positive_time(t):
        raise LabError(ErrorCodes.VALIDATION_ERROR, 'omega 要求 t > 0')

    t = np.asarray(t, dtype=float)
    value = np.power(t, float(mu) - 1.0) * special.rgamma(float(mu))
    return float(value) if value.ndim == 0 else value


def default_grading(alpha: float) -> float:
    """默认网格加密指数 γ = (2-α)/α，截断到 [1, 8]"""
    return float(np.clip((2.0 - alpha) / alpha, 1.0, 8.0))


def make_graded_mesh(T: float, N: int, gamma: float = 1.0) -> GradedMesh:
    if not validate_positive_time(T):
        raise LabError(ErrorCodes.INVALID_MESH, f'T 必须为正，收到 {T}')
    if not validate_step_count(N, minimum=1):
        raise LabError(ErrorCodes.INVALID_MESH, f'N 必须为正整数，收到 {N}')
    if not validate_grading(gamma):
        raise LabError(ErrorCodes.INVALID_MESH, f'γ 必须不小于 1，收到 {gamma}')
    return GradedMesh(T=float(T), N=int(N), gamma=float(gamma))


def _stable_power_difference(b, tau, power):
    """b^p - (b-τ)^p，τ 接近 b 时不损失精度"""
    with np.errstate(divide='ignore'):
        return np.power(b, power) * -np.expm1(power * np.log1p(-tau / b))


@lru_cache(maxsize=64)
def product_weights(mesh: GradedMesh, mu: float) -> np.ndarray:
    """
    I^μ 的乘积积分权矩阵（下三角，只读）

    对分段线性插值精确：(I^μ v)(t_n) = Σ_k W[n,k] v_k。
    """
    mu = float(mu)
    if not validate_order(mu, 0.0, include_low=False):
        raise LabError(ErrorCodes.INVALID_ORDER, f'分数阶积分要求 μ > 0，收到 {mu}')

    t = mesh.nodes
    n = np.arange(mesh.N + 1)[:, None]
    k = np.arange(1, mesh.N + 1)[None, :]
    active = k <= n

    tau = mesh.steps[None, :]
    a = np.where(active, t[:, None] - t[None, 1:], 0.0)
    b = np.where(active, t[:, None] - t[None, :-1], 2.0 * tau)

    # D = F(b) - F(a)，F(x) = x^{μ+1}/Γ(μ+2)
    D = _stable_power_difference(b, tau, mu + 1.0) * special.rgamma(mu + 2.0)
    phi_a = np.power(a, mu) * special.rgamma(mu + 1.0)
    phi_b = np.power(b, mu) * special.rgamma(mu + 1.0)

    right = np.where(active, D / tau - phi_a, 0.0)
    left = np.where(active, phi_b - D / tau, 0.0)

    W = np.zeros((mesh.N + 1, mesh.N + 1))
    W[:, 1:] += right
    W[:, :-1] += left
    W.flags.writeable = False

    logger.debug("权矩阵已生成 N=%d γ=%.3f μ=%.4f", mesh.N, mesh.gamma, mu)
    return W


def frac_integral_values(mu: float, mesh: GradedMesh, values: np.ndarray) -> np.ndarray:
    """对原始数组做 I^μ，values 形状为 (N+1,) 或 (N+1, d)"""
    return product_weights(mesh, float(mu)) @ values


def frac_integral(mu: float, series: TimeSeries) -> TimeSeries:
    """I^μ(series) 的节点值，t_0 处为 0"""
    if not validate_finite(mu) or float(mu) <= 0:
        raise LabError(ErrorCodes.INVALID_ORDER, f'frac_integral 要求 μ > 0（求导请用 rl_derivative），收到 {mu}')
    if not np.all(np.isfinite(series.values)):
        raise SingularAtOriginError('被积序列在 t=0 处无有限值')

    values = frac_integral_values(mu, series.mesh, series.values)
    return TimeSeries(series.mesh, values, label=f'I^{mu}({series.label})')


def rl_derivative(alpha: float, series: TimeSeries) -> TimeSeries:
    """
    Riemann-Liouville 导数 ∂_t^{1-α} = ∂_t I^α

    用 I^α 的后向差商计算；t=0 处不外推，记为未定义。
    """
    if not validate_order(alpha, 0.0, 1.0, include_low=False, include_high=False):
        raise LabError(ErrorCodes.INVALID_ORDER, f'rl_derivative 要求 α ∈ (0,1)，收到 {alpha}')
    if series.mesh.N < 2:
        raise LabError(ErrorCodes.INVALID_MESH, 'rl_derivative 要求 N ≥ 2')

    integral = frac_integral(alpha, series).values
    tau = series.mesh.steps
    if integral.ndim == 2:
        tau = tau[:, None]

    values = np.empty_like(integral)
    values[0] = np.nan
    values[1:] = np.diff(integral, axis=0) / tau
    return TimeSeries(series.mesh, values, undefined_at_origin=True, label=f'∂^{1 - alpha}({series.label})')


def nodal_derivative(series: TimeSeries, m: int) -> TimeSeries:
    """
    m 阶时间导数：反复使用二阶差商（对二次函数精确）

    t=0 处保存单侧估计供求积使用，但标记为未定义。
    """
    if m == 0:
        return series
    if series.mesh.N < 2:
        raise LabError(ErrorCodes.INVALID_MESH, '差商求导要求 N ≥ 2')

    values = series.values
    for _ in range(m):
        values = np.gradient(values, series.mesh.nodes, edge_order=2, axis=0)
    return TimeSeries(series.mesh, values, undefined_at_origin=True, label=f'∂^{m}({series.label})')


# ---------------------------------------------------------------------------
# Mittag-Leffler 函数
# ---------------------------------------------------------------------------

def _ml_series(alpha: float, beta: float, z: np.ndarray):
    """幂级数 Σ z^k/Γ(αk+β)，按对数计算各项；返回 (值, 误差估计)"""
    with np.errstate(divide='ignore'):
        log_abs_z = np.log(np.abs(z))
    sign_z = np.sign(z)

    n_terms = 64
    while True:
        k = np.arange(n_terms)
        arg = alpha * k + beta
        pole = special.rgamma(arg) == 0.0

        with np.errstate(invalid='ignore', over='ignore'):
            log_terms = k[:, None] * log_abs_z[None, :] - special.gammaln(arg)[:, None]
            if np.any(log_terms[~pole] > 700.0):
                raise MittagLefflerError(f'级数项溢出 α={alpha} β={beta} max|z|={np.max(np.abs(z)):.3g}')
            signs = np.where(pole, 0.0, special.gammasgn(arg))[:, None] * sign_z[None, :] ** k[:, None]
            terms = np.where(pole[:, None], 0.0, signs * np.exp(log_terms))

        magnitude = np.sum(np.abs(terms), axis=0)
        tail = np.abs(terms[-1]) + np.abs(terms[-2])
        if np.all(tail <= _EPS * np.maximum(magnitude, 1e-300)):
            return np.sum(terms, axis=0), 4.0 * _EPS * magnitude + tail

        if n_terms >= _ML_MAX_TERMS:
            raise MittagLefflerError(f'级数在 {n_terms} 项内未收敛 α={alpha} β={beta}')
        n_terms *= 2


def _ml_contour(alpha: float, beta: float, z: np.ndarray, n_points: int = None):
    """
    抛物线 Hankel 围道上的梯形求积

    E_{α,β}(z) = (1/2πi)∫ e^s s^{α-β}/(s^α - z) ds，适用于 z < 0、0 < α ≤ 1。
    """
    n_points = n_points or config.ML_CONTOUR_POINTS
    h = 3.0 / n_points
    mu_c = np.pi * n_points / 12.0
    u = np.arange(-n_points, n_points + 1) * h
    s = mu_c * (1.0 + 1j * u) ** 2
    ds = 2.0j * mu_c * (1.0 + 1j * u)

    kernel = np.exp(s) * s ** (alpha - beta) * ds
    s_alpha = s ** alpha

    values = np.empty(z.shape)
    errors = np.empty(z.shape)
    for start in range(0, z.size, _ML_CHUNK):
        chunk = z[start:start + _ML_CHUNK]
        integrand = kernel[None, :] / (s_alpha[None, :] - chunk[:, None])
        total = h / (2j * np.pi) * np.sum(integrand, axis=1)
        values[start:start + _ML_CHUNK] = total.real
        errors[start:start + _ML_CHUNK] = 10.0 * _EPS * h / (2 * np.pi) * np.sum(np.abs(integrand), axis=1)
    return values, errors


def _ml(alpha: float, beta: float, z) -> np.ndarray:
    """E_{α,β}(z)，β 可取任意实数（解析导数需要 β ≤ 0）"""
    z = np.asarray(z, dtype=float)
    flat = z.ravel()
    out = np.empty_like(flat)

    if alpha == 1.0 and beta == 1.0:
        return np.exp(z)

    zero = flat == 0.0
    out[zero] = special.rgamma(beta)

    use_series = (flat >= ML_SERIES_LIMIT) & ~zero
    if alpha > 1.0:
        use_series |= ~zero
    use_contour = ~use_series & ~zero

    if np.any(use_series):
        values, errors = _ml_series(alpha, beta, flat[use_series])
        if alpha > 1.0:
            cancelled = errors > ML_AGREEMENT * np.maximum(1.0, np.abs(values))
            if np.any(cancelled):
                raise MittagLefflerError(f'级数相消过强 α={alpha} β={beta}')
        out[use_series] = values

    if np.any(use_contour):
        values, _ = _ml_contour(alpha, beta, flat[use_contour])
        out[use_contour] = values

    # 交叉校验带内两种算法必须一致
    lo, hi = ML_CROSS_CHECK_BAND
    band = (flat >= lo) & (flat <= hi) & ~zero
    if alpha <= 1.0 and np.any(band):
        series_values, series_err = _ml_series(alpha, beta, flat[band])
        contour_values, contour_err = _ml_contour(alpha, beta, flat[band])
        gap = np.abs(series_values - contour_values)
        allowed = ML_AGREEMENT * np.maximum(1.0, np.abs(series_values)) + 10.0 * (series_err + contour_err)
        if np.any(gap > allowed):
            worst = float(np.max(gap))
            logger.error("Mittag-Leffler 交叉校验失败 α=%s β=%s gap=%.3e", alpha, beta, worst)
            raise MittagLefflerError(f'级数与围道积分不一致 α={alpha} β={beta} gap={worst:.3e}')

    if not np.all(np.isfinite(out)):
        raise MittagLefflerError(f'求值结果非有限 α={alpha} β={beta}')
    return out.reshape(z.shape)


def mittag_leffler(alpha: float, beta: float, z):
    """
    双参数 Mittag-Leffler 函数 E_{α,β}(z) = Σ z^k/Γ(αk+β)

    Args:
        alpha: α > 0
        beta: β > 0
        z: 实数（标量或数组）

    Returns:
        与 z 同形状的函数值；不收敛时抛出 MittagLefflerError
    """
    if not validate_order(alpha, 0.0, include_low=False) or not validate_order(beta, 0.0, include_low=False):
        raise LabError(ErrorCodes.INVALID_ORDER, f'mittag_leffler 要求 α, β > 0，收到 ({alpha}, {beta})')
    if not validate_finite(z):
        raise LabError(ErrorCodes.NON_FINITE_INPUT, 'mittag_leffler 的自变量必须有限')

    value = _ml(float(alpha), float(beta), z)
    return float(value) if value.ndim == 0 else value


def ml_analytic(alpha: float, beta: float, z):
    """允许 β ≤ 0 的求值入口，供特征展开的解析导数使用"""
    if not validate_order(alpha, 0.0, include_low=False) or not validate_finite(beta, z):
        raise LabError(ErrorCodes.INVALID_ORDER, f'非法参数 ({alpha}, {beta})')
    return _ml(float(alpha), float(beta), z)


# ---------------------------------------------------------------------------
# Caputo/RL 初值平移
# ---------------------------------------------------------------------------

def fi_omega_shift(m: int, mu: float, series: TimeSeries, initial_derivatives,
                   derivative: TimeSeries = None) -> TimeSeries:
    """
    组装 I^μ ∂_t^m φ + Σ_{j<m} φ^{(j)}(0) ω_{μ-m+1+j}(t)

    结果等于 ∂_t^m I^μ φ。derivative 给出 ∂_t^m φ 的采样值时直接使用，否则由差商计算。
    t=0 处未定义。
    """
    if not validate_step_count(m, minimum=1):
        raise LabError(ErrorCodes.VALIDATION_ERROR, f'm 必须为正整数，收到 {m}')
    if not validate_order(mu, 0.0):
        raise LabError(ErrorCodes.INVALID_ORDER, f'μ 必须非负，收到 {mu}')

    initial_derivatives = list(initial_derivatives)
    if len(initial_derivatives) != m:
        raise LabError(
            ErrorCodes.LENGTH_MISMATCH,
            f'initial_derivatives 需要 {m} 个值，收到 {len(initial_derivatives)}'
        )

    if derivative is None:
        derivative = nodal_derivative(series, m)
    elif derivative.mesh != series.mesh:
        raise LabError(ErrorCodes.LENGTH_MISMATCH, '导数序列与原序列网格不一致')

    if float(mu) == 0.0:
        integral = np.array(derivative.values, dtype=float)
    else:
        integral = frac_integral_values(mu, series.mesh, derivative.values)

    t = series.mesh.nodes[1:]
    values = np.empty_like(integral)
    values[0] = np.nan
    values[1:] = integral[1:]
    for j, phi_j in enumerate(initial_derivatives):
        weight = omega(float(mu) - m + 1 + j, t)
        phi_j = np.asarray(phi_j, dtype=float)
        values[1:] += np.multiply.outer(weight, phi_j) if phi_j.ndim else weight * phi_j

    return TimeSeries(series.mesh, values, undefined_at_origin=True, label=f'shift^{m},{mu}({series.label})')
