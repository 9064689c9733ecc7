"""
时间积分形式弱问题的求解器

在每个节点 t_n 上配置
    ⟨u_n, v⟩ + ⟨κ(I^α∇u)(t_n), ∇v⟩ - ⟨(B₁u)(t_n), ∇v⟩ + ⟨(B₂u)(t_n), v⟩ = ⟨f(t_n), v⟩，
其中 B₁ = B^α_F + B^1_G，B₂ = B^α_a + B^1_b，B^μ_ψ w = ψ I^μw - I¹(ψ_t I^μw)。
所有记忆项都对时间上分段线性的轨迹做乘积积分。另外提供常系数齐次问题的
特征展开解、经典热方程后向 Euler 参考解，以及整数阶/分数阶时间导数的后处理。
"""

import logging

import numpy as np
from scipy import special
from scipy.sparse.linalg import factorized, spsolve

from app.models.mesh import GradedMesh, SpaceMesh, TimeSeries
from app.models.problem import ProblemSpec, SchemeConfig, SpectralPayload, Trajectory
from app.services.femcore import (
    assemble, decompose, load_vector, mass_matrix, stiffness_matrix
)
from app.services.fractops import (
    default_grading, frac_integral_values, make_graded_mesh, ml_analytic, mittag_leffler,
    nodal_derivative, product_weights
)
from app.utils.app_logger import debug_log
from app.utils.config import config
from app.utils.report_helpers import ErrorCodes, LabError
from app.utils.validators import validate_order, validate_step_count

logger = logging.getLogger(__name__)

# (系数名, 矩阵类型, 记忆阶是否为 α, 符号)
_LOWER_ORDER_TERMS = (
    ('F', 'advection', True, -1.0),
    ('G', 'advection', False, -1.0),
    ('a', 'reaction', True, 1.0),
    ('b', 'reaction', False, 1.0),
)


def time_mesh(problem: ProblemSpec, scheme: SchemeConfig) -> GradedMesh:
    gamma = scheme.gamma if scheme.gamma is not None else default_grading(problem.alpha)
    return make_graded_mesh(problem.T, scheme.N, gamma)


def _mass_solver(space: SpaceMesh):
    return factorized(mass_matrix(space).tocsc())


def _project_rows(space: SpaceMesh, loads: np.ndarray) -> np.ndarray:
    solve = _mass_solver(space)
    return np.vstack([solve(row) for row in loads])


def f_rhs(problem: ProblemSpec, mesh: GradedMesh, space: SpaceMesh) -> TimeSeries:
    """
    右端 f(t_n) = P(u₀) + I¹(P g)(t_n)

    源项给出解析的 I¹g 时直接投影；否则对节点投影做乘积积分，
    g 在 t=0 处奇异时改用中点规则。
    """
    base = _project_rows(space, load_vector(space, problem.u0)[None, :])[0]
    values = np.tile(base, (mesh.N + 1, 1))
    source = problem.source
    if source.is_zero:
        return TimeSeries(mesh, values, label='f')

    if source.time_integral is not None:
        loads = np.vstack([load_vector(space, lambda x, t=t: source.time_integral(x, t)) for t in mesh.nodes])
        values += _project_rows(space, loads)
        return TimeSeries(mesh, values, label='f')

    with np.errstate(divide='ignore', invalid='ignore'):
        origin = load_vector(space, lambda x: source.fn(x, 0.0))
    if np.all(np.isfinite(origin)):
        loads = np.vstack([load_vector(space, lambda x, t=t: source.fn(x, t)) for t in mesh.nodes])
        values += frac_integral_values(1.0, mesh, _project_rows(space, loads))
    else:
        logger.debug("源项在 t=0 奇异，I¹g 改用中点规则")
        midpoints = 0.5 * (mesh.nodes[1:] + mesh.nodes[:-1])
        loads = np.vstack([load_vector(space, lambda x, t=t: source.fn(x, t)) for t in midpoints])
        cells = _project_rows(space, loads) * mesh.steps[:, None]
        values[1:] += np.cumsum(cells, axis=0)
    return TimeSeries(mesh, values, label='f')


def _check_state(u: np.ndarray, n: int):
    if not np.all(np.isfinite(u)):
        debug_log.numerical_error("solver", f"第 {n} 步出现非有限状态")
        raise LabError(ErrorCodes.NON_FINITE_STATE, f'第 {n} 步出现非有限状态')


def _provenance(method: str, problem: ProblemSpec, scheme: SchemeConfig, mesh: GradedMesh, **extra) -> dict:
    data = {
        'method': method,
        'problem': problem.to_dict(),
        'scheme': scheme.to_dict(),
        'mesh': mesh.to_dict(),
    }
    data.update(extra)
    return data


def solve_weak(problem: ProblemSpec, scheme: SchemeConfig) -> Trajectory:
    """
    逐步隐式求解弱问题

    新时刻未知量乘以 I^α、I¹ 权矩阵的对角元进入扩散、对流、反应项，
    历史部分由已保存的状态显式组装。
    """
    mesh = time_mesh(problem, scheme)
    space = SpaceMesh(scheme.n_x)
    alpha = problem.alpha

    weights = {True: product_weights(mesh, alpha), False: product_weights(mesh, 1.0)}
    M = mass_matrix(space)
    K = stiffness_matrix(space, problem.coefficients.kappa)
    f = f_rhs(problem, mesh, space).values

    active = [term for term in _LOWER_ORDER_TERMS
              if not problem.coefficients.lower_order_terms[term[0]].is_zero]

    U = np.zeros((mesh.N + 1, space.dof))
    U[0] = f[0]
    integrals = {True: np.zeros_like(U), False: np.zeros_like(U)}
    # I¹(ψ_t I^μ u) 的被积向量 ψ_t(t_k)-矩阵作用于 I^μu(t_k)
    memory = {name: np.zeros_like(U) for name, *_ in active}

    W1 = weights[False]
    for n in range(1, mesh.N + 1):
        system = assemble(problem.coefficients, space, mesh.nodes[n])
        diag = {key: W[n, n] for key, W in weights.items()}
        history = {key: W[n, :n] @ U[:n] for key, W in weights.items()}

        A = M + diag[True] * K
        rhs = M @ f[n] - K @ history[True]
        for name, kind, uses_alpha, sign in active:
            matrix = getattr(system, kind)
            X = matrix(name) - W1[n, n] * matrix(name, derivative=True)
            A = A + sign * diag[uses_alpha] * X
            rhs = rhs - sign * (X @ history[uses_alpha] - W1[n, :n] @ memory[name][:n])

        u = spsolve(A.tocsc(), rhs)
        _check_state(u, n)
        residual = np.linalg.norm(A @ u - rhs, ord=np.inf)
        scale = abs(A).max() * np.linalg.norm(u, ord=np.inf) + np.linalg.norm(rhs, ord=np.inf)
        if residual > max(scheme.tol, 1e-14) * max(scale, 1e-300):
            raise LabError(ErrorCodes.LINEAR_SOLVE_FAILED, f'第 {n} 步线性求解残差过大: {residual:.3e}')

        U[n] = u
        for key in integrals:
            integrals[key][n] = history[key] + diag[key] * u
        for name, kind, uses_alpha, _ in active:
            memory[name][n] = getattr(system, kind)(name, derivative=True) @ integrals[uses_alpha][n]

    # t=0 处的记忆项：I^αu, I^α∇u, B₁u, B₂u
    origin = assemble(problem.coefficients, space, 0.0)
    b_terms = {'advection': np.zeros(space.dof), 'reaction': np.zeros(space.dof)}
    for name, kind, uses_alpha, _ in active:
        b_terms[kind] = b_terms[kind] + getattr(origin, kind)(name) @ integrals[uses_alpha][0]
    at_origin = {
        'I_alpha_u': float(np.max(np.abs(integrals[True][0]))),
        'I_alpha_grad_u': float(np.sqrt(max(integrals[True][0] @ (K @ integrals[True][0]), 0.0))),
        'B1_u': float(np.max(np.abs(b_terms['advection']))),
        'B2_u': float(np.max(np.abs(b_terms['reaction']))),
    }
    logger.debug("弱问题求解完成 N=%d n_x=%d", mesh.N, space.n_x)
    return Trajectory(mesh, space, U, _provenance('weak', problem, scheme, mesh), memory_at_origin=at_origin)


def solve_heat_reference(problem: ProblemSpec, scheme: SchemeConfig) -> Trajectory:
    """经典热方程 u_t = ∇·(κ∇u) 的后向 Euler 解（α → 1 的独立参考）"""
    mesh = time_mesh(problem, scheme)
    space = SpaceMesh(scheme.n_x)
    M = mass_matrix(space)
    K = stiffness_matrix(space, problem.coefficients.kappa)

    U = np.zeros((mesh.N + 1, space.dof))
    U[0] = _project_rows(space, load_vector(space, problem.u0)[None, :])[0]
    for n in range(1, mesh.N + 1):
        U[n] = spsolve((M + mesh.steps[n - 1] * K).tocsc(), M @ U[n - 1])
        _check_state(U[n], n)
    return Trajectory(mesh, space, U, _provenance('heat-backward-euler', problem, scheme, mesh))


def solve_spectral_const(problem: ProblemSpec, scheme: SchemeConfig, modes: int = None) -> Trajectory:
    """
    常系数齐次问题的特征展开 u(t) = Σ c_k E_α(-λ_k t^α) φ_k

    Args:
        problem: 要求 F=G=a=b=0 且 g ≡ 0
        scheme: 时间网格与空间网格
        modes: 保留的模态数，缺省使用全部自由度

    Returns:
        带 SpectralPayload 的轨迹；被截断的 Parseval 尾项超过容差时记录警告
    """
    if problem.coefficients.has_lower_order_terms or not problem.is_homogeneous:
        raise LabError(ErrorCodes.HYPOTHESIS_VIOLATION, '特征展开只适用于 F=G=a=b=0 且 g≡0 的问题')

    mesh = time_mesh(problem, scheme)
    space = SpaceMesh(scheme.n_x)
    spectral = decompose(space, problem.coefficients.kappa)

    modes = modes or scheme.modes or space.dof
    if not validate_step_count(modes, minimum=1) or modes > space.dof:
        raise LabError(ErrorCodes.VALIDATION_ERROR, f'模态数 {modes} 超出可用特征对 {space.dof}')

    coefficients = spectral.eigenvectors.T @ load_vector(space, problem.u0)
    total = float(np.sum(coefficients ** 2))
    tail = float(np.sum(coefficients[modes:] ** 2))
    if total > 0 and np.sqrt(tail / total) > config.TOL_QUADRATURE:
        logger.warning("⚠️ 特征展开截断的 Parseval 尾项 %.3e 超过容差 (modes=%d)", np.sqrt(tail / total), modes)

    lam = spectral.eigenvalues[:modes]
    phi = spectral.eigenvectors[:, :modes]
    c = coefficients[:modes]

    z = -lam[None, :] * mesh.nodes[:, None] ** problem.alpha
    states = (mittag_leffler(problem.alpha, 1.0, z) * c[None, :]) @ phi.T

    payload = SpectralPayload(problem.alpha, lam, phi, c)
    provenance = _provenance('spectral', problem, scheme, mesh, modes=modes, parseval_tail=float(np.sqrt(tail)))
    at_origin = {'I_alpha_u': 0.0, 'I_alpha_grad_u': 0.0, 'B1_u': 0.0, 'B2_u': 0.0}
    return Trajectory(mesh, space, states, provenance, spectral=payload, memory_at_origin=at_origin)


def trajectory_series(trajectory: Trajectory, label: str = 'u') -> TimeSeries:
    return TimeSeries(trajectory.mesh, trajectory.states, label=label)


def _require_order(m: int, mesh: GradedMesh, minimum: int = 0):
    if not validate_step_count(m, minimum=minimum):
        raise LabError(ErrorCodes.VALIDATION_ERROR, f'导数阶 m 必须为不小于 {minimum} 的整数，收到 {m}')
    if m > 0 and mesh.N < 8 * m:
        raise LabError(ErrorCodes.INSUFFICIENT_SMOOTHNESS, f'N={mesh.N} 不足以计算 {m} 阶差商')


def _modal_series(trajectory: Trajectory, factors: np.ndarray, label: str) -> TimeSeries:
    """factors[n, k] 乘以 c_k 后合成空间向量；t=0 行置为 NaN"""
    payload = trajectory.spectral
    values = (factors * payload.coefficients[None, :]) @ payload.eigenvectors.T
    values[0] = np.nan
    return TimeSeries(trajectory.mesh, values, undefined_at_origin=True, label=label)


def _require_spectral(trajectory: Trajectory):
    if trajectory.spectral is None:
        raise LabError(ErrorCodes.HYPOTHESIS_VIOLATION, '解析导数只适用于特征展开轨迹')
    return trajectory.spectral


def time_derivative(trajectory: Trajectory, m: int, analytic: bool = False) -> TimeSeries:
    """
    ∂_t^m u

    数值路径为分级网格上的 m 阶差商；特征展开轨迹可走解析路径
    ∂_t^m E_α(-λt^α) = t^{-m} E_{α,1-m}(-λt^α)。
    """
    _require_order(m, trajectory.mesh)
    if m == 0:
        return trajectory_series(trajectory)

    if not analytic:
        return nodal_derivative(trajectory_series(trajectory), m)

    payload = _require_spectral(trajectory)
    t = trajectory.mesh.nodes[1:, None]
    factors = np.zeros((trajectory.mesh.N + 1, payload.eigenvalues.size))
    factors[1:] = t ** (-m) * ml_analytic(payload.alpha, 1.0 - m, -payload.eigenvalues[None, :] * t ** payload.alpha)
    return _modal_series(trajectory, factors, f'∂^{m}u')


def frac_time_derivative(trajectory: Trajectory, m: int, alpha: float = None, analytic: bool = False,
                         subtract_initial: bool = False) -> TimeSeries:
    """
    ∂_t^{m-α} u = ∂_t^m I^α u

    subtract_initial 为真时作用于 w = u - u₀。解析路径：
    ∂_t^{m-α} E_α(-λt^α) = t^{α-m} E_{α,1+α-m}(-λt^α)，常数 1 的贡献为 t^{α-m}/Γ(1+α-m)。
    """
    _require_order(m, trajectory.mesh, minimum=1)
    if alpha is None:
        alpha = trajectory.spectral.alpha if trajectory.spectral else trajectory.provenance['problem']['alpha']
    if not validate_order(alpha, 0.0, 1.0, include_low=False):
        raise LabError(ErrorCodes.INVALID_ORDER, f'α 必须位于 (0,1]，收到 {alpha}')
    label = f'∂^{m}-{alpha}({"u-u0" if subtract_initial else "u"})'

    if not analytic:
        values = trajectory.states - trajectory.states[0] if subtract_initial else trajectory.states
        integral = TimeSeries(trajectory.mesh, frac_integral_values(alpha, trajectory.mesh, values))
        result = nodal_derivative(integral, m)
        return result.with_values(result.values, label=label)

    payload = _require_spectral(trajectory)
    if abs(payload.alpha - alpha) > 1e-15:
        raise LabError(ErrorCodes.HYPOTHESIS_VIOLATION, '解析分数阶导数的 α 必须与轨迹一致')

    t = trajectory.mesh.nodes[1:, None]
    z = -payload.eigenvalues[None, :] * t ** alpha
    modal = ml_analytic(alpha, 1.0 + alpha - m, z)
    if subtract_initial:
        modal = modal - special.rgamma(1.0 + alpha - m)
    factors = np.zeros((trajectory.mesh.N + 1, payload.eigenvalues.size))
    factors[1:] = t ** (alpha - m) * modal
    return _modal_series(trajectory, factors, label)
