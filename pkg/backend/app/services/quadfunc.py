"""
二次泛函 Q₁^μ、Q₂^μ、Q^{μ,j}，记忆算子 B^μ_ψ、B^{μ,j}_ψ 以及不等式检查

泛函直接对分段线性插值求值：φ 写成斜率跳跃的斜坡函数之和后 I^μφ 有闭式，
Q₁ 用单元上帽函数与 Ψ_p 乘积的闭式矩，Q₂ 在每个单元上分离出左端点奇性后
用 Gauss-Legendre / Gauss-Jacobi 求积。插值是真正的连续函数，正性 Q₁^μ ≥ 0 在舍入误差内成立。
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from app.models.mesh import GradedMesh, TimeSeries
from app.models.reports import IneqReport
from app.services.fractops import (
    _stable_power_difference, frac_integral_values, mittag_leffler, nodal_derivative, omega
)
from app.services.identities import diff_mult_coeffs
from app.utils.config import config
from app.utils.report_helpers import ErrorCodes, LabError
from app.utils.validators import validate_order, validate_step_count

logger = logging.getLogger(__name__)

CHECK_IDS = ('2.2-A', '2.2-B', '2.2-C', '2.3-i', '2.3-ii', '2.3-iii', '2.4',
             '3.1-first', '3.1-second', '3.2', '3.3', 'A.2', 'A.3')

_GAUSS_POINTS = 16


class InnerProduct:
    """
    内积上下文：标量乘积，或由对称正定 Gram 矩阵定义的 ⟨u, v⟩ = uᵀ G v

    质量矩阵给出 L₂ 内积；κ=1 的刚度矩阵给出 ⟨∇u, ∇v⟩。
    """

    def __init__(self, gram=None, name: str = 'scalar'):
        if gram is not None:
            dense = gram.toarray() if hasattr(gram, 'toarray') else np.asarray(gram)
            scale = max(float(np.max(np.abs(dense))), 1e-300)
            if dense.shape[0] != dense.shape[1] or np.max(np.abs(dense - dense.T)) > 1e-12 * scale:
                raise LabError(ErrorCodes.VALIDATION_ERROR, 'Gram 矩阵必须对称')
        self.gram = gram
        self.name = name if gram is None or name != 'scalar' else 'gram'

    @classmethod
    def scalar(cls):
        return cls()

    def pair(self, u, v) -> np.ndarray:
        """逐行内积"""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if u.ndim == 1:
            return u * v
        if self.gram is None:
            return np.sum(u * v, axis=1)
        return np.einsum('ij,ij->i', u, np.asarray(self.gram @ v.T).T)

    def sqnorm(self, u) -> np.ndarray:
        return self.pair(u, u)

    def norm(self, u) -> np.ndarray:
        return np.sqrt(np.maximum(self.sqnorm(u), 0.0))


_SCALAR = InnerProduct.scalar()


def random_series(mesh: GradedMesh, rng: np.random.Generator, dim: int = None,
                  vanish_at_origin: bool = False) -> TimeSeries:
    """种子化的分段线性随机测试数据"""
    shape = (mesh.N + 1,) if dim is None else (mesh.N + 1, dim)
    values = rng.standard_normal(shape)
    if vanish_at_origin:
        values[0] = 0.0
    return TimeSeries(mesh, values, label='random')


# ---------------------------------------------------------------------------
# 分段线性序列上的精确泛函
# ---------------------------------------------------------------------------
#
# 单元 j 上记 x = s - t_{j-1}，I^μφ = A + S：
#   S = σ_{j-1}Ψ_{μ+1}(x)（首个单元另含 φ_0 Ψ_μ(x)），Ψ_p(x) = x^p/Γ(p+1)，
#   σ_{j-1} 为 t_{j-1} 处的斜率跳跃；A 在单元上光滑，奇点最近在 x = -τ_{j-1}。
# S 的部分用闭式，A 的部分在几何加密的子区间上用 Gauss 求积。

_SUBDIVISION_RATIO = 3.0


def _psi(x, p):
    return np.power(x, p) * special.rgamma(p + 1.0)


def _column(array, values):
    return array if values.ndim == 1 else array[:, None]


def _slope_jumps(mesh: GradedMesh, values: np.ndarray) -> np.ndarray:
    """σ_0 = 首个单元的斜率，σ_{j-1} = 单元 j 与单元 j-1 的斜率之差"""
    slopes = np.diff(values, axis=0) / _column(mesh.steps, values)
    return np.diff(slopes, axis=0, prepend=np.zeros_like(slopes[:1]))


@lru_cache(maxsize=32)
def _cell_subintervals(mesh: GradedMesh) -> np.ndarray:
    """
    单元 j ≥ 2 上子区间端点（局部坐标 x）

    第 k 段为 [(3^k - 1)τ_{j-1}, (3^{k+1} - 1)τ_{j-1}] 截断到 τ_j，
    每段长度是它到 x = -τ_{j-1} 的距离的两倍。
    """
    previous, own = mesh.steps[:-1], mesh.steps[1:]
    ratio = float(np.max(own / previous)) if mesh.N > 1 else 1.0
    count = max(1, int(np.ceil(np.log(ratio + 1.0) / np.log(_SUBDIVISION_RATIO))))
    edges = (_SUBDIVISION_RATIO ** np.arange(count + 1) - 1.0)[None, :] * previous[:, None]
    edges = np.minimum(edges, own[:, None])
    edges[:, -1] = own
    edges.flags.writeable = False
    return edges


@lru_cache(maxsize=8)
def _far_pairs(cells: int):
    """(行 j-2, 单元 i-1) 对，满足 i ≤ j-2"""
    return np.tril_indices(cells - 1, -1)


def _smooth_weights(mesh: GradedMesh, mu: float, x: np.ndarray) -> np.ndarray:
    """
    光滑部分的节点权：A(t_{j-1} + x_j) = Σ_k W[j-2, k] φ_k，j = 2..N

    早于 t_{j-2} 的单元用乘积积分权；单元 j-1 与单元 j 的部分已扣除 S。
    """
    t, tau = mesh.nodes, mesh.steps
    N = mesh.N
    W = np.zeros((N - 1, N + 1))

    rows, cols = _far_pairs(N)
    width = tau[cols]
    b = t[1:-1][rows] + x[rows] - t[cols]
    a = b - width
    D = _stable_power_difference(b, width, mu + 1.0) * special.rgamma(mu + 2.0)
    W[rows, cols + 1] += D / width - _psi(a, mu)
    W[rows, cols] += _psi(b, mu) - D / width

    previous = tau[:-1]
    near = _psi(x + previous, mu + 1.0) / previous
    diagonal = np.arange(N - 1)
    W[diagonal, diagonal + 1] += near
    W[diagonal, diagonal] += _psi(x + previous, mu) - near
    return W


def _legendre_nodes(mesh: GradedMesh):
    """(子区间, 局部坐标 x, 权) 的迭代器，覆盖单元 2..N"""
    edges = _cell_subintervals(mesh)
    gl_x, gl_w = special.roots_legendre(_GAUSS_POINTS)
    for k in range(edges.shape[1] - 1):
        lo, hi = edges[:, k], edges[:, k + 1]
        half = (hi - lo) / 2.0
        for xi, w in zip(gl_x, gl_w):
            yield k, lo + half * (1.0 + xi), w * half


@lru_cache(maxsize=32)
def _smooth_moments(mesh: GradedMesh, mu: float):
    """∫_{cell j} L_a A ds 的节点权（a = 0, 1），行对应 j = 2..N"""
    own = mesh.steps[1:]
    left = np.zeros((mesh.N - 1, mesh.N + 1))
    right = np.zeros((mesh.N - 1, mesh.N + 1))
    for _, x, weight in _legendre_nodes(mesh):
        W = _smooth_weights(mesh, mu, x)
        theta = x / own
        left += (weight * (1.0 - theta))[:, None] * W
        right += (weight * theta)[:, None] * W
    left.flags.writeable = False
    right.flags.writeable = False
    return left, right


def _check_mu(mu):
    if not validate_order(mu, 0.0):
        raise LabError(ErrorCodes.INVALID_ORDER, f'μ 必须非负，收到 {mu}')


def _hat_moments(tau, p):
    """∫ L_a Ψ_p，L_0、L_1 为单元上取值于左、右端点的线性帽函数"""
    base = tau ** (p + 1.0) * special.rgamma(p + 1.0)
    return base * (1.0 / (p + 1.0) - 1.0 / (p + 2.0)), base / (p + 2.0)


def _pairing_per_cell(mu: float, mesh: GradedMesh, phi_values: np.ndarray, psi_values: np.ndarray,
                      inner: InnerProduct) -> np.ndarray:
    """每个单元上的 ∫⟨φ, I^μψ⟩"""
    tau = mesh.steps
    sigma = _slope_jumps(mesh, psi_values)

    left, right = _hat_moments(tau, mu + 1.0)
    out = inner.pair(phi_values[:-1], sigma) * left + inner.pair(phi_values[1:], sigma) * right
    left0, right0 = _hat_moments(tau[0], mu)
    out[0] += (float(inner.pair(phi_values[:1], psi_values[:1])[0]) * left0
               + float(inner.pair(phi_values[1:2], psi_values[:1])[0]) * right0)
    if mesh.N == 1:
        return out

    left, right = _smooth_moments(mesh, mu)
    out[1:] += inner.pair(phi_values[1:-1], left @ psi_values) + inner.pair(phi_values[2:], right @ psi_values)
    return out


def _q2_per_cell(mu: float, mesh: GradedMesh, values: np.ndarray, inner: InnerProduct) -> np.ndarray:
    """每个单元上的 ∫‖I^μφ‖²"""
    tau = mesh.steps
    sigma = _slope_jumps(mesh, values)
    g0, g1 = special.rgamma(mu + 1.0), special.rgamma(mu + 2.0)

    # 首个单元：I^μφ = φ_0 Ψ_μ + σ_0 Ψ_{μ+1}
    h = tau[0]
    v0, s0 = values[:1], sigma[:1]
    out = np.zeros(mesh.N)
    out[0] = (float(inner.sqnorm(v0)[0]) * h ** (2.0 * mu + 1.0) * g0 ** 2 / (2.0 * mu + 1.0)
              + 2.0 * float(inner.pair(v0, s0)[0]) * h ** (2.0 * mu + 2.0) * g0 * g1 / (2.0 * mu + 2.0)
              + float(inner.sqnorm(s0)[0]) * h ** (2.0 * mu + 3.0) * g1 ** 2 / (2.0 * mu + 3.0))
    if mesh.N == 1:
        return out

    jumps = sigma[1:]
    first = _cell_subintervals(mesh)[:, 1]

    # 第一段上 ‖S‖² 闭式，⟨A, S⟩ 用带 x^μ 权的 Gauss-Jacobi
    out[1:] += inner.sqnorm(jumps) * first ** (2.0 * mu + 3.0) * g1 ** 2 / (2.0 * mu + 3.0)
    gj_x, gj_w = special.roots_jacobi(_GAUSS_POINTS, 0.0, mu)
    for xi, w in zip(gj_x, gj_w):
        x = first * (1.0 + xi) / 2.0
        smooth = _smooth_weights(mesh, mu, x) @ values
        out[1:] += 2.0 * w * (first / 2.0) ** (mu + 1.0) * x * g1 * inner.pair(smooth, jumps)

    for k, x, weight in _legendre_nodes(mesh):
        smooth = _smooth_weights(mesh, mu, x) @ values
        if k > 0:
            smooth = smooth + _column(_psi(x, mu + 1.0), values) * jumps
        out[1:] += weight * inner.sqnorm(smooth)
    return out


def q1_history(mu: float, phi: TimeSeries, inner: InnerProduct = None) -> np.ndarray:
    """Q₁^μ(φ, t_n)，n = 0..N"""
    _check_mu(mu)
    per_cell = _pairing_per_cell(float(mu), phi.mesh, phi.values, phi.values, inner or _SCALAR)
    return np.concatenate([[0.0], np.cumsum(per_cell)])


def q2_history(mu: float, phi: TimeSeries, inner: InnerProduct = None) -> np.ndarray:
    """Q₂^μ(φ, t_n)，n = 0..N"""
    _check_mu(mu)
    per_cell = _q2_per_cell(float(mu), phi.mesh, phi.values, inner or _SCALAR)
    return np.concatenate([[0.0], np.cumsum(per_cell)])


# 分段常数序列（分段线性 φ 的导数）
def _increments(cells: np.ndarray) -> np.ndarray:
    """Δ_i = φ̄_{i+1} - φ̄_i（φ̄_0 := 0），使 I^μφ̄(s) = Σ_{i<j} Δ_i Φ(s - t_i)"""
    padded = np.concatenate([np.zeros_like(cells[:1]), cells], axis=0)
    return np.diff(padded, axis=0)


@lru_cache(maxsize=32)
def _cell_integral_matrix(mesh: GradedMesh, mu: float) -> np.ndarray:
    """E[j-1, i] = ∫_{cell j} Φ(s - t_i) ds，Φ(x) = x^μ/Γ(μ+1)，i < j"""
    t = mesh.nodes
    j = np.arange(1, mesh.N + 1)[:, None]
    i = np.arange(mesh.N)[None, :]
    active = i < j
    tau = mesh.steps[:, None]
    b = np.where(active, t[1:, None] - t[None, :-1], 2.0 * tau)
    E = np.where(active, _stable_power_difference(b, tau, mu + 1.0) * special.rgamma(mu + 2.0), 0.0)
    E.flags.writeable = False
    return E


def q1_cells_history(mu: float, mesh: GradedMesh, cells: np.ndarray, inner: InnerProduct = None) -> np.ndarray:
    """单元上取常值 cells 的函数的 Q₁^μ(·, t_n)，n = 0..N"""
    _check_mu(mu)
    inner = inner or _SCALAR
    E = _cell_integral_matrix(mesh, float(mu))
    contributions = inner.pair(cells, E @ _increments(cells))
    return np.concatenate([[0.0], np.cumsum(contributions)])


def _index(mesh: GradedMesh, t_index):
    if t_index is None:
        return mesh.N
    if not validate_step_count(t_index, minimum=0) or t_index > mesh.N:
        raise LabError(ErrorCodes.INDEX_OUT_OF_RANGE, f't_index {t_index} 超出 [0, {mesh.N}]')
    return int(t_index)


def q1(mu: float, phi: TimeSeries, t_index: int = None, inner: InnerProduct = None) -> float:
    """Q₁^μ(φ, t) = ∫₀ᵗ ⟨φ, I^μφ⟩ ds"""
    n = _index(phi.mesh, t_index)
    return float(q1_history(mu, phi, inner)[n])


def q2(mu: float, phi: TimeSeries, t_index: int = None, inner: InnerProduct = None) -> float:
    """Q₂^μ(φ, t) = ∫₀ᵗ ‖I^μφ‖² ds"""
    n = _index(phi.mesh, t_index)
    return float(q2_history(mu, phi, inner)[n])


def cross_term(mu: float, phi: TimeSeries, psi: TimeSeries, t_index: int = None,
               inner: InnerProduct = None) -> float:
    """∫₀ᵗ ⟨φ, I^μψ⟩ ds"""
    _check_mu(mu)
    if psi.mesh != phi.mesh:
        raise LabError(ErrorCodes.LENGTH_MISMATCH, 'ψ 与 φ 的网格不一致')
    n = _index(phi.mesh, t_index)
    contributions = _pairing_per_cell(float(mu), phi.mesh, phi.values, psi.values, inner or _SCALAR)
    return float(np.sum(contributions[:n]))


# ---------------------------------------------------------------------------
# 推广泛函与记忆算子
# ---------------------------------------------------------------------------

def _require_resolution(mesh: GradedMesh, j: int):
    if mesh.N < 8 * max(j, 1):
        raise LabError(
            ErrorCodes.INSUFFICIENT_SMOOTHNESS,
            f'N={mesh.N} 不足以计算 {j} 阶差商（至少需要 N ≥ {8 * max(j, 1)}）'
        )


def multiplied_derivative(j: int, phi: TimeSeries, derivatives: dict = None) -> TimeSeries:
    """
    (M^j φ)^{(j)} = Σ_r ã^{j,j}_r t^r φ^{(r)}

    derivatives 可提供 {r: φ^{(r)}} 的高精度序列，缺失的阶数由差商计算。
    """
    if j == 0:
        return phi
    _require_resolution(phi.mesh, j)

    a_table, _ = diff_mult_coeffs(j, j)
    a_tilde = a_table.tilde()
    derivatives = derivatives or {}

    t = phi.mesh.nodes if not phi.is_vector else phi.mesh.nodes[:, None]
    total = np.zeros_like(phi.values)
    for r in range(j + 1):
        deriv = derivatives.get(r) or nodal_derivative(phi, r)
        total = total + float(a_tilde[r]) * t ** r * deriv.values
    return TimeSeries(phi.mesh, total, label=f'(M^{j}{phi.label})^({j})')


def q_mj_history(mu: float, j: int, phi: TimeSeries, kind: int = 1, inner: InnerProduct = None,
                 derivatives: dict = None) -> np.ndarray:
    """Q^{μ,j}_kind(φ, t_n) = Q^μ_kind((M^jφ)^{(j)}, t_n)"""
    if kind not in (1, 2):
        raise LabError(ErrorCodes.VALIDATION_ERROR, f'kind 只能是 1 或 2，收到 {kind}')
    target = multiplied_derivative(j, phi, derivatives)
    history = q1_history if kind == 1 else q2_history
    return history(mu, target, inner)


def q_mj(mu: float, j: int, phi: TimeSeries, t_index: int = None, kind: int = 1,
         inner: InnerProduct = None) -> float:
    if not validate_step_count(j, minimum=0):
        raise LabError(ErrorCodes.VALIDATION_ERROR, f'j 必须为非负整数，收到 {j}')
    n = _index(phi.mesh, t_index)
    return float(q_mj_history(mu, j, phi, kind, inner)[n])


def _broadcast(psi_values, phi_values):
    psi_values = np.asarray(psi_values, dtype=float)
    if phi_values.ndim == 2 and psi_values.ndim == 1:
        return psi_values[:, None]
    return psi_values


def b_op(mu: float, psi: TimeSeries, phi: TimeSeries, psi_prime: TimeSeries = None) -> TimeSeries:
    """
    B^μ_ψ φ = ψ·I^μφ - I¹(ψ'·I^μφ)

    ψ' 缺省时由差商计算。
    """
    if not validate_order(mu, 0.0, 1.0):
        raise LabError(ErrorCodes.INVALID_ORDER, f'b_op 要求 0 ≤ μ ≤ 1，收到 {mu}')
    if psi.mesh != phi.mesh:
        raise LabError(ErrorCodes.LENGTH_MISMATCH, 'ψ 与 φ 的网格不一致')

    mesh = phi.mesh
    integral = phi.values if float(mu) == 0.0 else frac_integral_values(mu, mesh, phi.values)
    if psi_prime is None:
        psi_prime = nodal_derivative(psi, 1)

    memory = frac_integral_values(1.0, mesh, _broadcast(psi_prime.values, integral) * integral)
    values = _broadcast(psi.values, integral) * integral - memory
    return TimeSeries(mesh, values, label=f'B^{mu}({phi.label})')


def b_op_direct(mu: float, psi: TimeSeries, phi: TimeSeries) -> TimeSeries:
    """未分部积分的形式 I¹(ψ ∂^{1-μ}φ)，仅适用于 φ(0)=0 的光滑 φ"""
    from app.services.fractops import rl_derivative

    if float(mu) == 1.0:
        derivative = phi.values
    else:
        derivative = np.array(rl_derivative(1.0 - float(mu), phi).values)
        derivative[0] = 0.0
    values = frac_integral_values(1.0, phi.mesh, _broadcast(psi.values, derivative) * derivative)
    return TimeSeries(phi.mesh, values, label=f'I1(ψ∂^{1 - mu}{phi.label})')


def b_op_mj(mu: float, j: int, psi: TimeSeries, phi: TimeSeries, psi_prime: TimeSeries = None) -> TimeSeries:
    """B^{μ,j}_ψ φ = (M^j B^μ_ψ φ)^{(j)}"""
    base = b_op(mu, psi, phi, psi_prime)
    if j == 0:
        return base
    result = multiplied_derivative(j, base)
    return result.with_values(result.values, undefined_at_origin=True)


# ---------------------------------------------------------------------------
# 不等式检查
# ---------------------------------------------------------------------------

def _exact_tol(*values):
    return config.TOL_VIOLATION * max(max(abs(float(v)) for v in values), 1e-300)


def _quadrature_tol(*values):
    return config.TOL_QUADRATURE * max(max(abs(float(v)) for v in values), 1e-300)


def _window_mask(mesh: GradedMesh, t_min_fraction: float):
    mask = mesh.nodes >= t_min_fraction * mesh.T
    mask[0] = False
    return mask


def _ratio_report(check_id, numerator, driver, mesh, params, t_min_fraction=0.1):
    mask = _window_mask(mesh, t_min_fraction)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(driver[mask] > 0, numerator[mask] / driver[mask], np.inf)
    k = int(np.argmax(ratio))
    sup = float(ratio[k])
    params = dict(params, t=float(mesh.nodes[mask][k]), N=mesh.N)
    return IneqReport(check_id, float(numerator[mask][k]), float(driver[mask][k]), params,
                      kind='ratio', ratio=sup, passed=bool(np.isfinite(sup)))


def _alpha(params, upper_open=True):
    alpha = params.get('alpha')
    if alpha is None or not validate_order(alpha, 0.0, 1.0, include_low=False, include_high=not upper_open):
        raise LabError(ErrorCodes.HYPOTHESIS_VIOLATION, f'α 不满足前提条件: {alpha}')
    return float(alpha)


def check_inequality(check_id: str, params: dict, inputs: dict) -> IneqReport:
    """
    数值检查一条不等式

    Args:
        check_id: 不等式编号（见 CHECK_IDS）
        params: α、ε、μ、ν、m 等参数
        inputs: phi、psi、inner、t_index，或比值检查所需的轨迹数据

    Returns:
        IneqReport；含未知常数的检查返回 kind='ratio' 的报告
    """
    if check_id not in CHECK_IDS:
        raise LabError(ErrorCodes.UNKNOWN_SELECTOR, f'未知检查 {check_id}，可选 {CHECK_IDS}')

    inner = inputs.get('inner')
    phi = inputs.get('phi')
    n = _index(phi.mesh, inputs.get('t_index')) if phi is not None else None

    if check_id == '2.2-A':
        alpha = _alpha(params)
        eps = float(params.get('epsilon', 1.0))
        if eps <= 0:
            raise LabError(ErrorCodes.HYPOTHESIS_VIOLATION, f'ε 必须为正，收到 {eps}')
        psi = inputs.get('psi', phi)
        lhs = abs(cross_term(alpha, phi, psi, n, inner))
        rhs = q1(alpha, phi, n, inner) / (4 * eps * (1 - alpha) ** 2) + eps * q1(alpha, psi, n, inner)
        return IneqReport(check_id, lhs, rhs, dict(params, t=float(phi.mesh.nodes[n])), _exact_tol(lhs, rhs))

    if check_id == '2.2-B':
        alpha = _alpha(params)
        t = phi.mesh.nodes[n]
        lhs = q2(alpha, phi, n, inner)
        rhs = 2 * t ** alpha / (1 - alpha) * q1(alpha, phi, n, inner)
        return IneqReport(check_id, lhs, rhs, dict(params, t=float(t)), _exact_tol(lhs, rhs))

    if check_id == '2.2-C':
        alpha = _alpha(params)
        t = phi.mesh.nodes[n]
        lhs = q1(alpha, phi, n, inner)
        rhs = 2 * t ** alpha * q1(0.0, phi, n, inner)
        return IneqReport(check_id, lhs, rhs, dict(params, t=float(t)), _exact_tol(lhs, rhs))

    if check_id == '2.3-i':
        alpha = _alpha(params, upper_open=False)
        lhs = q2(alpha, phi, n, inner)
        history = q1_history(alpha, phi, inner)
        rhs = 2.0 * float((frac_integral_values(alpha, phi.mesh, history))[n])
        return IneqReport(check_id, lhs, rhs, dict(params, t=float(phi.mesh.nodes[n])), _quadrature_tol(lhs, rhs))

    if check_id == '2.3-ii':
        alpha = _alpha(params, upper_open=False)
        sq = (inner or _SCALAR).sqnorm(frac_integral_values(alpha, phi.mesh, phi.values))
        lhs = float(sq[n]) if alpha == 1.0 else float(frac_integral_values(1.0 - alpha, phi.mesh, sq)[n])
        rhs = 2.0 * q1(alpha, phi, n, inner)
        return IneqReport(check_id, lhs, rhs, dict(params, t=float(phi.mesh.nodes[n])), _quadrature_tol(lhs, rhs))

    if check_id == '2.3-iii':
        alpha = _alpha(params, upper_open=False)
        scale = max(float(np.max(np.abs(phi.values))), 1e-300)
        if np.max(np.abs(phi.values[0])) > 1e-14 * scale:
            raise LabError(ErrorCodes.HYPOTHESIS_VIOLATION, '2.3-iii 要求 φ(0)=0')
        slopes = np.diff(phi.values, axis=0) / (phi.mesh.steps[:, None] if phi.is_vector else phi.mesh.steps)
        t = phi.mesh.nodes[n]
        lhs = float((inner or _SCALAR).sqnorm(phi.values[n:n + 1])[0]) if n > 0 else 0.0
        q = q1_cells_history(alpha, phi.mesh, slopes, inner)[n]
        rhs = 2.0 * omega(2.0 - alpha, t) * q if n > 0 else 0.0
        return IneqReport(check_id, lhs, rhs, dict(params, t=float(t)), _exact_tol(lhs, rhs))

    if check_id == '2.4':
        mu = float(params.get('mu', 0.0))
        nu = float(params.get('nu', mu))
        if not (0.0 <= mu <= nu <= 1.0):
            raise LabError(ErrorCodes.HYPOTHESIS_VIOLATION, f'2.4 要求 0 ≤ μ ≤ ν ≤ 1，收到 μ={mu}, ν={nu}')
        t = phi.mesh.nodes[n]
        lhs = q2(nu, phi, n, inner)
        rhs = 2.0 * t ** (2 * (nu - mu)) * q2(mu, phi, n, inner)
        return IneqReport(check_id, lhs, rhs, dict(params, t=float(t)), _exact_tol(lhs, rhs))

    if check_id in ('3.1-first', '3.1-second'):
        return _memory_ratio(check_id, params, inputs)

    if check_id in ('3.2', '3.3'):
        return _pointwise_ratio(check_id, params, inputs)

    if check_id == 'A.2':
        return _b_integrals_ratio(params, inputs)

    return _fi_psi_ratio(params, inputs)


def _sum_q0j(f: TimeSeries, upto: int, inner: InnerProduct, derivatives: dict = None) -> np.ndarray:
    total = np.zeros(f.mesh.N + 1)
    for j in range(upto + 1):
        total += q_mj_history(0.0, j, f, 1, inner, derivatives)
    return total


def _memory_ratio(check_id, params, inputs):
    """
    (Q₁^{α,m}(u)+Q₂^{α,m}(∇u)) / (t^α ΣQ^{0,j}(f)) 或
    (Q^{0,m}(u)+Q₁^{α,m}(∇u)) / ΣQ^{0,j}(f)
    """
    alpha = _alpha(params)
    m = int(params.get('m', 1))
    u, f = inputs['u'], inputs['f']
    mass, grad = inputs['mass_inner'], inputs['grad_inner']
    _require_resolution(u.mesh, m)

    driver = _sum_q0j(f, m, mass)
    if check_id == '3.1-first':
        numerator = q_mj_history(alpha, m, u, 1, mass) + q_mj_history(alpha, m, u, 2, grad)
        driver = u.mesh.nodes ** alpha * driver
    else:
        numerator = q_mj_history(0.0, m, u, 1, mass) + q_mj_history(alpha, m, u, 1, grad)
    return _ratio_report(check_id, numerator, driver, u.mesh, params, params.get('t_min_fraction', 0.1))


def _pointwise_ratio(check_id, params, inputs):
    """t^{1+2ρ}(‖D u‖² + t^α‖D ∇u‖²)/Σ_{j≤m+1} Q^{0,j}(f)，ρ = m 或 m-α"""
    alpha = _alpha(params)
    m = int(params.get('m', 1))
    derivative, f = inputs['derivative'], inputs['f']
    mass, grad = inputs['mass_inner'], inputs['grad_inner']
    _require_resolution(f.mesh, m + 1)

    rho = m if check_id == '3.2' else m - alpha
    t = derivative.mesh.nodes
    values = np.array(derivative.values)
    values[0] = 0.0
    numerator = t ** (1 + 2 * rho) * (mass.sqnorm(values) + t ** alpha * grad.sqnorm(values))
    driver = _sum_q0j(f, m + 1, mass)
    return _ratio_report(check_id, numerator, driver, f.mesh, params, params.get('t_min_fraction', 0.1))


def _b_integrals_ratio(params, inputs):
    """Q^{0,m}(B^μ_ψ φ) / Σ_{j≤m} Q₂^{μ,j}(φ)"""
    mu = float(params.get('mu', 0.5))
    m = int(params.get('m', 1))
    phi, psi = inputs['phi'], inputs['psi']
    inner = inputs.get('inner')
    _require_resolution(phi.mesh, m)

    numerator = q_mj_history(0.0, m, b_op(mu, psi, phi, inputs.get('psi_prime')), 1, inner)
    driver = np.zeros(phi.mesh.N + 1)
    for j in range(m + 1):
        driver += q_mj_history(mu, j, phi, 2, inner)
    return _ratio_report('A.2', numerator, driver, phi.mesh, params, params.get('t_min_fraction', 0.1))


def _fi_psi_ratio(params, inputs):
    """t^{m+1}‖∂^m I^μ(ψφ)(t)‖ / max_{s≤t} Σ_{j≤m} ‖s^{μ+1+j} φ^{(j)}(s)‖"""
    mu = float(params.get('mu', 0.5))
    m = int(params.get('m', 1))
    phi, psi = inputs['phi'], inputs['psi']
    inner = inputs.get('inner') or _SCALAR
    if not validate_order(mu, 0.0, include_low=False):
        raise LabError(ErrorCodes.HYPOTHESIS_VIOLATION, f'A.3 要求 μ > 0，收到 {mu}')
    _require_resolution(phi.mesh, m)

    mesh = phi.mesh
    t = mesh.nodes
    product = _broadcast(psi.values, phi.values) * phi.values
    integral = TimeSeries(mesh, frac_integral_values(mu, mesh, product))
    derivative = nodal_derivative(integral, m).values
    numerator = t ** (m + 1) * inner.norm(derivative)

    weighted = np.zeros(mesh.N + 1)
    for j in range(m + 1):
        phi_j = nodal_derivative(phi, j).values
        weighted += t ** (mu + 1 + j) * inner.norm(phi_j)
    driver = np.maximum.accumulate(weighted)
    return _ratio_report('A.3', numerator, driver, mesh, params, params.get('t_min_fraction', 0.1))


# ---------------------------------------------------------------------------
# 分数阶 Gronwall 不等式
# ---------------------------------------------------------------------------

@dataclass
class GronwallResult:
    bound: TimeSeries
    violated: bool
    premise_holds: bool
    max_excess: float

    def __iter__(self):
        return iter((self.bound, self.violated))

    def to_dict(self):
        return {'violated': self.violated, 'premise_holds': self.premise_holds, 'max_excess': self.max_excess}


def gronwall_bound(a_fn, b_fn, beta: float, q: TimeSeries, premise_tol: float = None,
                   violation_tol: float = 1e-6) -> GronwallResult:
    """
    界 q(t) ≤ a(t)·E_β(b(t) t^β)

    前提 0 ≤ q ≤ a + b·I^β q 按求积容差检查；前提不成立时不报告违反。
    """
    if not validate_order(beta, 0.0, include_low=False):
        raise LabError(ErrorCodes.INVALID_ORDER, f'β 必须为正，收到 {beta}')

    t = q.mesh.nodes
    a = np.broadcast_to(np.asarray(a_fn(t), dtype=float), t.shape)
    b = np.broadcast_to(np.asarray(b_fn(t), dtype=float), t.shape)
    if np.any(a < 0) or np.any(b < 0) or np.any(np.diff(a) < 0) or np.any(np.diff(b) < 0):
        raise LabError(ErrorCodes.HYPOTHESIS_VIOLATION, 'a、b 必须非负且单调不减')

    bound_values = a * mittag_leffler(beta, 1.0, b * t ** beta)
    bound = TimeSeries(q.mesh, bound_values, label='gronwall-bound')

    premise_tol = config.TOL_QUADRATURE if premise_tol is None else premise_tol
    right = a + b * frac_integral_values(beta, q.mesh, q.values)
    scale = np.maximum(1.0, np.abs(right))
    premise_holds = bool(np.all(q.values >= -premise_tol * scale) and
                         np.all(q.values <= right + premise_tol * scale))

    excess = q.values - bound_values
    max_excess = float(np.max(excess / np.maximum(1.0, np.abs(bound_values))))
    violated = premise_holds and max_excess > violation_tol
    if violated:
        logger.warning("Gronwall 界被突破 max_excess=%.3e", max_excess)
    return GronwallResult(bound, violated, premise_holds, max_excess)


def picard_premise(a_fn, b_fn, beta: float, mesh: GradedMesh, iterations: int = 20) -> TimeSeries:
    """从 q=0 出发的 Picard 迭代 q ← a + b·I^β q"""
    t = mesh.nodes
    a = np.broadcast_to(np.asarray(a_fn(t), dtype=float), t.shape)
    b = np.broadcast_to(np.asarray(b_fn(t), dtype=float), t.shape)
    q = np.zeros_like(t)
    for _ in range(iterations):
        q = a + b * frac_integral_values(beta, mesh, q)
    return TimeSeries(mesh, q, label=f'picard-{iterations}')
