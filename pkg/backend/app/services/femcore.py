"""
一维连续分段线性有限元（Ω=(0,1)，齐次 Dirichlet 边界）

装配质量、刚度（变系数 κ）、对流与反应矩阵；通过广义特征问题 Kφ = λMφ
给出离散 L₂、H¹ 与 Ḣ^μ 范数。
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import linalg, sparse
from scipy.sparse.linalg import spsolve

from app.models.mesh import SpaceMesh
from app.models.problem import CoefficientField, SpaceTimeFunction, SpatialFunction
from app.utils.report_helpers import ErrorCodes, LabError
from app.utils.validators import validate_order

logger = logging.getLogger(__name__)

QUADRATURE_POINTS = 3


@dataclass(frozen=True)
class _Quadrature:
    """每个单元上的 Gauss 点、权重与基函数值"""

    points: np.ndarray    # (n_x, q) 物理坐标
    weights: np.ndarray   # (n_x, q) 含 h/2 的权重
    basis: np.ndarray     # (2, q) 局部基函数 (1-ξ)/2, (1+ξ)/2
    grad: np.ndarray      # (2,) 局部基函数导数 -1/h, 1/h


@lru_cache(maxsize=16)
def _quadrature(space: SpaceMesh) -> _Quadrature:
    xi, w = leggauss(QUADRATURE_POINTS)
    left = space.nodes[:-1]
    h = space.h
    points = left[:, None] + h * (1.0 + xi[None, :]) / 2.0
    weights = np.broadcast_to(h / 2.0 * w, points.shape)
    basis = np.vstack([(1.0 - xi) / 2.0, (1.0 + xi) / 2.0])
    grad = np.array([-1.0 / h, 1.0 / h])
    return _Quadrature(points, weights, basis, grad)


def _assemble(space: SpaceMesh, local: np.ndarray) -> sparse.csr_matrix:
    """
    把单元矩阵 local[e, a, b]（a 为检验函数，b 为试探函数）装配为内部自由度上的稀疏矩阵
    """
    elements = np.arange(space.n_x)
    rows = np.repeat((elements[:, None] + np.arange(2)[None, :])[:, :, None], 2, axis=2)
    cols = np.repeat((elements[:, None] + np.arange(2)[None, :])[:, None, :], 2, axis=1)

    rows, cols, vals = rows.ravel(), cols.ravel(), local.ravel()
    # 删除边界节点 0 与 n_x 所在的行列
    keep = (rows > 0) & (rows < space.n_x) & (cols > 0) & (cols < space.n_x)
    return sparse.coo_matrix(
        (vals[keep], (rows[keep] - 1, cols[keep] - 1)), shape=(space.dof, space.dof)
    ).tocsr()


def _weighted_mass(space: SpaceMesh, rho: np.ndarray) -> sparse.csr_matrix:
    """∫ρ φ_j φ_i"""
    quad = _quadrature(space)
    wr = quad.weights * rho
    local = np.einsum('eq,aq,bq->eab', wr, quad.basis, quad.basis)
    return _assemble(space, local)


def _weighted_stiffness(space: SpaceMesh, rho: np.ndarray) -> sparse.csr_matrix:
    """∫ρ φ_j' φ_i'"""
    quad = _quadrature(space)
    total = np.sum(quad.weights * rho, axis=1)
    local = total[:, None, None] * np.outer(quad.grad, quad.grad)[None, :, :]
    return _assemble(space, local)


def _weighted_advection(space: SpaceMesh, rho: np.ndarray) -> sparse.csr_matrix:
    """C[i, j] = ∫ρ φ_j φ_i'"""
    quad = _quadrature(space)
    moments = np.einsum('eq,bq->eb', quad.weights * rho, quad.basis)
    local = quad.grad[None, :, None] * moments[:, None, :]
    return _assemble(space, local)


@dataclass
class FEMSystem:
    """
    某一时刻的有限元矩阵

    对流与反应矩阵按需装配并缓存；*_dt 版本使用系数的解析时间导数。
    """

    space: SpaceMesh
    coefficients: CoefficientField
    time: float
    M: sparse.csr_matrix
    K: sparse.csr_matrix
    quadrature: str = f'gauss-legendre-{QUADRATURE_POINTS}'
    _cache: dict = field(default_factory=dict, repr=False)

    def _values(self, psi: SpaceTimeFunction, derivative: bool):
        points = _quadrature(self.space).points
        return psi.dt(points, self.time) if derivative else psi(points, self.time)

    def advection(self, name: str, derivative: bool = False) -> sparse.csr_matrix:
        """⟨ψ w, v'⟩ 的矩阵，ψ ∈ {F, G}"""
        key = ('advection', name, derivative)
        if key not in self._cache:
            psi = self.coefficients.lower_order_terms[name]
            self._cache[key] = _weighted_advection(self.space, self._values(psi, derivative))
        return self._cache[key]

    def reaction(self, name: str, derivative: bool = False) -> sparse.csr_matrix:
        """⟨ψ w, v⟩ 的矩阵，ψ ∈ {a, b}"""
        key = ('reaction', name, derivative)
        if key not in self._cache:
            psi = self.coefficients.lower_order_terms[name]
            self._cache[key] = _weighted_mass(self.space, self._values(psi, derivative))
        return self._cache[key]


@lru_cache(maxsize=16)
def mass_matrix(space: SpaceMesh) -> sparse.csr_matrix:
    return _weighted_mass(space, np.ones_like(_quadrature(space).points))


@lru_cache(maxsize=16)
def stiffness_matrix(space: SpaceMesh, kappa: SpatialFunction = None) -> sparse.csr_matrix:
    """κ 缺省为 1（此时 vᵀKv = ‖∇v‖²）"""
    points = _quadrature(space).points
    values = np.ones_like(points) if kappa is None else kappa(points)
    if np.any(values < 1.0):
        raise LabError(
            ErrorCodes.COEFFICIENT_OUT_OF_RANGE,
            f'κ 在求积点上的最小值 {float(np.min(values)):.4g} 小于 1'
        )
    return _weighted_stiffness(space, values)


def assemble(coefficients: CoefficientField, space: SpaceMesh, time: float) -> FEMSystem:
    """装配 t = time 时刻的有限元系统"""
    M = mass_matrix(space)
    K = stiffness_matrix(space, coefficients.kappa)
    return FEMSystem(space, coefficients, float(time), M, K)


def load_vector(space: SpaceMesh, fn) -> np.ndarray:
    """b_i = ∫ f φ_i，fn 为 x 的函数"""
    quad = _quadrature(space)
    values = np.asarray(fn(quad.points), dtype=float)
    values = np.broadcast_to(values, quad.points.shape)
    local = np.einsum('eq,aq->ea', quad.weights * values, quad.basis)

    full = np.zeros(space.n_x + 1)
    np.add.at(full, np.arange(space.n_x), local[:, 0])
    np.add.at(full, np.arange(1, space.n_x + 1), local[:, 1])
    return full[1:-1]


def l2_projection(space: SpaceMesh, fn) -> np.ndarray:
    """L₂ 投影 P f：M c = (f, φ_i)"""
    return spsolve(mass_matrix(space).tocsc(), load_vector(space, fn))


def interpolate(space: SpaceMesh, fn) -> np.ndarray:
    return np.asarray(fn(space.interior), dtype=float).copy()


def _rowwise_quadratic(matrix, v):
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        return float(v @ (matrix @ v))
    return np.einsum('ij,ij->i', v, np.asarray(matrix @ v.T).T)


def l2_norm(space: SpaceMesh, v):
    """‖v‖_{L₂}；v 为单个系数向量或按行排列的轨迹"""
    return np.sqrt(np.maximum(_rowwise_quadratic(mass_matrix(space), v), 0.0))


def gradient_norm(space: SpaceMesh, v):
    """‖∇v‖_{L₂}"""
    return np.sqrt(np.maximum(_rowwise_quadratic(stiffness_matrix(space), v), 0.0))


def is_symmetric_positive_definite(matrix) -> bool:
    dense = matrix.toarray() if sparse.issparse(matrix) else np.asarray(matrix)
    if not np.allclose(dense, dense.T, rtol=0.0, atol=1e-12 * max(np.max(np.abs(dense)), 1.0)):
        return False
    try:
        linalg.cholesky(dense)
    except linalg.LinAlgError:
        return False
    return True


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Kφ = λMφ 的全部特征对，特征向量按列存放并 M-正交归一"""

    space: SpaceMesh
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    mass: sparse.csr_matrix

    def coefficients(self, v) -> np.ndarray:
        """⟨v, Mφ_k⟩；v 可以按行排列多个向量"""
        v = np.asarray(v, dtype=float)
        return np.asarray(self.mass @ v.T).T @ self.eigenvectors

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])


@lru_cache(maxsize=8)
def decompose(space: SpaceMesh, kappa: SpatialFunction = None) -> SpectralDecomposition:
    """稠密广义对称特征分解（scipy.linalg.eigh）"""
    M = mass_matrix(space)
    K = stiffness_matrix(space, kappa)
    eigenvalues, eigenvectors = linalg.eigh(K.toarray(), M.toarray())
    eigenvalues.flags.writeable = False
    eigenvectors.flags.writeable = False
    logger.debug("特征分解完成 n_x=%d λ1=%.6f", space.n_x, eigenvalues[0])
    return SpectralDecomposition(space, eigenvalues, eigenvectors, M)


def hmu_norm(mu: float, v, spectral: SpectralDecomposition):
    """
    ‖v‖_μ = (Σ_k λ_k^μ ⟨v, Mφ_k⟩²)^{1/2}

    Args:
        mu: 范数阶，0 ≤ μ ≤ 2
        v: 系数向量，或形状 (n, dof) 的按行轨迹
        spectral: 与 v 同一网格上的特征分解
    """
    if not validate_order(mu, 0.0, 2.0):
        raise LabError(ErrorCodes.INVALID_ORDER, f'Ḣ^μ 范数要求 0 ≤ μ ≤ 2，收到 {mu}')
    coeffs = spectral.coefficients(v)
    weights = spectral.eigenvalues ** float(mu)
    total = np.sum(weights * coeffs ** 2, axis=-1)
    return np.sqrt(total) if np.ndim(total) else float(np.sqrt(total))
