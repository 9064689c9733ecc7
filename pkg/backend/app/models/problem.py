from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from app.models.mesh import GradedMesh, SpaceMesh
from app.utils.report_helpers import ErrorCodes, LabError
from app.utils.validators import validate_order, validate_positive_time, validate_step_count


@dataclass(frozen=True)
class SpaceTimeFunction:
    """
    时空函数 ψ(x, t)，可附带解析的时间导数 ψ_t

    is_zero 和 time_dependent 让装配过程跳过恒为零或与时间无关的项。
    """

    name: str
    fn: Callable
    dt_fn: Optional[Callable] = None
    is_zero: bool = False
    time_dependent: bool = True

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        if self.is_zero:
            return np.zeros_like(x)
        return np.broadcast_to(np.asarray(self.fn(x, t), dtype=float), x.shape).copy()

    def dt(self, x, t):
        x = np.asarray(x, dtype=float)
        if self.is_zero or not self.time_dependent or self.dt_fn is None:
            return np.zeros_like(x)
        return np.broadcast_to(np.asarray(self.dt_fn(x, t), dtype=float), x.shape).copy()

    def to_dict(self):
        return {'name': self.name, 'time_dependent': self.time_dependent}


@dataclass(frozen=True)
class SpatialFunction:
    name: str
    fn: Callable

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.fn(x), dtype=float), x.shape).copy()

    def to_dict(self):
        return {'name': self.name}


@dataclass(frozen=True)
class CoefficientField:
    """方程系数：扩散 κ(x)，对流 F、G，反应 a、b"""

    kappa: SpatialFunction
    F: SpaceTimeFunction
    G: SpaceTimeFunction
    a: SpaceTimeFunction
    b: SpaceTimeFunction

    @property
    def has_lower_order_terms(self) -> bool:
        return not all(psi.is_zero for psi in (self.F, self.G, self.a, self.b))

    @property
    def lower_order_terms(self) -> dict:
        return {'F': self.F, 'G': self.G, 'a': self.a, 'b': self.b}

    def to_dict(self):
        return {
            'kappa': self.kappa.name,
            'F': self.F.name,
            'G': self.G.name,
            'a': self.a.name,
            'b': self.b.name,
        }


@dataclass(frozen=True)
class SourceTerm:
    """
    源项 g(x, t) 及其界 ‖g^{(j)}(t)‖ ≤ M t^{η-1-j}

    time_integral 给出 (I¹g)(x, t) 的解析表达式时优先使用；否则由节点值做乘积积分。
    """

    fn: SpaceTimeFunction
    M: float = 0.0
    eta: float = 1.0
    time_integral: Optional[Callable] = None

    @property
    def is_zero(self) -> bool:
        return self.fn.is_zero

    def to_dict(self):
        return {'name': self.fn.name, 'M': self.M, 'eta': self.eta}


@dataclass(frozen=True)
class InitialData:
    name: str
    fn: Callable
    regularity_mu: float = 0.0
    is_zero: bool = False

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_zero:
            return np.zeros_like(x)
        return np.broadcast_to(np.asarray(self.fn(x), dtype=float), x.shape).copy()

    def to_dict(self):
        return {'name': self.name, 'regularity_mu': self.regularity_mu}


@dataclass(frozen=True)
class ProblemSpec:
    alpha: float
    T: float
    coefficients: CoefficientField
    source: SourceTerm
    u0: InitialData

    def __post_init__(self):
        if not validate_order(self.alpha, 0.0, 1.0, include_low=False, include_high=False):
            raise LabError(ErrorCodes.INVALID_ORDER, f'α 必须位于 (0,1)，收到 {self.alpha}')
        if not validate_positive_time(self.T):
            raise LabError(ErrorCodes.VALIDATION_ERROR, f'T 必须为正，收到 {self.T}')
        if not validate_order(self.u0.regularity_mu, 0.0, 2.0):
            raise LabError(ErrorCodes.INVALID_ORDER, f'初值正则性 μ 必须位于 [0,2]，收到 {self.u0.regularity_mu}')
        if self.source.M < 0:
            raise LabError(ErrorCodes.VALIDATION_ERROR, f'源项界 M 必须非负，收到 {self.source.M}')
        if not self.source.is_zero and self.source.eta <= 0:
            raise LabError(ErrorCodes.VALIDATION_ERROR, f'源项指数 η 必须为正，收到 {self.source.eta}')

    @property
    def is_homogeneous(self) -> bool:
        return self.source.is_zero

    def to_dict(self):
        return {
            'alpha': self.alpha,
            'T': self.T,
            'coefficients': self.coefficients.to_dict(),
            'source': self.source.to_dict(),
            'u0': self.u0.to_dict(),
        }


@dataclass(frozen=True)
class SchemeConfig:
    N: int
    gamma: Optional[float] = None
    n_x: int = 64
    tol: float = 1e-10
    modes: Optional[int] = None

    def __post_init__(self):
        if not validate_step_count(self.N, minimum=1):
            raise LabError(ErrorCodes.INVALID_MESH, f'时间步数 N 必须为正整数，收到 {self.N}')
        if not validate_step_count(self.n_x, minimum=2):
            raise LabError(ErrorCodes.INVALID_MESH, f'空间单元数 n_x 必须不小于 2，收到 {self.n_x}')
        if self.modes is not None and not validate_step_count(self.modes, minimum=1):
            raise LabError(ErrorCodes.VALIDATION_ERROR, f'模态数必须为正整数，收到 {self.modes}')

    def refined(self, factor: int = 2) -> 'SchemeConfig':
        """时间步数与空间单元数同时加密"""
        return SchemeConfig(
            N=self.N * factor,
            gamma=self.gamma,
            n_x=self.n_x * factor,
            tol=self.tol,
            modes=None if self.modes is None else self.modes * factor,
        )

    def to_dict(self):
        return {'N': self.N, 'gamma': self.gamma, 'n_x': self.n_x, 'tol': self.tol, 'modes': self.modes}


@dataclass(frozen=True)
class SpectralPayload:
    """常系数齐次问题的特征展开 u(t) = Σ c_k E_α(-λ_k t^α) φ_k"""

    alpha: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    coefficients: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    弱解轨迹：每个时间节点一组内部自由度系数，时间上分段线性

    states[0] 为 u₀ 的 L₂ 投影。memory_at_origin 记录 t=0 处记忆项的最大模。
    """

    mesh: GradedMesh
    space: SpaceMesh
    states: np.ndarray
    provenance: dict = field(default_factory=dict)
    spectral: Optional[SpectralPayload] = None
    memory_at_origin: dict = field(default_factory=dict)

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.shape != (self.mesh.N + 1, self.space.dof):
            raise LabError(
                ErrorCodes.LENGTH_MISMATCH,
                f'轨迹形状 {states.shape} 与 ({self.mesh.N + 1}, {self.space.dof}) 不符'
            )
        states.flags.writeable = False
        object.__setattr__(self, 'states', states)

    @property
    def times(self) -> np.ndarray:
        return self.mesh.nodes

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.states)))

    def to_dict(self):
        return {
            'mesh': self.mesh.to_dict(),
            'space': self.space.to_dict(),
            'provenance': self.provenance,
            'spectral': self.spectral is not None,
            'memory_at_origin': self.memory_at_origin,
        }
