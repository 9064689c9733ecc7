from dataclasses import dataclass
from functools import cached_property

import numpy as np

from app.utils.report_helpers import ErrorCodes, LabError, SingularAtOriginError


@dataclass(frozen=True)
class GradedMesh:
    """时间网格 t_n = T·(n/N)^γ；按 (T, N, gamma) 比较与哈希，可作缓存键"""

    T: float
    N: int
    gamma: float = 1.0

    @cached_property
    def nodes(self) -> np.ndarray:
        t = self.T * (np.arange(self.N + 1) / self.N) ** self.gamma
        t[0] = 0.0
        t[-1] = self.T
        t.flags.writeable = False
        return t

    @cached_property
    def steps(self) -> np.ndarray:
        tau = np.diff(self.nodes)
        tau.flags.writeable = False
        return tau

    def __len__(self):
        return self.N + 1

    def to_dict(self):
        return {'T': self.T, 'N': self.N, 'gamma': self.gamma}


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """
    网格节点上的标量或向量序列，语义为时间上的分段线性插值

    values 形状为 (N+1,) 或 (N+1, d)。undefined_at_origin 为真时 t=0 处的值
    不可读取（可能是 NaN，也可能是仅供求积使用的单侧估计）。
    """

    mesh: GradedMesh
    values: np.ndarray
    undefined_at_origin: bool = False
    label: str = ''

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim not in (1, 2) or values.shape[0] != self.mesh.N + 1:
            raise LabError(
                ErrorCodes.LENGTH_MISMATCH,
                f'序列长度 {values.shape[0] if values.ndim else 0} 与网格节点数 {self.mesh.N + 1} 不一致'
            )

        body = values[1:] if self.undefined_at_origin else values
        if not np.all(np.isfinite(body)):
            raise LabError(ErrorCodes.NON_FINITE_INPUT, f'序列 {self.label or ""} 含非有限值')

        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    @property
    def times(self) -> np.ndarray:
        return self.mesh.nodes

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == 2

    @property
    def dim(self) -> int:
        return self.values.shape[1] if self.is_vector else 1

    def at(self, n: int):
        """读取第 n 个节点的值；未定义的原点抛出 SINGULAR_AT_ORIGIN"""
        if not 0 <= n <= self.mesh.N:
            raise LabError(ErrorCodes.INDEX_OUT_OF_RANGE, f'节点 {n} 超出范围 [0, {self.mesh.N}]')
        if n == 0 and self.undefined_at_origin:
            raise SingularAtOriginError(f'序列 {self.label or ""} 在 t=0 处未定义')
        return self.values[n]

    def interior(self):
        """返回 t>0 的节点及对应值"""
        return self.times[1:], self.values[1:]

    def with_values(self, values, undefined_at_origin: bool = None, label: str = None):
        return TimeSeries(
            self.mesh,
            values,
            self.undefined_at_origin if undefined_at_origin is None else undefined_at_origin,
            self.label if label is None else label,
        )

    @classmethod
    def from_function(cls, mesh: GradedMesh, fn, label: str = ''):
        """在网格节点上采样函数 fn(t)"""
        return cls(mesh, np.asarray(fn(mesh.nodes), dtype=float), label=label)

    def to_dict(self):
        return {
            'mesh': self.mesh.to_dict(),
            'shape': list(self.values.shape),
            'undefined_at_origin': self.undefined_at_origin,
            'label': self.label,
        }


@dataclass(frozen=True)
class SpaceMesh:
    """Ω=(0,1) 上的均匀网格，齐次 Dirichlet 边界；自由度为内部节点"""

    n_x: int

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.linspace(0.0, 1.0, self.n_x + 1)
        x.flags.writeable = False
        return x

    @property
    def h(self) -> float:
        return 1.0 / self.n_x

    @property
    def dof(self) -> int:
        return self.n_x - 1

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    def to_dict(self):
        return {'n_x': self.n_x, 'dof': self.dof}
