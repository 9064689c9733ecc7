import math
from dataclasses import dataclass, field
from typing import Optional


def _clean(value):
    """把非有限浮点数转换为字符串，保证 JSON/CSV 输出稳定"""
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


@dataclass
class IneqReport:
    """不等式检查结果；kind='ratio' 时 lhs/rhs 为比值的分子与驱动项"""

    check_id: str
    lhs: float
    rhs: float
    params: dict = field(default_factory=dict)
    tol: float = 0.0
    kind: str = 'inequality'
    ratio: Optional[float] = None
    passed: Optional[bool] = None

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def __post_init__(self):
        if self.passed is None:
            self.passed = bool(math.isfinite(self.margin) and self.margin >= -self.tol)

    def to_dict(self):
        return {
            'check_id': self.check_id,
            'params': {k: _clean(v) for k, v in self.params.items()},
            'lhs': _clean(self.lhs),
            'rhs': _clean(self.rhs),
            'margin': _clean(self.margin),
            'kind': self.kind,
            'ratio': _clean(self.ratio),
            'pass': self.passed,
        }


@dataclass
class IdentityResidual:
    identity_id: str
    m: int
    q_or_mu: str
    residual: float
    tol: float = 1e-12

    @property
    def passed(self) -> bool:
        return math.isfinite(self.residual) and self.residual <= self.tol

    def to_dict(self):
        return {
            'identity_id': self.identity_id,
            'm': self.m,
            'q_or_mu': self.q_or_mu,
            'residual': _clean(self.residual),
            'pass': self.passed,
        }


@dataclass
class RateEstimate:
    exponent: float
    stderr: float
    window: tuple
    samples: int

    def to_dict(self):
        return {
            'exponent': self.exponent,
            'stderr': self.stderr,
            'window_lo': self.window[0],
            'window_hi': self.window[1],
            'samples': self.samples,
        }


@dataclass(frozen=True)
class RatePrediction:
    theorem: str
    quantity: str
    exponent: float
    check: str = 'sharp'

    def to_dict(self):
        return {'theorem': self.theorem, 'quantity': self.quantity,
                'predicted': self.exponent, 'check': self.check}


@dataclass
class RateReport:
    experiment_id: str
    theorem: str
    quantity: str
    alpha: float
    mu: float
    m: int
    predicted: float
    estimate: RateEstimate
    tol: float
    check: str = 'sharp'
    refined_exponent: Optional[float] = None
    notes: list = field(default_factory=list)

    @property
    def measured(self) -> float:
        return self.estimate.exponent

    @property
    def mesh_independent(self) -> bool:
        if self.refined_exponent is None:
            return True
        return abs(self.refined_exponent - self.measured) <= self.tol

    @property
    def passed(self) -> bool:
        if not self.mesh_independent or not math.isfinite(self.measured):
            return False
        if self.check == 'bound':
            return self.measured >= self.predicted - self.tol
        return abs(self.measured - self.predicted) <= self.tol

    def to_row(self, config_hash: str = '') -> dict:
        return {
            'experiment_id': self.experiment_id,
            'theorem': self.theorem,
            'alpha': self.alpha,
            'mu': self.mu,
            'm': self.m,
            'predicted': self.predicted,
            'measured': self.measured,
            'stderr': self.estimate.stderr,
            'window_lo': self.estimate.window[0],
            'window_hi': self.estimate.window[1],
            'pass': self.passed,
            'config_hash': config_hash,
        }

    def to_dict(self):
        data = self.to_row()
        data.update({
            'quantity': self.quantity,
            'check': self.check,
            'tol': self.tol,
            'refined_exponent': self.refined_exponent,
            'notes': list(self.notes),
        })
        return data
