"""
内置的系数、初值与源项目录

运行配置只能按名称引用这里的函数族，保证实验可追溯、可复现。
"""

import numpy as np

from app.models.problem import (
    CoefficientField, InitialData, ProblemSpec, SchemeConfig, SourceTerm, SpaceTimeFunction, SpatialFunction
)
from app.utils.report_helpers import ErrorCodes, LabError
from app.utils.validators import validate_selector


def _zero_field(name='zero'):
    return SpaceTimeFunction(name, lambda x, t: 0.0, is_zero=True, time_dependent=False)


def _constant_field(value, name):
    return SpaceTimeFunction(name, lambda x, t: value, lambda x, t: 0.0, time_dependent=False)


# κ 需要可哈希且稳定的实例，用作矩阵缓存键
KAPPA_CATALOG = {
    'one': SpatialFunction('one', lambda x: np.ones_like(x)),
    '1+x^2/2': SpatialFunction('1+x^2/2', lambda x: 1.0 + x ** 2 / 2.0),
}

FIELD_CATALOG = {
    'zero': lambda: _zero_field(),
    'one': lambda: _constant_field(1.0, 'one'),
    'sin(pi x)*(1+t)': lambda: SpaceTimeFunction(
        'sin(pi x)*(1+t)',
        lambda x, t: np.sin(np.pi * x) * (1.0 + t),
        lambda x, t: np.sin(np.pi * x),
    ),
}

U0_CATALOG = ('sine-k', 'indicator-one', 'zero')
SOURCE_CATALOG = ('zero', 'power-sine', 'const')


def make_initial_data(name: str, k: int = 1) -> InitialData:
    """
    初值目录

    sine-k: sin(kπx)，特征函数，μ=2；indicator-one: u₀=1，
    正弦系数 4/(kπ)（k 为奇数），仅当 μ<1/2 时 ‖u₀‖_μ 有限；zero: u₀=0。
    """
    if not validate_selector(name, U0_CATALOG):
        raise LabError(ErrorCodes.UNKNOWN_SELECTOR, f'未知初值 {name}，可选 {list(U0_CATALOG)}')

    if name == 'sine-k':
        return InitialData(f'sine-{k}', lambda x: np.sin(k * np.pi * x), regularity_mu=2.0)
    if name == 'indicator-one':
        return InitialData('indicator-one', lambda x: np.ones_like(x), regularity_mu=0.5)
    return InitialData('zero', lambda x: np.zeros_like(x), regularity_mu=2.0, is_zero=True)


def make_source(name: str, eta: float = 1.0, c: float = 1.0) -> SourceTerm:
    """
    源项目录

    power-sine: g = t^{η-1} sin(πx)，I¹g = t^η/η · sin(πx)；const: g ≡ c。
    """
    if not validate_selector(name, SOURCE_CATALOG):
        raise LabError(ErrorCodes.UNKNOWN_SELECTOR, f'未知源项 {name}，可选 {list(SOURCE_CATALOG)}')

    if name == 'power-sine':
        fn = SpaceTimeFunction(
            f'power-sine(eta={eta})',
            lambda x, t: np.power(t, eta - 1.0) * np.sin(np.pi * x),
            lambda x, t: (eta - 1.0) * np.power(t, eta - 2.0) * np.sin(np.pi * x),
        )
        return SourceTerm(
            fn,
            M=1.0 / np.sqrt(2.0),
            eta=eta,
            time_integral=lambda x, t: np.power(t, eta) / eta * np.sin(np.pi * x),
        )
    if name == 'const':
        return SourceTerm(_constant_field(c, f'const({c})'), M=abs(c), eta=1.0,
                          time_integral=lambda x, t: c * t * np.ones_like(x))
    return SourceTerm(_zero_field(), M=0.0, eta=1.0)


def make_field(name: str) -> SpaceTimeFunction:
    if not validate_selector(name, FIELD_CATALOG):
        raise LabError(ErrorCodes.UNKNOWN_SELECTOR, f'未知系数 {name}，可选 {list(FIELD_CATALOG)}')
    return FIELD_CATALOG[name]()


def make_kappa(name: str) -> SpatialFunction:
    if not validate_selector(name, KAPPA_CATALOG):
        raise LabError(ErrorCodes.UNKNOWN_SELECTOR, f'未知扩散系数 {name}，可选 {list(KAPPA_CATALOG)}')
    return KAPPA_CATALOG[name]


def build_problem(params: dict) -> ProblemSpec:
    """
    由扁平参数字典构造问题

    Args:
        params: problem.* 键，例如 problem.alpha、problem.u0、problem.g_eta
    """
    get = params.get
    coefficients = CoefficientField(
        kappa=make_kappa(get('problem.kappa', 'one')),
        F=make_field(get('problem.F', 'zero')),
        G=make_field(get('problem.G', 'zero')),
        a=make_field(get('problem.a', 'zero')),
        b=make_field(get('problem.b', 'zero')),
    )
    source = make_source(get('problem.g', 'zero'), float(get('problem.g_eta', 1.0)), float(get('problem.g_c', 1.0)))
    u0 = make_initial_data(get('problem.u0', 'sine-k'), int(get('problem.u0_k', 1)))
    return ProblemSpec(
        alpha=float(get('problem.alpha', 0.5)),
        T=float(get('problem.T', 1.0)),
        coefficients=coefficients,
        source=source,
        u0=u0,
    )


def build_scheme(params: dict) -> SchemeConfig:
    gamma = params.get('scheme.gamma')
    modes = params.get('scheme.modes')
    return SchemeConfig(
        N=int(params.get('scheme.N', 256)),
        gamma=None if gamma is None else float(gamma),
        n_x=int(params.get('scheme.n_x', 64)),
        tol=float(params.get('scheme.tol', 1e-10)),
        modes=None if modes is None else int(modes),
    )
