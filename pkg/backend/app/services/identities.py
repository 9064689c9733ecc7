"""
交换子系数表与算子恒等式校验

系数由正规排序递推生成（a、b 为有理数，c、d 为 μ 的有理系数多项式），
再由单项式神谕（Γ 比值的精确/高精度求值）独立认证。
"""

import logging
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
import sympy

from app.models.mesh import GradedMesh, TimeSeries
from app.models.reports import IdentityResidual
from app.services.fractops import frac_integral_values, omega
from app.utils.app_logger import debug_log
from app.utils.report_helpers import ErrorCodes, LabError
from app.utils.validators import validate_order, validate_step_count

logger = logging.getLogger(__name__)

MU = sympy.Symbol('mu', nonnegative=True)

IDENTITY_IDS = ('mfold-1', 'mfold-2', 'mfold-3', 'mfold-4', 'fi-omega', 'lemma-A1', 'mixed-expansion')

# Γ 比值无法化为有理数时的求值位数
_DIGITS = 40


def to_rational(value):
    """把用户给出的阶数转换为精确有理数"""
    if isinstance(value, sympy.Basic):
        return value
    if isinstance(value, (int, np.integer)):
        return sympy.Integer(int(value))
    return sympy.Rational(float(value)).limit_denominator(10 ** 6)


@dataclass(frozen=True)
class CommutatorTable:
    """系数表 coeffs[j]，j=0..q（a、b）或 j=0..m（c、d）"""

    kind: str
    m: int
    second: object
    coeffs: tuple

    def __getitem__(self, j):
        return self.coeffs[j]

    def __len__(self):
        return len(self.coeffs)

    def tilde(self) -> tuple:
        """重新编号：ã_j = a_{q-j}，c̃_j = c_{m-j}"""
        return tuple(reversed(self.coeffs))

    def at(self, mu=None) -> tuple:
        """代入 μ 后的系数"""
        if mu is None:
            return self.coeffs
        value = to_rational(mu)
        return tuple(sympy.expand(sympy.sympify(c).subs(MU, value)) for c in self.coeffs)

    def to_dict(self):
        return {
            'kind': self.kind,
            'm': self.m,
            'second': str(self.second),
            'coeffs': [str(c) for c in self.coeffs],
        }


@dataclass(frozen=True)
class MonomialFunction:
    """c·t^p；p 为非负有理数（I^μ 之后出现非整数次数）"""

    degree: object = 0
    coefficient: object = 1

    def __post_init__(self):
        degree = to_rational(self.degree)
        if degree < 0:
            raise LabError(ErrorCodes.HYPOTHESIS_VIOLATION, f'单项式次数必须非负，收到 {degree}')
        object.__setattr__(self, 'degree', degree)
        object.__setattr__(self, 'coefficient', sympy.nsimplify(self.coefficient))


# ---------------------------------------------------------------------------
# 系数递推
# ---------------------------------------------------------------------------

def _check_indices(m, q=None):
    if not validate_step_count(m, minimum=0):
        raise LabError(ErrorCodes.VALIDATION_ERROR, f'm 必须为非负整数，收到 {m}')
    if q is not None:
        if not validate_step_count(q, minimum=0) or q > m:
            raise LabError(ErrorCodes.VALIDATION_ERROR, f'要求 0 ≤ q ≤ m，收到 q={q}, m={m}')


@lru_cache(maxsize=None)
def _a_coeffs(m: int, q: int) -> tuple:
    # 词 M^i ∂^k；左乘 ∂：∂ M^i ∂^k = M^i ∂^{k+1} + i M^{i-1} ∂^k
    words = {(m, 0): sympy.Integer(1)}
    for _ in range(q):
        nxt = defaultdict(lambda: sympy.Integer(0))
        for (i, k), c in words.items():
            nxt[(i, k + 1)] += c
            if i > 0:
                nxt[(i - 1, k)] += i * c
        words = dict(nxt)
    return tuple(words.get((m - j, q - j), sympy.Integer(0)) for j in range(q + 1))


@lru_cache(maxsize=None)
def _b_coeffs(m: int, q: int) -> tuple:
    # 词 ∂^k M^i；左乘 M：M ∂^k M^i = ∂^k M^{i+1} - k ∂^{k-1} M^i
    words = {(q, 0): sympy.Integer(1)}
    for _ in range(m):
        nxt = defaultdict(lambda: sympy.Integer(0))
        for (k, i), c in words.items():
            nxt[(k, i + 1)] += c
            if k > 0:
                nxt[(k - 1, i)] -= k * c
        words = dict(nxt)
    return tuple(words.get((q - j, m - j), sympy.Integer(0)) for j in range(q + 1))


@lru_cache(maxsize=None)
def _c_coeffs(m: int) -> tuple:
    # 词 M^i I^{μ+k}；右乘 M：I^{μ+k} M = M I^{μ+k} - (μ+k) I^{μ+k+1}
    words = {(0, 0): sympy.Integer(1)}
    for _ in range(m):
        nxt = defaultdict(lambda: sympy.Integer(0))
        for (i, k), c in words.items():
            nxt[(i + 1, k)] += c
            nxt[(i, k + 1)] -= (MU + k) * c
        words = dict(nxt)
    return tuple(sympy.expand(words.get((m - j, j), sympy.Integer(0))) for j in range(m + 1))


@lru_cache(maxsize=None)
def _d_coeffs(m: int) -> tuple:
    # 词 I^{μ+k} M^i；左乘 M：M I^{μ+k} = I^{μ+k} M + (μ+k) I^{μ+k+1}
    words = {(0, 0): sympy.Integer(1)}
    for _ in range(m):
        nxt = defaultdict(lambda: sympy.Integer(0))
        for (k, i), c in words.items():
            nxt[(k, i + 1)] += c
            nxt[(k + 1, i)] += (MU + k) * c
        words = dict(nxt)
    return tuple(sympy.expand(words.get((j, m - j), sympy.Integer(0))) for j in range(m + 1))


def diff_mult_coeffs(m: int, q: int):
    """
    ∂^q M^m = Σ_j a_j M^{m-j} ∂^{q-j} 与 M^m ∂^q = Σ_j b_j ∂^{q-j} M^{m-j} 的系数

    Args:
        m: 乘子次数
        q: 导数阶，0 ≤ q ≤ m

    Returns:
        (a 表, b 表)
    """
    _check_indices(m, q)
    return (CommutatorTable('a', m, q, _a_coeffs(m, q)),
            CommutatorTable('b', m, q, _b_coeffs(m, q)))


def frac_mult_coeffs(m: int, mu=None):
    """
    I^μ M^m = Σ_j c_j M^{m-j} I^{μ+j} 与 M^m I^μ = Σ_j d_j I^{μ+j} M^{m-j} 的系数

    mu 为 None 时返回关于符号 μ 的多项式，否则代入给定阶数。
    """
    _check_indices(m)
    if mu is not None and not validate_order(float(mu), 0.0):
        raise LabError(ErrorCodes.INVALID_ORDER, f'μ 必须非负，收到 {mu}')

    c_table = CommutatorTable('c', m, MU, _c_coeffs(m))
    d_table = CommutatorTable('d', m, MU, _d_coeffs(m))
    if mu is None:
        return c_table, d_table

    value = to_rational(mu)
    return (CommutatorTable('c', m, value, c_table.at(value)),
            CommutatorTable('d', m, value, d_table.at(value)))


def closed_form_coeffs(kind: str, m: int, second) -> tuple:
    """系数的闭式（Leibniz 公式与上升阶乘），供交叉核对"""
    if kind in ('a', 'b'):
        q = int(second)
        sign = (lambda j: (-1) ** j) if kind == 'b' else (lambda j: 1)
        return tuple(sympy.Integer(sign(j) * comb(q, j) * sympy.ff(m, j)) for j in range(q + 1))

    mu = MU if second is None else to_rational(second)
    sign = (lambda j: (-1) ** j) if kind == 'c' else (lambda j: 1)
    return tuple(sympy.expand(sign(j) * comb(m, j) * sympy.rf(mu, j)) for j in range(m + 1))


def mixed_expansion_coeffs(m: int) -> tuple:
    """
    M^{m+1} ∂^m = Σ_{j=1}^{m+1} e_j ∂^{j-1} M^j 的系数 (e_1, …, e_{m+1})

    e_j = b̃^{m,m}_{j-1} - m·b̃^{m,m-1}_{j-1}，其中 b̃^{m,m-1}_m = 0。
    """
    if not validate_step_count(m, minimum=1):
        raise LabError(ErrorCodes.VALIDATION_ERROR, f'混合展开要求 m ≥ 1，收到 {m}')

    b_mm = diff_mult_coeffs(m, m)[1].tilde()
    b_m_prev = diff_mult_coeffs(m, m - 1)[1].tilde() + (sympy.Integer(0),)
    return tuple(b_mm[j - 1] - m * b_m_prev[j - 1] for j in range(1, m + 2))


# ---------------------------------------------------------------------------
# 算子代数：同一恒等式既可作用于单项式（精确），也可作用于网格序列（数值）
# ---------------------------------------------------------------------------

class MonomialAlgebra:
    """元素为 {次数: 系数} 的字典，表示 Σ c_p t^p"""

    @staticmethod
    def lift(fn: MonomialFunction) -> dict:
        return {fn.degree: fn.coefficient}

    @staticmethod
    def _gamma_ratio(p, nu):
        ratio = sympy.gamma(p + 1) / sympy.gamma(p + 1 + nu)
        return ratio if ratio.is_Rational else ratio.evalf(_DIGITS)

    def D(self, f: dict, times: int = 1) -> dict:
        for _ in range(times):
            out = {}
            for p, c in f.items():
                if p == 0:
                    continue
                out[p - 1] = out.get(p - 1, 0) + p * c
            f = out
        return f

    def M(self, f: dict, times: int = 1) -> dict:
        return {p + times: c for p, c in f.items()}

    def I(self, nu, f: dict) -> dict:
        nu = to_rational(nu)
        if nu == 0:
            return dict(f)
        out = {}
        for p, c in f.items():
            if p <= -1:
                raise LabError(ErrorCodes.HYPOTHESIS_VIOLATION, f't^{p} 在 0 附近不可积')
            key = p + nu
            out[key] = out.get(key, 0) + c * self._gamma_ratio(p, nu)
        return out

    def omega(self, nu, coefficient) -> dict:
        nu = to_rational(nu)
        factor = 1 / sympy.gamma(nu)
        if not factor.is_Rational:
            factor = factor.evalf(_DIGITS)
        return {nu - 1: coefficient * factor}

    def origin_value(self, f: dict):
        value = sympy.Integer(0)
        for p, c in f.items():
            if p < 0:
                raise LabError(ErrorCodes.HYPOTHESIS_VIOLATION, f't^{p} 在 t=0 处无界')
            if p == 0:
                value += c
        return value

    def combine(self, terms) -> dict:
        """Σ coef·f，terms 为 (coef, f) 序列"""
        out = {}
        for coef, f in terms:
            for p, c in f.items():
                out[p] = out.get(p, 0) + coef * c
        return out

    def residual(self, lhs: dict, rhs: dict) -> float:
        total = sympy.Float(0, _DIGITS)
        for p in set(lhs) | set(rhs):
            gap = sympy.sympify(lhs.get(p, 0) - rhs.get(p, 0))
            total += abs(sympy.N(gap, _DIGITS))
        return float(total)


class SampledAlgebra:
    """元素为网格节点上的数组；残差只在 t ≥ t_min 上取最大模"""

    def __init__(self, mesh: GradedMesh, t_min_fraction: float = 0.1):
        self.mesh = mesh
        self.t = mesh.nodes
        self.t_min = t_min_fraction * mesh.T

    def lift(self, series: TimeSeries) -> np.ndarray:
        return np.asarray(series.values, dtype=float)

    def D(self, f, times: int = 1):
        for _ in range(times):
            f = np.gradient(f, self.t, edge_order=2, axis=0)
        return f

    def M(self, f, times: int = 1):
        return self.t ** times * f

    def I(self, nu, f):
        nu = float(nu)
        if nu == 0.0:
            return np.array(f, dtype=float)
        return frac_integral_values(nu, self.mesh, f)

    def omega(self, nu, coefficient):
        out = np.full(self.t.shape, np.nan)
        out[1:] = float(coefficient) * omega(float(nu), self.t[1:])
        return out

    def origin_value(self, f):
        return float(f[0])

    def combine(self, terms):
        out = np.zeros_like(self.t)
        for coef, f in terms:
            out = out + float(coef) * f
        return out

    def residual(self, lhs, rhs) -> float:
        mask = self.t >= self.t_min
        return float(np.max(np.abs(lhs[mask] - rhs[mask])))


# ---------------------------------------------------------------------------
# 恒等式
# ---------------------------------------------------------------------------

def _require_order(mu, positive=False):
    ok = validate_order(float(mu), 0.0, include_low=not positive)
    if not ok:
        raise LabError(ErrorCodes.INVALID_ORDER, f'μ 必须{"为正" if positive else "非负"}，收到 {mu}')


def _require_smooth(alg, f, order: int):
    """W^order_1 假设：单项式次数为非负整数或大于 order-1"""
    if isinstance(alg, MonomialAlgebra):
        for p in f:
            if not (p.is_Integer or p > order - 1):
                raise LabError(ErrorCodes.HYPOTHESIS_VIOLATION,
                               f't^{p} 的 {order} 阶导数在 0 附近不可积')


def _sides(alg, identity_id, f, params):
    m = params.get('m', 1)
    q = params.get('q', m)
    mu = params.get('mu', 0)

    if identity_id == 'mfold-1':
        _check_indices(m, q)
        a, _ = diff_mult_coeffs(m, q)
        lhs = alg.D(alg.M(f, m), q)
        rhs = alg.combine((a[j], alg.M(alg.D(f, q - j), m - j)) for j in range(q + 1))
        return lhs, rhs

    if identity_id == 'mfold-2':
        _check_indices(m, q)
        _, b = diff_mult_coeffs(m, q)
        lhs = alg.M(alg.D(f, q), m)
        rhs = alg.combine((b[j], alg.D(alg.M(f, m - j), q - j)) for j in range(q + 1))
        return lhs, rhs

    if identity_id == 'mfold-3':
        _require_order(mu)
        c, _ = frac_mult_coeffs(m, mu)
        lhs = alg.I(mu, alg.M(f, m))
        rhs = alg.combine((c[j], alg.M(alg.I(to_rational(mu) + j, f), m - j)) for j in range(m + 1))
        return lhs, rhs

    if identity_id == 'mfold-4':
        _require_order(mu)
        _, d = frac_mult_coeffs(m, mu)
        lhs = alg.M(alg.I(mu, f), m)
        rhs = alg.combine((d[j], alg.I(to_rational(mu) + j, alg.M(f, m - j))) for j in range(m + 1))
        return lhs, rhs

    if identity_id == 'fi-omega':
        _require_order(mu)
        if not validate_step_count(m, minimum=1):
            raise LabError(ErrorCodes.VALIDATION_ERROR, f'fi-omega 要求 m ≥ 1，收到 {m}')
        _require_smooth(alg, f, m)
        lhs = alg.D(alg.I(mu, f), m)
        terms = [(1, alg.I(mu, alg.D(f, m)))]
        for j in range(m):
            terms.append((1, alg.omega(to_rational(mu) - m + 1 + j, alg.origin_value(alg.D(f, j)))))
        return lhs, alg.combine(terms)

    if identity_id == 'lemma-A1':
        _require_order(mu, positive=True)
        if not validate_step_count(q, minimum=1) or q > m:
            raise LabError(ErrorCodes.VALIDATION_ERROR, f'lemma-A1 要求 1 ≤ q ≤ m，收到 q={q}, m={m}')
        _, d = frac_mult_coeffs(m, mu)
        d_tilde = d.tilde()
        mu_r = to_rational(mu)
        lhs = alg.D(alg.M(alg.I(mu, f), m), q)
        terms = [(d_tilde[j], alg.I(mu_r + m - q - j, alg.M(f, j))) for j in range(m - q + 1)]
        terms += [(d_tilde[j], alg.I(mu, alg.D(alg.M(f, j), j - (m - q)))) for j in range(m - q + 1, m + 1)]
        return lhs, alg.combine(terms)

    if identity_id == 'mixed-expansion':
        e = mixed_expansion_coeffs(m)
        lhs = alg.M(alg.D(f, m), m + 1)
        rhs = alg.combine((e[j - 1], alg.D(alg.M(f, j), j - 1)) for j in range(1, m + 2))
        return lhs, rhs

    raise LabError(ErrorCodes.UNKNOWN_SELECTOR, f'未知恒等式 {identity_id}，可选 {IDENTITY_IDS}')


def verify_identity(identity_id: str, params: dict, test_function) -> float:
    """
    计算恒等式左右两侧之差的最大模

    Args:
        identity_id: 恒等式编号
        params: {'m', 'q', 'mu'}
        test_function: MonomialFunction（精确求值）或 TimeSeries（网格求值）

    Returns:
        float: 残差
    """
    if isinstance(test_function, MonomialFunction):
        alg = MonomialAlgebra()
    elif isinstance(test_function, TimeSeries):
        if test_function.is_vector:
            raise LabError(ErrorCodes.VALIDATION_ERROR, '恒等式校验只接受标量序列')
        alg = SampledAlgebra(test_function.mesh, params.get('t_min_fraction', 0.1))
    else:
        raise LabError(ErrorCodes.VALIDATION_ERROR, f'不支持的测试函数类型 {type(test_function).__name__}')

    lhs, rhs = _sides(alg, identity_id, alg.lift(test_function), params)
    residual = alg.residual(lhs, rhs)
    logger.debug("恒等式 %s %s 残差 %.3e", identity_id, params, residual)
    return residual


def certify_table(kind: str, m: int, second) -> float:
    """在足够多的单项式 t^k 上认证一张系数表，返回残差之和"""
    if kind in ('a', 'b'):
        identity_id = 'mfold-1' if kind == 'a' else 'mfold-2'
        params = {'m': m, 'q': int(second)}
        degrees = range(m + int(second) + 3)
    else:
        identity_id = 'mfold-3' if kind == 'c' else 'mfold-4'
        params = {'m': m, 'mu': second}
        degrees = range(m + 3)
    return sum(verify_identity(identity_id, params, MonomialFunction(k)) for k in degrees)


def identity_suite(max_m: int = 6, mus=(sympy.Rational(1, 4), sympy.Rational(1, 3),
                                        sympy.Rational(1, 2), sympy.Integer(1)),
                   tol: float = 1e-12) -> list:
    """
    单项式神谕下的全部恒等式校验

    Returns:
        list[IdentityResidual]，按 (identity_id, m, q_or_mu) 排序
    """
    debug_log.suite_start('identities', {'max_m': max_m, 'mus': [str(mu) for mu in mus]})
    records = []

    for m in range(max_m + 1):
        for q in range(m + 1):
            records.append(IdentityResidual('mfold-1', m, str(q), certify_table('a', m, q), tol))
            records.append(IdentityResidual('mfold-2', m, str(q), certify_table('b', m, q), tol))
        for mu in mus:
            records.append(IdentityResidual('mfold-3', m, str(mu), certify_table('c', m, mu), tol))
            records.append(IdentityResidual('mfold-4', m, str(mu), certify_table('d', m, mu), tol))

    for m in range(1, max_m + 1):
        degrees = range(m + 2)
        for mu in (sympy.Integer(0),) + tuple(mus):
            residual = sum(verify_identity('fi-omega', {'m': m, 'mu': mu}, MonomialFunction(k)) for k in degrees)
            records.append(IdentityResidual('fi-omega', m, str(mu), residual, tol))
        for q in range(1, m + 1):
            for mu in mus:
                residual = sum(
                    verify_identity('lemma-A1', {'m': m, 'q': q, 'mu': mu}, MonomialFunction(k))
                    for k in degrees
                )
                records.append(IdentityResidual('lemma-A1', m, f'q={q};mu={mu}', residual, tol))
        residual = sum(verify_identity('mixed-expansion', {'m': m}, MonomialFunction(k)) for k in range(2 * m + 3))
        records.append(IdentityResidual('mixed-expansion', m, str(m), residual, tol))

    records.sort(key=lambda r: (r.identity_id, r.m, r.q_or_mu))
    failed = [r for r in records if not r.passed]
    if failed:
        for r in failed:
            debug_log.check_failed(f'{r.identity_id} m={r.m} {r.q_or_mu}', {'residual': r.residual})
    else:
        debug_log.suite_success('identities', {'checks': len(records)})
    return records
