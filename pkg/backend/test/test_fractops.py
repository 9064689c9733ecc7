#!/usr/bin/env python3
"""
测试分数阶微积分离散核
验证 ω_μ、分级网格、乘积积分、RL 导数、Mittag-Leffler 函数与初值平移恒等式
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from app.models.mesh import TimeSeries
from app.services.fractops import (
    default_grading, fi_omega_shift, frac_integral, make_graded_mesh, mittag_leffler, ml_analytic,
    nodal_derivative, omega, product_weights, rl_derivative
)
from app.utils.report_helpers import ErrorCodes, LabError, MittagLefflerError, SingularAtOriginError


def test_omega_values():
    """ω_μ 的闭式取值"""
    print("🧪 测试 ω_μ ...")
    t = np.array([0.1, 1.0, 7.5])
    assert np.allclose(omega(1, t), 1.0)
    assert omega(0.5, 1.0) == pytest.approx(1.0 / math.sqrt(math.pi), abs=1e-6)
    assert omega(-2, 5.0) == 0.0
    print("   ✅ ω_1 ≡ 1, ω_0.5(1) = 1/√π, ω_-2 ≡ 0")


def test_omega_rejects_nonpositive_time():
    with pytest.raises(LabError) as excinfo:
        omega(0.5, 0.0)
    assert excinfo.value.error_code == ErrorCodes.VALIDATION_ERROR


def test_graded_mesh_nodes():
    """t_n = T(n/N)^γ"""
    print("🧪 测试分级网格 ...")
    assert np.allclose(make_graded_mesh(1, 4, 1).nodes, [0, 0.25, 0.5, 0.75, 1])
    assert np.allclose(make_graded_mesh(1, 4, 2).nodes, [0, 1 / 16, 1 / 4, 9 / 16, 1])
    assert np.allclose(make_graded_mesh(2, 2, 3).nodes, [0, 0.25, 2])
    mesh = make_graded_mesh(1.0, 64, 3.0)
    assert mesh.nodes[0] == 0.0 and mesh.nodes[-1] == 1.0
    assert np.all(np.diff(mesh.nodes) > 0)
    print("   ✅ 节点与示例一致且严格递增")


@pytest.mark.parametrize('args, code', [
    ((0.0, 4, 1.0), ErrorCodes.INVALID_MESH),
    ((1.0, 0, 1.0), ErrorCodes.INVALID_MESH),
    ((1.0, 4, 0.5), ErrorCodes.INVALID_MESH),
])
def test_graded_mesh_rejects_invalid(args, code):
    with pytest.raises(LabError) as excinfo:
        make_graded_mesh(*args)
    assert excinfo.value.error_code == code


def test_default_grading_is_clipped():
    assert default_grading(0.5) == 3.0
    assert default_grading(0.1) == 8.0
    assert default_grading(0.999) == 1.0


def test_frac_integral_of_constant():
    """I^{1/2}(1)(1) = 2/√π，对线性数据精确"""
    print("🧪 测试 I^μ 的单项式规则 ...")
    mesh = make_graded_mesh(1.0, 16, 2.0)
    ones = TimeSeries.from_function(mesh, lambda t: np.ones_like(t))
    result = frac_integral(0.5, ones)
    assert result.values[0] == 0.0
    assert result.values[-1] == pytest.approx(2.0 / math.sqrt(math.pi), rel=1e-13)
    exact = mesh.nodes ** 0.5 / special.gamma(1.5)
    assert np.allclose(result.values, exact, rtol=1e-12, atol=1e-14)
    print("   ✅ I^{1/2}1 = t^{1/2}/Γ(3/2)")


def test_frac_integral_exact_on_linear():
    mesh = make_graded_mesh(1.0, 10, 3.0)
    series = TimeSeries.from_function(mesh, lambda t: t)
    result = frac_integral(1.0, series)
    assert np.allclose(result.values, mesh.nodes ** 2 / 2, rtol=1e-12, atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(mu=st.floats(0.05, 2.0), a=st.floats(-3, 3), b=st.floats(-3, 3), gamma=st.sampled_from([1.0, 2.0, 3.0]))
def test_frac_integral_exact_on_affine(mu, a, b, gamma):
    """仿射数据上乘积积分精确到舍入误差"""
    mesh = make_graded_mesh(1.0, 32, gamma)
    series = TimeSeries.from_function(mesh, lambda t: a + b * t)
    t = mesh.nodes
    exact = a * t ** mu / special.gamma(mu + 1) + b * t ** (mu + 1) / special.gamma(mu + 2)
    assert np.allclose(frac_integral(mu, series).values, exact, rtol=1e-10, atol=1e-12)


def test_product_weights_row_sums():
    """权矩阵行和为 t_n^μ/Γ(μ+1) 且只读"""
    mesh = make_graded_mesh(1.0, 40, 2.5)
    W = product_weights(mesh, 0.3)
    assert np.allclose(W.sum(axis=1), mesh.nodes ** 0.3 / special.gamma(1.3), rtol=1e-12, atol=1e-15)
    assert np.all(np.triu(W, 1) == 0.0)
    assert not W.flags.writeable


def test_frac_integral_semigroup():
    """I^{0.3}I^{0.4} sin ≈ I^{0.7} sin"""
    print("🧪 测试半群性质 ...")
    mesh = make_graded_mesh(1.0, 512, 2.0)
    phi = TimeSeries.from_function(mesh, np.sin)
    lhs = frac_integral(0.3, frac_integral(0.4, phi)).values[1:]
    rhs = frac_integral(0.7, phi).values[1:]
    gap = np.max(np.abs(lhs - rhs) / np.abs(rhs))
    print(f"   最大相对差: {gap:.3e}")
    assert gap <= 1e-3


def test_frac_integral_rejects_nonpositive_order():
    mesh = make_graded_mesh(1.0, 8)
    with pytest.raises(LabError) as excinfo:
        frac_integral(0.0, TimeSeries.from_function(mesh, lambda t: t))
    assert excinfo.value.error_code == ErrorCodes.INVALID_ORDER


def test_rl_derivative_of_constant_and_linear():
    """∂^{1-α}1 = ω_α，∂^{0.5} t = t^{0.5}/Γ(1.5)"""
    print("🧪 测试 RL 导数 ...")
    mesh = make_graded_mesh(1.0, 2048, 1.0)
    t = mesh.nodes[1:]

    ones = TimeSeries.from_function(mesh, lambda s: np.ones_like(s))
    result = rl_derivative(0.5, ones)
    assert result.undefined_at_origin
    window = t >= 0.25
    assert np.allclose(result.values[1:][window], omega(0.5, t[window]), rtol=2e-3)

    linear = TimeSeries.from_function(mesh, lambda s: s)
    result = rl_derivative(0.5, linear)
    assert np.allclose(result.values[1:][window], t[window] ** 0.5 / special.gamma(1.5), rtol=2e-3)

    with pytest.raises(SingularAtOriginError):
        result.at(0)
    print("   ✅ 在 t ≥ 0.25 上与闭式一致")


def test_nodal_derivative_exact_on_quadratic():
    mesh = make_graded_mesh(1.0, 32, 2.0)
    series = TimeSeries.from_function(mesh, lambda t: t ** 2)
    first = nodal_derivative(series, 1)
    assert np.allclose(first.values[1:], 2 * mesh.nodes[1:], atol=1e-10)
    assert nodal_derivative(series, 0) is series


def test_mittag_leffler_reference_values():
    """E_1 = exp，E_{1/2}(z) = e^{z²}erfc(-z)，E_{α,α}(0) = 1/Γ(α)"""
    print("🧪 测试 Mittag-Leffler 函数 ...")
    assert mittag_leffler(1.0, 1.0, 1.0) == pytest.approx(math.e, rel=1e-12)
    assert mittag_leffler(0.5, 1.0, -1.0) == pytest.approx(0.427584, abs=1e-6)
    assert mittag_leffler(0.7, 0.7, 0.0) == pytest.approx(1.0 / special.gamma(0.7), rel=1e-14)
    assert mittag_leffler(0.5, 1.0, -0.98696) == pytest.approx(0.4312, abs=5e-4)
    print("   ✅ 参考值一致")


def test_mittag_leffler_erfc_oracle_on_negative_axis():
    """级数、围道及交叉校验带上都与 erfc 闭式一致"""
    z = -np.concatenate([np.linspace(0.0, 1.5, 16), np.geomspace(1.5, 40.0, 24)])
    expected = special.erfcx(-z)
    values = mittag_leffler(0.5, 1.0, z)
    assert np.allclose(values, expected, rtol=1e-7, atol=1e-10)


def test_mittag_leffler_exponential_on_array():
    z = np.linspace(-20.0, 3.0, 41)
    assert np.allclose(mittag_leffler(1.0, 1.0, z), np.exp(z), rtol=1e-8, atol=1e-10)


def test_ml_analytic_accepts_nonpositive_second_parameter():
    """E_{1,0}(z) = z·e^z"""
    z = np.array([-3.0, -0.5, 0.0, 0.7])
    assert np.allclose(ml_analytic(1.0, 0.0, z), z * np.exp(z), rtol=1e-8, atol=1e-10)


def test_mittag_leffler_rejects_invalid_parameters():
    with pytest.raises(LabError) as excinfo:
        mittag_leffler(0.0, 1.0, 1.0)
    assert excinfo.value.error_code == ErrorCodes.INVALID_ORDER
    assert issubclass(MittagLefflerError, LabError)


def test_fi_omega_shift_constant():
    """m=1、φ ≡ c 时结果为 c·ω_μ"""
    print("🧪 测试初值平移恒等式 ...")
    mesh = make_graded_mesh(1.0, 64, 2.0)
    phi = TimeSeries.from_function(mesh, lambda t: 3.0 * np.ones_like(t))
    result = fi_omega_shift(1, 0.4, phi, [3.0])
    assert np.allclose(result.values[1:], 3.0 * omega(0.4, mesh.nodes[1:]), rtol=1e-10)


def test_fi_omega_shift_fundamental_theorem():
    """μ=1：φ = I¹φ' + φ(0)"""
    mesh = make_graded_mesh(1.0, 128, 1.0)
    phi = TimeSeries.from_function(mesh, lambda t: 1.0 + t ** 2)
    derivative = TimeSeries.from_function(mesh, lambda t: 2 * t)
    result = fi_omega_shift(1, 1.0, phi, [1.0], derivative=derivative)
    assert np.allclose(result.values[1:], phi.values[1:], rtol=1e-12)


def test_fi_omega_shift_second_order():
    """m=2、μ=0.5、φ=t：∂²I^{0.5}t = t^{-0.5}/Γ(0.5)"""
    mesh = make_graded_mesh(1.0, 64, 2.0)
    phi = TimeSeries.from_function(mesh, lambda t: t)
    zero = TimeSeries.from_function(mesh, np.zeros_like)
    result = fi_omega_shift(2, 0.5, phi, [0.0, 1.0], derivative=zero)
    exact = mesh.nodes[1:] ** -0.5 / special.gamma(0.5)
    assert np.max(np.abs(result.values[1:] - exact)) <= 1e-10


def test_fi_omega_shift_length_mismatch():
    mesh = make_graded_mesh(1.0, 16)
    phi = TimeSeries.from_function(mesh, lambda t: t)
    with pytest.raises(LabError) as excinfo:
        fi_omega_shift(2, 0.5, phi, [0.0])
    assert excinfo.value.error_code == ErrorCodes.LENGTH_MISMATCH


def main():
    """运行全部分数阶核测试"""
    print("🚀 开始测试分数阶微积分离散核")
    print("=" * 50)
    test_omega_values()
    test_graded_mesh_nodes()
    test_frac_integral_of_constant()
    test_frac_integral_semigroup()
    test_rl_derivative_of_constant_and_linear()
    test_mittag_leffler_reference_values()
    test_fi_omega_shift_constant()
    print("\n✅ 测试完成")


if __name__ == '__main__':
    main()
