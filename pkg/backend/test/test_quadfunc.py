#!/usr/bin/env python3
"""
测试二次泛函、记忆算子、不等式检查与分数阶 Gronwall 界
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from app.models.mesh import SpaceMesh, TimeSeries
from app.services.femcore import mass_matrix
from app.services.fractops import frac_integral, make_graded_mesh, mittag_leffler
from app.services.quadfunc import (
    InnerProduct, b_op, b_op_direct, b_op_mj, check_inequality, cross_term, gronwall_bound,
    picard_premise, q1, q1_history, q2, q2_history, q_mj, random_series
)
from app.utils.report_helpers import ErrorCodes, LabError


def _constant(mesh, value=1.0):
    return TimeSeries.from_function(mesh, lambda t: value * np.ones_like(t))


def test_q1_of_constant():
    """Q₁¹(1, t) = t²/2"""
    print("🧪 测试 Q₁ 闭式 ...")
    mesh = make_graded_mesh(1.0, 32, 2.0)
    history = q1_history(1.0, _constant(mesh))
    assert np.allclose(history, mesh.nodes ** 2 / 2, rtol=1e-12, atol=1e-15)
    assert q1(1.0, _constant(mesh), t_index=0) == 0.0
    print("   ✅ Q₁¹(1,t) = t²/2")


def test_q1_equals_q2_at_order_zero():
    mesh = make_graded_mesh(1.0, 64, 3.0)
    phi = random_series(mesh, np.random.default_rng(3), dim=2)
    assert q1(0.0, phi) == pytest.approx(q2(0.0, phi), rel=1e-12)


def test_q2_of_constant():
    """Q₂^μ(1, t) = t^{2μ+1}/(Γ(μ+1)²(2μ+1))"""
    mesh = make_graded_mesh(1.0, 64, 2.0)
    mu = 0.5
    exact = 1.0 / (special.gamma(mu + 1) ** 2 * (2 * mu + 1))
    assert q2(mu, _constant(mesh)) == pytest.approx(exact, rel=1e-10)


def test_q0_of_linear_on_coarse_mesh():
    """φ=t、N=4：Q⁰(φ, 1) = ∫₀¹ s² ds = 1/3"""
    mesh = make_graded_mesh(1.0, 4, 1.0)
    phi = TimeSeries.from_function(mesh, lambda t: t)
    assert q1(0.0, phi) == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert q2(0.0, phi) == pytest.approx(1.0 / 3.0, abs=1e-12)


@pytest.mark.parametrize('gamma', [1.0, 2.0, 3.0])
@pytest.mark.parametrize('mu', [0.25, 0.5, 1.0])
def test_q_of_linear_closed_form(mu, gamma):
    """φ=t：Q₁^μ = t^{μ+3}/((μ+3)Γ(μ+2))，Q₂^μ = t^{2μ+3}/((2μ+3)Γ(μ+2)²)"""
    mesh = make_graded_mesh(2.0, 4, gamma)
    phi = TimeSeries.from_function(mesh, lambda t: t)
    t = mesh.nodes
    g = special.gamma(mu + 2.0)
    assert np.allclose(q1_history(mu, phi), t ** (mu + 3) / ((mu + 3) * g), rtol=1e-12, atol=1e-15)
    assert np.allclose(q2_history(mu, phi), t ** (2 * mu + 3) / ((2 * mu + 3) * g ** 2), rtol=1e-12, atol=1e-15)


def test_cross_term_closed_form():
    """∫₀ᵀ I^μ t ds = T^{μ+2}/Γ(μ+3)，∫₀ᵀ s·I^μ1 ds = T^{μ+2}/((μ+2)Γ(μ+1))"""
    mu = 0.5
    mesh = make_graded_mesh(1.5, 3, 2.0)
    linear = TimeSeries.from_function(mesh, lambda t: t)
    assert cross_term(mu, _constant(mesh), linear) == pytest.approx(1.5 ** (mu + 2) / special.gamma(mu + 3), rel=1e-12)
    assert cross_term(mu, linear, _constant(mesh)) == pytest.approx(
        1.5 ** (mu + 2) / ((mu + 2) * special.gamma(mu + 1)), rel=1e-12)

    with pytest.raises(LabError) as excinfo:
        cross_term(mu, linear, _constant(make_graded_mesh(1.5, 4, 2.0)))
    assert excinfo.value.error_code == ErrorCodes.LENGTH_MISMATCH


@pytest.mark.parametrize('gamma', [1.0, 2.0, 8.0])
def test_q_unchanged_by_node_insertion(gamma):
    """在同一分段线性函数上插入节点，Q₁、Q₂ 在原节点处不变"""
    coarse = make_graded_mesh(1.0, 4, gamma)
    fine = make_graded_mesh(1.0, 8, gamma)
    values = np.random.default_rng(5).standard_normal(coarse.N + 1)
    phi = TimeSeries(coarse, values)
    refined = TimeSeries(fine, np.interp(fine.nodes, coarse.nodes, values))
    for mu in (0.0, 0.3, 0.5, 1.0):
        assert q1_history(mu, refined)[::2] == pytest.approx(q1_history(mu, phi), rel=1e-10, abs=1e-14)
        assert q2_history(mu, refined)[::2] == pytest.approx(q2_history(mu, phi), rel=1e-10, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), mu=st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]),
       gamma=st.sampled_from([1.0, 2.0, 3.0]))
def test_positivity(seed, mu, gamma):
    """Q₁^μ(φ, T) ≥ -1e-10·Q₀(φ, T)"""
    mesh = make_graded_mesh(1.0, 128, gamma)
    phi = random_series(mesh, np.random.default_rng(seed), dim=3)
    assert q1(mu, phi) >= -1e-10 * q1(0.0, phi)


def test_q_index_out_of_range():
    mesh = make_graded_mesh(1.0, 8)
    with pytest.raises(LabError) as excinfo:
        q1(0.5, _constant(mesh), t_index=9)
    assert excinfo.value.error_code == ErrorCodes.INDEX_OUT_OF_RANGE


def test_mass_inner_product():
    """质量矩阵内积下的 Q⁰ 等于 ∫‖φ‖²"""
    space = SpaceMesh(16)
    mesh = make_graded_mesh(1.0, 16, 1.0)
    vector = np.sin(np.pi * space.interior)
    phi = TimeSeries(mesh, np.outer(np.ones(mesh.N + 1), vector))
    inner = InnerProduct(mass_matrix(space), 'mass')
    assert q1(0.0, phi, inner=inner) == pytest.approx(float(vector @ (mass_matrix(space) @ vector)), rel=1e-12)


def test_inner_product_requires_symmetry():
    with pytest.raises(LabError) as excinfo:
        InnerProduct(np.array([[1.0, 2.0], [0.0, 1.0]]))
    assert excinfo.value.error_code == ErrorCodes.VALIDATION_ERROR


def test_q_mj_examples():
    """φ=1、j=1、μ=0 → t；φ=t、j=1、μ=0 → 4t³/3"""
    print("🧪 测试 Q^{μ,j} ...")
    mesh = make_graded_mesh(1.0, 256, 1.0)
    assert q_mj(0.0, 1, _constant(mesh)) == pytest.approx(1.0, rel=1e-10)

    phi = TimeSeries.from_function(mesh, lambda t: t)
    assert q_mj(0.0, 1, phi) == pytest.approx(4.0 / 3.0, rel=1e-3)
    assert q_mj(0.5, 0, phi) == pytest.approx(q1(0.5, phi), rel=1e-14)
    print("   ✅ 与闭式积分一致")


def test_q_mj_insufficient_resolution():
    mesh = make_graded_mesh(1.0, 12, 1.0)
    with pytest.raises(LabError) as excinfo:
        q_mj(0.0, 2, _constant(mesh))
    assert excinfo.value.error_code == ErrorCodes.INSUFFICIENT_SMOOTHNESS


def test_b_op_examples():
    """ψ≡c 时 B = c·I^μφ；μ=1、ψ=t、φ≡1 时 B = t²/2"""
    print("🧪 测试 B^μ_ψ ...")
    mesh = make_graded_mesh(1.0, 64, 2.0)
    phi = TimeSeries.from_function(mesh, np.cos)
    psi = _constant(mesh, 2.5)
    result = b_op(0.4, psi, phi)
    assert np.allclose(result.values, 2.5 * frac_integral(0.4, phi).values, rtol=1e-12, atol=1e-15)

    psi = TimeSeries.from_function(mesh, lambda t: t)
    psi_prime = _constant(mesh)
    result = b_op(1.0, psi, _constant(mesh), psi_prime)
    assert np.allclose(result.values, mesh.nodes ** 2 / 2, rtol=1e-12, atol=1e-15)
    print("   ✅ 闭式一致")


def test_b_op_matches_direct_form():
    """φ(0)=0 的光滑 φ 上分部积分形式与直接形式随加密一阶收敛到一起"""
    gaps = []
    for N in (256, 512):
        mesh = make_graded_mesh(1.0, N, 2.0)
        phi = TimeSeries.from_function(mesh, lambda t: t + t ** 2)
        psi = TimeSeries.from_function(mesh, lambda t: 1.0 + t)
        integrated = b_op(0.5, psi, phi, _constant(mesh)).values
        direct = b_op_direct(0.5, psi, phi).values
        gaps.append(float(np.max(np.abs(integrated - direct))))
    print(f"   分部积分形式与直接形式之差: {gaps}")
    assert gaps[1] <= 1e-2
    assert gaps[1] <= 0.6 * gaps[0]


def test_b_op_mj_examples():
    """ψ≡1、μ=1、j=1、φ=t：B^{1,1}φ = 3t²/2"""
    mesh = make_graded_mesh(1.0, 64, 1.0)
    phi = TimeSeries.from_function(mesh, lambda t: t)
    psi = _constant(mesh)
    zero = TimeSeries.from_function(mesh, np.zeros_like)
    assert np.allclose(b_op_mj(0.7, 0, psi, phi, zero).values, b_op(0.7, psi, phi, zero).values)
    result = b_op_mj(1.0, 1, psi, phi, zero)
    assert np.allclose(result.values[1:], 1.5 * mesh.nodes[1:] ** 2, atol=1e-10)


def test_b_op_rejects_order():
    mesh = make_graded_mesh(1.0, 8)
    with pytest.raises(LabError) as excinfo:
        b_op(1.5, _constant(mesh), _constant(mesh))
    assert excinfo.value.error_code == ErrorCodes.INVALID_ORDER


def test_check_2_2_c_example():
    """φ ≡ 1、α=0.5、t=1：lhs ≈ 0.752252，rhs = 2"""
    print("🧪 测试不等式 2.2-C ...")
    mesh = make_graded_mesh(1.0, 64, 2.0)
    report = check_inequality('2.2-C', {'alpha': 0.5}, {'phi': _constant(mesh)})
    assert report.lhs == pytest.approx((2.0 / 3.0) / special.gamma(1.5), abs=1e-6)
    assert report.rhs == pytest.approx(2.0, rel=1e-12)
    assert report.passed and report.margin > 0
    print(f"   lhs={report.lhs:.6f} rhs={report.rhs:.6f}")


def test_check_2_4_equal_orders():
    """μ=ν 时 rhs = 2·lhs"""
    mesh = make_graded_mesh(1.0, 64, 2.0)
    phi = random_series(mesh, np.random.default_rng(11))
    report = check_inequality('2.4', {'mu': 0.3, 'nu': 0.3}, {'phi': phi})
    assert report.rhs == pytest.approx(2 * report.lhs, rel=1e-12)
    assert report.margin == pytest.approx(report.lhs, rel=1e-12)


def test_check_2_2_a_with_psi_equal_phi():
    alpha = 0.5
    eps = 1.0 / (2 * (1 - alpha))
    mesh = make_graded_mesh(1.0, 128, 2.0)
    for seed in range(10):
        phi = random_series(mesh, np.random.default_rng(seed))
        report = check_inequality('2.2-A', {'alpha': alpha, 'epsilon': eps}, {'phi': phi, 'psi': phi})
        assert report.passed
        assert report.lhs == pytest.approx(abs(cross_term(alpha, phi, phi)), rel=1e-14)


@pytest.mark.parametrize('check_id', ['2.2-A', '2.2-B', '2.2-C', '2.3-i', '2.3-ii', '2.3-iii', '2.4'])
def test_inequality_checks_hold_on_random_inputs(check_id):
    mesh = make_graded_mesh(1.0, 128, 2.0)
    for seed in range(5):
        rng = np.random.default_rng(seed)
        phi = random_series(mesh, rng, dim=2, vanish_at_origin=check_id == '2.3-iii')
        params = {'alpha': 0.25 + 0.25 * (seed % 3), 'epsilon': 1.0, 'mu': 0.2, 'nu': 0.7}
        report = check_inequality(check_id, params, {'phi': phi, 't_index': int(rng.integers(1, mesh.N + 1))})
        assert report.passed, report.to_dict()


def test_check_hypothesis_violations():
    mesh = make_graded_mesh(1.0, 32)
    phi = _constant(mesh)
    with pytest.raises(LabError) as excinfo:
        check_inequality('2.3-iii', {'alpha': 0.5}, {'phi': phi})
    assert excinfo.value.error_code == ErrorCodes.HYPOTHESIS_VIOLATION

    with pytest.raises(LabError) as excinfo:
        check_inequality('2.4', {'mu': 0.8, 'nu': 0.2}, {'phi': phi})
    assert excinfo.value.error_code == ErrorCodes.HYPOTHESIS_VIOLATION

    with pytest.raises(LabError) as excinfo:
        check_inequality('2.2-B', {'alpha': 1.0}, {'phi': phi})
    assert excinfo.value.error_code == ErrorCodes.HYPOTHESIS_VIOLATION


def test_ratio_checks_on_smooth_data():
    """A.2、A.3 返回有限的比值报告"""
    mesh = make_graded_mesh(1.0, 128, 2.0)
    t = mesh.nodes
    inputs = {
        'phi': TimeSeries(mesh, t ** 2 + t ** 3),
        'psi': TimeSeries(mesh, 1.0 + t ** 2),
        'psi_prime': TimeSeries(mesh, 2.0 * t),
    }
    for check_id in ('A.2', 'A.3'):
        report = check_inequality(check_id, {'mu': 0.5, 'm': 1}, inputs)
        assert report.kind == 'ratio'
        assert report.passed and np.isfinite(report.ratio)


def test_gronwall_equality_case():
    """a=b=1、β=1/2：q = E_{1/2}(t^{1/2}) 与界重合"""
    print("🧪 测试 Gronwall 等号情形 ...")
    mesh = make_graded_mesh(1.0, 256, 2.0)
    q = TimeSeries(mesh, mittag_leffler(0.5, 1.0, np.sqrt(mesh.nodes)))
    bound, violated = gronwall_bound(lambda t: 1.0, lambda t: 1.0, 0.5, q)
    assert not violated
    assert np.max(np.abs(bound.values - q.values)) <= 1e-6
    print("   ✅ 界与 q 一致")


def test_gronwall_zero_and_picard():
    mesh = make_graded_mesh(1.0, 256, 2.0)
    zero = TimeSeries.from_function(mesh, np.zeros_like)
    result = gronwall_bound(lambda t: 1.0, lambda t: 1.0, 0.5, zero)
    assert not result.violated and np.all(result.bound.values >= 0)

    a_fn = lambda t: 1.0 + t
    b_fn = lambda t: 2.0
    q = picard_premise(a_fn, b_fn, 0.3, mesh, iterations=20)
    result = gronwall_bound(a_fn, b_fn, 0.3, q)
    assert result.premise_holds
    assert not result.violated
    assert np.all(q.values <= result.bound.values * (1 + 1e-6))


def test_gronwall_rejects_nonpositive_beta():
    mesh = make_graded_mesh(1.0, 8)
    with pytest.raises(LabError) as excinfo:
        gronwall_bound(lambda t: 1.0, lambda t: 1.0, 0.0, _constant(mesh))
    assert excinfo.value.error_code == ErrorCodes.INVALID_ORDER


def test_unknown_check():
    mesh = make_graded_mesh(1.0, 8)
    with pytest.raises(LabError) as excinfo:
        check_inequality('9.9', {}, {'phi': _constant(mesh)})
    assert excinfo.value.error_code == ErrorCodes.UNKNOWN_SELECTOR


def main():
    """运行二次泛函测试"""
    print("🚀 开始测试二次泛函与不等式")
    print("=" * 50)
    test_q1_of_constant()
    test_q_mj_examples()
    test_b_op_examples()
    test_check_2_2_c_example()
    test_gronwall_equality_case()
    print("\n✅ 测试完成")


if __name__ == '__main__':
    main()
