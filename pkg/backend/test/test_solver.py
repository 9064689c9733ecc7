#!/usr/bin/env python3
"""
测试弱问题求解器、特征展开参考解与时间导数后处理
"""

import dataclasses

import numpy as np
import pytest

from app.models.mesh import SpaceMesh
from app.models.problem import SourceTerm, SpaceTimeFunction
from app.services.catalog import build_problem, build_scheme
from app.services.femcore import l2_norm, l2_projection
from app.services.fractops import mittag_leffler
from app.services.solver import (
    f_rhs, frac_time_derivative, solve_heat_reference, solve_spectral_const, solve_weak, time_derivative,
    time_mesh
)
from app.utils.report_helpers import ErrorCodes, LabError


def _sine(x):
    return np.sin(np.pi * x)


def test_zero_data_gives_zero_solution():
    """u₀=0、g=0 → u ≡ 0"""
    print("🧪 测试零解 ...")
    problem = build_problem({'problem.u0': 'zero'})
    trajectory = solve_weak(problem, build_scheme({'scheme.N': 16, 'scheme.n_x': 8}))
    assert np.all(trajectory.states == 0.0)
    assert trajectory.is_finite()
    print("   ✅ 轨迹恒为零")


def test_memory_terms_vanish_at_origin():
    problem = build_problem({'problem.F': 'sin(pi x)*(1+t)', 'problem.a': 'one'})
    trajectory = solve_weak(problem, build_scheme({'scheme.N': 32, 'scheme.n_x': 16}))
    assert set(trajectory.memory_at_origin) == {'I_alpha_u', 'I_alpha_grad_u', 'B1_u', 'B2_u'}
    assert all(value == 0.0 for value in trajectory.memory_at_origin.values())
    assert trajectory.provenance['method'] == 'weak'


def test_step_datum_modal_coefficients():
    """u₀=1 的模态系数与正弦级数 2√2/(kπ)（k 为奇数）一致，偶数模态为零"""
    problem = build_problem({'problem.u0': 'indicator-one'})
    trajectory = solve_spectral_const(problem, build_scheme({'scheme.N': 8, 'scheme.n_x': 64}))
    coefficients = np.abs(trajectory.spectral.coefficients)
    for k in (1, 3, 5):
        assert coefficients[k - 1] == pytest.approx(2.0 * np.sqrt(2.0) / (k * np.pi), rel=1e-3)
    assert np.all(coefficients[1:8:2] <= 1e-12)


def test_f_rhs_with_analytic_time_integral():
    """g = t^{η-1}sin(πx) → f(t) = P(u₀) + t^η/η·P(sin πx)"""
    problem = build_problem({'problem.u0': 'zero', 'problem.g': 'power-sine', 'problem.g_eta': 1.5})
    scheme = build_scheme({'scheme.N': 32, 'scheme.n_x': 16})
    mesh = time_mesh(problem, scheme)
    space = SpaceMesh(scheme.n_x)
    f = f_rhs(problem, mesh, space)
    expected = np.outer(mesh.nodes ** 1.5 / 1.5, l2_projection(space, _sine))
    assert np.allclose(f.values, expected, rtol=1e-10, atol=1e-14)


def test_f_rhs_with_singular_source():
    """没有解析 I¹g 且 g 在 0 处奇异时走中点规则"""
    problem = build_problem({'problem.u0': 'zero'})
    source = SourceTerm(
        SpaceTimeFunction('t^-1/2 sin(pi x)', lambda x, t: np.power(t, -0.5) * np.sin(np.pi * x)),
        M=1.0,
        eta=0.5,
    )
    problem = dataclasses.replace(problem, source=source)
    scheme = build_scheme({'scheme.N': 256, 'scheme.n_x': 16})
    mesh = time_mesh(problem, scheme)
    space = SpaceMesh(scheme.n_x)
    f = f_rhs(problem, mesh, space)
    expected = 2.0 * l2_projection(space, _sine)
    assert np.allclose(f.values[-1], expected, rtol=1e-3)


def test_spectral_initial_state_is_projection():
    problem = build_problem({'problem.u0': 'indicator-one'})
    scheme = build_scheme({'scheme.N': 16, 'scheme.n_x': 32})
    trajectory = solve_spectral_const(problem, scheme)
    projected = l2_projection(SpaceMesh(32), problem.u0)
    assert np.allclose(trajectory.states[0], projected, atol=1e-10)
    assert all(value == 0.0 for value in trajectory.memory_at_origin.values())


def test_spectral_first_mode_decay():
    """u₀ = sin(πx)：u(0.5, 0.01) ≈ E_{1/2}(-π²·0.1) ≈ 0.4312"""
    print("🧪 测试特征展开参考解 ...")
    problem = build_problem({'problem.alpha': 0.5, 'problem.u0': 'sine-k'})
    scheme = build_scheme({'scheme.N': 100, 'scheme.gamma': 1.0, 'scheme.n_x': 64})
    trajectory = solve_spectral_const(problem, scheme)
    assert trajectory.times[1] == pytest.approx(0.01)
    midpoint = trajectory.states[1][31]
    expected = mittag_leffler(0.5, 1.0, -np.pi ** 2 * 0.1)
    print(f"   u(0.5, 0.01) = {midpoint:.5f}，期望 {expected:.5f}")
    assert midpoint == pytest.approx(expected, abs=2e-3)
    assert midpoint == pytest.approx(0.4312, abs=2e-3)


def test_spectral_rejects_lower_order_terms():
    problem = build_problem({'problem.a': 'one'})
    with pytest.raises(LabError) as excinfo:
        solve_spectral_const(problem, build_scheme({'scheme.N': 8, 'scheme.n_x': 8}))
    assert excinfo.value.error_code == ErrorCodes.HYPOTHESIS_VIOLATION


def test_weak_solver_matches_spectral_reference():
    """常系数齐次问题上时间积分弱解与特征展开解一致"""
    print("🧪 测试弱解与特征展开解 ...")
    problem = build_problem({'problem.alpha': 0.5})
    scheme = build_scheme({'scheme.N': 128, 'scheme.n_x': 32})
    weak = solve_weak(problem, scheme)
    reference = solve_spectral_const(problem, scheme)
    gap = float(np.max(l2_norm(weak.space, weak.states - reference.states)))
    print(f"   max‖u_weak - u_ref‖ = {gap:.3e}")
    assert gap <= 1e-2


@pytest.mark.slow
def test_weak_solver_accuracy_on_fine_mesh():
    problem = build_problem({'problem.alpha': 0.5})
    scheme = build_scheme({'scheme.N': 1024, 'scheme.n_x': 64})
    weak = solve_weak(problem, scheme)
    reference = solve_spectral_const(problem, scheme)
    assert float(np.max(l2_norm(weak.space, weak.states - reference.states))) <= 1e-3


def test_analytic_and_numerical_time_derivatives_agree():
    problem = build_problem({'problem.alpha': 0.5})
    trajectory = solve_spectral_const(problem, build_scheme({'scheme.N': 256, 'scheme.n_x': 16}))
    window = trajectory.times >= 0.1

    analytic = time_derivative(trajectory, 1, analytic=True)
    numeric = time_derivative(trajectory, 1)
    assert analytic.undefined_at_origin
    scale = np.max(np.abs(analytic.values[window]))
    assert np.max(np.abs(analytic.values[window] - numeric.values[window])) <= 1e-2 * scale


def test_analytic_and_numerical_fractional_derivatives_agree():
    problem = build_problem({'problem.alpha': 0.5})
    trajectory = solve_spectral_const(problem, build_scheme({'scheme.N': 256, 'scheme.n_x': 16}))
    window = trajectory.times >= 0.1

    analytic = frac_time_derivative(trajectory, 1, analytic=True, subtract_initial=True)
    numeric = frac_time_derivative(trajectory, 1, subtract_initial=True)
    scale = np.max(np.abs(analytic.values[window]))
    assert np.max(np.abs(analytic.values[window] - numeric.values[window])) <= 2e-2 * scale


def test_derivative_requires_resolution_and_spectral_payload():
    problem = build_problem({'problem.u0': 'zero'})
    trajectory = solve_weak(problem, build_scheme({'scheme.N': 12, 'scheme.n_x': 8}))
    with pytest.raises(LabError) as excinfo:
        time_derivative(trajectory, 2)
    assert excinfo.value.error_code == ErrorCodes.INSUFFICIENT_SMOOTHNESS

    with pytest.raises(LabError) as excinfo:
        time_derivative(trajectory, 1, analytic=True)
    assert excinfo.value.error_code == ErrorCodes.HYPOTHESIS_VIOLATION

    assert time_derivative(trajectory, 0).values.shape == trajectory.states.shape


def test_variable_coefficients_stay_finite():
    problem = build_problem({
        'problem.kappa': '1+x^2/2', 'problem.F': 'sin(pi x)*(1+t)', 'problem.G': 'one', 'problem.b': 'one',
        'problem.g': 'const',
    })
    trajectory = solve_weak(problem, build_scheme({'scheme.N': 32, 'scheme.n_x': 16}))
    assert trajectory.is_finite()


@pytest.mark.slow
def test_near_heat_limit():
    """α=0.999 的弱解接近经典热方程的后向 Euler 解"""
    problem = build_problem({'problem.alpha': 0.999})
    scheme = build_scheme({'scheme.N': 256, 'scheme.gamma': 1.0, 'scheme.n_x': 32})
    weak = solve_weak(problem, scheme)
    heat = solve_heat_reference(problem, scheme)
    assert heat.provenance['method'] == 'heat-backward-euler'
    assert float(np.max(l2_norm(weak.space, weak.states - heat.states))) <= 2e-2


def main():
    """运行求解器测试"""
    print("🚀 开始测试求解器")
    print("=" * 50)
    test_zero_data_gives_zero_solution()
    test_spectral_first_mode_decay()
    test_weak_solver_matches_spectral_reference()
    print("\n✅ 测试完成")


if __name__ == '__main__':
    main()
