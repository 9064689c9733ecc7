#!/usr/bin/env python3
"""
测试指数拟合、预测表与正则性指数验证
"""

import numpy as np
import pytest

from app.services.catalog import build_problem, build_scheme
from app.services.regverify import (
    PREDICTIONS, convergence_study, estimate_exponent, predict, quantity_series, stability_trend, verify_rate,
    verify_u_continuity
)
from app.services.solver import solve_spectral_const
from app.utils.config import config
from app.utils.report_helpers import ErrorCodes, LabError


def test_estimate_exponent_of_power_law():
    """3t^{-1/2} → 指数 -0.5"""
    print("🧪 测试对数回归 ...")
    t = np.geomspace(1e-4, 1e-1, 40)
    estimate = estimate_exponent(np.column_stack([t, 3.0 * t ** -0.5]))
    assert estimate.exponent == pytest.approx(-0.5, abs=1e-10)
    assert estimate.samples == 40
    print(f"   ✅ 斜率 {estimate.exponent:.6f}")


def test_estimate_exponent_with_noise():
    rng = np.random.default_rng(7)
    t = np.geomspace(1e-3, 1.0, 200)
    values = t ** 0.3 * np.exp(0.01 * rng.standard_normal(t.size))
    estimate = estimate_exponent(np.column_stack([t, values]))
    assert estimate.exponent == pytest.approx(0.3, abs=0.02)
    assert estimate.stderr > 0


def test_estimate_exponent_of_constant():
    t = np.linspace(0.1, 1.0, 20)
    assert estimate_exponent(np.column_stack([t, np.full_like(t, 2.0)])).exponent == pytest.approx(0.0, abs=1e-12)


def test_estimate_exponent_window():
    t = np.geomspace(1e-4, 1.0, 80)
    values = np.where(t < 1e-2, t ** -1.0, 100.0 * t ** -2.0 * 1e-2)
    estimate = estimate_exponent(np.column_stack([t, values]), window=(1e-4, 9e-3))
    assert estimate.exponent == pytest.approx(-1.0, abs=1e-10)
    assert estimate.window == (1e-4, 9e-3)


@pytest.mark.parametrize('samples, window', [
    (np.column_stack([np.linspace(0.1, 1, 5), np.ones(5)]), None),
    (np.column_stack([np.linspace(0.1, 1, 20), -np.ones(20)]), None),
    (np.column_stack([np.linspace(0.1, 1, 20), np.ones(20)]), (0.5, 0.5)),
    (np.ones(10), None),
])
def test_estimate_exponent_failures(samples, window):
    with pytest.raises(LabError) as excinfo:
        estimate_exponent(samples, window)
    assert excinfo.value.error_code == ErrorCodes.FIT_FAILURE


def test_prediction_table():
    """α=0.5、μ=2、m=1：u' ~ t^{-1/2}；Ḣ² 端点：-m-α"""
    assert set(PREDICTIONS) == {'cor3.4', 'thm4.1', 'thm4.2', 'thm4.3'}
    assert predict('thm4.2', 'deriv', 1, 0.5, mu=2.0).exponent == pytest.approx(-0.5)
    assert predict('thm4.2', 'continuity', 0, 0.5, mu=1.0).exponent == pytest.approx(0.25)
    assert predict('cor3.4', 'frac_deriv', 2, 0.4).exponent == pytest.approx(-1.6)
    assert predict('cor3.4', 'deriv', 1, 0.4).check == 'bound'
    assert predict('thm4.1', 'hmu_deriv', 1, 0.5, mu=0.0, nu=2.0).exponent == pytest.approx(-1.5)
    assert predict('thm4.3', 'hmu_deriv', 0, 0.5, mu=2.0, nu=2.0).exponent == pytest.approx(0.0)


def test_prediction_rejects_unknown():
    for theorem, quantity in (('thm9.9', 'deriv'), ('thm4.1', 'continuity')):
        with pytest.raises(LabError) as excinfo:
            predict(theorem, quantity, 1, 0.5)
        assert excinfo.value.error_code == ErrorCodes.UNKNOWN_SELECTOR


def test_quantity_series_marks_origin():
    problem = build_problem({'problem.alpha': 0.5})
    trajectory = solve_spectral_const(problem, build_scheme({'scheme.N': 32, 'scheme.n_x': 16}))
    values = quantity_series(trajectory, 'deriv', 1)
    assert np.isnan(values[0])
    assert np.all(values[1:] > 0)
    with pytest.raises(LabError):
        quantity_series(trajectory, 'energy', 1)


def test_verify_rate_smooth_derivative():
    """sin(πx) 初值、α=0.5、m=1 的导数指数 ≈ -0.5"""
    print("🧪 测试正则性指数验证 ...")
    problem = build_problem({'problem.alpha': 0.5, 'problem.u0': 'sine-k'})
    scheme = build_scheme({'scheme.N': 256, 'scheme.n_x': 32})
    report = verify_rate('thm4.2', problem, 1, 2.0, scheme, refine=False)
    print(f"   预测 {report.predicted:.4f} 实测 {report.measured:.4f}")
    assert report.tol == config.TOL_RATE_SPECTRAL
    assert report.passed
    assert 'oracle=spectral' in report.notes


def test_verify_rate_fractional_derivative():
    problem = build_problem({'problem.alpha': 0.5, 'problem.u0': 'sine-k'})
    scheme = build_scheme({'scheme.N': 256, 'scheme.n_x': 32})
    report = verify_rate('cor3.4', problem, 1, 2.0, scheme, quantity='frac_deriv', refine=False)
    assert report.predicted == pytest.approx(-0.5)
    assert report.passed


def test_verify_continuity():
    """‖u(t) - u₀‖ ~ t^{αμ/2}"""
    problem = build_problem({'problem.alpha': 0.5, 'problem.u0': 'sine-k'})
    scheme = build_scheme({'scheme.N': 256, 'scheme.n_x': 32})
    report = verify_u_continuity(problem, 2.0, scheme, refine=False)
    assert report.quantity == 'continuity'
    assert report.predicted == pytest.approx(0.5)
    assert report.passed


def test_verify_rate_rejects_excess_regularity():
    problem = build_problem({'problem.u0': 'indicator-one'})
    with pytest.raises(LabError) as excinfo:
        verify_rate('thm4.2', problem, 1, 2.0, build_scheme({}), refine=False)
    assert excinfo.value.error_code == ErrorCodes.HYPOTHESIS_VIOLATION


def test_zero_solution_passes_trivially():
    problem = build_problem({'problem.u0': 'zero'})
    report = verify_rate('thm4.2', problem, 1, 2.0, build_scheme({}), refine=False)
    assert report.passed
    assert 'zero solution' in report.notes


def test_report_row_schema():
    problem = build_problem({'problem.u0': 'zero'})
    row = verify_rate('cor3.4', problem, 1, 0.0, build_scheme({}), refine=False).to_row('abc123')
    assert list(row) == [
        'experiment_id', 'theorem', 'alpha', 'mu', 'm', 'predicted', 'measured', 'stderr',
        'window_lo', 'window_hi', 'pass', 'config_hash',
    ]
    assert row['config_hash'] == 'abc123'


@pytest.mark.slow
def test_verify_rate_mesh_independent():
    problem = build_problem({'problem.alpha': 0.5, 'problem.u0': 'sine-k'})
    report = verify_rate('thm4.2', problem, 1, 2.0, build_scheme({'scheme.N': 256, 'scheme.n_x': 32}))
    assert report.refined_exponent is not None
    assert report.mesh_independent and report.passed


def test_stability_trend_rows():
    problem = build_problem({'problem.alpha': 0.5})
    schemes = [build_scheme({'scheme.N': N, 'scheme.n_x': 16}) for N in (16, 32)]
    trend = stability_trend(problem, schemes)
    assert [row['N'] for row in trend['rows']] == [16, 32]
    assert trend['bounded']
    assert all(row['l2'] <= 1.05 for row in trend['rows'])


@pytest.mark.slow
def test_convergence_study_orders():
    problem = build_problem({'problem.alpha': 0.5})
    schemes = [build_scheme({'scheme.N': N, 'scheme.n_x': 32}) for N in (128, 256, 512)]
    rows = convergence_study(problem, schemes)
    assert rows[0]['order'] is None
    assert rows[-1]['error'] < rows[0]['error']
    assert all(row['order'] > 0.5 for row in rows[1:])


def main():
    """运行正则性验证测试"""
    print("🚀 开始测试正则性指数验证")
    print("=" * 50)
    test_estimate_exponent_of_power_law()
    test_prediction_table()
    test_verify_rate_smooth_derivative()
    print("\n✅ 测试完成")


if __name__ == '__main__':
    main()
