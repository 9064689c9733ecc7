import math

import numpy as np


def validate_finite(*values) -> bool:
    """验证所有输入均为有限数"""
    try:
        return all(bool(np.all(np.isfinite(np.asarray(v, dtype=float)))) for v in values)
    except (TypeError, ValueError):
        return False


def validate_order(mu, low: float = 0.0, high: float = None,
                   include_low: bool = True, include_high: bool = True) -> bool:
    """验证阶数（分数阶积分/导数的阶、范数阶）是否落在区间内"""
    if not validate_finite(mu):
        return False
    mu = float(mu)

    if include_low and mu < low:
        return False
    if not include_low and mu <= low:
        return False

    if high is not None:
        if include_high and mu > high:
            return False
        if not include_high and mu >= high:
            return False

    return True


def validate_positive_time(t) -> bool:
    """验证时间为正且有限"""
    if not validate_finite(t):
        return False
    return bool(np.all(np.asarray(t, dtype=float) > 0))


def validate_grading(gamma) -> bool:
    """验证网格加密指数 γ ≥ 1"""
    return validate_finite(gamma) and float(gamma) >= 1.0


def validate_step_count(n, minimum: int = 1) -> bool:
    """验证步数为不小于 minimum 的整数"""
    if isinstance(n, bool):
        return False
    if isinstance(n, (int, np.integer)):
        return int(n) >= minimum
    if isinstance(n, float) and n.is_integer():
        return int(n) >= minimum
    return False


def validate_selector(name: str, catalog) -> bool:
    """验证选择器名称存在于内置目录中"""
    if not name or not isinstance(name, str):
        return False
    return name in catalog


def validate_window(window) -> bool:
    """验证拟合窗口 (t_lo, t_hi) 满足 0 < t_lo < t_hi"""
    try:
        t_lo, t_hi = window
    except (TypeError, ValueError):
        return False

    if not validate_finite(t_lo, t_hi):
        return False

    return 0 < float(t_lo) < float(t_hi) and not math.isclose(float(t_lo), float(t_hi))
