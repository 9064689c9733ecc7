import math
from dataclasses import replace

import click

from app.commands.runner import CommandResult, execute
from app.services.catalog import build_problem, build_scheme
from app.services.regverify import convergence_study, stability_trend
from app.utils.report_helpers import ErrorCodes, LabError
from app.utils.validators import validate_step_count

CONVERGENCE_HEADER = ('N', 'n_x', 'gamma', 'error', 'order')
STABILITY_HEADER = ('N', 'n_x', 'l2', 'grad')

DEFAULT_NS = (128, 256, 512, 1024)
ERROR_TOLERANCE = 1e-3
MIN_ORDER = 1.0


def overall_order(rows) -> float:
    first, last = rows[0], rows[-1]
    if len(rows) < 2 or first['error'] <= 0 or last['error'] <= 0:
        return math.nan
    return math.log(first['error'] / last['error']) / math.log(last['N'] / first['N'])


def run_convergence(run) -> CommandResult:
    Ns = run.get('suite.Ns', DEFAULT_NS)
    if len(Ns) == 0:
        raise LabError(ErrorCodes.EMPTY_SUITE, '没有选择任何时间步数')
    if not all(validate_step_count(N) for N in Ns):
        raise LabError(ErrorCodes.CONFIG_PARSE_ERROR, f'非法的时间步数 {list(Ns)}')

    params = dict(run.numeric_params())
    params.setdefault('scheme.n_x', 256)
    params.setdefault('scheme.gamma', 3.0)
    problem = build_problem(params)
    base = build_scheme(params)
    schemes = [replace(base, N=N) for N in sorted(Ns)]

    rows = convergence_study(problem, schemes)
    order = overall_order(rows)
    stability = stability_trend(problem, schemes)

    checks = {
        'convergence/error': math.isfinite(rows[-1]['error']) and rows[-1]['error'] <= ERROR_TOLERANCE,
        'stability/bounded': stability['bounded'],
        'stability/non_increasing': stability['non_increasing'],
    }
    if len(rows) > 1:
        checks['convergence/order'] = math.isfinite(order) and order >= MIN_ORDER
    return CommandResult(
        tables=[('convergence.csv', CONVERGENCE_HEADER, rows),
                ('stability.csv', STABILITY_HEADER, stability['rows'])],
        checks=checks,
        message=f'最细网格误差 {rows[-1]["error"]:.3e}，观测阶 {order:.3f}',
    )


@click.command('convergence')
@click.option('--Ns', 'ns', help='逗号分隔的时间步数，例如 128,256,512,1024')
@click.option('--alpha', type=float, help='分数阶 α')
@click.option('--gamma', type=float, help='网格分级指数')
@click.option('--n-x', type=int, help='空间单元数')
@click.pass_context
def convergence_command(ctx, ns, alpha, gamma, n_x):
    """弱求解器对特征展开的收敛研究与稳定性比值"""
    execute(ctx, 'convergence', {
        'suite.Ns': ns,
        'problem.alpha': alpha,
        'scheme.gamma': gamma,
        'scheme.n_x': n_x,
    }, run_convergence)
