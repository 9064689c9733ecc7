import click

from app.commands.runner import CommandResult, execute
from app.services.catalog import build_problem, build_scheme
from app.services.solver import solve_heat_reference, solve_spectral_const, solve_weak
from app.utils.report_helpers import ErrorCodes, LabError

TRAJECTORY_HEADER = ('t', 'dof_index', 'value')

SOLVERS = {
    'weak': solve_weak,
    'spectral': solve_spectral_const,
    'heat': solve_heat_reference,
}


def trajectory_rows(trajectory) -> list:
    rows = []
    for t, state in zip(trajectory.mesh.nodes, trajectory.states):
        rows.extend({'t': float(t), 'dof_index': i, 'value': float(v)} for i, v in enumerate(state))
    return rows


def run_solve(run) -> CommandResult:
    method = run.get('suite.method', 'weak')
    if method not in SOLVERS:
        raise LabError(ErrorCodes.UNKNOWN_SELECTOR, f'未知求解方法 {method}，可选 {list(SOLVERS)}')

    params = run.numeric_params()
    trajectory = SOLVERS[method](build_problem(params), build_scheme(params))

    checks = {f'memory_at_origin/{name}': value == 0.0
              for name, value in sorted(trajectory.memory_at_origin.items())}
    checks['finite_states'] = bool(trajectory.is_finite())
    return CommandResult(
        tables=[('trajectory.csv', TRAJECTORY_HEADER, trajectory_rows(trajectory))],
        checks=checks,
        message=f'{method} 轨迹 N={trajectory.mesh.N} n_x={trajectory.space.n_x}',
    )


@click.command('solve')
@click.option('--method', type=click.Choice(sorted(SOLVERS)), help='求解方法')
@click.option('--alpha', type=float, help='分数阶 α')
@click.option('--N', 'n_steps', type=int, help='时间步数')
@click.option('--n-x', type=int, help='空间单元数')
@click.pass_context
def solve_command(ctx, method, alpha, n_steps, n_x):
    """求解一个问题并写出 trajectory.csv"""
    execute(ctx, 'solve', {
        'suite.method': method,
        'problem.alpha': alpha,
        'scheme.N': n_steps,
        'scheme.n_x': n_x,
    }, run_solve)
