import click

from app.commands.runner import CommandResult, execute, run_jobs
from app.services.catalog import build_problem, build_scheme
from app.services.regverify import DEFAULT_QUANTITY, PREDICTIONS, QUANTITIES, verify_rate, verify_u_continuity
from app.utils.report_helpers import ErrorCodes, LabError

RATES_HEADER = ('experiment_id', 'theorem', 'alpha', 'mu', 'm', 'predicted', 'measured', 'stderr',
                'window_lo', 'window_hi', 'pass')

_SMOOTH = {'problem.alpha': 0.5, 'problem.u0': 'sine-k', 'problem.u0_k': 1}
_ROUGH = {'problem.alpha': 0.5, 'problem.u0': 'indicator-one'}
_PERTURBED = dict(_SMOOTH, **{'problem.F': 'sin(pi x)*(1+t)', 'problem.a': 'one'})

# 缺省实验集：(标签, 问题参数, 定理, 被测量, m, μ, ν)
ACCEPTANCE_EXPERIMENTS = (
    ('smooth-deriv', _SMOOTH, 'thm4.2', 'deriv', 1, 2.0, 2.0),
    ('smooth-frac-deriv', _SMOOTH, 'cor3.4', 'frac_deriv', 1, 2.0, 2.0),
    ('smooth-continuity', _SMOOTH, 'thm4.2', 'continuity', 0, 2.0, 2.0),
    ('smooth-frac-deriv-w', _SMOOTH, 'thm4.2', 'frac_deriv_w', 1, 2.0, 2.0),
    ('rough-h2', _ROUGH, 'thm4.1', 'hmu_deriv', 0, 0.5, 2.0),
    ('rough-deriv', _ROUGH, 'thm4.2', 'deriv', 1, 0.5, 2.0),
    ('perturbed-deriv', _PERTURBED, 'thm4.2', 'deriv', 1, 2.0, 2.0),
)


def rate_worker(job: dict):
    """子进程入口：job 只含基本类型"""
    params = dict(job['params'])
    problem = build_problem(params)
    scheme = build_scheme(params)
    mu = job['mu'] if job['mu'] is not None else problem.u0.regularity_mu
    if job['quantity'] == 'continuity':
        report = verify_u_continuity(problem, mu, scheme, refine=job['refine'])
        if job.get('label'):
            report.experiment_id = job['id']
        return report
    return verify_rate(
        job['theorem'], problem, job['m'], mu, scheme,
        quantity=job['quantity'], nu=job['nu'], refine=job['refine'],
        experiment_id=job['id'] if job.get('label') else None,
    )


def acceptance_jobs(base: dict, refine: bool) -> list:
    jobs = []
    for label, problem_params, theorem, quantity, m, mu, nu in ACCEPTANCE_EXPERIMENTS:
        params = dict(base)
        params.update(problem_params)
        jobs.append({'id': label, 'label': True, 'params': params, 'theorem': theorem,
                     'quantity': quantity, 'm': m, 'mu': mu, 'nu': nu, 'refine': refine})
    return jobs


def selected_jobs(run, theorems, refine: bool) -> list:
    base = run.numeric_params()
    m = int(run.get('suite.m', 1))
    mu = run.get('suite.mu')
    nu = float(run.get('suite.nu', 2.0))
    quantity = run.get('suite.quantity')

    jobs = []
    for theorem in theorems:
        if theorem not in PREDICTIONS:
            raise LabError(ErrorCodes.UNKNOWN_SELECTOR, f'未知定理 {theorem}，可选 {sorted(PREDICTIONS)}')
        q = quantity or DEFAULT_QUANTITY[theorem]
        if q not in QUANTITIES:
            raise LabError(ErrorCodes.UNKNOWN_SELECTOR, f'未知量 {q}，可选 {list(QUANTITIES)}')
        jobs.append({'id': f'{theorem}-{q}-m{m}', 'label': False, 'params': base, 'theorem': theorem,
                     'quantity': q, 'm': m, 'mu': mu, 'nu': nu, 'refine': refine})
    return jobs


def run_rates(run) -> CommandResult:
    refine = run.get('suite.refine', True)
    theorems = run.get('suite.theorems')
    if theorems is None:
        jobs = acceptance_jobs(run.numeric_params(), refine)
    elif len(theorems) == 0:
        raise LabError(ErrorCodes.EMPTY_SUITE, '没有选择任何定理')
    else:
        jobs = selected_jobs(run, theorems, refine)

    reports = [report for _, report in run_jobs(rate_worker, jobs, run.jobs)]
    rows = [report.to_row() for report in reports]
    return CommandResult(
        tables=[('rates.csv', RATES_HEADER, rows)],
        checks={report.experiment_id: report.passed for report in reports},
        message=f'{len(reports)} 个指数实验',
    )


@click.command('rates')
@click.option('--theorem', help='逗号分隔的定理编号；缺省运行内置实验集')
@click.option('--alpha', type=float, help='分数阶 α')
@click.option('--m', type=int, help='导数阶')
@click.option('--mu', type=float, help='初值正则性 μ')
@click.option('--nu', type=float, help='Ḣ^ν 范数的阶')
@click.option('--quantity', help=f'被测量，可选 {", ".join(QUANTITIES)}')
@click.option('--refine/--no-refine', default=None, help='是否在加密网格上复核指数')
@click.pass_context
def rates_command(ctx, theorem, alpha, m, mu, nu, quantity, refine):
    """初始层指数的测量与比较"""
    execute(ctx, 'rates', {
        'suite.theorems': theorem,
        'problem.alpha': alpha,
        'suite.m': m,
        'suite.mu': mu,
        'suite.nu': nu,
        'suite.quantity': quantity,
        'suite.refine': refine,
    }, run_rates)
