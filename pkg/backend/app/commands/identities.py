import click

from app.commands.runner import CommandResult, execute
from app.services.identities import diff_mult_coeffs, frac_mult_coeffs, identity_suite, to_rational
from app.utils.report_helpers import ErrorCodes, LabError

IDENTITY_HEADER = ('identity_id', 'm', 'q_or_mu', 'residual', 'pass')
TABLE_HEADER = ('kind', 'm', 'second', 'j', 'coefficient')


def coefficient_rows(max_m: int) -> list:
    """a、b 表（整数系数）与 c、d 表（关于 μ 的多项式）"""
    rows = []
    for m in range(max_m + 1):
        for q in range(m + 1):
            for table in diff_mult_coeffs(m, q):
                rows.extend({'kind': table.kind, 'm': m, 'second': q, 'j': j, 'coefficient': str(c)}
                            for j, c in enumerate(table.coeffs))
        for table in frac_mult_coeffs(m):
            rows.extend({'kind': table.kind, 'm': m, 'second': 'mu', 'j': j, 'coefficient': str(c)}
                        for j, c in enumerate(table.coeffs))
    return sorted(rows, key=lambda r: (r['kind'], r['m'], str(r['second']), r['j']))


def run_identities(run) -> CommandResult:
    max_m = int(run.get('suite.max_m', 6))
    mus = run.get('suite.mus')
    if mus is not None and len(mus) == 0:
        raise LabError(ErrorCodes.EMPTY_SUITE, '没有选择任何 μ')
    if max_m < 0:
        raise LabError(ErrorCodes.CONFIG_PARSE_ERROR, f'max_m 必须非负，收到 {max_m}')

    kwargs = {} if mus is None else {'mus': tuple(to_rational(mu) for mu in mus)}
    records = identity_suite(max_m, **kwargs)

    rows = [{'identity_id': r.identity_id, 'm': r.m, 'q_or_mu': r.q_or_mu,
             'residual': float(r.residual), 'pass': r.passed} for r in records]
    checks = {f'{r.identity_id}/m={r.m}/{r.q_or_mu}': r.passed for r in records}
    return CommandResult(
        tables=[('identities.csv', IDENTITY_HEADER, rows),
                ('coefficients.csv', TABLE_HEADER, coefficient_rows(max_m))],
        checks=checks,
        message=f'{len(records)} 个恒等式残差已写出',
    )


@click.command('identities')
@click.option('--max-m', type=int, help='最大乘子次数 m')
@click.option('--mus', help='逗号分隔的分数阶 μ 列表')
@click.pass_context
def identities_command(ctx, max_m, mus):
    """交换子系数表与恒等式残差"""
    execute(ctx, 'identities', {
        'suite.max_m': max_m,
        'suite.mus': mus,
    }, run_identities)
