import json

import click

from app.commands.runner import CommandResult, execute
from app.services.catalog import build_problem, build_scheme
from app.services.suites import (
    INEQUALITY_CHECKS, RATIO_CHECKS, gronwall_suite, inequality_suite, positivity_suite, ratio_suite, summarize
)
from app.utils.report_helpers import ErrorCodes, LabError

INEQUALITY_HEADER = ('check_id', 'params_json', 'lhs', 'rhs', 'margin', 'pass')

# 比值检查只在显式选择时运行
DEFAULT_CHECKS = ('positivity',) + INEQUALITY_CHECKS + ('2.5',)
ALL_CHECKS = DEFAULT_CHECKS + RATIO_CHECKS


def _json_value(value):
    if hasattr(value, 'item'):
        return value.item()
    return str(value)


def inequality_rows(reports) -> list:
    """按 check_id 稳定排序；同一检查内保持生成顺序"""
    rows = []
    for report in reports:
        data = report.to_dict()
        rows.append({
            'check_id': report.check_id,
            'params_json': json.dumps(data['params'], sort_keys=True, default=_json_value),
            'lhs': data['lhs'],
            'rhs': data['rhs'],
            'margin': data['margin'],
            'pass': report.passed,
        })
    return sorted(rows, key=lambda row: row['check_id'])


def collect_reports(run, checks) -> list:
    seed = run.seed
    samples = run.get('suite.samples')
    reports = []

    if 'positivity' in checks:
        kwargs = {} if samples is None else {'n_series': samples}
        reports.extend(positivity_suite(seed, **kwargs))

    selected = tuple(c for c in checks if c in INEQUALITY_CHECKS)
    if selected:
        kwargs = {} if samples is None else {'n_inputs': samples}
        reports.extend(inequality_suite(seed, checks=selected, **kwargs))

    if '2.5' in checks:
        kwargs = {} if samples is None else {'n_premises': samples}
        reports.extend(gronwall_suite(seed, **kwargs))

    ratio = tuple(c for c in checks if c in RATIO_CHECKS)
    if ratio:
        params = run.numeric_params()
        reports.extend(ratio_suite(
            build_problem(params), build_scheme(params), ratio,
            m=int(run.get('suite.m', 1)), mu=float(run.get('suite.mu', 0.5)),
        ))
    return reports


def run_inequalities(run) -> CommandResult:
    checks = run.get('suite.checks')
    if checks is None:
        checks = DEFAULT_CHECKS
    if len(checks) == 0:
        raise LabError(ErrorCodes.EMPTY_SUITE, '没有选择任何不等式检查')
    unknown = [c for c in checks if c not in ALL_CHECKS]
    if unknown:
        raise LabError(ErrorCodes.UNKNOWN_SELECTOR, f'未知检查 {unknown}，可选 {list(ALL_CHECKS)}')
    samples = run.get('suite.samples')
    if samples is not None and samples < 1:
        raise LabError(ErrorCodes.CONFIG_PARSE_ERROR, f'samples 必须为正整数，收到 {samples}')

    reports = collect_reports(run, checks)
    summary = summarize(reports)
    checks_passed = {f'{report.check_id}#{i}': report.passed for i, report in enumerate(reports)}
    return CommandResult(
        tables=[('inequalities.csv', INEQUALITY_HEADER, inequality_rows(reports))],
        checks=checks_passed,
        message=f"{summary['total']} 项不等式检查，{summary['failed']} 项未通过",
    )


@click.command('inequalities')
@click.option('--checks', help='逗号分隔的检查 id，例如 positivity,2.2-A,2.5')
@click.option('--samples', type=int, help='每项检查的随机输入数')
@click.pass_context
def inequalities_command(ctx, checks, samples):
    """正性、不等式与 Gronwall 套件"""
    execute(ctx, 'inequalities', {
        'suite.checks': checks,
        'suite.samples': samples,
    }, run_inequalities)
