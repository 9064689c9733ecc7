import csv
import json
import os

import click

from app.commands.runner import load_run_config
from app.utils.app_logger import debug_log
from app.utils.report_helpers import ErrorCodes, LabError, create_error_report, create_success_report


def read_manifest(out_dir: str) -> dict:
    path = os.path.join(out_dir, 'manifest.json')
    try:
        with open(path, encoding='utf-8') as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise LabError(ErrorCodes.IO_ERROR, f'输出目录中没有运行清单: {path}')
    except (OSError, json.JSONDecodeError) as e:
        raise LabError(ErrorCodes.IO_ERROR, f'无法读取运行清单 {path}: {e}')


def summarize_csv(path: str) -> dict:
    """统计一个结果表的行数与 pass=false 的行"""
    try:
        with open(path, newline='', encoding='utf-8') as handle:
            rows = list(csv.DictReader(handle))
    except OSError as e:
        raise LabError(ErrorCodes.IO_ERROR, f'无法读取 {path}: {e}')

    failed = [row for row in rows if row.get('pass') == 'false']
    key = next((k for k in ('experiment_id', 'check_id', 'identity_id') if rows and k in rows[0]), None)
    return {
        'rows': len(rows),
        'failed': len(failed),
        'failed_ids': sorted({row[key] for row in failed}) if key else [],
        'hashes': sorted({row.get('config_hash', '') for row in rows}),
    }


def summarize_directory(out_dir: str) -> dict:
    manifest = read_manifest(out_dir)
    tables = {}
    for name in manifest.get('files', []):
        tables[name] = summarize_csv(os.path.join(out_dir, name))
    recorded = manifest.get('summary', {})
    return {
        'command': manifest.get('command'),
        'config_hash': manifest.get('config_hash'),
        'tables': tables,
        'failed': int(recorded.get('failed', 0)) + sum(t['failed'] for t in tables.values()),
    }


@click.command('report')
@click.pass_context
def report_command(ctx):
    """汇总 --out 目录中已有的运行结果；存在失败检查时退出码为 1"""
    try:
        run = load_run_config(ctx, 'report')
        summary = summarize_directory(run.out_dir)
    except LabError as e:
        report = create_error_report(e.error_code, e.details, 'report')
        if e.exit_code == 2:
            click.echo(ctx.get_usage(), err=True)
        click.echo(f"Error: {report['error_code']}: {report['details']}", err=True)
        ctx.exit(report['exit_code'])
        return

    click.echo(f"{summary['command']} (config {summary['config_hash']})")
    for name, table in sorted(summary['tables'].items()):
        click.echo(f"  {name}: {table['rows']} rows, {table['failed']} failed")
        for failed_id in table['failed_ids'][:20]:
            click.echo(f"    ✗ {failed_id}")
        if any(h != summary['config_hash'] for h in table['hashes']):
            debug_log.warning(f"⚠️ {name} 含有其他配置的行", {'hashes': table['hashes']})

    if summary['failed']:
        ctx.exit(1)
        return
    create_success_report({'tables': len(summary['tables'])}, '全部检查通过', 'report')
    ctx.exit(0)
