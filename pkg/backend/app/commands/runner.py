"""
命令运行框架
运行配置解析、配置哈希、CSV 与运行清单写出、并行任务调度以及统一的错误出口
"""

import csv
import hashlib
import json
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime, timezone

import click

from app.utils.app_logger import debug_log
from app.utils.config import config, read_run_config_file
from app.utils.report_helpers import (
    ErrorCodes, LabError, create_error_report, create_success_report
)


def parse_floats(text):
    return tuple(float(item) for item in str(text).split(',') if item.strip())


def parse_ints(text):
    return tuple(int(item) for item in str(text).split(',') if item.strip())


def parse_names(text):
    return tuple(item.strip() for item in str(text).split(',') if item.strip())


def parse_bool(text):
    value = str(text).strip().lower()
    if value not in ('true', 'false', '1', '0', 'yes', 'no'):
        raise ValueError(f'无法解析布尔值 {text}')
    return value in ('true', '1', 'yes')


# 已知配置键及其解析函数
CONFIG_SCHEMA = {
    'problem.alpha': float,
    'problem.T': float,
    'problem.kappa': str,
    'problem.F': str,
    'problem.G': str,
    'problem.a': str,
    'problem.b': str,
    'problem.u0': str,
    'problem.u0_k': int,
    'problem.g': str,
    'problem.g_eta': float,
    'problem.g_c': float,
    'scheme.N': int,
    'scheme.gamma': float,
    'scheme.n_x': int,
    'scheme.modes': int,
    'scheme.tol': float,
    'suite.max_m': int,
    'suite.mus': parse_floats,
    'suite.checks': parse_names,
    'suite.samples': int,
    'suite.theorems': parse_names,
    'suite.quantity': str,
    'suite.m': int,
    'suite.mu': float,
    'suite.nu': float,
    'suite.Ns': parse_ints,
    'suite.method': str,
    'suite.refine': parse_bool,
    'run.seed': int,
    'run.jobs': int,
    'run.out': str,
}

# 不影响数值结果、不参与配置哈希的键
_UNHASHED = ('run.out', 'run.jobs')


@dataclass
class RunConfig:
    """一次运行的有效配置：文件取值被命令行参数覆盖"""

    command: str
    values: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return int(self.values.get('run.seed', config.SEED))

    @property
    def jobs(self) -> int:
        return max(1, int(self.values.get('run.jobs', config.JOBS)))

    @property
    def out_dir(self) -> str:
        return self.values.get('run.out', config.OUT_DIR)

    def get(self, key, default=None):
        return self.values.get(key, default)

    def numeric_params(self) -> dict:
        """problem.* 与 scheme.* 键，供目录构造问题"""
        return {k: v for k, v in self.values.items() if k.startswith(('problem.', 'scheme.'))}

    def canonical(self) -> dict:
        data = {k: (list(v) if isinstance(v, tuple) else v)
                for k, v in sorted(self.values.items()) if k not in _UNHASHED}
        data['command'] = self.command
        return data

    @property
    def config_hash(self) -> str:
        payload = json.dumps(self.canonical(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:12]


def parse_values(raw: dict) -> dict:
    """按 CONFIG_SCHEMA 解析字符串键值；未知键或非法值抛出 CONFIG_PARSE_ERROR"""
    values = {}
    for key, text in raw.items():
        if key not in CONFIG_SCHEMA:
            debug_log.config_error(key, '未知配置项')
            raise LabError(ErrorCodes.CONFIG_PARSE_ERROR, f'未知配置项 {key}')
        try:
            values[key] = CONFIG_SCHEMA[key](text)
        except (TypeError, ValueError) as e:
            debug_log.config_error(key, str(e))
            raise LabError(ErrorCodes.CONFIG_PARSE_ERROR, f'配置项 {key}={text!r} 无法解析: {e}')
    return values


def load_run_config(ctx: click.Context, command: str, overrides: dict = None) -> RunConfig:
    """合并配置文件、全局参数与子命令参数"""
    options = ctx.obj or {}
    values = {}
    if options.get('config'):
        values.update(parse_values(read_run_config_file(options['config'])))

    for key, option in (('run.out', 'out'), ('run.seed', 'seed'), ('run.jobs', 'jobs')):
        if options.get(option) is not None:
            values[key] = options[option]

    given = {key: value for key, value in (overrides or {}).items() if value is not None}
    # 字符串参数与配置文件取值一样按 CONFIG_SCHEMA 解析
    values.update(parse_values({k: v for k, v in given.items() if isinstance(v, str)}))
    for key, value in given.items():
        if isinstance(value, str):
            continue
        if key not in CONFIG_SCHEMA:
            raise LabError(ErrorCodes.CONFIG_PARSE_ERROR, f'未知配置项 {key}')
        values[key] = value

    return RunConfig(command, values)


def _format(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ''
    return str(value)


def write_csv(out_dir: str, name: str, header, rows, config_hash: str) -> str:
    """
    写出带表头的 CSV，每行末尾追加 config_hash

    rows 为字典列表，写出顺序即调用方给定的确定性顺序。
    """
    path = os.path.join(out_dir, name)
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(list(header) + ['config_hash'])
            for row in rows:
                writer.writerow([_format(row.get(column)) for column in header] + [config_hash])
    except OSError as e:
        raise LabError(ErrorCodes.IO_ERROR, f'无法写出 {path}: {e}')
    debug_log.debug(f"📝 写出 {path}", {'rows': len(rows)})
    return path


def _utc_now() -> str:
    return datetime.now(timezone.utc).replace(tzinfo=None).isoformat() + 'Z'


def write_manifest(run: RunConfig, started_at: str, wall_clock: float, summary: dict, files) -> str:
    manifest = {
        'command': run.command,
        'config_hash': run.config_hash,
        'artifact_version': config.ARTIFACT_VERSION,
        'config': run.canonical(),
        'started_at': started_at,
        'finished_at': _utc_now(),
        'wall_clock_s': round(wall_clock, 3),
        'summary': summary,
        'files': [os.path.basename(path) for path in files],
    }
    path = os.path.join(run.out_dir, 'manifest.json')
    try:
        os.makedirs(run.out_dir, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump(manifest, handle, ensure_ascii=False, indent=2, sort_keys=True)
    except OSError as e:
        raise LabError(ErrorCodes.IO_ERROR, f'无法写出 {path}: {e}')
    return path


@dataclass
class CommandResult:
    """子命令主体的返回值：要写出的表格与逐项检查结果"""

    tables: list = field(default_factory=list)       # [(文件名, 表头, 行)]
    checks: dict = field(default_factory=dict)       # {检查 id: 是否通过}
    message: str = ''


def execute(ctx: click.Context, command: str, overrides: dict, body) -> None:
    """
    合并运行配置、执行子命令主体并统一处理输出与退出码

    退出码：全部检查通过为 0，有检查失败为 1，配置错误为 2，文件读写错误为 3。
    """
    started_at = _utc_now()
    start = time.perf_counter()

    try:
        run = load_run_config(ctx, command, overrides)
        debug_log.suite_start(command, {'config_hash': run.config_hash, 'seed': run.seed})
        result = body(run)
        files = [write_csv(run.out_dir, name, header, rows, run.config_hash)
                 for name, header, rows in result.tables]

        failed = sorted(check_id for check_id, passed in result.checks.items() if not passed)
        summary = {'total': len(result.checks), 'failed': len(failed), 'failed_checks': failed[:50]}
        write_manifest(run, started_at, time.perf_counter() - start, summary, files)
    except LabError as e:
        report = create_error_report(e.error_code, e.details, command)
        if e.exit_code == 2:
            click.echo(ctx.get_usage(), err=True)
        click.echo(f"Error: {report['error_code']}: {report['details']}", err=True)
        ctx.exit(report['exit_code'])
        return
    except OSError as e:
        report = create_error_report(ErrorCodes.IO_ERROR, str(e), command)
        click.echo(f"Error: {report['details']}", err=True)
        ctx.exit(report['exit_code'])
        return
    except Exception as e:
        debug_log.error("❌ 错误堆栈", {'traceback': traceback.format_exc()})
        report = create_error_report(ErrorCodes.UNKNOWN_ERROR, f'{type(e).__name__}: {e}', command)
        click.echo(f"Error: {report['details']}", err=True)
        ctx.exit(report['exit_code'])
        return

    if failed:
        for check_id in failed[:20]:
            debug_log.check_failed(check_id)
        click.echo(f"{run.command}: {len(failed)}/{len(result.checks)} checks failed (config {run.config_hash})")
        ctx.exit(1)
        return

    create_success_report({'checks': len(result.checks)}, result.message, run.command)
    click.echo(f"{run.command}: {len(result.checks)} checks passed (config {run.config_hash})")
    ctx.exit(0)


def run_jobs(worker, jobs, n_workers: int) -> list:
    """
    并行执行相互独立的任务，结果按任务 id 排序返回

    任务是只含基本类型的字典（可被子进程序列化）；n_workers=1 时在本进程内顺序执行。
    """
    jobs = sorted(jobs, key=lambda job: job['id'])
    if n_workers <= 1 or len(jobs) <= 1:
        return [(job['id'], worker(job)) for job in jobs]

    results = {}
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        futures = {pool.submit(worker, job): job['id'] for job in jobs}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
    return [(job_id, results[job_id]) for job_id in sorted(results)]
