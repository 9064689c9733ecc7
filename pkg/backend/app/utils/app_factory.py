"""
统一的命令行应用配置模块
提供标准化的应用创建、全局参数与日志配置
"""

import logging

import click

from app.commands import COMMANDS
from app.utils.app_logger import debug_log
from app.utils.config import config


def configure_logging():
    """配置统一的日志级别"""
    # 控制其他库的日志级别
    logging.getLogger('sympy').setLevel(logging.WARNING)
    logging.getLogger('concurrent.futures').setLevel(logging.WARNING)


def create_base_app() -> click.Group:
    """创建基础命令组"""
    configure_logging()
    debug_log.debug("🚀 开始创建命令行应用")

    @click.group('fraclab', invoke_without_command=True)
    @click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='运行配置文件（key=value）')
    @click.option('--out', help=f'输出目录，缺省 {config.OUT_DIR}')
    @click.option('--seed', type=click.IntRange(min=0), help='随机种子')
    @click.option('--jobs', type=click.IntRange(min=1), help='并行进程数')
    @click.pass_context
    def fraclab(ctx, config_path, out, seed, jobs):
        """时间分数阶对流扩散反应方程的数值实验室"""
        ctx.obj = {'config': config_path, 'out': out, 'seed': seed, 'jobs': jobs}
        if ctx.invoked_subcommand is None:
            click.echo(ctx.get_help(), err=True)
            ctx.exit(2)

    for command in COMMANDS:
        fraclab.add_command(command)
    debug_log.debug("✅ 命令注册完成", {'commands': [command.name for command in COMMANDS]})
    return fraclab
