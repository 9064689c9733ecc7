"""
配置参数模块
环境变量提供全局默认值，运行配置文件（dotenv 语法的 key=value 文件）描述单次实验
"""

import os
from dotenv import load_dotenv, dotenv_values

from app.utils.app_logger import debug_log
from app.utils.report_helpers import ErrorCodes, LabError

# 加载环境变量
load_dotenv()


class Config:
    # 输出与并行
    OUT_DIR = os.getenv('FRACLAB_OUT_DIR', 'results')
    JOBS = int(os.getenv('FRACLAB_JOBS', '1'))
    SEED = int(os.getenv('FRACLAB_SEED', '0'))

    # Mittag-Leffler 围道积分节点数（每侧）
    ML_CONTOUR_POINTS = int(os.getenv('FRACLAB_ML_CONTOUR_POINTS', '32'))

    # 检查容差
    TOL_VIOLATION = float(os.getenv('FRACLAB_TOL_VIOLATION', '1e-8'))
    TOL_QUADRATURE = float(os.getenv('FRACLAB_TOL_QUADRATURE', '1e-3'))
    TOL_RATE_SPECTRAL = float(os.getenv('FRACLAB_TOL_RATE_SPECTRAL', '0.05'))
    TOL_RATE_WEAK = float(os.getenv('FRACLAB_TOL_RATE_WEAK', '0.1'))

    ARTIFACT_VERSION = '0.1.0'


config = Config()


def read_run_config_file(path: str) -> dict:
    """
    读取运行配置文件

    Args:
        path: 配置文件路径，内容为 section.key=value 形式的扁平键值对

    Returns:
        dict: 原始字符串键值对
    """
    if not os.path.isfile(path):
        debug_log.config_error('--config', f'文件不存在: {path}')
        raise LabError(ErrorCodes.CONFIG_PARSE_ERROR, f'配置文件不存在: {path}')

    try:
        values = dotenv_values(path)
    except (OSError, UnicodeDecodeError) as e:
        raise LabError(ErrorCodes.IO_ERROR, f'无法读取配置文件 {path}: {e}')

    missing = [key for key, value in values.items() if value is None]
    if missing:
        debug_log.config_error(', '.join(missing), '缺少取值')
        raise LabError(ErrorCodes.CONFIG_PARSE_ERROR, f'配置项缺少取值: {missing}')

    debug_log.debug(f"🔍 读取配置文件 {path}", values)
    return dict(values)
