"""
统一的报告处理工具模块
提供标准化的错误码、异常类型、退出码映射以及报告记录
"""

from datetime import datetime, timezone
from app.utils.app_logger import debug_log


# 统一的错误码定义
class ErrorCodes:
    # 通用错误码 (1000-1999)
    UNKNOWN_ERROR = 'UNKNOWN_ERROR'
    VALIDATION_ERROR = 'VALIDATION_ERROR'
    LENGTH_MISMATCH = 'LENGTH_MISMATCH'
    INDEX_OUT_OF_RANGE = 'INDEX_OUT_OF_RANGE'

    # 配置相关错误码 (2000-2999)
    CONFIG_PARSE_ERROR = 'CONFIG_PARSE_ERROR'
    UNKNOWN_SELECTOR = 'UNKNOWN_SELECTOR'
    EMPTY_SUITE = 'EMPTY_SUITE'
    USAGE_ERROR = 'USAGE_ERROR'

    # 数值计算错误码 (3000-3999)
    INVALID_ORDER = 'INVALID_ORDER'
    INVALID_MESH = 'INVALID_MESH'
    SINGULAR_AT_ORIGIN = 'SINGULAR_AT_ORIGIN'
    MITTAG_LEFFLER_FAILURE = 'MITTAG_LEFFLER_FAILURE'
    LINEAR_SOLVE_FAILED = 'LINEAR_SOLVE_FAILED'
    NON_FINITE_STATE = 'NON_FINITE_STATE'
    NON_FINITE_INPUT = 'NON_FINITE_INPUT'
    FIT_FAILURE = 'FIT_FAILURE'

    # 前提假设相关错误码 (4000-4999)
    HYPOTHESIS_VIOLATION = 'HYPOTHESIS_VIOLATION'
    INSUFFICIENT_SMOOTHNESS = 'INSUFFICIENT_SMOOTHNESS'
    COEFFICIENT_OUT_OF_RANGE = 'COEFFICIENT_OUT_OF_RANGE'

    # 文件读写错误码 (5000-5999)
    IO_ERROR = 'IO_ERROR'

    # 检查结果错误码 (6000-6999)
    CHECK_FAILED = 'CHECK_FAILED'


# 错误码到进程退出码的映射
ERROR_CODE_TO_EXIT = {
    ErrorCodes.CONFIG_PARSE_ERROR: 2,
    ErrorCodes.UNKNOWN_SELECTOR: 2,
    ErrorCodes.EMPTY_SUITE: 2,
    ErrorCodes.USAGE_ERROR: 2,
    ErrorCodes.IO_ERROR: 3,
    ErrorCodes.CHECK_FAILED: 1,
    ErrorCodes.UNKNOWN_ERROR: 1,   # 所有未归类的运行错误
}


def get_exit_code_for_error(error_code: str) -> int:
    """根据错误码获取对应的进程退出码"""
    return ERROR_CODE_TO_EXIT.get(error_code, 1)


class LabError(Exception):
    """带错误码的实验室异常"""

    def __init__(self, error_code: str, details: str = None):
        self.error_code = error_code
        self.details = details
        super().__init__(f"{error_code}: {details}" if details else error_code)

    @property
    def exit_code(self) -> int:
        return get_exit_code_for_error(self.error_code)

    def to_dict(self):
        return {'error_code': self.error_code, 'details': self.details}


class MittagLefflerError(LabError):
    """Mittag-Leffler 函数求值失败（不收敛或交叉校验不一致）"""

    def __init__(self, details: str = None):
        super().__init__(ErrorCodes.MITTAG_LEFFLER_FAILURE, details)


class SingularAtOriginError(LabError):
    """在 t=0 处请求奇异量"""

    def __init__(self, details: str = None):
        super().__init__(ErrorCodes.SINGULAR_AT_ORIGIN, details or 't=0 处未定义')


def _utc_timestamp() -> str:
    return datetime.now(timezone.utc).replace(tzinfo=None).isoformat() + 'Z'


def create_error_report(error_code: str, error_details: str = None, command: str = None) -> dict:
    """
    创建标准化的错误报告并自动记录日志

    Args:
        error_code: 错误码
        error_details: 详细错误信息（可选）
        command: 子命令名称（可选，用于日志记录）

    Returns:
        dict: 包含错误码、详情、退出码和时间戳的报告
    """
    if command:
        debug_log.suite_error(command, error_details or error_code)
    else:
        debug_log.error(f"❌ {error_details or error_code}")

    return {
        'success': False,
        'error_code': error_code,
        'details': error_details,
        'exit_code': get_exit_code_for_error(error_code),
        'timestamp': _utc_timestamp()
    }


def create_success_report(data: dict = None, message: str = None, command: str = None) -> dict:
    """
    创建标准化的成功报告并自动记录日志

    Args:
        data: 报告数据
        message: 成功消息
        command: 子命令名称（可选，用于日志记录）

    Returns:
        dict: 报告字典
    """
    if command:
        debug_log.suite_success(command, data)
    else:
        debug_log.info(f"✅ {message or '操作成功'}", data)

    report = {
        'success': True,
        'exit_code': 0,
        'timestamp': _utc_timestamp()
    }

    if data is not None:
        report.update(data)

    if message is not None:
        report['message'] = message

    return report
