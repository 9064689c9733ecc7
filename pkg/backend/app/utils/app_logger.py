"""
统一的日志记录模块
为数值实验、检查套件和命令行提供标准化的日志记录功能
"""

import os
import logging
import sys


class Logger:
    """统一的日志记录器"""

    @staticmethod
    def setup_logging(verbose: bool = False):
        """设置日志系统"""
        logging.basicConfig(
            level=logging.DEBUG if verbose else logging.INFO,
            format='%(asctime)s - %(levelname)s - %(message)s',
            handlers=[logging.StreamHandler(sys.stdout)]
        )
        return logging.getLogger('fraclab')

    def __init__(self):
        # 从环境变量读取日志配置
        self.enabled = os.getenv('DEBUG_LOGGING', 'true').lower() == 'true'
        self.verbose = os.getenv('VERBOSE_LOGGING', 'false').lower() == 'true'
        self.logger = Logger.setup_logging(self.verbose)

    def log(self, message, data=None, level='INFO'):
        """统一的调试日志函数"""
        if not self.enabled and level not in ('ERROR', 'WARNING'):
            return

        # 非详细模式下只输出消息本身，数据载荷留给 VERBOSE_LOGGING
        text = f"{message} - {data}" if (self.verbose and data is not None) else message

        if level == 'ERROR':
            self.logger.error(text)
        elif level == 'WARNING':
            self.logger.warning(text)
        elif level == 'DEBUG':
            self.logger.debug(text)
        else:
            self.logger.info(text)

    def info(self, message: str, data: any = None):
        """记录INFO级别日志"""
        self.log(message, data, 'INFO')

    def error(self, message: str, data: any = None):
        """记录ERROR级别日志"""
        self.log(message, data, 'ERROR')

    def warning(self, message: str, data: any = None):
        """记录WARNING级别日志"""
        self.log(message, data, 'WARNING')

    def debug(self, message: str, data: any = None):
        """记录DEBUG级别日志"""
        self.log(message, data, 'DEBUG')

    def suite_start(self, command: str, data: any = None):
        """记录套件开始"""
        self.info(f"🚀 {command} - 开始执行", data)

    def suite_success(self, command: str, data: any = None):
        """记录套件成功"""
        self.info(f"✅ {command} - 全部检查通过", data)

    def suite_error(self, command: str, error: str, data: any = None):
        """记录套件错误"""
        self.error(f"❌ {command} - {error}", data)

    def check_failed(self, check_id: str, data: any = None):
        """记录单项检查失败"""
        self.warning(f"⚠️ 检查未通过: {check_id}", data)

    def config_error(self, field: str, message: str):
        """记录配置错误"""
        self.error(f"❌ 配置错误: {field} - {message}")

    def numerical_error(self, operation: str, error: str):
        """记录数值计算错误"""
        self.error(f"❌ 数值计算失败: {operation} - {error}")


# 创建全局日志记录器实例
debug_log = Logger()
