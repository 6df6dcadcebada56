# -*- coding: utf-8 -*-
"""
===================================
StyleSync 风格同步仿真 - 环境配置模块
===================================

职责：
1. 使用单例模式管理全局环境配置
2. 从 .env 文件加载日志、并发与远程生成器配置
3. 提供类型安全的配置访问接口

运行语义（语料、策略、种子等）不在这里，见 src/run_config.py。
"""

import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv


def _env_bool(name: str, default: str = "false") -> bool:
    return os.getenv(name, default).strip().lower() in ("1", "true", "yes", "on")


@dataclass
class Config:
    """
    系统配置类 - 单例模式

    设计说明：
    - 所有配置项从环境变量读取，支持默认值
    - 类方法 get_instance() 实现单例访问
    """

    # === 日志配置 ===
    log_dir: str = "./logs"
    log_level: str = "INFO"
    debug: bool = False

    # === 并发配置 ===
    max_workers: int = 4  # 回放与 bootstrap 默认线程数

    # === 远程生成器（OpenAI 兼容 chat completions）===
    generator_url: Optional[str] = None  # 如: https://api.openai.com/v1
    generator_key: Optional[str] = None
    generator_model: str = "gpt-4o-mini"
    generator_temperature: float = 0.7
    generator_max_tokens: int = 256
    generator_timeout: float = 60.0  # 单次请求超时（秒）
    generator_max_retries: int = 3

    # === 网络代理（仅远程生成器使用）===
    http_proxy: Optional[str] = None

    # 单例实例存储
    _instance: Optional['Config'] = None

    @classmethod
    def get_instance(cls) -> 'Config':
        """
        获取配置单例实例

        单例模式确保配置只从环境变量加载一次，所有模块共享相同配置
        """
        if cls._instance is None:
            cls._instance = cls._load_from_env()
        return cls._instance

    @classmethod
    def _load_from_env(cls) -> 'Config':
        """
        从 .env 文件加载配置

        加载优先级：
        1. 系统环境变量
        2. .env 文件
        3. 代码中的默认值
        """
        # src/config.py -> src/ -> root
        env_path = Path(__file__).parent.parent / '.env'
        load_dotenv(dotenv_path=env_path)

        return cls(
            log_dir=os.getenv('LOG_DIR', './logs'),
            log_level=os.getenv('LOG_LEVEL', 'INFO').upper(),
            debug=_env_bool('DEBUG'),
            max_workers=int(os.getenv('MAX_WORKERS', '4')),
            generator_url=os.getenv('GENERATOR_URL') or None,
            generator_key=os.getenv('GENERATOR_KEY') or None,
            generator_model=os.getenv('GENERATOR_MODEL', 'gpt-4o-mini'),
            generator_temperature=float(os.getenv('GENERATOR_TEMPERATURE', '0.7')),
            generator_max_tokens=int(os.getenv('GENERATOR_MAX_TOKENS', '256')),
            generator_timeout=float(os.getenv('GENERATOR_TIMEOUT', '60')),
            generator_max_retries=int(os.getenv('GENERATOR_MAX_RETRIES', '3')),
            http_proxy=os.getenv('HTTP_PROXY') or os.getenv('http_proxy') or None,
        )

    @classmethod
    def reset_instance(cls) -> None:
        """重置单例（主要用于测试）"""
        cls._instance = None

    @property
    def remote_generator_configured(self) -> bool:
        return bool(self.generator_url and self.generator_key)

    def validate(self) -> List[str]:
        """
        验证配置完整性

        Returns:
            缺失或无效配置项的警告列表（不抛异常）
        """
        warnings = []

        if self.max_workers < 1:
            warnings.append(f"警告：MAX_WORKERS={self.max_workers} 无效，将按 1 处理")

        if not self.remote_generator_configured:
            warnings.append("提示：未配置 GENERATOR_URL / GENERATOR_KEY，闭环模式仅可使用本地 stub 生成器")

        if not 0.0 <= self.generator_temperature <= 2.0:
            warnings.append(f"警告：GENERATOR_TEMPERATURE={self.generator_temperature} 超出 [0, 2]")

        if self.generator_max_tokens < 1:
            warnings.append(f"警告：GENERATOR_MAX_TOKENS={self.generator_max_tokens} 无效")

        return warnings


# === 便捷的配置访问函数 ===
def get_config() -> Config:
    """获取全局配置实例的快捷方式"""
    return Config.get_instance()
