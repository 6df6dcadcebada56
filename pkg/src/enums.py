# -*- coding: utf-8 -*-
"""
===================================
枚举类型定义
===================================

集中管理系统中使用的枚举类型，提供类型安全和代码可读性。
所有枚举继承 str，可直接与配置文件中的字符串比较和序列化。
"""

from enum import Enum
from typing import Type, TypeVar

_E = TypeVar("_E", bound="_StrEnum")


class _StrEnum(str, Enum):
    """带 from_str 的字符串枚举基类"""

    @classmethod
    def from_str(cls: Type[_E], value: str) -> _E:
        """
        从字符串转换为枚举值（大小写、首尾空白不敏感）

        Raises:
            ValueError: 无法识别的取值，错误信息列出全部合法取值
        """
        try:
            return cls(str(value).lower().strip())
        except (ValueError, AttributeError):
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown {cls.__name__} '{value}' (expected one of: {valid})")

    def __str__(self) -> str:
        return self.value


class Speaker(_StrEnum):
    """话语角色"""
    USER = "user"
    BOT = "bot"


class PolicyKind(_StrEnum):
    """
    风格适配策略类型

    取值即运行配置中的 kind 字符串。
    """
    STATIC = "static"
    UNCAPPED = "uncapped"
    CAP = "cap"
    EMA = "ema"
    DEADBAND = "deadband"
    HYBRID = "hybrid"
    HYBRID_RADIUS = "hybrid_radius"
    HYBRID_CACHE = "hybrid_cache"

    @property
    def display_name(self) -> str:
        """图表与日志中使用的名称"""
        return {
            PolicyKind.STATIC: "Static",
            PolicyKind.UNCAPPED: "Uncapped",
            PolicyKind.CAP: "Cap",
            PolicyKind.EMA: "EMA",
            PolicyKind.DEADBAND: "Dead-Band",
            PolicyKind.HYBRID: "Hybrid",
            PolicyKind.HYBRID_RADIUS: "Hybrid+Radius",
            PolicyKind.HYBRID_CACHE: "Hybrid+Cache",
        }[self]

    @property
    def is_hybrid(self) -> bool:
        return self in (PolicyKind.HYBRID, PolicyKind.HYBRID_RADIUS, PolicyKind.HYBRID_CACHE)


class RegisterBin(_StrEnum):
    """语域分箱（按非正式度 0.33 / 0.66 阈值）"""
    FORMAL = "formal"
    NEUTRAL = "neutral"
    INFORMAL = "informal"


class Direction(_StrEnum):
    """指令片段方向"""
    HIGH = "high"
    LOW = "low"


class CorpusFormat(_StrEnum):
    """语料格式"""
    SESSION_JSONL = "session_jsonl"
    DAILY_DIALOG = "daily_dialog"
    PERSONA_CHAT = "persona_chat"
    EMPATHETIC = "empathetic"

    @property
    def is_external(self) -> bool:
        return self is not CorpusFormat.SESSION_JSONL


class GeneratorMode(_StrEnum):
    """闭环回放使用的文本生成器"""
    ECHO = "echo"
    FIXED = "fixed"
    STYLED = "styled"
    REMOTE = "remote"


class PersonaAnchor(_StrEnum):
    """
    初始状态 b_0 / Static 目标 / 半径约束中心的取法

    - centroid: 人设质心（默认）
    - archetype: 标准化后的助手原型（与一致性锚点重合）
    """
    CENTROID = "centroid"
    ARCHETYPE = "archetype"


class FitSource(_StrEnum):
    """拟合人设时使用的话语范围"""
    BOT = "bot"
    ALL = "all"
