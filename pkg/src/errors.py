# -*- coding: utf-8 -*-
"""
===================================
异常类型定义
===================================

所有业务异常统一继承 StyleSyncError，命令行入口据此区分：
- ConfigError  -> 退出码 2（用法/配置错误）
- 其他 StyleSyncError -> 退出码 1（运行时失败）

数据源与生成器相关的异常分别定义在 corpus_provider/base.py 与 src/generators.py。
"""


class StyleSyncError(Exception):
    """业务异常基类"""
    pass


class TextFeatureError(StyleSyncError):
    """文本特征提取异常（如空话语）"""
    pass


class PersonaError(StyleSyncError):
    """标准化器 / 人设模型异常"""
    pass


class PolicyError(StyleSyncError):
    """策略配置或状态异常"""
    pass


class PromptError(StyleSyncError):
    """提示词生成异常"""
    pass


class MetricError(StyleSyncError):
    """指标计算异常"""
    pass


class StatsError(StyleSyncError):
    """统计分析异常"""
    pass


class ConfigError(StyleSyncError):
    """运行配置异常（未知字段、取值非法、路径缺失等）"""
    pass


class ReplayError(StyleSyncError):
    """回放异常（会话不满足过滤条件等）"""
    pass
