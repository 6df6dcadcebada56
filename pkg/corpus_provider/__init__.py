# -*- coding: utf-8 -*-
"""
===================================
语料适配层 - 包初始化
===================================

本包以策略模式统一多种对话语料格式：
1. session_jsonl   - 会话日志 JSONL（内部回放格式）
2. daily_dialog    - DailyDialog dialogues_text.txt
3. persona_chat    - PersonaChat ParlAI 文本导出
4. empathetic      - EmpatheticDialogues CSV

所有适配器输出 SessionLog 列表；外部语料按出现顺序交替分配用户 / 机器人角色。
"""

from .base import (
    BaseCorpusAdapter,
    CorpusLoadError,
    CorpusLoadResult,
    CorpusManager,
    RejectRecord,
    UnknownCorpusFormatError,
    filter_sessions,
)
from .daily_dialog import DailyDialogAdapter
from .empathetic import EmpatheticDialoguesAdapter
from .persona_chat import PersonaChatAdapter
from .session_jsonl import SessionJsonlAdapter, parse_session_jsonl

__all__ = [
    'BaseCorpusAdapter',
    'CorpusLoadError',
    'CorpusLoadResult',
    'CorpusManager',
    'RejectRecord',
    'UnknownCorpusFormatError',
    'filter_sessions',
    'DailyDialogAdapter',
    'EmpatheticDialoguesAdapter',
    'PersonaChatAdapter',
    'SessionJsonlAdapter',
    'parse_session_jsonl',
]
