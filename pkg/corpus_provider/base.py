# -*- coding: utf-8 -*-
"""
===================================
语料适配器基类与管理器
===================================

设计模式：策略模式 (Strategy Pattern)
- BaseCorpusAdapter: 抽象基类，定义统一的加载流程
- CorpusManager: 按格式分发到具体适配器

统一加载流程：
1. 读取原始记录（子类实现）
2. 转换为 SessionLog（子类实现）
3. 记录被拒绝的行，不中断整体加载
4. 没有任何有效会话时抛出 "empty corpus"
"""

import logging
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

from src.enums import CorpusFormat, Speaker
from src.errors import StyleSyncError
from src.models import SessionLog, Utterance

logger = logging.getLogger(__name__)

# 过滤阈值：至少 3 条非空用户话语
MIN_USER_TURNS = 3

_SPACE_BEFORE_PUNCT_RE = re.compile(r"\s+([,.!?;:%)])")
_SPACE_AFTER_OPEN_RE = re.compile(r"([($])\s+")
_SPLIT_APOSTROPHE_RE = re.compile(r"(\w)\s*([’'])\s*(s|t|re|ve|ll|d|m)\b", re.IGNORECASE)
_MULTI_SPACE_RE = re.compile(r"\s{2,}")


class CorpusLoadError(StyleSyncError):
    """语料加载异常基类"""
    pass


class UnknownCorpusFormatError(CorpusLoadError):
    """未知的语料格式"""
    pass


@dataclass(frozen=True)
class RejectRecord:
    """被拒绝的原始记录"""
    line_no: int
    reason: str
    raw: str = ""


@dataclass
class CorpusLoadResult:
    sessions: List[SessionLog] = field(default_factory=list)
    rejects: List[RejectRecord] = field(default_factory=list)

    @property
    def n_utterances(self) -> int:
        return sum(len(s.turns) for s in self.sessions)


def detokenize(text: str) -> str:
    """
    还原预分词语料中的空格（"Hello , how are you ?" -> "Hello, how are you?"）
    """
    text = _SPACE_BEFORE_PUNCT_RE.sub(r"\1", text)
    text = _SPACE_AFTER_OPEN_RE.sub(r"\1", text)
    text = _SPLIT_APOSTROPHE_RE.sub(r"\1\2\3", text)
    return _MULTI_SPACE_RE.sub(" ", text).strip()


def alternate_roles(texts: Sequence[str], session_id: str, source: str) -> SessionLog:
    """
    按出现顺序交替分配 用户 / 机器人 角色（首个说话者为用户）

    外部语料没有参与者概念，participant_id 取 session_id。
    """
    turns = [
        Utterance(text=text, speaker=Speaker.USER if i % 2 == 0 else Speaker.BOT, turn_index=i)
        for i, text in enumerate(texts)
    ]
    return SessionLog(session_id=session_id, participant_id=session_id, turns=turns, source=source)


def filter_sessions(sessions: Iterable[SessionLog], min_user_turns: int = MIN_USER_TURNS) -> List[SessionLog]:
    """保留非空用户话语数 ≥ min_user_turns 的会话"""
    kept = []
    dropped = 0
    for session in sessions:
        if session.n_user_turns >= min_user_turns:
            kept.append(session)
        else:
            dropped += 1
    if dropped:
        logger.info(f"[Corpus] 过滤掉 {dropped} 个用户话语不足 {min_user_turns} 条的会话，保留 {len(kept)} 个")
    return kept


class BaseCorpusAdapter(ABC):
    """
    语料适配器抽象基类

    职责：
    1. 定义统一的加载入口 load()
    2. 汇总被拒绝的记录并写日志

    子类实现：
    - _read_sessions(): 从具体格式解析出会话与拒绝记录
    """

    name: str = "BaseCorpusAdapter"
    corpus_format: CorpusFormat = CorpusFormat.SESSION_JSONL

    @abstractmethod
    def _read_sessions(self, path: Path, source: str) -> CorpusLoadResult:
        """解析原始文件（子类必须实现）"""
        pass

    def _resolve_path(self, path: Path) -> Path:
        """目录输入时定位到具体文件；默认要求是文件"""
        if path.is_dir():
            raise CorpusLoadError(f"[{self.name}] expected a file, got directory: {path}")
        return path

    def load(self, path: Union[str, Path], source: Optional[str] = None) -> CorpusLoadResult:
        """
        加载语料（统一入口）

        Args:
            path: 语料文件路径
            source: 语料标签，默认为文件名（不含扩展名）

        Raises:
            CorpusLoadError: 路径不存在、无法读取，或没有有效会话（"empty corpus"）
        """
        path = Path(path)
        if not path.exists():
            raise CorpusLoadError(f"[{self.name}] corpus path not found: {path}")
        path = self._resolve_path(path)
        source = source or path.stem

        logger.info(f"[Corpus:{self.corpus_format.value}] 加载 {path}")
        try:
            result = self._read_sessions(path, source)
        except CorpusLoadError:
            raise
        except (OSError, UnicodeDecodeError) as e:
            raise CorpusLoadError(f"[{self.name}] failed to read {path}: {e}") from e

        for reject in result.rejects[:20]:
            logger.warning(f"[Corpus:{self.corpus_format.value}] 第 {reject.line_no} 行被拒绝: {reject.reason}")
        if len(result.rejects) > 20:
            logger.warning(f"[Corpus:{self.corpus_format.value}] 另有 {len(result.rejects) - 20} 行被拒绝")

        if not result.sessions:
            raise CorpusLoadError("empty corpus")

        logger.info(
            f"[Corpus:{self.corpus_format.value}] {source}: {len(result.sessions)} 个会话, "
            f"{result.n_utterances} 条话语, {len(result.rejects)} 条拒绝"
        )
        return result


class CorpusManager:
    """
    语料格式管理器

    职责：
    1. 按 CorpusFormat 注册与查找适配器
    2. 提供 load / adapt_external_corpus 统一入口
    """

    def __init__(self, adapters: Optional[List[BaseCorpusAdapter]] = None):
        self._adapters: Dict[CorpusFormat, BaseCorpusAdapter] = {}
        if adapters:
            for adapter in adapters:
                self.add_adapter(adapter)
        else:
            self._init_default_adapters()

    def _init_default_adapters(self) -> None:
        from .daily_dialog import DailyDialogAdapter
        from .empathetic import EmpatheticDialoguesAdapter
        from .persona_chat import PersonaChatAdapter
        from .session_jsonl import SessionJsonlAdapter

        for adapter in (SessionJsonlAdapter(), DailyDialogAdapter(), PersonaChatAdapter(), EmpatheticDialoguesAdapter()):
            self.add_adapter(adapter)
        logger.debug(f"[Corpus] 已注册格式: {', '.join(self.available_formats)}")

    def add_adapter(self, adapter: BaseCorpusAdapter) -> None:
        self._adapters[adapter.corpus_format] = adapter

    @property
    def available_formats(self) -> List[str]:
        return [fmt.value for fmt in self._adapters]

    def get_adapter(self, corpus_format: Union[str, CorpusFormat]) -> BaseCorpusAdapter:
        try:
            fmt = corpus_format if isinstance(corpus_format, CorpusFormat) else CorpusFormat.from_str(corpus_format)
        except ValueError as e:
            raise UnknownCorpusFormatError(str(e)) from e
        adapter = self._adapters.get(fmt)
        if adapter is None:
            raise UnknownCorpusFormatError(f"no adapter registered for format '{fmt.value}'")
        return adapter

    def load(
        self,
        path: Union[str, Path],
        corpus_format: Union[str, CorpusFormat],
        source: Optional[str] = None,
    ) -> CorpusLoadResult:
        return self.get_adapter(corpus_format).load(path, source)

    def adapt_external_corpus(
        self,
        path: Union[str, Path],
        corpus_format: Union[str, CorpusFormat],
        source: Optional[str] = None,
    ) -> List[SessionLog]:
        """
        外部公开语料 -> SessionLog 列表

        Raises:
            UnknownCorpusFormatError: 格式未知或不是外部语料格式
        """
        adapter = self.get_adapter(corpus_format)
        if not adapter.corpus_format.is_external:
            raise UnknownCorpusFormatError(
                f"'{adapter.corpus_format.value}' is not an external corpus format"
            )
        return adapter.load(path, source).sessions
