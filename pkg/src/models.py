# -*- coding: utf-8 -*-
"""
===================================
对话数据模型
===================================

定义统一的话语与会话模型，屏蔽各语料格式差异。
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List

from src.enums import Speaker


@dataclass(frozen=True)
class Utterance:
    """
    单条话语

    Attributes:
        text: 话语文本
        speaker: 说话方（用户 / 机器人）
        turn_index: 在会话中的序号（非负，会话内严格递增）
    """
    text: str
    speaker: Speaker
    turn_index: int

    @property
    def is_user(self) -> bool:
        return self.speaker is Speaker.USER

    @property
    def is_empty(self) -> bool:
        return not self.text.strip()


@dataclass
class SessionLog:
    """
    一次完整会话的有序话语序列

    Attributes:
        session_id: 会话 ID
        participant_id: 参与者 ID（外部语料中等于 session_id）
        turns: 按 turn_index 升序排列的话语
        source: 语料标签
    """
    session_id: str
    participant_id: str
    turns: List[Utterance] = field(default_factory=list)
    source: str = ""

    @property
    def user_turns(self) -> List[Utterance]:
        return [u for u in self.turns if u.is_user]

    @property
    def bot_turns(self) -> List[Utterance]:
        return [u for u in self.turns if not u.is_user]

    @property
    def n_user_turns(self) -> int:
        """非空用户话语数量（过滤规则按此计数）"""
        return sum(1 for u in self.turns if u.is_user and not u.is_empty)

    def user_bot_pairs(self) -> List[tuple]:
        """
        每条用户话语与紧随其后的机器人回复配对

        Returns:
            [(user_utterance, bot_utterance), ...]，用户话语之后没有机器人回复时不配对
        """
        pairs = []
        for current, following in zip(self.turns, self.turns[1:]):
            if current.is_user and not following.is_user:
                pairs.append((current, following))
        return pairs

    def to_records(self) -> List[Dict[str, Any]]:
        """转换为会话 JSONL 记录（每条话语一行，turn 为从 1 开始的位置）"""
        return [
            {
                "session_id": self.session_id,
                "participant_id": self.participant_id,
                "event_type": "user_message" if u.is_user else "bot_response",
                "text": u.text,
                "turn": position,
            }
            for position, u in enumerate(self.turns, start=1)
        ]
