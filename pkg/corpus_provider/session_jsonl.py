# -*- coding: utf-8 -*-
"""
===================================
SessionJsonlAdapter - 会话日志 JSONL
===================================

每行一个 JSON 对象：
    {"session_id", "participant_id", "event_type", "text", "turn"}
event_type ∈ {user_message, bot_response}

容错规则：
- 无法解析或缺字段的行进入拒绝列表，不影响其他行
- (session_id, turn, 角色) 重复时保留第一条
- 会话内按 turn 升序、同 turn 按文件顺序排列，turn_index 为排序后的位置
"""

import json
import logging
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, Iterable, List, Tuple

from src.enums import CorpusFormat, Speaker
from src.models import SessionLog, Utterance

from .base import BaseCorpusAdapter, CorpusLoadResult, RejectRecord

logger = logging.getLogger(__name__)

EVENT_TYPES = {
    "user_message": Speaker.USER,
    "bot_response": Speaker.BOT,
}
REQUIRED_FIELDS = ("session_id", "participant_id", "event_type", "text", "turn")


def _validate_record(obj: Any) -> Tuple[Dict[str, Any], str]:
    """返回 (规范化记录, 错误原因)；原因为空串表示通过"""
    if not isinstance(obj, dict):
        return {}, "line is not a JSON object"
    missing = [k for k in REQUIRED_FIELDS if k not in obj]
    if missing:
        return {}, f"missing fields: {missing}"
    if obj["event_type"] not in EVENT_TYPES:
        return {}, f"unknown event_type {obj['event_type']!r}"
    if not isinstance(obj["text"], str):
        return {}, "text must be a string"
    turn = obj["turn"]
    if isinstance(turn, bool) or not isinstance(turn, int):
        return {}, f"turn must be an integer, got {turn!r}"
    session_id = obj["session_id"]
    if not isinstance(session_id, (str, int)) or isinstance(session_id, bool) or str(session_id) == "":
        return {}, "session_id must be a non-empty string"
    return {
        "session_id": str(session_id),
        "participant_id": str(obj["participant_id"]),
        "speaker": EVENT_TYPES[obj["event_type"]],
        "text": obj["text"],
        "turn": turn,
    }, ""


def parse_session_jsonl(lines: Iterable[str], source: str = "") -> CorpusLoadResult:
    """
    解析会话 JSONL 文本行

    Returns:
        CorpusLoadResult（会话按首次出现顺序排列）
    """
    rejects: List[RejectRecord] = []
    grouped: "OrderedDict[str, List[Dict[str, Any]]]" = OrderedDict()
    seen = set()

    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            rejects.append(RejectRecord(line_no, f"invalid JSON: {e.msg}", line[:200]))
            continue

        record, reason = _validate_record(obj)
        if reason:
            rejects.append(RejectRecord(line_no, reason, line[:200]))
            continue

        key = (record["session_id"], record["turn"], record["speaker"])
        if key in seen:
            rejects.append(RejectRecord(line_no, f"duplicate (session, turn, role) {key[0]}/{key[1]}/{key[2].value}"))
            continue
        seen.add(key)
        grouped.setdefault(record["session_id"], []).append(record)

    sessions = []
    for session_id, records in grouped.items():
        records.sort(key=lambda r: r["turn"])
        participants = {r["participant_id"] for r in records}
        if len(participants) > 1:
            logger.warning(f"[Corpus:session_jsonl] 会话 {session_id} 含多个 participant_id，取第一条: {sorted(participants)}")
        turns = [Utterance(text=r["text"], speaker=r["speaker"], turn_index=i) for i, r in enumerate(records)]
        sessions.append(
            SessionLog(session_id=session_id, participant_id=records[0]["participant_id"], turns=turns, source=source)
        )

    return CorpusLoadResult(sessions=sessions, rejects=rejects)


class SessionJsonlAdapter(BaseCorpusAdapter):
    name = "SessionJsonlAdapter"
    corpus_format = CorpusFormat.SESSION_JSONL

    def _read_sessions(self, path: Path, source: str) -> CorpusLoadResult:
        with open(path, "r", encoding="utf-8") as f:
            return parse_session_jsonl(f, source)
