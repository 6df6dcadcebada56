# -*- coding: utf-8 -*-
"""
===================================
PersonaChatAdapter - PersonaChat ParlAI 文本导出
===================================

每行格式 "N text"，N 为对话内行号，回到 1 时开始新对话：
- "N your persona: ..." / "N partner's persona: ..." 为人设描述，跳过
- "N partner_utterance<TAB>bot_utterance<TAB><TAB>candidates" 为一轮对话，
  候选回复部分丢弃
"""

import logging
from pathlib import Path
from typing import List

from src.enums import CorpusFormat

from .base import BaseCorpusAdapter, CorpusLoadResult, RejectRecord, alternate_roles, detokenize

logger = logging.getLogger(__name__)

PERSONA_PREFIXES = ("your persona:", "partner's persona:")
CANDIDATES_SEPARATOR = "\t\t"
UTTERANCE_SEPARATOR = "\t"


class PersonaChatAdapter(BaseCorpusAdapter):
    name = "PersonaChatAdapter"
    corpus_format = CorpusFormat.PERSONA_CHAT

    def _read_sessions(self, path: Path, source: str) -> CorpusLoadResult:
        result = CorpusLoadResult()
        current: List[str] = []
        counter = 0

        def flush():
            nonlocal counter, current
            if current:
                counter += 1
                result.sessions.append(alternate_roles(current, f"pc-{counter:05d}", source))
            current = []

        with open(path, "r", encoding="utf-8") as f:
            for line_no, raw in enumerate(f, start=1):
                line = raw.rstrip("\n")
                if not line.strip():
                    continue
                number, _, body = line.partition(" ")
                if not number.isdigit():
                    result.rejects.append(RejectRecord(line_no, "missing line number", line[:200]))
                    continue
                if int(number) == 1:
                    flush()
                if body.startswith(PERSONA_PREFIXES):
                    continue

                exchange = body.split(CANDIDATES_SEPARATOR)[0]
                for part in exchange.split(UTTERANCE_SEPARATOR)[:2]:
                    text = detokenize(part)
                    if text and text != "__SILENCE__":
                        current.append(text)
        flush()
        return result
