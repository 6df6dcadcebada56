# -*- coding: utf-8 -*-
"""
===================================
DailyDialogAdapter - DailyDialog 公开导出
===================================

dialogues_text.txt：每行一段对话，话语之间以 "__eou__" 分隔，文本为预分词格式。
输入为目录时递归查找全部 dialogues_text.txt（按路径排序后依次读取）。
"""

import logging
from pathlib import Path
from typing import List

from src.enums import CorpusFormat

from .base import BaseCorpusAdapter, CorpusLoadError, CorpusLoadResult, RejectRecord, alternate_roles, detokenize

logger = logging.getLogger(__name__)

EOU_TOKEN = "__eou__"
DIALOGUE_FILE = "dialogues_text.txt"


def split_dialogue(line: str) -> List[str]:
    """一行 -> 话语列表（去除空片段并还原空格）"""
    return [detokenize(part) for part in line.split(EOU_TOKEN) if part.strip()]


class DailyDialogAdapter(BaseCorpusAdapter):
    name = "DailyDialogAdapter"
    corpus_format = CorpusFormat.DAILY_DIALOG

    def _resolve_path(self, path: Path) -> Path:
        return path

    def _files(self, path: Path) -> List[Path]:
        if path.is_file():
            return [path]
        files = sorted(path.rglob(DIALOGUE_FILE))
        if not files:
            raise CorpusLoadError(f"[{self.name}] no {DIALOGUE_FILE} under {path}")
        return files

    def _read_sessions(self, path: Path, source: str) -> CorpusLoadResult:
        result = CorpusLoadResult()
        counter = 0
        for file in self._files(path):
            with open(file, "r", encoding="utf-8") as f:
                for line_no, line in enumerate(f, start=1):
                    if not line.strip():
                        continue
                    utterances = split_dialogue(line)
                    if not utterances:
                        result.rejects.append(RejectRecord(line_no, "dialogue without utterances", line[:200]))
                        continue
                    counter += 1
                    result.sessions.append(alternate_roles(utterances, f"dd-{counter:05d}", source))
        return result
