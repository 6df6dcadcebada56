# -*- coding: utf-8 -*-
"""
===================================
EmpatheticDialoguesAdapter - EmpatheticDialogues CSV 导出
===================================

列：conv_id, utterance_idx, context, prompt, speaker_idx, utterance, selfeval, tags[, ...]
字段内逗号以 "_comma_" 转义，因此逐行按逗号切分（不用 CSV 引号规则），只取前 8 列。
按 conv_id 分组、utterance_idx 排序后交替分配角色。
"""

import logging
from pathlib import Path

import pandas as pd

from src.enums import CorpusFormat

from .base import BaseCorpusAdapter, CorpusLoadResult, RejectRecord, alternate_roles, detokenize

logger = logging.getLogger(__name__)

COLUMNS = ["conv_id", "utterance_idx", "context", "prompt", "speaker_idx", "utterance", "selfeval", "tags"]
COMMA_TOKEN = "_comma_"


class EmpatheticDialoguesAdapter(BaseCorpusAdapter):
    name = "EmpatheticDialoguesAdapter"
    corpus_format = CorpusFormat.EMPATHETIC

    def _read_sessions(self, path: Path, source: str) -> CorpusLoadResult:
        result = CorpusLoadResult()
        rows = []
        with open(path, "r", encoding="utf-8") as f:
            for line_no, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line or (line_no == 1 and line.startswith("conv_id")):
                    continue
                fields = line.split(",")
                if len(fields) < 6:
                    result.rejects.append(RejectRecord(line_no, f"expected ≥ 6 fields, got {len(fields)}", line[:200]))
                    continue
                fields = (fields + [""] * len(COLUMNS))[:len(COLUMNS)]
                try:
                    fields[1] = int(fields[1])
                except ValueError:
                    result.rejects.append(RejectRecord(line_no, f"utterance_idx is not an integer: {fields[1]!r}"))
                    continue
                fields.append(line_no)
                rows.append(fields)

        if not rows:
            return result

        df = pd.DataFrame(rows, columns=COLUMNS + ["line_no"])
        df["utterance"] = df["utterance"].str.replace(COMMA_TOKEN, ",", regex=False).map(detokenize)
        # groupby(sort=False) 保持首次出现顺序
        for conv_id, group in df.groupby("conv_id", sort=False):
            group = group.sort_values(["utterance_idx", "line_no"], kind="stable")
            texts = [t for t in group["utterance"].tolist() if t]
            if texts:
                result.sessions.append(alternate_roles(texts, str(conv_id), source))
        return result
