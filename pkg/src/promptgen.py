# -*- coding: utf-8 -*-
"""
===================================
Delta 提示词生成
===================================

职责：
1. 按阈值把目标风格向量翻译为指令片段集合 g(b)
2. 组合 base + delta 系统提示词
3. 计算相邻两轮指令集合的变动量（churn）

片段表为随包发布的 UTF-8 文件 src/data/fragments.tsv：
"dimension_index<TAB>direction<TAB>text"，每个 (维度, 方向) 一条。
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, FrozenSet, Optional, Sequence, Tuple, Union

import numpy as np

from src.enums import Direction
from src.errors import PromptError
from src.lexicon import DATA_DIR
from src.textfeat import FEATURE_NAMES, N_FEATURES

logger = logging.getLogger(__name__)

DEFAULT_FRAGMENT_PATH = DATA_DIR / "fragments.tsv"
DEFAULT_THRESHOLD = 0.5
PROMPT_SEPARATOR = "\n\n"
STATIC_INSTRUCTION = "Maintain your own consistent, friendly style throughout the conversation."
DEFAULT_BASE_PROMPT = (
    "You are a helpful conversational assistant. Answer the user's messages thoughtfully and stay on topic."
)

# 每个维度两个方向
MAX_CHURN = 2 * N_FEATURES

FragmentId = Tuple[int, Direction]


@dataclass(frozen=True)
class Fragment:
    """单条指令片段"""
    dimension: int
    direction: Direction
    text: str

    @property
    def fragment_id(self) -> FragmentId:
        return (self.dimension, self.direction)

    @property
    def name(self) -> str:
        return f"{FEATURE_NAMES[self.dimension]}:{self.direction.value}"


@dataclass(frozen=True, eq=False)
class FragmentTable:
    """(维度, 方向) -> 片段"""
    version: str
    fragments: Tuple[Fragment, ...]

    def __post_init__(self):
        object.__setattr__(self, "_index", {f.fragment_id: f for f in self.fragments})

    def lookup(self, dimension: int, direction: Direction) -> Optional[Fragment]:
        return self._index.get((dimension, direction))


def parse_fragment_table(text: str) -> FragmentTable:
    """
    解析片段表文本

    Raises:
        PromptError: 行格式错误、维度越界或 (维度, 方向) 重复
    """
    version = "unversioned"
    fragments: Dict[FragmentId, Fragment] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "fragment_table_version":
                version = parts[1]
            continue

        cols = line.split("\t")
        if len(cols) != 3:
            raise PromptError(f"fragment table line {lineno}: expected 3 tab-separated columns")
        try:
            dimension = int(cols[0])
            direction = Direction.from_str(cols[1])
        except ValueError as e:
            raise PromptError(f"fragment table line {lineno}: {e}") from e
        if not 0 <= dimension < N_FEATURES:
            raise PromptError(f"fragment table line {lineno}: dimension {dimension} out of range")

        fragment = Fragment(dimension, direction, cols[2].strip())
        if fragment.fragment_id in fragments:
            raise PromptError(f"fragment table line {lineno}: duplicate entry {fragment.name}")
        fragments[fragment.fragment_id] = fragment

    ordered = tuple(sorted(fragments.values(), key=lambda f: (f.dimension, f.direction.value)))
    return FragmentTable(version=version, fragments=ordered)


@lru_cache(maxsize=8)
def load_fragment_table(path: Optional[str] = None) -> FragmentTable:
    source = Path(path) if path else DEFAULT_FRAGMENT_PATH
    if not source.exists():
        raise PromptError(f"fragment table not found: {source}")
    table = parse_fragment_table(source.read_text(encoding="utf-8"))
    logger.debug(f"[Prompt] 片段表 v{table.version} 加载完成，共 {len(table.fragments)} 条")
    return table


@dataclass(frozen=True)
class InstructionSet:
    """按维度升序排列的激活片段"""
    fragments: Tuple[Fragment, ...] = ()

    def __post_init__(self):
        ordered = tuple(sorted(self.fragments, key=lambda f: f.dimension))
        dims = [f.dimension for f in ordered]
        if len(dims) != len(set(dims)):
            raise PromptError("at most one fragment per dimension")
        object.__setattr__(self, "fragments", ordered)

    @property
    def ids(self) -> FrozenSet[FragmentId]:
        return frozenset(f.fragment_id for f in self.fragments)

    @property
    def is_empty(self) -> bool:
        return not self.fragments

    def render(self) -> str:
        """片段逐行拼接；为空时返回静态兜底指令"""
        if self.is_empty:
            return STATIC_INSTRUCTION
        return "\n".join(f.text for f in self.fragments)


@dataclass(frozen=True)
class ComposedPrompt:
    base: str
    delta: str

    @property
    def full_text(self) -> str:
        return f"{self.base}{PROMPT_SEPARATOR}{self.delta}"


def _thresholds(thresholds: Union[None, float, Sequence[float]]) -> np.ndarray:
    if thresholds is None:
        return np.full(N_FEATURES, DEFAULT_THRESHOLD)
    if np.isscalar(thresholds):
        return np.full(N_FEATURES, float(thresholds))
    arr = np.asarray(thresholds, dtype=np.float64)
    if arr.shape != (N_FEATURES,):
        raise PromptError(f"thresholds must be a scalar or {N_FEATURES} values")
    return arr


def vector_to_instructions(
    b_target: Sequence[float],
    table: Optional[FragmentTable] = None,
    thresholds: Union[None, float, Sequence[float]] = None,
) -> InstructionSet:
    """
    g(b)：z[i] > +阈值 取 High 片段，z[i] < −阈值 取 Low 片段，其余维度不出指令
    """
    table = table or load_fragment_table()
    z = np.asarray(b_target, dtype=np.float64)
    limits = _thresholds(thresholds)

    active = []
    for i in range(N_FEATURES):
        if z[i] > limits[i]:
            direction = Direction.HIGH
        elif z[i] < -limits[i]:
            direction = Direction.LOW
        else:
            continue
        fragment = table.lookup(i, direction)
        if fragment is not None:
            active.append(fragment)
    return InstructionSet(tuple(active))


def compose_prompt(base: str, instr: InstructionSet) -> ComposedPrompt:
    if not base or not base.strip():
        raise PromptError("base prompt must be non-empty")
    return ComposedPrompt(base=base, delta=instr.render())


def instruction_churn(prev: InstructionSet, cur: InstructionSet) -> int:
    """两组片段标识的对称差大小"""
    return len(prev.ids ^ cur.ids)

