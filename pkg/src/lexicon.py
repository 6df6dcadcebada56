# -*- coding: utf-8 -*-
"""
===================================
词典资源加载
===================================

职责：
1. 从随包发布的数据文件加载情感词典、增强词、否定词
2. 解析 LIWC 风格的类别词典（功能词 / 社交 / 认知 / 情感 / 口语 / 书面 + 9 个 LSM 类别）
3. 以不可变的 LexiconSet 对外提供，加载一次后可被任意线程共享

数据文件（src/data/lexicon/）：
- sentiment_lexicon.txt  "word<TAB>valence"，valence ∈ [-4, 4]
- boosters.txt           "word<TAB>scalar"（增强 +0.293 / 减弱 -0.293）
- negations.txt          每行一个否定词
- style_categories.dic   LIWC .dic 格式：% 类别表 % 词条表
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from types import MappingProxyType
from typing import Dict, FrozenSet, List, Mapping, Optional, Set, Tuple

from src.errors import TextFeatureError

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
LEXICON_DIR = DATA_DIR / "lexicon"

# 经典 LSM 的 9 个闭类词类别（顺序固定）
LSM_CATEGORIES: Tuple[str, ...] = (
    "ppron",    # 人称代词
    "ipron",    # 非人称代词
    "article",  # 冠词
    "prep",     # 介词
    "conj",     # 连词
    "auxverb",  # 助动词
    "negate",   # 否定词
    "quant",    # 量词
    "adverb",   # 常用副词
)

STYLE_CATEGORIES: Tuple[str, ...] = ("function", "social", "cognitive", "affective", "informal", "formal")


@dataclass(frozen=True, eq=False)
class LexiconSet:
    """
    不可变词典集合

    所有词条均为小写；各集合非空。按身份比较与哈希，可作为缓存键。
    """
    version: str
    sentiment: Mapping[str, float]
    boosters: Mapping[str, float]
    negations: FrozenSet[str]
    function_words: FrozenSet[str]
    social: FrozenSet[str]
    cognitive: FrozenSet[str]
    affective: FrozenSet[str]
    informal_markers: FrozenSet[str]
    formal_markers: FrozenSet[str]
    lsm_categories: Tuple[Tuple[str, FrozenSet[str]], ...]

    @property
    def lsm_category_sets(self) -> List[FrozenSet[str]]:
        """按 LSM_CATEGORIES 顺序返回 9 个类别词集"""
        return [words for _, words in self.lsm_categories]

    def summary(self) -> str:
        return (
            f"v{self.version}: sentiment={len(self.sentiment)}, function={len(self.function_words)}, "
            f"social={len(self.social)}, cognitive={len(self.cognitive)}, affective={len(self.affective)}, "
            f"informal={len(self.informal_markers)}, formal={len(self.formal_markers)}"
        )


def _read_lines(path: Path) -> List[str]:
    """读取非空、非注释行"""
    if not path.exists():
        raise TextFeatureError(f"lexicon file not found: {path}")
    lines = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            lines.append(line)
    return lines


def _read_weighted(path: Path) -> Dict[str, float]:
    """解析 "word<TAB>value" 文件，只取前两列（兼容 VADER 原始四列格式）"""
    entries: Dict[str, float] = {}
    for line in _read_lines(path):
        parts = line.split("\t")
        if len(parts) < 2:
            logger.warning(f"[Lexicon] {path.name} 跳过格式错误的行: {line!r}")
            continue
        entries[parts[0].strip().lower()] = float(parts[1])
    return entries


def parse_dic(text: str) -> Dict[str, Set[str]]:
    """
    解析 LIWC 风格 .dic 文本

    同一词条允许出现多行，类别取并集。

    Returns:
        类别名 -> 词集
    """
    sections = text.split("%")
    if len(sections) < 3:
        raise TextFeatureError("malformed .dic file: expected '%' delimited category header")

    id_to_name: Dict[str, str] = {}
    for line in sections[1].splitlines():
        parts = line.split()
        if len(parts) == 2:
            id_to_name[parts[0]] = parts[1]

    categories: Dict[str, Set[str]] = {name: set() for name in id_to_name.values()}
    for line in "%".join(sections[2:]).splitlines():
        parts = line.split()
        if len(parts) < 2:
            continue
        word = parts[0].lower()
        for cat_id in parts[1:]:
            name = id_to_name.get(cat_id)
            if name is None:
                raise TextFeatureError(f"unknown category id {cat_id!r} for word {word!r}")
            categories[name].add(word)
    return categories


@lru_cache(maxsize=8)
def load_lexicons(lexicon_dir: Optional[str] = None) -> LexiconSet:
    """
    加载词典集合（按目录缓存）

    Args:
        lexicon_dir: 词典目录，默认使用随包发布的 src/data/lexicon

    Raises:
        TextFeatureError: 文件缺失、格式错误或某个集合为空
    """
    base = Path(lexicon_dir) if lexicon_dir else LEXICON_DIR
    version_file = base / "VERSION"
    version = version_file.read_text(encoding="utf-8").strip() if version_file.exists() else "unversioned"

    sentiment = _read_weighted(base / "sentiment_lexicon.txt")
    boosters = _read_weighted(base / "boosters.txt")
    negations = frozenset(w.lower() for w in _read_lines(base / "negations.txt"))
    dic_path = base / "style_categories.dic"
    if not dic_path.exists():
        raise TextFeatureError(f"lexicon file not found: {dic_path}")
    categories = parse_dic(dic_path.read_text(encoding="utf-8"))

    missing = [name for name in STYLE_CATEGORIES + LSM_CATEGORIES if not categories.get(name)]
    if missing or not sentiment or not negations:
        raise TextFeatureError(f"lexicon set incomplete in {base}: empty or missing {missing or 'sentiment/negations'}")

    lexicons = LexiconSet(
        version=version,
        sentiment=MappingProxyType(sentiment),
        boosters=MappingProxyType(boosters),
        negations=negations,
        function_words=frozenset(categories["function"]),
        social=frozenset(categories["social"]),
        cognitive=frozenset(categories["cognitive"]),
        affective=frozenset(categories["affective"]),
        informal_markers=frozenset(categories["informal"]),
        formal_markers=frozenset(categories["formal"]),
        lsm_categories=tuple((name, frozenset(categories[name])) for name in LSM_CATEGORIES),
    )
    logger.debug(f"[Lexicon] 词典加载完成 {lexicons.summary()}")
    return lexicons
