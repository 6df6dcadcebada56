# -*- coding: utf-8 -*-
"""
===================================
文本风格特征提取
===================================

职责：
1. 分词、分句、音节计数
2. 计算 8 维原始风格向量（顺序固定）：
   informality, sentiment, avg_sentence_len, readability,
   social_rate, cognitive_rate, affective_rate, function_word_ratio
3. 提供仅保留功能词的文本过滤（用于稳健性分析）

全部为纯函数，词典加载后可被任意线程并发调用。
"""

import logging
import math
import re
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, Sequence

import numpy as np
from scipy.special import expit

from src.errors import TextFeatureError
from src.lexicon import LexiconSet

logger = logging.getLogger(__name__)

FEATURE_NAMES = (
    "informality",
    "sentiment",
    "avg_sentence_len",
    "readability",
    "social_rate",
    "cognitive_rate",
    "affective_rate",
    "function_word_ratio",
)
N_FEATURES = len(FEATURE_NAMES)

# Flesch Reading Ease 常数
FLESCH_BASE = 206.835
FLESCH_SENTENCE_WEIGHT = 1.015
FLESCH_SYLLABLE_WEIGHT = 84.6

# 情感打分常数（与 VADER 一致）
NEGATION_SCALAR = -0.74
NEGATION_WINDOW = 3
BOOSTER_DECAY = (1.0, 0.95, 0.9)
NORMALIZE_ALPHA = 15.0

VOWELS = "aeiouy"

_TOKEN_RE = re.compile(r"[^\W_]+(?:'[^\W_]+)*")
_SENTENCE_SPLIT_RE = re.compile(r"[.!?]+")
_REPEATED_PUNCT_RE = re.compile(r"[!?]{2,}")
_LOWER_I_RE = re.compile(r"(?<![\w'])i(?!\w)")
_VOWEL_RUN_RE = re.compile(f"[{VOWELS}]+")
_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'"})


@dataclass(frozen=True)
class InformalityWeights:
    """
    非正式度线性组合的权重

    logit = Σ w·cue，截距为 0，因此无任何线索的文本得分为 0.5。
    """
    informal_rate: float = 6.0
    contraction_rate: float = 3.0
    lowercase_i: float = 0.5
    repeated_punct: float = 0.75
    all_lowercase: float = 1.0
    formal_rate: float = -6.0
    word_length_excess: float = -0.8
    word_length_pivot: float = 4.5


DEFAULT_INFORMALITY_WEIGHTS = InformalityWeights()


@dataclass(frozen=True)
class RawStyleVector:
    """8 维原始风格向量"""
    informality: float
    sentiment: float
    avg_sentence_len: float
    readability: float
    social_rate: float
    cognitive_rate: float
    affective_rate: float
    function_word_ratio: float

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=np.float64)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "RawStyleVector":
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (N_FEATURES,):
            raise TextFeatureError(f"style vector must have {N_FEATURES} components, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise TextFeatureError("style vector components must be finite")
        return cls(*(float(x) for x in arr))

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> "RawStyleVector":
        missing = [name for name in FEATURE_NAMES if name not in data]
        if missing:
            raise TextFeatureError(f"style vector missing features: {missing}")
        return cls.from_array([data[name] for name in FEATURE_NAMES])


# === 分词 / 分句 / 音节 ===

def tokenize(text: str) -> List[str]:
    """小写化分词：字母、数字与词内撇号组成 token，其余字符均为分隔符"""
    return _TOKEN_RE.findall(text.translate(_APOSTROPHES).lower())


def split_sentences(text: str) -> List[str]:
    """按 [.!?]+ 及文本结尾切分，丢弃不含 token 的片段"""
    return [seg for seg in _SENTENCE_SPLIT_RE.split(text) if _TOKEN_RE.search(seg)]


def count_syllables(word: str) -> int:
    """
    元音组启发式音节计数

    规则：统计最长元音串数；词尾 'e' 前为辅音时视为不发音（"le" 前为辅音的除外）；下限为 1。
    不含字母的 token 视为单音节。
    """
    letters = "".join(ch for ch in word.lower() if ch.isalpha())
    if not letters:
        return 1

    count = len(_VOWEL_RUN_RE.findall(letters))
    if len(letters) >= 2 and letters[-1] == "e" and letters[-2] not in VOWELS:
        consonant_le = letters[-2] == "l" and len(letters) >= 3 and letters[-3] not in VOWELS
        if not consonant_le:
            count -= 1
    return max(1, count)


def _require_tokens(text: str) -> List[str]:
    tokens = tokenize(text)
    if not tokens:
        raise TextFeatureError("empty utterance")
    return tokens


# === 单项特征 ===

def flesch_reading_ease(text: str) -> float:
    """206.835 − 1.015·(words/sentences) − 84.6·(syllables/words)"""
    tokens = _require_tokens(text)
    n_words = len(tokens)
    n_sentences = max(1, len(split_sentences(text)))
    n_syllables = sum(count_syllables(t) for t in tokens)
    return (
        FLESCH_BASE
        - FLESCH_SENTENCE_WEIGHT * (n_words / n_sentences)
        - FLESCH_SYLLABLE_WEIGHT * (n_syllables / n_words)
    )


def _is_negation(token: str, lex: LexiconSet) -> bool:
    return token in lex.negations or token.endswith("n't")


def sentiment_compound(text: str, lex: LexiconSet) -> float:
    """
    词典情感复合分

    - 前 3 个 token 内的增强/减弱词按距离衰减叠加（方向跟随词条极性）
    - 前 3 个 token 内出现否定词时词条得分乘以 -0.74
    - 总分 x 归一化为 x / sqrt(x² + 15)
    """
    tokens = tokenize(text)
    total = 0.0
    for i, token in enumerate(tokens):
        valence = lex.sentiment.get(token)
        if valence is None:
            continue

        window = tokens[max(0, i - NEGATION_WINDOW):i][::-1]
        for distance, prev in enumerate(window):
            scalar = lex.boosters.get(prev)
            if scalar is not None:
                scalar *= BOOSTER_DECAY[distance]
                valence += scalar if valence >= 0 else -scalar

        if any(_is_negation(prev, lex) for prev in window):
            valence *= NEGATION_SCALAR

        total += valence

    if total == 0.0:
        return 0.0
    score = total / math.sqrt(total * total + NORMALIZE_ALPHA)
    return max(-1.0, min(1.0, score))


@lru_cache(maxsize=8)
def _symbolic_markers(lex: LexiconSet) -> FrozenSet[str]:
    """不能被分词器识别的口语标记（表情符号等），按空白切分匹配"""
    return frozenset(m for m in lex.informal_markers if not _TOKEN_RE.fullmatch(m))


def informality_cues(
    text: str,
    lex: LexiconSet,
    length_pivot: float = DEFAULT_INFORMALITY_WEIGHTS.word_length_pivot,
) -> Dict[str, float]:
    """提取非正式度的可观测线索"""
    tokens = tokenize(text)
    n = max(1, len(tokens))
    chunks = text.translate(_APOSTROPHES).lower().split()
    symbolic = _symbolic_markers(lex)

    informal_hits = sum(1 for t in tokens if t in lex.informal_markers)
    informal_hits += sum(1 for c in chunks if c in symbolic)
    mean_len = float(np.mean([len(t) for t in tokens])) if tokens else 0.0
    has_letters = any(ch.isalpha() for ch in text)

    return {
        "informal_rate": informal_hits / n,
        "contraction_rate": sum(1 for t in tokens if "'" in t) / n,
        "lowercase_i": float(len(_LOWER_I_RE.findall(text.translate(_APOSTROPHES)))),
        "repeated_punct": float(len(_REPEATED_PUNCT_RE.findall(text))),
        "all_lowercase": 1.0 if has_letters and not any(ch.isupper() for ch in text) else 0.0,
        "formal_rate": sum(1 for t in tokens if t in lex.formal_markers) / n,
        "word_length_excess": max(0.0, mean_len - length_pivot) if tokens else 0.0,
    }


def informality_score(
    text: str,
    lex: LexiconSet,
    weights: InformalityWeights = DEFAULT_INFORMALITY_WEIGHTS,
) -> float:
    """线索线性组合的 logistic 压缩，取值 (0, 1)；无线索时为 0.5"""
    cues = informality_cues(text, lex, weights.word_length_pivot)
    logit = sum(getattr(weights, name) * value for name, value in cues.items())
    return float(expit(logit))


def function_word_ratio(text: str, lex: LexiconSet) -> float:
    tokens = _require_tokens(text)
    return sum(1 for t in tokens if t in lex.function_words) / len(tokens)


def category_rate(text: str, category_set: Iterable[str]) -> float:
    """|tokens ∈ set| / max(1, |tokens|)"""
    tokens = tokenize(text)
    words = category_set if isinstance(category_set, (set, frozenset)) else frozenset(category_set)
    return sum(1 for t in tokens if t in words) / max(1, len(tokens))


def function_word_filter(text: str, lex: LexiconSet) -> str:
    """只保留功能词（保持原顺序，空格连接）"""
    return " ".join(t for t in tokenize(text) if t in lex.function_words)


# === 风格向量 ===

def style_vector(text: str, lex: LexiconSet) -> RawStyleVector:
    """
    计算单条话语的原始风格向量

    Raises:
        TextFeatureError: 空文本或不含任何 token
    """
    if not text or not text.strip():
        raise TextFeatureError("empty utterance")
    tokens = _require_tokens(text)
    n_sentences = max(1, len(split_sentences(text)))

    return RawStyleVector(
        informality=informality_score(text, lex),
        sentiment=sentiment_compound(text, lex),
        avg_sentence_len=len(tokens) / n_sentences,
        readability=flesch_reading_ease(text),
        social_rate=category_rate(text, lex.social),
        cognitive_rate=category_rate(text, lex.cognitive),
        affective_rate=category_rate(text, lex.affective),
        function_word_ratio=function_word_ratio(text, lex),
    )


def style_matrix(texts: Sequence[str], lex: LexiconSet) -> np.ndarray:
    """批量向量化，返回 (n, 8) 矩阵"""
    if not texts:
        return np.empty((0, N_FEATURES), dtype=np.float64)
    return np.vstack([style_vector(t, lex).to_array() for t in texts])
