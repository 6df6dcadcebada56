# -*- coding: utf-8 -*-
"""
===================================
评测指标
===================================

职责：
1. 余弦相似度（含零向量约定）
2. 单轮指标：同步性 / 稳定性 / 一致性 / churn / 语域分箱 / 翻转
3. 会话级汇总：均值、翻转率、缓存命中率、可读性（legibility）
4. 经典 LSM、窗口预测同步性、帕累托前沿

各项均为纯函数，可在任意线程中并行调用。
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from src.enums import RegisterBin
from src.errors import MetricError
from src.promptgen import MAX_CHURN, InstructionSet, instruction_churn
from src.textfeat import category_rate, tokenize

logger = logging.getLogger(__name__)

# 范数不超过该值视为零向量
ZERO_NORM_EPS = 1e-12

FORMAL_UPPER = 0.33
NEUTRAL_UPPER = 0.66

LSM_SMOOTHING = 0.0001

# 会话汇总中取均值的单轮指标
SESSION_METRICS = ("synchrony", "stability", "coherence", "legibility", "flip_rate", "cache_hit_rate")


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """
    a·b / (‖a‖‖b‖)，结果截断到 [-1, 1]

    约定：两者皆为零向量 -> 1.0；仅一方为零向量 -> 0.0；两向量逐位相同 -> 恰为 1.0
    """
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    a_zero = na <= ZERO_NORM_EPS
    b_zero = nb <= ZERO_NORM_EPS
    if a_zero and b_zero:
        return 1.0
    if a_zero or b_zero:
        return 0.0
    if np.array_equal(va, vb):
        return 1.0
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


def register_bin(informality_raw: float) -> RegisterBin:
    """< 0.33 Formal；≤ 0.66 Neutral；其余 Informal"""
    if math.isnan(informality_raw) or not 0.0 <= informality_raw <= 1.0:
        raise MetricError(f"informality must be in [0, 1], got {informality_raw}")
    if informality_raw < FORMAL_UPPER:
        return RegisterBin.FORMAL
    if informality_raw <= NEUTRAL_UPPER:
        return RegisterBin.NEUTRAL
    return RegisterBin.INFORMAL


@dataclass(frozen=True)
class TurnMetrics:
    synchrony: float
    stability: float
    coherence: float
    churn: int
    register_bin: RegisterBin
    flipped: bool
    cache_hit: bool = False


def turn_metrics(
    u_t: np.ndarray,
    b_t: np.ndarray,
    b_prev: np.ndarray,
    archetype_z: np.ndarray,
    prev_instr: InstructionSet,
    cur_instr: InstructionSet,
    prev_bin: Optional[RegisterBin],
    informality_raw: float,
    cache_hit: bool = False,
) -> TurnMetrics:
    """
    单轮指标

    Args:
        prev_bin: 上一轮语域分箱；首轮传 None（flipped 恒为 False）
        informality_raw: 本轮机器人风格的原始非正式度
    """
    current_bin = register_bin(informality_raw)
    return TurnMetrics(
        synchrony=cosine(u_t, b_t),
        stability=cosine(b_t, b_prev),
        coherence=cosine(b_t, archetype_z),
        churn=instruction_churn(prev_instr, cur_instr),
        register_bin=current_bin,
        flipped=prev_bin is not None and current_bin is not prev_bin,
        cache_hit=cache_hit,
    )


def flip_rate(bins: Sequence[RegisterBin]) -> float:
    """相邻分箱发生变化的比例；不足 2 个时为 0.0"""
    if len(bins) < 2:
        return 0.0
    changes = sum(1 for prev, cur in zip(bins, bins[1:]) if prev != cur)
    return changes / (len(bins) - 1)


def legibility_score(churns: Sequence[int]) -> float:
    """1 − mean(churn)/16，截断到 [0, 1]；空序列为 1.0"""
    if len(churns) == 0:
        return 1.0
    score = 1.0 - math.fsum(churns) / len(churns) / MAX_CHURN
    return min(1.0, max(0.0, score))


@dataclass(frozen=True)
class SessionSummary:
    """单个 策略 × 会话 的汇总行"""
    corpus: str
    policy: str
    session_id: str
    participant_id: str
    synchrony: float
    stability: float
    coherence: float
    legibility: float
    flip_rate: float
    cache_hit_rate: float
    n_turns: int
    mean_churn: float = 0.0

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def _mean(values: Iterable[float]) -> float:
    values = list(values)
    return math.fsum(values) / len(values) if values else 0.0


def summarize_session(
    turns: Sequence[TurnMetrics],
    session_id: str,
    participant_id: str,
    policy: str,
    corpus: str = "",
) -> SessionSummary:
    """逐轮指标取均值，得到会话级汇总"""
    if not turns:
        raise MetricError(f"session {session_id} has no scored turns")
    churns = [t.churn for t in turns]
    return SessionSummary(
        corpus=corpus,
        policy=policy,
        session_id=session_id,
        participant_id=participant_id,
        synchrony=_mean(t.synchrony for t in turns),
        stability=_mean(t.stability for t in turns),
        coherence=_mean(t.coherence for t in turns),
        legibility=legibility_score(churns),
        flip_rate=flip_rate([t.register_bin for t in turns]),
        cache_hit_rate=sum(1 for t in turns if t.cache_hit) / len(turns),
        n_turns=len(turns),
        mean_churn=_mean(churns),
    )


# === 经典 LSM ===

def classic_lsm(text_a: str, text_b: str, category_sets: Sequence[Iterable[str]]) -> float:
    """
    功能词类别的经典 LSM：各类别 1 − |p_a − p_b| / (p_a + p_b + 0.0001) 的均值

    Raises:
        MetricError: 任一文本不含 token，或类别列表为空
    """
    if not tokenize(text_a) or not tokenize(text_b):
        raise MetricError("empty utterance")
    if not category_sets:
        raise MetricError("no LSM categories given")

    scores = []
    for words in category_sets:
        words = words if isinstance(words, (set, frozenset)) else frozenset(words)
        p_a = category_rate(text_a, words)
        p_b = category_rate(text_b, words)
        scores.append(1.0 - abs(p_a - p_b) / (p_a + p_b + LSM_SMOOTHING))
    return math.fsum(scores) / len(scores)


# === 窗口预测同步性 ===

def session_predictive_synchrony(user_vectors: np.ndarray, k: int) -> List[float]:
    """
    单会话内每个合格轮次的预测同步性

    轮次 t（0 起）合格当且仅当 t ≥ k−1 且存在 t+1；
    取 u_{t−k+1..t} 的均值与 u_{t+1} 的余弦。
    """
    n = len(user_vectors)
    out = []
    for t in range(k - 1, n - 1):
        window = np.mean(user_vectors[t - k + 1:t + 1], axis=0)
        out.append(cosine(window, user_vectors[t + 1]))
    return out


def predictive_synchrony(sessions: Sequence[np.ndarray], k: int) -> float:
    """
    先按会话求均值，再跨会话求均值

    Args:
        sessions: 每个会话的标准化用户向量序列 (n_i, 8)
        k: 窗口大小（≥ 1）

    Raises:
        MetricError: k < 1，或没有任何合格轮次（"insufficient history"）
    """
    if k < 1:
        raise MetricError(f"window size must be ≥ 1, got {k}")

    per_session = []
    for vectors in sessions:
        scores = session_predictive_synchrony(np.asarray(vectors, dtype=np.float64), k)
        if scores:
            per_session.append(math.fsum(scores) / len(scores))

    if not per_session:
        raise MetricError("insufficient history")
    return math.fsum(per_session) / len(per_session)


# === 帕累托前沿 ===

def pareto_frontier(points: Mapping[str, Tuple[float, float]]) -> Set[str]:
    """
    返回未被支配的点

    points: 名称 -> (stability, synchrony)，两者均越大越好。
    若另一点在两个维度上都不差且至少一个维度严格更好，则该点被支配。
    """
    efficient = set()
    for name, (stab, sync) in points.items():
        dominated = any(
            other != name and o_stab >= stab and o_sync >= sync and (o_stab > stab or o_sync > sync)
            for other, (o_stab, o_sync) in points.items()
        )
        if not dominated:
            efficient.add(name)
    return efficient
