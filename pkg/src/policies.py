# -*- coding: utf-8 -*-
"""
===================================
风格适配策略
===================================

职责：
1. 定义策略配置（κ / α / ε / ρ）与会话内状态
2. 实现各策略的单步状态转移：(u_t, b_{t-1}, config) -> b_t
3. 以规则表分发策略类型，新增策略只需注册一条规则

所有向量均为标准化后的 (8,) numpy 数组。
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.enums import PolicyKind
from src.errors import PolicyError

logger = logging.getLogger(__name__)

DEFAULT_KAPPA = 0.25
DEFAULT_ALPHA = 0.5
DEFAULT_EPSILON = 0.1
DEFAULT_RHO = 1.5


@dataclass(frozen=True)
class PolicyConfig:
    """
    策略配置

    Attributes:
        kind: 策略类型
        kappa: 单步变化上限（z 单位）
        alpha: EMA 系数
        epsilon: 死区半径
        rho: 人设半径约束
        label: 输出表中的策略名，默认为 kind 字符串
    """
    kind: PolicyKind
    kappa: float = DEFAULT_KAPPA
    alpha: float = DEFAULT_ALPHA
    epsilon: float = DEFAULT_EPSILON
    rho: float = DEFAULT_RHO
    label: str = ""

    def __post_init__(self):
        if not isinstance(self.kind, PolicyKind):
            object.__setattr__(self, "kind", PolicyKind.from_str(self.kind))
        if not self.label:
            object.__setattr__(self, "label", self.kind.value)

        if math.isnan(self.kappa) or self.kappa < 0:
            raise PolicyError(f"kappa must be ≥ 0, got {self.kappa}")
        if not 0.0 <= self.alpha <= 1.0:
            raise PolicyError(f"alpha must be in [0, 1], got {self.alpha}")
        if math.isnan(self.epsilon) or self.epsilon < 0:
            raise PolicyError(f"epsilon must be ≥ 0, got {self.epsilon}")
        if math.isnan(self.rho) or self.rho <= 0:
            raise PolicyError(f"rho must be > 0, got {self.rho}")

    @property
    def display_name(self) -> str:
        return self.kind.display_name

    def to_dict(self) -> Dict[str, object]:
        return {
            "kind": self.kind.value,
            "kappa": self.kappa,
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "rho": self.rho,
            "label": self.label,
        }


@dataclass
class PolicyState:
    """
    会话内策略状态（单线程独占）

    Attributes:
        b_prev: 上一轮机器人风格 b_{t-1}；开局为人设锚点
        cache: 规范化话语文本 -> 风格向量（仅 hybrid_cache 使用）
        turn: 已执行的步数
    """
    b_prev: Optional[np.ndarray] = None
    cache: Dict[str, np.ndarray] = field(default_factory=dict)
    turn: int = 0

    @classmethod
    def seeded(cls, anchor: Sequence[float]) -> "PolicyState":
        return cls(b_prev=np.array(anchor, dtype=np.float64))


def normalize_cache_key(text: str) -> str:
    """小写并折叠空白"""
    return " ".join(text.lower().split())


# === 基本算子 ===

def cap_delta(delta: np.ndarray, kappa: float) -> np.ndarray:
    """长度超过 κ 时按比例缩放到 κ"""
    norm = float(np.linalg.norm(delta))
    if norm <= kappa:
        return delta
    return delta * (kappa / norm)


def ema_blend(b_prev: np.ndarray, u: np.ndarray, alpha: float) -> np.ndarray:
    return (1.0 - alpha) * b_prev + alpha * u


def deadband_gate(b_prev: np.ndarray, u: np.ndarray, epsilon: float) -> np.ndarray:
    """偏差严格大于 ε 才更新，否则保持"""
    if float(np.linalg.norm(u - b_prev)) > epsilon:
        return u
    return b_prev


def radius_clamp(b: np.ndarray, center: np.ndarray, rho: float) -> np.ndarray:
    """把 b 拉回以 center 为中心、半径 ρ 的球内"""
    offset = b - center
    dist = float(np.linalg.norm(offset))
    if dist <= rho:
        return b
    return center + offset * (rho / dist)


def _hybrid(b_prev: np.ndarray, u: np.ndarray, cfg: PolicyConfig) -> np.ndarray:
    return b_prev + cap_delta(ema_blend(b_prev, u, cfg.alpha) - b_prev, cfg.kappa)


# === 策略规则表 ===

_StepRule = Callable[[np.ndarray, np.ndarray, PolicyConfig, np.ndarray], np.ndarray]

_RULES: Dict[PolicyKind, _StepRule] = {
    PolicyKind.STATIC: lambda b_prev, u, cfg, centroid: centroid,
    PolicyKind.UNCAPPED: lambda b_prev, u, cfg, centroid: u,
    PolicyKind.CAP: lambda b_prev, u, cfg, centroid: b_prev + cap_delta(u - b_prev, cfg.kappa),
    PolicyKind.EMA: lambda b_prev, u, cfg, centroid: ema_blend(b_prev, u, cfg.alpha),
    PolicyKind.DEADBAND: lambda b_prev, u, cfg, centroid: deadband_gate(b_prev, u, cfg.epsilon),
    PolicyKind.HYBRID: lambda b_prev, u, cfg, centroid: _hybrid(b_prev, u, cfg),
    PolicyKind.HYBRID_RADIUS: lambda b_prev, u, cfg, centroid: radius_clamp(
        _hybrid(b_prev, u, cfg), centroid, cfg.rho
    ),
    PolicyKind.HYBRID_CACHE: lambda b_prev, u, cfg, centroid: _hybrid(b_prev, u, cfg),
}


def policy_step(
    cfg: PolicyConfig,
    state: PolicyState,
    u: np.ndarray,
    user_text: str,
    centroid: np.ndarray,
) -> Tuple[np.ndarray, bool]:
    """
    执行一步策略更新，并把 b_next 写回 state.b_prev

    Returns:
        (b_next, cache_hit)

    Raises:
        PolicyError: 状态未用人设锚点初始化
    """
    if state.b_prev is None:
        raise PolicyError("state not seeded with centroid")

    u = np.asarray(u, dtype=np.float64)
    centroid = np.asarray(centroid, dtype=np.float64)

    cache_hit = False
    key = None
    if cfg.kind is PolicyKind.HYBRID_CACHE:
        key = normalize_cache_key(user_text)
        cached = state.cache.get(key)
        if cached is not None:
            cache_hit = True
            b_next = cached

    if not cache_hit:
        b_next = np.array(_RULES[cfg.kind](state.b_prev, u, cfg, centroid), dtype=np.float64)
        if key is not None:
            state.cache[key] = b_next

    state.b_prev = b_next
    state.turn += 1
    return b_next, cache_hit


def run_policy(
    cfg: PolicyConfig,
    anchor: np.ndarray,
    user_vectors: Sequence[np.ndarray],
    user_texts: Optional[Sequence[str]] = None,
) -> List[Tuple[np.ndarray, bool]]:
    """
    对整段用户向量序列执行策略

    Args:
        anchor: b_0，同时作为 Static 目标与半径中心
        user_texts: 缓存键来源；缺省时以序号占位（不会命中缓存）
    """
    if user_texts is not None and len(user_texts) != len(user_vectors):
        raise PolicyError("user_texts and user_vectors differ in length")

    state = PolicyState.seeded(anchor)
    texts = user_texts if user_texts is not None else [f"\x00{i}" for i in range(len(user_vectors))]
    return [policy_step(cfg, state, u, text, anchor) for u, text in zip(user_vectors, texts)]
