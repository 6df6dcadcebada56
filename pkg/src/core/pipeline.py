# -*- coding: utf-8 -*-
"""
===================================
风格同步回放 - 核心流水线
===================================

职责：
1. 向量化会话（每个会话只做一次，供所有策略共享）
2. 逐轮回放：policy_step -> 目标向量 -> 指令集合 -> 单轮指标
3. 策略 × 会话 的消融运行（会话级并发，聚合与完成顺序无关）
4. 窗口预测同步性消融、经典 LSM 验证
5. 从语料拟合人设模型
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from corpus_provider import filter_sessions
from corpus_provider.base import MIN_USER_TURNS
from src.config import Config, get_config
from src.enums import FitSource, PersonaAnchor
from src.errors import ReplayError, StatsError, StyleSyncError, TextFeatureError
from src.lexicon import LexiconSet, load_lexicons
from src.metrics import (
    SESSION_METRICS,
    SessionSummary,
    TurnMetrics,
    classic_lsm,
    cosine,
    predictive_synchrony,
    summarize_session,
    turn_metrics,
)
from src.models import SessionLog
from src.persona import PersonaModel, fit_persona
from src.policies import PolicyConfig, PolicyState, policy_step
from src.promptgen import FragmentTable, load_fragment_table, vector_to_instructions
from src.stats import spearman
from src.textfeat import RawStyleVector, function_word_filter, style_matrix, style_vector, tokenize

logger = logging.getLogger(__name__)


@dataclass
class PreparedSession:
    """
    向量化后的会话

    Attributes:
        session: 原始会话
        user_texts: 非空用户话语（按顺序）
        user_raw: 对应原始风格向量 (n, 8)
        user_z: 对应标准化向量 (n, 8)
        pairs: (用户话语, 紧随其后的日志机器人回复) 文本对
    """
    session: SessionLog
    user_texts: List[str]
    user_raw: np.ndarray
    user_z: np.ndarray
    pairs: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def session_id(self) -> str:
        return self.session.session_id


@dataclass
class SessionRun:
    """单个 策略 × 会话 的回放结果"""
    turns: List[TurnMetrics]
    summary: SessionSummary


@dataclass
class PolicySummary:
    """
    单个策略在整个语料上的汇总（先会话内平均，再跨会话平均）
    """
    policy: str
    kind: str
    n_sessions: int
    means: Dict[str, float]
    stds: Dict[str, float]
    rows: List[SessionSummary] = field(default_factory=list)


@dataclass
class AblationResult:
    corpus: str
    rows: List[SessionSummary]
    policy_summaries: List[PolicySummary]
    failures: List[Tuple[str, str, str]] = field(default_factory=list)

    def summary_for(self, policy: str) -> PolicySummary:
        for summary in self.policy_summaries:
            if summary.policy == policy:
                return summary
        raise KeyError(policy)


# === 向量化 ===

def prepare_session(session: SessionLog, persona: PersonaModel, lexicons: Optional[LexiconSet] = None) -> PreparedSession:
    """
    向量化会话中的用户话语

    空文本或无 token 的用户话语跳过并记录日志。

    Raises:
        ReplayError: 有效用户话语不足 3 条
    """
    lexicons = lexicons or load_lexicons()
    texts = []
    for utt in session.user_turns:
        if utt.is_empty or not tokenize(utt.text):
            logger.warning(f"[Replay] {session.session_id} 第 {utt.turn_index} 轮用户话语为空，跳过")
            continue
        texts.append(utt.text)

    if len(texts) < MIN_USER_TURNS:
        raise ReplayError(
            f"session {session.session_id} has {len(texts)} usable user turns (< {MIN_USER_TURNS})"
        )

    user_raw = style_matrix(texts, lexicons)
    pairs = [
        (u.text, b.text)
        for u, b in session.user_bot_pairs()
        if tokenize(u.text) and tokenize(b.text)
    ]
    return PreparedSession(
        session=session,
        user_texts=texts,
        user_raw=user_raw,
        user_z=(user_raw - persona.scaler.mean_array) / persona.scaler.std_array,
        pairs=pairs,
    )


# === 单会话回放 ===

def replay_prepared(
    policy: PolicyConfig,
    prepared: PreparedSession,
    persona: PersonaModel,
    anchor: PersonaAnchor = PersonaAnchor.CENTROID,
    fragment_table: Optional[FragmentTable] = None,
    thresholds=None,
    corpus: str = "",
) -> SessionRun:
    """
    对已向量化的会话执行一次策略回放

    b_0 为人设锚点；语域分箱取 b_t 反标准化后的非正式度（截断到 [0, 1]）。
    """
    table = fragment_table or load_fragment_table()
    anchor_vec = persona.anchor(anchor)
    archetype_z = persona.archetype_z
    state = PolicyState.seeded(anchor_vec)

    prev_instr = vector_to_instructions(anchor_vec, table, thresholds)
    prev_bin = None
    turns: List[TurnMetrics] = []
    for u_t, text in zip(prepared.user_z, prepared.user_texts):
        b_prev = state.b_prev
        b_t, cache_hit = policy_step(policy, state, u_t, text, anchor_vec)
        cur_instr = vector_to_instructions(b_t, table, thresholds)
        informality = float(np.clip(persona.inverse_transform(b_t)[0], 0.0, 1.0))

        metrics = turn_metrics(
            u_t, b_t, b_prev, archetype_z, prev_instr, cur_instr, prev_bin, informality, cache_hit
        )
        turns.append(metrics)
        prev_instr, prev_bin = cur_instr, metrics.register_bin

    session = prepared.session
    summary = summarize_session(turns, session.session_id, session.participant_id, policy.label, corpus)
    return SessionRun(turns=turns, summary=summary)


def run_session(
    policy: PolicyConfig,
    session: SessionLog,
    persona: PersonaModel,
    anchor: PersonaAnchor = PersonaAnchor.CENTROID,
    corpus: str = "",
) -> SessionRun:
    """
    回放单个会话

    Raises:
        ReplayError: 会话不满足过滤条件
    """
    if session.n_user_turns < MIN_USER_TURNS:
        raise ReplayError(f"session {session.session_id} fails the {MIN_USER_TURNS}-user-turn filter")
    return replay_prepared(policy, prepare_session(session, persona), persona, anchor=anchor, corpus=corpus)


# === 聚合 ===

def aggregate_policy(policy: PolicyConfig, rows: Sequence[SessionSummary]) -> PolicySummary:
    """按 session_id 排序后求均值与总体标准差，结果与会话完成顺序无关"""
    ordered = sorted(rows, key=lambda r: r.session_id)
    metrics = SESSION_METRICS + ("mean_churn",)
    means, stds = {}, {}
    for metric in metrics:
        values = [getattr(r, metric) for r in ordered]
        mean = math.fsum(values) / len(values) if values else float("nan")
        var = math.fsum((v - mean) ** 2 for v in values) / len(values) if values else float("nan")
        means[metric] = mean
        stds[metric] = math.sqrt(var)
    return PolicySummary(
        policy=policy.label,
        kind=policy.display_name,
        n_sessions=len(ordered),
        means=means,
        stds=stds,
        rows=ordered,
    )


def fit_persona_from_sessions(
    sessions: Sequence[SessionLog],
    corpus: str,
    fit_on: FitSource = FitSource.BOT,
    raw_archetype: Optional[RawStyleVector] = None,
    lexicons: Optional[LexiconSet] = None,
) -> PersonaModel:
    """
    用语料中的话语拟合人设模型

    Args:
        fit_on: bot 只用机器人话语；all 用全部话语
        raw_archetype: 为 None 时取拟合语料原始均值
    """
    lexicons = lexicons or load_lexicons()
    vectors = []
    skipped = 0
    for session in sessions:
        for utt in session.turns:
            if fit_on is FitSource.BOT and utt.is_user:
                continue
            try:
                vectors.append(style_vector(utt.text, lexicons))
            except TextFeatureError:
                skipped += 1
    if skipped:
        logger.info(f"[Persona] {corpus}: 跳过 {skipped} 条空话语")
    return fit_persona(vectors, fitted_on=corpus, raw_archetype=raw_archetype)


class ReplayPipeline:
    """
    回放主流程调度器

    职责：
    1. 会话级并发向量化与回放
    2. 收集结果并按确定性顺序聚合
    3. 单会话异常只记录，不影响整体
    """

    def __init__(
        self,
        persona: PersonaModel,
        corpus: str = "",
        anchor: PersonaAnchor = PersonaAnchor.CENTROID,
        thresholds=None,
        config: Optional[Config] = None,
        max_workers: Optional[int] = None,
        lexicons: Optional[LexiconSet] = None,
        fragment_table: Optional[FragmentTable] = None,
    ):
        self.config = config or get_config()
        self.max_workers = max(1, max_workers or self.config.max_workers)
        self.persona = persona
        self.corpus = corpus
        self.anchor = anchor
        self.thresholds = thresholds
        self.lexicons = lexicons or load_lexicons()
        self.fragment_table = fragment_table or load_fragment_table()
        logger.info(f"[Replay] {corpus}: 调度器初始化完成，最大并发数 {self.max_workers}，锚点 {anchor.value}")

    def prepare(self, sessions: Sequence[SessionLog]) -> List[PreparedSession]:
        """并发向量化；失败的会话记录日志后丢弃，结果按 session_id 排序"""
        prepared: List[PreparedSession] = []
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            future_to_id = {
                executor.submit(prepare_session, s, self.persona, self.lexicons): s.session_id for s in sessions
            }
            for future in as_completed(future_to_id):
                session_id = future_to_id[future]
                try:
                    prepared.append(future.result())
                except StyleSyncError as e:
                    logger.warning(f"[Replay] {session_id} 向量化失败，跳过: {e}")
        prepared.sort(key=lambda p: p.session_id)
        logger.info(f"[Replay] {self.corpus}: 向量化完成 {len(prepared)}/{len(sessions)} 个会话")
        return prepared

    def _replay_all_policies(
        self, policies: Sequence[PolicyConfig], prepared: PreparedSession
    ) -> List[SessionRun]:
        return [
            replay_prepared(
                policy,
                prepared,
                self.persona,
                anchor=self.anchor,
                fragment_table=self.fragment_table,
                thresholds=self.thresholds,
                corpus=self.corpus,
            )
            for policy in policies
        ]

    def run_ablation(
        self,
        policies: Sequence[PolicyConfig],
        sessions: Sequence[SessionLog] = (),
        prepared: Optional[Sequence[PreparedSession]] = None,
    ) -> AblationResult:
        """
        策略 × 会话 全组合回放

        Raises:
            ReplayError: 策略或会话为空
        """
        if not policies:
            raise ReplayError("no policies to run")
        labels = [p.label for p in policies]
        if len(set(labels)) != len(labels):
            raise ReplayError(f"policy labels must be unique: {labels}")
        if prepared is None:
            prepared = self.prepare(filter_sessions(sessions))
        if not prepared:
            raise ReplayError("no sessions to replay")

        start_time = time.time()
        logger.info(f"===== [Replay] {self.corpus}: {len(policies)} 个策略 × {len(prepared)} 个会话 =====")

        per_policy: Dict[str, List[SessionSummary]] = {p.label: [] for p in policies}
        failures: List[Tuple[str, str, str]] = []
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            future_to_id = {
                executor.submit(self._replay_all_policies, policies, p): p.session_id for p in prepared
            }
            for future in as_completed(future_to_id):
                session_id = future_to_id[future]
                try:
                    for policy, run in zip(policies, future.result()):
                        per_policy[policy.label].append(run.summary)
                except StyleSyncError as e:
                    logger.warning(f"[Replay] {session_id} 回放失败: {e}")
                    failures.append(("all", session_id, str(e)))

        summaries = [aggregate_policy(p, per_policy[p.label]) for p in policies if per_policy[p.label]]
        rows = [row for s in summaries for row in s.rows]

        elapsed = time.time() - start_time
        logger.info(f"===== [Replay] {self.corpus} 完成: {len(rows)} 行，失败 {len(failures)}，耗时 {elapsed:.2f} 秒 =====")
        for s in summaries:
            logger.info(
                f"[Replay] {s.policy:<14} sync={s.means['synchrony']:.3f} stab={s.means['stability']:.3f} "
                f"coh={s.means['coherence']:.3f} flip={s.means['flip_rate']:.3f} leg={s.means['legibility']:.3f}"
            )
        return AblationResult(corpus=self.corpus, rows=rows, policy_summaries=summaries, failures=failures)

    def window_ablation(self, prepared: Sequence[PreparedSession], windows: Sequence[int]) -> List[Dict[str, object]]:
        """各窗口大小下的预测同步性；历史不足的窗口记为 NaN"""
        sequences = [p.user_z for p in prepared]
        rows = []
        for k in windows:
            eligible = sum(1 for seq in sequences if len(seq) > k)
            try:
                value = predictive_synchrony(sequences, k)
            except StyleSyncError as e:
                logger.warning(f"[Replay] 窗口 k={k}: {e}")
                value = float("nan")
            rows.append({"window": k, "predictive_synchrony": value, "n_sessions": eligible})
            logger.info(f"[Replay] 窗口 k={k}: 预测同步性 {value:.4f}（{eligible} 个会话）")
        return rows

    def lsm_validation(self, prepared: Sequence[PreparedSession]) -> List[Dict[str, object]]:
        """
        经典 LSM 验证与功能词稳健性

        - vector_vs_lsm: cosine(z(user), z(bot)) 与 classic_lsm(user, bot) 的 Spearman
        - full_vs_function_words: 全文本同步性与只保留功能词后的同步性的 Spearman
        """
        lsm_sets = self.lexicons.lsm_category_sets
        vec_sync, lsm_scores = [], []
        full_sync, fw_sync = [], []

        for prep in prepared:
            for user_text, bot_text in prep.pairs:
                try:
                    zu = self.persona.standardize(style_vector(user_text, self.lexicons))
                    zb = self.persona.standardize(style_vector(bot_text, self.lexicons))
                except TextFeatureError:
                    continue
                sync = cosine(zu, zb)
                vec_sync.append(sync)
                lsm_scores.append(classic_lsm(user_text, bot_text, lsm_sets))

                fu = function_word_filter(user_text, self.lexicons)
                fb = function_word_filter(bot_text, self.lexicons)
                if not fu or not fb:
                    continue
                full_sync.append(sync)
                fw_sync.append(
                    cosine(
                        self.persona.standardize(style_vector(fu, self.lexicons)),
                        self.persona.standardize(style_vector(fb, self.lexicons)),
                    )
                )

        rows = []
        for name, x, y in (
            ("vector_vs_lsm", vec_sync, lsm_scores),
            ("full_vs_function_words", full_sync, fw_sync),
        ):
            try:
                rho, p = spearman(x, y)
            except StatsError as e:
                logger.warning(f"[Replay] LSM 验证 {name} 跳过: {e}")
                rho, p = float("nan"), float("nan")
            rows.append({"analysis": name, "rho": rho, "p": p, "n_pairs": len(x)})
            logger.info(f"[Replay] LSM 验证 {name}: rho={rho:.4f} p={p:.4g} n={len(x)}")
        return rows


def run_ablation(
    policies: Sequence[PolicyConfig],
    corpus: Sequence[SessionLog],
    persona: PersonaModel,
    anchor: PersonaAnchor = PersonaAnchor.CENTROID,
    corpus_name: str = "",
    max_workers: Optional[int] = None,
) -> AblationResult:
    """便捷入口：过滤、向量化并回放全部策略"""
    pipeline = ReplayPipeline(persona, corpus=corpus_name, anchor=anchor, max_workers=max_workers)
    return pipeline.run_ablation(policies, corpus)
