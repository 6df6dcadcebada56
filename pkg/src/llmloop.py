# -*- coding: utf-8 -*-
"""
===================================
闭环回放 - 生成器在环
===================================

职责：
1. 每个用户轮次：policy_step 得到目标风格 -> 指令集合 -> 组合提示词 -> 生成器回复
2. 对真实回复向量化，以实现的风格 b_t（而非理想目标）计算指标
3. 有界并发地运行 策略 × 会话；生成失败的会话标记为 incomplete 并从汇总中剔除

与向量空间回放的区别：策略状态的 b_prev 取上一轮实际实现的风格，缓存中存放的是目标向量。
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.pipeline import AblationResult, PreparedSession, aggregate_policy
from src.enums import PersonaAnchor
from src.errors import ReplayError, StyleSyncError, TextFeatureError
from src.generators import (
    DEFAULT_MAX_REPLY_TOKENS,
    BaseGenerator,
    GeneratorError,
    GeneratorRequest,
    history_from_pairs,
)
from src.lexicon import LexiconSet, load_lexicons
from src.metrics import SessionSummary, TurnMetrics, cosine, summarize_session, turn_metrics
from src.persona import PersonaModel
from src.policies import PolicyConfig, PolicyState, policy_step
from src.promptgen import (
    DEFAULT_BASE_PROMPT,
    FragmentTable,
    compose_prompt,
    load_fragment_table,
    vector_to_instructions,
)
from src.textfeat import style_vector

logger = logging.getLogger(__name__)

DEFAULT_MAX_SESSIONS = 25
DEFAULT_MAX_IN_FLIGHT = 4


@dataclass
class ClosedLoopRun:
    """
    单个 策略 × 会话 的闭环结果

    Attributes:
        fidelity: 每轮 cosine(目标, 实现) 的均值，衡量生成器对指令的遵从程度
    """
    turns: List[TurnMetrics]
    summary: SessionSummary
    replies: List[str] = field(default_factory=list)
    latencies_ms: List[int] = field(default_factory=list)
    fidelity: float = 0.0

    @property
    def mean_latency_ms(self) -> float:
        return math.fsum(self.latencies_ms) / len(self.latencies_ms) if self.latencies_ms else 0.0


def closed_loop_session(
    generator: BaseGenerator,
    policy: PolicyConfig,
    prepared: PreparedSession,
    persona: PersonaModel,
    base_prompt: str = DEFAULT_BASE_PROMPT,
    anchor: PersonaAnchor = PersonaAnchor.CENTROID,
    fragment_table: Optional[FragmentTable] = None,
    thresholds=None,
    corpus: str = "",
    max_reply_tokens: int = DEFAULT_MAX_REPLY_TOKENS,
    lexicons: Optional[LexiconSet] = None,
) -> ClosedLoopRun:
    """
    以生成器在环的方式回放一个会话

    Raises:
        GeneratorError: 重试耗尽、拒答或回复无法向量化（会话应记为 incomplete）
    """
    table = fragment_table or load_fragment_table()
    lexicons = lexicons or load_lexicons()
    anchor_vec = persona.anchor(anchor)
    archetype_z = persona.archetype_z
    state = PolicyState.seeded(anchor_vec)
    tag = generator.provider_tag

    prev_instr = vector_to_instructions(anchor_vec, table, thresholds)
    prev_bin = None
    turns: List[TurnMetrics] = []
    replies: List[str] = []
    latencies: List[int] = []
    fidelity: List[float] = []
    exchanged: List[Tuple[str, str]] = []

    for turn_no, (u_t, text) in enumerate(zip(prepared.user_z, prepared.user_texts), start=1):
        b_prev = state.b_prev
        target, cache_hit = policy_step(policy, state, u_t, text, anchor_vec)
        cur_instr = vector_to_instructions(target, table, thresholds)
        prompt = compose_prompt(base_prompt, cur_instr)

        request = GeneratorRequest(
            system_prompt=prompt.full_text,
            history=history_from_pairs(exchanged, text),
            max_reply_tokens=max_reply_tokens,
        )
        response = generator.generate(request)
        latencies.append(response.latency_ms)
        logger.debug(f"[Generator:{tag}] {prepared.session_id} 第 {turn_no} 轮耗时 {response.latency_ms} ms")
        if response.refused:
            raise GeneratorError(f"generator refused at turn {turn_no}")

        try:
            b_t = persona.standardize(style_vector(response.text, lexicons))
        except TextFeatureError as e:
            raise GeneratorError(f"unscorable reply at turn {turn_no}: {e}") from e
        state.b_prev = b_t

        informality = float(np.clip(persona.inverse_transform(b_t)[0], 0.0, 1.0))
        metrics = turn_metrics(
            u_t, b_t, b_prev, archetype_z, prev_instr, cur_instr, prev_bin, informality, cache_hit
        )
        turns.append(metrics)
        replies.append(response.text)
        fidelity.append(cosine(target, b_t))
        exchanged.append((text, response.text))
        prev_instr, prev_bin = cur_instr, metrics.register_bin

    session = prepared.session
    summary = summarize_session(turns, session.session_id, session.participant_id, policy.label, corpus)
    return ClosedLoopRun(
        turns=turns,
        summary=summary,
        replies=replies,
        latencies_ms=latencies,
        fidelity=math.fsum(fidelity) / len(fidelity),
    )


class ClosedLoopRunner:
    """
    闭环回放调度器

    职责：
    1. 截取前 max_sessions 个会话（按 session_id），与策略做全组合
    2. 在途请求数不超过 max_in_flight
    3. 失败会话写入 incomplete 列表，剔除该会话在所有策略下的结果，保持配对集合一致
    """

    def __init__(
        self,
        generator: BaseGenerator,
        persona: PersonaModel,
        corpus: str = "",
        base_prompt: str = DEFAULT_BASE_PROMPT,
        anchor: PersonaAnchor = PersonaAnchor.CENTROID,
        thresholds=None,
        max_sessions: int = DEFAULT_MAX_SESSIONS,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        max_reply_tokens: int = DEFAULT_MAX_REPLY_TOKENS,
        fragment_table: Optional[FragmentTable] = None,
        lexicons: Optional[LexiconSet] = None,
    ):
        self.generator = generator
        self.persona = persona
        self.corpus = corpus
        self.base_prompt = base_prompt
        self.anchor = anchor
        self.thresholds = thresholds
        self.max_sessions = max_sessions
        self.max_in_flight = max(1, max_in_flight)
        self.max_reply_tokens = max_reply_tokens
        self.fragment_table = fragment_table or load_fragment_table()
        self.lexicons = lexicons or load_lexicons()
        self.runs: Dict[Tuple[str, str], ClosedLoopRun] = {}

    def _run_one(self, policy: PolicyConfig, prepared: PreparedSession) -> ClosedLoopRun:
        return closed_loop_session(
            self.generator,
            policy,
            prepared,
            self.persona,
            base_prompt=self.base_prompt,
            anchor=self.anchor,
            fragment_table=self.fragment_table,
            thresholds=self.thresholds,
            corpus=self.corpus,
            max_reply_tokens=self.max_reply_tokens,
            lexicons=self.lexicons,
        )

    def run(self, policies: Sequence[PolicyConfig], prepared: Sequence[PreparedSession]) -> AblationResult:
        """
        Raises:
            ReplayError: 策略或会话为空，或全部会话均未完成
        """
        if not policies:
            raise ReplayError("no policies to run")
        selected = sorted(prepared, key=lambda p: p.session_id)[: self.max_sessions]
        if not selected:
            raise ReplayError("no sessions to replay")

        tag = self.generator.provider_tag
        start_time = time.time()
        logger.info(
            f"===== [Generator:{tag}] {self.corpus}: 闭环 {len(policies)} 个策略 × {len(selected)} 个会话，"
            f"在途上限 {self.max_in_flight} ====="
        )

        results: Dict[Tuple[str, str], ClosedLoopRun] = {}
        incomplete: List[Tuple[str, str, str]] = []
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as executor:
            future_to_key = {
                executor.submit(self._run_one, policy, prep): (policy.label, prep.session_id)
                for prep in selected
                for policy in policies
            }
            for future in as_completed(future_to_key):
                label, session_id = future_to_key[future]
                try:
                    run = future.result()
                    results[(label, session_id)] = run
                    logger.info(
                        f"[Generator:{tag}] {label} {session_id}: {run.summary.n_turns} 轮，"
                        f"平均耗时 {run.mean_latency_ms:.0f} ms，遵从度 {run.fidelity:.3f}"
                    )
                except StyleSyncError as e:
                    logger.warning(f"[Generator:{tag}] {label} {session_id} 未完成: {e}")
                    incomplete.append((label, session_id, str(e)))

        incomplete.sort(key=lambda r: (r[1], r[0]))
        dropped = {session_id for _, session_id, _ in incomplete}
        self.runs = {k: v for k, v in results.items() if k[1] not in dropped}

        summaries = []
        for policy in policies:
            rows = [run.summary for (label, _), run in self.runs.items() if label == policy.label]
            if rows:
                summaries.append(aggregate_policy(policy, rows))
        if not summaries:
            raise ReplayError(f"closed loop with {tag}: no session completed")
        rows = [row for s in summaries for row in s.rows]

        elapsed = time.time() - start_time
        logger.info(
            f"===== [Generator:{tag}] {self.corpus} 完成: {len(rows)} 行，未完成 {len(incomplete)}，"
            f"耗时 {elapsed:.2f} 秒 ====="
        )
        return AblationResult(corpus=self.corpus, rows=rows, policy_summaries=summaries, failures=incomplete)

    def fidelity_rows(self) -> List[Dict[str, object]]:
        """每个已完成 策略 × 会话 的遵从度（耗时只进日志，输出文件保持可复现）"""
        return [
            {"policy": label, "session_id": session_id, "fidelity": run.fidelity, "n_turns": run.summary.n_turns}
            for (label, session_id), run in sorted(self.runs.items(), key=lambda kv: (kv[0][1], kv[0][0]))
        ]
