# -*- coding: utf-8 -*-
"""
===================================
风格同步仿真 - 实验编排
===================================

职责：
1. 按运行配置逐语料：加载 -> 人设 -> 回放消融 -> 窗口消融 / LSM 验证 -> 闭环回放
2. 跨语料排名表
3. 组装 stats.csv（策略间逐参与者比较 + 观测队列等价性检验）

所有随机性来自 run_config.seed；每个分析占用独立的随机流序号，顺序固定。
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd

from corpus_provider import CorpusManager, filter_sessions
from src.config import Config, get_config
from src.core.pipeline import AblationResult, ReplayPipeline, fit_persona_from_sessions
from src.errors import ConfigError, ReplayError
from src.generators import create_generator
from src.llmloop import ClosedLoopRunner
from src.models import SessionLog
from src.persona import PersonaModel, load_archetype
from src.report import ReportWriter, rank_inputs, summary_frame
from src.run_config import ARCHETYPE_FITTED, ComparisonSpec, CorpusSpec, RunConfig
from src.stats import compare_observed, compare_policies

logger = logging.getLogger(__name__)

DEFAULT_COMPARISON_METRICS = ("synchrony", "stability")


@dataclass
class SimulationOutcome:
    results: List[AblationResult] = field(default_factory=list)
    stats_rows: List[Dict[str, object]] = field(default_factory=list)
    written: List[Path] = field(default_factory=list)


def check_inputs(run_config: RunConfig, need_corpora: bool = True) -> None:
    """
    开始计算前检查输入文件是否存在

    Raises:
        ConfigError: 缺少语料或路径不存在
    """
    if need_corpora and not run_config.corpora:
        raise ConfigError("config has no corpora")
    paths = [("corpus", c.path) for c in run_config.corpora]
    if run_config.persona.path:
        paths.append(("persona", run_config.persona.path))
    if run_config.persona.archetype_path:
        paths.append(("archetype", run_config.persona.archetype_path))
    if run_config.validation:
        paths.append(("observed", run_config.validation.observed_path))
    for kind, path in paths:
        if not Path(path).exists():
            raise ConfigError(f"{kind} path not found: {path}")


def load_corpus(spec: CorpusSpec, manager: Optional[CorpusManager] = None) -> List[SessionLog]:
    manager = manager or CorpusManager()
    return manager.load(spec.path, spec.format, source=spec.name).sessions


def resolve_persona(run_config: RunConfig, corpus: str, sessions: Sequence[SessionLog]) -> PersonaModel:
    """人设来源：已保存文件，或在该语料上拟合（原型按配置取自定义 / 随包默认 / 拟合均值）"""
    spec = run_config.persona
    if spec.path:
        return PersonaModel.load(spec.path)
    if spec.archetype_path:
        raw_archetype = load_archetype(spec.archetype_path)
    elif spec.archetype == ARCHETYPE_FITTED:
        raw_archetype = None
    else:
        raw_archetype = load_archetype()
    return fit_persona_from_sessions(sessions, corpus, fit_on=spec.fit_on, raw_archetype=raw_archetype)


def default_comparisons(run_config: RunConfig) -> List[ComparisonSpec]:
    """未配置比较时：其余每个策略对第一个策略"""
    labels = [p.label for p in run_config.policies]
    return [
        ComparisonSpec(baseline=labels[0], treatment=label, metrics=DEFAULT_COMPARISON_METRICS)
        for label in labels[1:]
    ]


def build_stats_rows(
    run_config: RunConfig,
    summary: pd.DataFrame,
    max_workers: Optional[int] = None,
) -> List[Dict[str, object]]:
    """
    逐语料计算策略比较与观测等价性；多语料时比较名加 "<语料>/" 前缀

    Args:
        summary: summary.csv 格式的表（含 corpus 列）
    """
    comparisons = list(run_config.comparisons) or default_comparisons(run_config)
    corpora = list(dict.fromkeys(summary["corpus"].astype(str))) if not summary.empty else []
    prefix = len(corpora) > 1
    boot, tost = run_config.bootstrap, run_config.tost

    rows: List[Dict[str, object]] = []
    stream = 0
    for corpus in corpora:
        corpus_summary = summary[summary["corpus"].astype(str) == corpus]
        present = set(corpus_summary["policy"].astype(str))
        for comp in comparisons:
            if comp.baseline not in present or comp.treatment not in present:
                logger.warning(f"[Stats] {corpus}: {comp.name} 缺少策略结果，跳过")
                stream += len(comp.metrics)
                continue
            comp_rows = compare_policies(
                corpus_summary,
                comp.baseline,
                comp.treatment,
                comp.metrics,
                n_resamples=boot.n_resamples,
                seed=run_config.seed,
                sesoi=tost.sesoi,
                alpha=tost.alpha,
                paired=tost.paired,
                stream_offset=stream,
                max_workers=max_workers,
            )
            stream += len(comp.metrics)
            for row in comp_rows:
                if prefix:
                    row["comparison"] = f"{corpus}/{row['comparison']}"
                rows.append(row)

    validation = run_config.validation
    if validation and corpora:
        corpus = validation.corpus or corpora[0]
        observed = pd.read_csv(validation.observed_path, dtype={"participant_id": str})
        corpus_summary = summary[summary["corpus"].astype(str) == corpus]
        obs_rows = compare_observed(
            observed,
            corpus_summary,
            validation.policy,
            validation.metrics,
            n_resamples=boot.n_resamples,
            seed=run_config.seed,
            sesoi=tost.sesoi,
            alpha=tost.alpha,
            stream_offset=stream,
            max_workers=max_workers,
        )
        for row in obs_rows:
            if prefix:
                row["comparison"] = f"{corpus}/{row['comparison']}"
            rows.append(row)
    return rows


def run_simulation(
    run_config: RunConfig,
    writer: ReportWriter,
    config: Optional[Config] = None,
) -> SimulationOutcome:
    """
    执行完整仿真并写出全部结果

    Raises:
        StyleSyncError: 任一语料加载或回放失败（已写出的结果保留，由调用方标记失败）
    """
    config = config or get_config()
    max_workers = max(1, run_config.jobs or config.max_workers)
    manager = CorpusManager()
    outcome = SimulationOutcome()
    start_time = time.time()

    for spec in run_config.corpora:
        sessions = load_corpus(spec, manager)
        persona = resolve_persona(run_config, spec.name, sessions)
        pipeline = ReplayPipeline(
            persona,
            corpus=spec.name,
            anchor=run_config.persona.anchor,
            thresholds=run_config.thresholds,
            config=config,
            max_workers=max_workers,
        )
        prepared = pipeline.prepare(filter_sessions(sessions))
        if not prepared:
            raise ReplayError(f"corpus '{spec.name}' has no session passing the filter")

        result = pipeline.run_ablation(run_config.policies, prepared=prepared)
        writer.write_ablation(result)
        outcome.results.append(result)

        if run_config.windows:
            writer.write_windows(spec.name, pipeline.window_ablation(prepared, run_config.windows))
        if run_config.lsm_validation and any(p.pairs for p in prepared):
            writer.write_lsm_validation(spec.name, pipeline.lsm_validation(prepared))

        loop = run_config.closed_loop
        if loop:
            for mode in loop.generators:
                generator = create_generator(mode, config=config, temperature=loop.temperature)
                max_reply_tokens = loop.max_reply_tokens or config.generator_max_tokens
                runner = ClosedLoopRunner(
                    generator,
                    persona,
                    corpus=spec.name,
                    base_prompt=run_config.base_prompt,
                    anchor=run_config.persona.anchor,
                    thresholds=run_config.thresholds,
                    max_sessions=loop.max_sessions,
                    max_in_flight=loop.max_in_flight,
                    max_reply_tokens=max_reply_tokens,
                    fragment_table=pipeline.fragment_table,
                    lexicons=pipeline.lexicons,
                )
                loop_result = runner.run(loop.policies, prepared)
                writer.write_closed_loop(loop_result, mode.value, runner.fidelity_rows())

    if len(outcome.results) >= 2:
        writer.write_ranks(rank_inputs(outcome.results))

    summary = pd.concat([summary_frame(r.rows) for r in outcome.results], ignore_index=True)
    outcome.stats_rows = build_stats_rows(run_config, summary, max_workers=max_workers)
    writer.write_stats(outcome.stats_rows)
    outcome.written = list(writer.written)

    logger.info(f"[Main] 仿真完成：{len(outcome.results)} 个语料，{len(outcome.written)} 个输出文件，"
                f"耗时 {time.time() - start_time:.2f} 秒")
    return outcome
