# -*- coding: utf-8 -*-
"""
===================================
统计比较
===================================

职责：
1. 按参与者配对求差值（keyed join）
2. 百分位 bootstrap 置信区间（固定分块 + 独立 PCG64 流，可并行且结果与线程数无关）
3. TOST 等效性检验（statsmodels）
4. Spearman 相关、跨语料排名表
5. 由 summary.csv 组装 stats.csv 的比较行
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats as sp_stats
from statsmodels.stats.weightstats import ttost_ind, ttost_paired

from src.errors import StatsError

logger = logging.getLogger(__name__)

DEFAULT_RESAMPLES = 10_000
BOOTSTRAP_CHUNKS = 16
CI_PERCENTILES = (2.5, 97.5)
DEFAULT_SESOI = 0.10
DEFAULT_ALPHA = 0.05
RANK_DECIMALS = 3

STATS_COLUMNS = ["comparison", "metric", "mean_delta", "ci_low", "ci_high", "tost_p", "equivalent"]


@dataclass(frozen=True)
class BootstrapResult:
    mean_delta: float
    ci_low: float
    ci_high: float
    n_resamples: int
    seed: int


@dataclass(frozen=True)
class TostResult:
    sesoi: float
    p_lower: float
    p_upper: float
    p: float
    equivalent: bool
    t_lower: float = float("nan")
    t_upper: float = float("nan")
    df: float = float("nan")


# === 差值 ===

def per_participant_deltas(a: Mapping[str, float], b: Mapping[str, float]) -> List[float]:
    """
    delta_i = b_i − a_i，按参与者 ID 排序

    Raises:
        StatsError: 两侧参与者集合不一致（列出缺失的 ID）
    """
    keys_a, keys_b = set(a), set(b)
    if keys_a != keys_b:
        only_a = sorted(keys_a - keys_b)
        only_b = sorted(keys_b - keys_a)
        raise StatsError(f"participant key mismatch: missing in b {only_a}, missing in a {only_b}")
    return [float(b[k]) - float(a[k]) for k in sorted(keys_a)]


# === Bootstrap ===

def _chunk_sizes(n_resamples: int, n_chunks: int) -> List[int]:
    base, extra = divmod(n_resamples, n_chunks)
    return [base + (1 if i < extra else 0) for i in range(n_chunks)]


def _streams(seed: int, stream: Optional[int], n_chunks: int) -> List[np.random.Generator]:
    """SeedSequence(seed[, stream]) 派生 n_chunks 个独立 PCG64 流"""
    root = np.random.SeedSequence(seed if stream is None else [seed, stream])
    return [np.random.Generator(np.random.PCG64(child)) for child in root.spawn(n_chunks)]


def _run_chunks(task, sizes: List[int], gens: List[np.random.Generator], max_workers: Optional[int]) -> np.ndarray:
    """并行执行各分块，按分块序号拼接"""
    parts: List[Optional[np.ndarray]] = [None] * len(sizes)
    workers = max(1, min(max_workers or 1, len(sizes)))
    if workers == 1:
        for i, (size, gen) in enumerate(zip(sizes, gens)):
            parts[i] = task(size, gen)
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            future_to_idx = {
                executor.submit(task, size, gen): i for i, (size, gen) in enumerate(zip(sizes, gens))
            }
            for future in as_completed(future_to_idx):
                parts[future_to_idx[future]] = future.result()
    return np.concatenate([p for p in parts if p is not None])


def _validate_bootstrap_args(values: np.ndarray, n_resamples: int, label: str) -> None:
    if values.ndim != 1 or len(values) < 2:
        raise StatsError(f"{label}: bootstrap needs at least 2 values, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise StatsError(f"{label}: bootstrap values must be finite")
    if n_resamples < 1:
        raise StatsError(f"{label}: n_resamples must be ≥ 1")


def percentile_bootstrap(
    values: Sequence[float],
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    stream: Optional[int] = None,
    n_chunks: int = BOOTSTRAP_CHUNKS,
    max_workers: Optional[int] = None,
) -> BootstrapResult:
    """
    均值的 95% 百分位 bootstrap 区间（无偏差校正）

    Args:
        values: 样本（≥ 2 个）
        seed: 根种子
        stream: 分析序号；同一 seed 下不同分析使用互不重叠的随机流
        n_chunks: 重抽样分块数，决定随机流划分，与 max_workers 无关
    """
    arr = np.asarray(values, dtype=np.float64)
    _validate_bootstrap_args(arr, n_resamples, "percentile_bootstrap")
    mean = math.fsum(arr) / len(arr)

    if np.ptp(arr) == 0:
        return BootstrapResult(mean, float(arr[0]), float(arr[0]), n_resamples, seed)

    n = len(arr)

    def task(size: int, gen: np.random.Generator) -> np.ndarray:
        idx = gen.integers(0, n, size=(size, n))
        return arr[idx].mean(axis=1)

    means = _run_chunks(task, _chunk_sizes(n_resamples, n_chunks), _streams(seed, stream, n_chunks), max_workers)
    low, high = np.percentile(means, CI_PERCENTILES)
    return BootstrapResult(mean, float(low), float(high), n_resamples, seed)


def bootstrap_mean_difference(
    sample_a: Sequence[float],
    sample_b: Sequence[float],
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    stream: Optional[int] = None,
    n_chunks: int = BOOTSTRAP_CHUNKS,
    max_workers: Optional[int] = None,
) -> BootstrapResult:
    """两独立样本均值差 mean(b) − mean(a) 的百分位 bootstrap 区间"""
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    _validate_bootstrap_args(a, n_resamples, "bootstrap_mean_difference(a)")
    _validate_bootstrap_args(b, n_resamples, "bootstrap_mean_difference(b)")
    delta = math.fsum(b) / len(b) - math.fsum(a) / len(a)

    if np.ptp(a) == 0 and np.ptp(b) == 0:
        return BootstrapResult(delta, delta, delta, n_resamples, seed)

    na, nb = len(a), len(b)

    def task(size: int, gen: np.random.Generator) -> np.ndarray:
        ia = gen.integers(0, na, size=(size, na))
        ib = gen.integers(0, nb, size=(size, nb))
        return b[ib].mean(axis=1) - a[ia].mean(axis=1)

    diffs = _run_chunks(task, _chunk_sizes(n_resamples, n_chunks), _streams(seed, stream, n_chunks), max_workers)
    low, high = np.percentile(diffs, CI_PERCENTILES)
    return BootstrapResult(delta, float(low), float(high), n_resamples, seed)


# === TOST ===

def tost_equivalence(
    sample_a: Sequence[float],
    sample_b: Sequence[float],
    sesoi: float = DEFAULT_SESOI,
    alpha: float = DEFAULT_ALPHA,
    paired: bool = False,
) -> TostResult:
    """
    两个单侧 t 检验：H0 为 mean(b) − mean(a) ≤ −sesoi 或 ≥ +sesoi

    默认 Welch（方差不等）非配对检验；paired=True 时对配对差值做单样本检验。
    两个单侧 p 值均小于 alpha 时判定等效。

    Raises:
        StatsError: 任一样本少于 3 个值、sesoi 为负，或配对样本长度不同
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if len(a) < 3 or len(b) < 3:
        raise StatsError(f"TOST needs at least 3 values per sample, got {len(a)} and {len(b)}")
    if sesoi < 0:
        raise StatsError(f"sesoi must be ≥ 0, got {sesoi}")
    if paired and len(a) != len(b):
        raise StatsError("paired TOST needs samples of equal length")

    diff_var = np.var(b - a) if paired else np.var(a) + np.var(b)
    if diff_var == 0:
        # 无方差时 t 统计量无定义，按均值差是否落入开区间直接判定
        gap = math.fsum(b) / len(b) - math.fsum(a) / len(a)
        p_lower = 0.0 if gap > -sesoi else 1.0
        p_upper = 0.0 if gap < sesoi else 1.0
        p = max(p_lower, p_upper)
        return TostResult(sesoi, p_lower, p_upper, p, p < alpha)

    if paired:
        p, (t1, p1, df1), (t2, p2, _) = ttost_paired(b, a, -sesoi, sesoi)
    else:
        p, (t1, p1, df1), (t2, p2, _) = ttost_ind(b, a, -sesoi, sesoi, usevar="unequal")

    p_lower, p_upper = float(p1), float(p2)
    p = max(p_lower, p_upper)
    return TostResult(
        sesoi=sesoi,
        p_lower=p_lower,
        p_upper=p_upper,
        p=p,
        equivalent=bool(p_lower < alpha and p_upper < alpha),
        t_lower=float(t1),
        t_upper=float(t2),
        df=float(df1),
    )


# === 相关与排名 ===

def spearman(x: Sequence[float], y: Sequence[float]) -> Tuple[float, float]:
    """
    Spearman 秩相关（并列取平均秩，p 值用 t 近似）

    Raises:
        StatsError: 长度不一致或少于 3 对
    """
    if len(x) != len(y):
        raise StatsError(f"spearman inputs differ in length: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise StatsError(f"spearman needs at least 3 pairs, got {len(x)}")
    result = sp_stats.spearmanr(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    rho, p = float(result[0]), float(result[1])
    if math.isnan(rho):
        logger.warning("[Stats] spearman 输入为常数序列，rho 无定义")
    return rho, p


def rank_table(policy_means: Mapping[str, Mapping[str, float]], metric: str = "") -> pd.DataFrame:
    """
    跨语料排名表

    Args:
        policy_means: 语料 -> {策略 -> 指标均值}
        metric: 指标名（仅用于日志）

    Returns:
        DataFrame：行为策略，列为语料，值为排名（1 为最好，并列取最小排名）；
        比较前先四舍五入到 3 位小数，使报表中相同的值共享排名
    """
    columns = {}
    for corpus, means in policy_means.items():
        if len(means) < 2:
            raise StatsError(f"rank_table needs at least 2 policies for corpus '{corpus}'")
        series = pd.Series(means, dtype="float64").round(RANK_DECIMALS)
        columns[corpus] = series.rank(method="min", ascending=False).astype(int)
    table = pd.DataFrame(columns)
    table.index.name = "policy"
    logger.debug(f"[Stats] {metric} 排名表: {len(table)} 个策略 × {len(table.columns)} 个语料")
    return table


# === stats.csv 组装 ===

def participant_means(summary: pd.DataFrame, policy: str, metric: str) -> Dict[str, float]:
    """某策略下每个参与者的会话均值"""
    rows = summary[summary["policy"] == policy]
    if rows.empty:
        raise StatsError(f"no summary rows for policy '{policy}'")
    if metric not in rows.columns:
        raise StatsError(f"unknown metric column '{metric}'")
    grouped = rows.groupby("participant_id", sort=True)[metric].mean()
    return {str(k): float(v) for k, v in grouped.items()}


def compare_policies(
    summary: pd.DataFrame,
    baseline: str,
    treatment: str,
    metrics: Sequence[str],
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    sesoi: float = DEFAULT_SESOI,
    alpha: float = DEFAULT_ALPHA,
    paired: bool = False,
    stream_offset: int = 0,
    max_workers: Optional[int] = None,
) -> List[Dict[str, object]]:
    """
    treatment 相对 baseline 的逐参与者差值分析，每个指标一行

    bootstrap 使用 (seed, stream_offset + 指标序号) 的随机流。
    """
    rows = []
    name = f"{treatment}_vs_{baseline}"
    for i, metric in enumerate(metrics):
        a = participant_means(summary, baseline, metric)
        b = participant_means(summary, treatment, metric)
        deltas = per_participant_deltas(a, b)
        try:
            boot = percentile_bootstrap(
                deltas, n_resamples=n_resamples, seed=seed, stream=stream_offset + i, max_workers=max_workers
            )
        except StatsError as e:
            logger.warning(f"[Stats] {name}/{metric} 跳过 bootstrap: {e}")
            mean_delta = math.fsum(deltas) / len(deltas) if deltas else float("nan")
            boot = BootstrapResult(mean_delta, float("nan"), float("nan"), n_resamples, seed)
        keys = sorted(a)
        sample_a = [a[k] for k in keys]
        sample_b = [b[k] for k in keys]
        try:
            tost = tost_equivalence(sample_a, sample_b, sesoi=sesoi, alpha=alpha, paired=paired)
            tost_p, equivalent = tost.p, tost.equivalent
        except StatsError as e:
            logger.warning(f"[Stats] {name}/{metric} 跳过 TOST: {e}")
            tost_p, equivalent = float("nan"), False
        rows.append(
            {
                "comparison": name,
                "metric": metric,
                "mean_delta": boot.mean_delta,
                "ci_low": boot.ci_low,
                "ci_high": boot.ci_high,
                "tost_p": tost_p,
                "equivalent": equivalent,
            }
        )
        logger.info(
            f"[Stats] {name}/{metric}: Δ={boot.mean_delta:.4f} "
            f"CI=[{boot.ci_low:.4f}, {boot.ci_high:.4f}] TOST p={tost_p:.4f}"
        )
    return rows


def compare_observed(
    observed: pd.DataFrame,
    summary: pd.DataFrame,
    policy: str,
    metrics: Sequence[str],
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    sesoi: float = DEFAULT_SESOI,
    alpha: float = DEFAULT_ALPHA,
    stream_offset: int = 0,
    max_workers: Optional[int] = None,
) -> List[Dict[str, object]]:
    """
    观测队列 vs 回放队列：均值差 = 回放 − 观测，两样本 bootstrap + Welch TOST

    Args:
        observed: 含 participant_id 与各指标列的观测均值表
    """
    if "participant_id" not in observed.columns:
        raise StatsError("observed table needs a participant_id column")

    rows = []
    name = f"observed_vs_{policy}"
    for i, metric in enumerate(metrics):
        if metric not in observed.columns:
            raise StatsError(f"observed table has no '{metric}' column")
        obs = observed.groupby("participant_id", sort=True)[metric].mean().dropna()
        rep = participant_means(summary, policy, metric)
        sample_obs = obs.to_numpy(dtype=np.float64)
        sample_rep = np.array([rep[k] for k in sorted(rep)], dtype=np.float64)

        boot = bootstrap_mean_difference(
            sample_obs, sample_rep, n_resamples=n_resamples, seed=seed, stream=stream_offset + i,
            max_workers=max_workers,
        )
        tost = tost_equivalence(sample_obs, sample_rep, sesoi=sesoi, alpha=alpha, paired=False)
        rows.append(
            {
                "comparison": name,
                "metric": metric,
                "mean_delta": boot.mean_delta,
                "ci_low": boot.ci_low,
                "ci_high": boot.ci_high,
                "tost_p": tost.p,
                "equivalent": tost.equivalent,
            }
        )
    return rows
