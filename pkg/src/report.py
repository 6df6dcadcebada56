# -*- coding: utf-8 -*-
"""
===================================
StyleSync 风格同步仿真 - 结果输出
===================================

职责：
1. 把回放 / 统计结果整理为固定列顺序的 DataFrame
2. 写出 CSV（首行为 "# stylesync <版本> config_hash=<哈希> seed=<种子>"）
3. 绘制帕累托前沿 SVG（Agg 后端，固定 hashsalt，不写时间戳）
4. 运行失败时写 _FAILED 标记文件

同样的配置与输入重复运行，所有输出文件逐字节一致。
"""

import io
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from src import __app_name__, __version__  # noqa: E402
from src.core.pipeline import AblationResult, PolicySummary  # noqa: E402
from src.metrics import SESSION_METRICS, SessionSummary, pareto_frontier  # noqa: E402
from src.stats import STATS_COLUMNS, rank_table  # noqa: E402

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "corpus", "policy", "session_id", "participant_id",
    "synchrony", "stability", "coherence", "legibility", "flip_rate", "cache_hit_rate", "n_turns",
]
FRONTIER_COLUMNS = ["policy", "mean_stability", "mean_synchrony", "mean_coherence", "pareto_efficient"]
INCOMPLETE_COLUMNS = ["policy", "session_id", "reason"]
RANK_METRICS = ("synchrony", "stability")
FAILED_MARKER = "_FAILED"
SVG_HASHSALT = "stylesync"


def output_header(config_hash: str, seed: int) -> str:
    return f"# {__app_name__} {__version__} config_hash={config_hash} seed={seed}"


def write_table(df: pd.DataFrame, path: Union[str, Path], header: str, index: bool = False) -> Path:
    """写 CSV：首行为头部注释，换行固定为 \\n"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.StringIO()
    df.to_csv(buffer, index=index, lineterminator="\n")
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(header + "\n")
        f.write(buffer.getvalue())
    logger.debug(f"[Report] 已写出 {path}（{len(df)} 行）")
    return path


def read_table(path: Union[str, Path], **kwargs) -> pd.DataFrame:
    """读取 write_table 写出的 CSV（跳过头部注释行）"""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline()
    return pd.read_csv(path, skiprows=1 if first.startswith("#") else 0, **kwargs)


# === DataFrame 组装 ===

def summary_frame(rows: Iterable[SessionSummary]) -> pd.DataFrame:
    """逐 策略 × 会话 行；策略按输入顺序，会话按 session_id"""
    records = [r.to_dict() for r in rows]
    if not records:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)
    return pd.DataFrame.from_records(records)[SUMMARY_COLUMNS]


def frontier_frame(summaries: Sequence[PolicySummary]) -> pd.DataFrame:
    points = {s.policy: (s.means["stability"], s.means["synchrony"]) for s in summaries}
    efficient = pareto_frontier(points)
    return pd.DataFrame(
        [
            {
                "policy": s.policy,
                "mean_stability": s.means["stability"],
                "mean_synchrony": s.means["synchrony"],
                "mean_coherence": s.means["coherence"],
                "pareto_efficient": s.policy in efficient,
            }
            for s in summaries
        ],
        columns=FRONTIER_COLUMNS,
    )


def policy_summary_frame(summaries: Sequence[PolicySummary]) -> pd.DataFrame:
    """每个策略一行：会话数及各指标的均值 / 标准差"""
    metrics = SESSION_METRICS + ("mean_churn",)
    records = []
    for s in summaries:
        record: Dict[str, object] = {"policy": s.policy, "kind": s.kind, "n_sessions": s.n_sessions}
        for metric in metrics:
            record[f"{metric}_mean"] = s.means[metric]
            record[f"{metric}_std"] = s.stds[metric]
        records.append(record)
    return pd.DataFrame(records)


def rank_frame(policy_means: Mapping[str, Mapping[str, Mapping[str, float]]]) -> pd.DataFrame:
    """
    Args:
        policy_means: 指标 -> 语料 -> {策略 -> 均值}
    """
    frames = []
    for metric, per_corpus in policy_means.items():
        table = rank_table(per_corpus, metric).reset_index()
        table.insert(0, "metric", metric)
        frames.append(table)
    return pd.concat(frames, ignore_index=True)


def plot_frontier(frontier: pd.DataFrame, path: Union[str, Path], header: str, title: str = "") -> Path:
    """
    稳定性 (x) - 同步性 (y) 散点图；帕累托有效点实心并按稳定性连线
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context({"svg.hashsalt": SVG_HASHSALT, "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4.5))
        efficient = frontier[frontier["pareto_efficient"]].sort_values("mean_stability")
        dominated = frontier[~frontier["pareto_efficient"]]
        ax.scatter(dominated["mean_stability"], dominated["mean_synchrony"], facecolors="none", edgecolors="gray")
        ax.scatter(efficient["mean_stability"], efficient["mean_synchrony"], color="tab:blue")
        ax.plot(efficient["mean_stability"], efficient["mean_synchrony"], color="tab:blue", linewidth=1)
        for row in frontier.itertuples(index=False):
            ax.annotate(row.policy, (row.mean_stability, row.mean_synchrony), textcoords="offset points",
                        xytext=(4, 4), fontsize=8)
        ax.set_xlabel("mean stability")
        ax.set_ylabel("mean synchrony")
        if title:
            ax.set_title(title)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None, "Description": header})
        plt.close(fig)
    logger.debug(f"[Report] 已绘制 {path}")
    return path


class ReportWriter:
    """
    输出目录管理

    目录结构：
        <out>/<corpus>/summary.csv, frontier.csv, frontier.svg, policy_summary.csv,
                       window_ablation.csv, lsm_validation.csv
        <out>/<corpus>/closed_loop/<generator>/summary.csv, frontier.csv, incomplete.csv, fidelity.csv
        <out>/ranks.csv, stats.csv
    """

    def __init__(self, out_dir: Union[str, Path], config_hash: str, seed: int):
        self.out_dir = Path(out_dir)
        self.config_hash = config_hash
        self.seed = seed
        self.header = output_header(config_hash, seed)
        self.written: List[Path] = []

    def _write(self, df: pd.DataFrame, path: Path, index: bool = False) -> Path:
        self.written.append(write_table(df, path, self.header, index=index))
        return path

    def corpus_dir(self, corpus: str) -> Path:
        return self.out_dir / corpus

    def closed_loop_dir(self, corpus: str, generator: str) -> Path:
        return self.out_dir / corpus / "closed_loop" / generator.replace(":", "_").replace("/", "_")

    def write_ablation(self, result: AblationResult, directory: Optional[Path] = None, plot: bool = True) -> Path:
        directory = directory or self.corpus_dir(result.corpus)
        self._write(summary_frame(result.rows), directory / "summary.csv")
        frontier = frontier_frame(result.policy_summaries)
        self._write(frontier, directory / "frontier.csv")
        self._write(policy_summary_frame(result.policy_summaries), directory / "policy_summary.csv")
        if plot:
            self.written.append(plot_frontier(frontier, directory / "frontier.svg", self.header, title=result.corpus))
        logger.info(f"[Report] {result.corpus}: 已写出回放结果到 {directory}")
        return directory

    def write_closed_loop(
        self, result: AblationResult, generator: str, fidelity_rows: Sequence[Mapping[str, object]] = ()
    ) -> Path:
        directory = self.closed_loop_dir(result.corpus, generator)
        self._write(summary_frame(result.rows), directory / "summary.csv")
        self._write(frontier_frame(result.policy_summaries), directory / "frontier.csv")
        self._write(pd.DataFrame(list(result.failures), columns=INCOMPLETE_COLUMNS), directory / "incomplete.csv")
        self._write(pd.DataFrame(list(fidelity_rows), columns=["policy", "session_id", "fidelity", "n_turns"]),
                    directory / "fidelity.csv")
        logger.info(f"[Report] {result.corpus}: 已写出闭环结果（{generator}）到 {directory}")
        return directory

    def write_windows(self, corpus: str, rows: Sequence[Mapping[str, object]]) -> Path:
        path = self.corpus_dir(corpus) / "window_ablation.csv"
        return self._write(pd.DataFrame(list(rows), columns=["window", "predictive_synchrony", "n_sessions"]), path)

    def write_lsm_validation(self, corpus: str, rows: Sequence[Mapping[str, object]]) -> Path:
        path = self.corpus_dir(corpus) / "lsm_validation.csv"
        return self._write(pd.DataFrame(list(rows), columns=["analysis", "rho", "p", "n_pairs"]), path)

    def write_ranks(self, policy_means: Mapping[str, Mapping[str, Mapping[str, float]]]) -> Path:
        return self._write(rank_frame(policy_means), self.out_dir / "ranks.csv")

    def write_stats(self, rows: Sequence[Mapping[str, object]], path: Optional[Path] = None) -> Path:
        return self._write(pd.DataFrame(list(rows), columns=STATS_COLUMNS), path or self.out_dir / "stats.csv")

    def mark_failed(self, error: BaseException) -> Path:
        """写 _FAILED 标记，说明当前目录中的输出不完整"""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / FAILED_MARKER
        path.write_text(f"{self.header}\n{type(error).__name__}: {error}\n", encoding="utf-8")
        logger.error(f"[Report] 运行失败，已写出标记 {path}")
        return path

    def clear_failed(self) -> None:
        (self.out_dir / FAILED_MARKER).unlink(missing_ok=True)


def rank_inputs(results: Sequence[AblationResult]) -> Dict[str, Dict[str, Dict[str, float]]]:
    """多个语料的回放结果 -> 指标 -> 语料 -> {策略 -> 均值}"""
    out: Dict[str, Dict[str, Dict[str, float]]] = {}
    for metric in RANK_METRICS:
        out[metric] = {
            r.corpus: {s.policy: s.means[metric] for s in r.policy_summaries} for r in results
        }
    return out

