# -*- coding: utf-8 -*-
"""
===================================
统计分析测试
===================================

bootstrap 区间、TOST 等效检验、Spearman 与排名表。
"""

import math

import numpy as np
import pandas as pd
import pytest
from scipy import stats as sp_stats

from src.errors import StatsError
from src.stats import (
    STATS_COLUMNS,
    bootstrap_mean_difference,
    compare_observed,
    compare_policies,
    per_participant_deltas,
    percentile_bootstrap,
    rank_table,
    spearman,
    tost_equivalence,
)


def _summary(values_a, values_b):
    rows = []
    for policy, values in (("static", values_a), ("hybrid", values_b)):
        for i, v in enumerate(values):
            rows.append({"corpus": "toy", "policy": policy, "session_id": f"s{i}", "participant_id": f"p{i}",
                         "synchrony": v, "stability": 1.0 - v})
    return pd.DataFrame(rows)


def test_bootstrap_two_point_sample_spans_both_values():
    result = percentile_bootstrap([-1.0, 1.0], n_resamples=10_000, seed=7)
    assert result.mean_delta == 0.0
    assert result.ci_low == -1.0
    assert result.ci_high == 1.0


def test_bootstrap_constant_input_collapses():
    result = percentile_bootstrap([0.3] * 10, n_resamples=500, seed=1)
    assert result.ci_low == result.ci_high == 0.3
    diff = bootstrap_mean_difference([1.0] * 5, [1.5] * 4, n_resamples=500, seed=1)
    assert diff.ci_low == diff.ci_high == diff.mean_delta == 0.5


def test_bootstrap_is_reproducible_and_worker_independent():
    values = np.random.default_rng(0).normal(size=40)
    a = percentile_bootstrap(values, n_resamples=2_000, seed=42, stream=3, max_workers=1)
    b = percentile_bootstrap(values, n_resamples=2_000, seed=42, stream=3, max_workers=8)
    assert (a.ci_low, a.ci_high) == (b.ci_low, b.ci_high)
    c = percentile_bootstrap(values, n_resamples=2_000, seed=42, stream=4)
    assert (a.ci_low, a.ci_high) != (c.ci_low, c.ci_high)
    assert a.ci_low <= a.mean_delta <= a.ci_high


def test_bootstrap_rejects_bad_input():
    with pytest.raises(StatsError):
        percentile_bootstrap([1.0])
    with pytest.raises(StatsError):
        percentile_bootstrap([1.0, math.nan])
    with pytest.raises(StatsError):
        percentile_bootstrap([1.0, 2.0], n_resamples=0)


def test_per_participant_deltas():
    assert per_participant_deltas({"b": 1.0, "a": 0.0}, {"a": 0.5, "b": 0.5}) == [0.5, -0.5]
    with pytest.raises(StatsError, match="p9"):
        per_participant_deltas({"a": 0.0}, {"a": 1.0, "p9": 1.0})


def test_tost_matches_welch_closed_form():
    a = np.array([0.50, 0.52, 0.48, 0.51, 0.49, 0.50])
    b = np.array([0.51, 0.50, 0.49, 0.52, 0.50, 0.51])
    sesoi = 0.05
    result = tost_equivalence(a, b, sesoi=sesoi)

    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    se = math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    diff = b.mean() - a.mean()
    p_lower = sp_stats.t.sf((diff + sesoi) / se, df)
    p_upper = sp_stats.t.cdf((diff - sesoi) / se, df)

    assert result.p_lower == pytest.approx(p_lower, rel=1e-9)
    assert result.p_upper == pytest.approx(p_upper, rel=1e-9)
    assert result.p == pytest.approx(max(p_lower, p_upper), rel=1e-9)
    assert result.equivalent


def test_tost_detects_non_equivalence():
    a = [0.1, 0.2, 0.15, 0.12]
    b = [0.9, 0.8, 0.85, 0.88]
    assert not tost_equivalence(a, b, sesoi=0.1).equivalent


def test_tost_constant_samples_and_errors():
    same = tost_equivalence([0.5] * 4, [0.5] * 4, sesoi=0.1)
    assert same.equivalent and same.p == 0.0
    far = tost_equivalence([0.0] * 4, [1.0] * 4, sesoi=0.1)
    assert not far.equivalent
    with pytest.raises(StatsError):
        tost_equivalence([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(StatsError):
        tost_equivalence([1.0, 2.0, 3.0], [1.0, 2.0, 3.0, 4.0], paired=True)


def test_spearman_with_ties():
    rho, p = spearman([1, 2, 2, 3], [1, 2, 3, 4])
    assert rho == pytest.approx(3 / math.sqrt(10), abs=1e-12)
    assert 0.0 <= p <= 1.0
    with pytest.raises(StatsError):
        spearman([1, 2], [1, 2])
    with pytest.raises(StatsError):
        spearman([1, 2, 3], [1, 2])


def test_rank_table_rounds_before_ranking():
    table = rank_table(
        {
            "dd": {"static": 0.5001, "hybrid": 0.5004, "uncapped": 0.9},
            "pc": {"static": 0.2, "hybrid": 0.7, "uncapped": 0.1},
        },
        "synchrony",
    )
    assert table.loc["uncapped", "dd"] == 1
    assert table.loc["static", "dd"] == table.loc["hybrid", "dd"] == 2
    assert list(table["pc"].loc[["hybrid", "static", "uncapped"]]) == [1, 2, 3]
    with pytest.raises(StatsError):
        rank_table({"dd": {"static": 0.1}})


def test_compare_policies_rows():
    summary = _summary([0.1, 0.2, 0.3, 0.4], [0.2, 0.3, 0.4, 0.5])
    rows = compare_policies(summary, "static", "hybrid", ["synchrony", "stability"], n_resamples=200, seed=3)
    assert [r["metric"] for r in rows] == ["synchrony", "stability"]
    assert set(rows[0]) == set(STATS_COLUMNS)
    assert rows[0]["comparison"] == "hybrid_vs_static"
    # 每个参与者的差值都是 0.1（仅有浮点误差）
    assert rows[0]["mean_delta"] == pytest.approx(0.1)
    assert rows[0]["ci_low"] == pytest.approx(0.1)
    assert rows[1]["mean_delta"] == pytest.approx(-0.1)


def test_compare_policies_participant_mismatch():
    summary = _summary([0.1, 0.2, 0.3], [0.2, 0.3, 0.4])
    summary = summary[~((summary["policy"] == "hybrid") & (summary["participant_id"] == "p0"))]
    with pytest.raises(StatsError, match="participant key mismatch"):
        compare_policies(summary, "static", "hybrid", ["synchrony"], n_resamples=50)


def test_compare_observed():
    summary = _summary([0.1, 0.2, 0.3, 0.4], [0.40, 0.42, 0.44, 0.46])
    observed = pd.DataFrame(
        {"participant_id": ["o1", "o2", "o3", "o4", "o5"], "synchrony": [0.41, 0.43, 0.45, 0.42, 0.44]}
    )
    rows = compare_observed(observed, summary, "hybrid", ["synchrony"], n_resamples=300, seed=5, sesoi=0.1)
    assert rows[0]["comparison"] == "observed_vs_hybrid"
    assert rows[0]["equivalent"]
    assert rows[0]["ci_low"] <= rows[0]["mean_delta"] <= rows[0]["ci_high"]
    with pytest.raises(StatsError):
        compare_observed(observed, summary, "hybrid", ["stability"])
