# -*- coding: utf-8 -*-
"""
===================================
适配策略测试
===================================

基本算子示例 + 极限等价、步长上界、半径约束等性质（hypothesis 随机序列）。
"""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose, assert_array_equal

from src.enums import PolicyKind
from src.errors import PolicyError
from src.metrics import cosine
from src.policies import (
    DEFAULT_ALPHA,
    DEFAULT_EPSILON,
    DEFAULT_KAPPA,
    DEFAULT_RHO,
    PolicyConfig,
    PolicyState,
    cap_delta,
    deadband_gate,
    ema_blend,
    normalize_cache_key,
    policy_step,
    radius_clamp,
    run_policy,
)

TOL = 1e-9

FLOATS = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False, allow_infinity=False)
VECTOR = arrays(np.float64, 8, elements=FLOATS)
SEQUENCE = st.lists(VECTOR, min_size=1, max_size=12)


def _targets(cfg, anchor, vectors):
    return [b for b, _ in run_policy(cfg, anchor, vectors)]


def test_defaults():
    cfg = PolicyConfig(PolicyKind.HYBRID)
    assert (cfg.kappa, cfg.alpha, cfg.epsilon, cfg.rho) == (DEFAULT_KAPPA, DEFAULT_ALPHA, DEFAULT_EPSILON, DEFAULT_RHO)
    assert (DEFAULT_KAPPA, DEFAULT_ALPHA, DEFAULT_EPSILON, DEFAULT_RHO) == (0.25, 0.5, 0.1, 1.5)
    assert cfg.label == "hybrid"
    assert PolicyConfig("hybrid_radius").kind is PolicyKind.HYBRID_RADIUS


@pytest.mark.parametrize("kwargs", [{"kappa": -0.1}, {"alpha": 1.5}, {"epsilon": -1.0}, {"rho": 0.0}])
def test_invalid_hyperparameters(kwargs):
    with pytest.raises(PolicyError):
        PolicyConfig(PolicyKind.CAP, **kwargs)


def test_cap_delta_examples():
    small = np.array([0.1] + [0.0] * 7)
    assert_array_equal(cap_delta(small, 0.25), small)
    big = np.array([0.3, 0.4] + [0.0] * 6)
    assert_allclose(cap_delta(big, 0.25), [0.15, 0.2] + [0.0] * 6)
    assert_allclose(cap_delta(big, 0.0), np.zeros(8))


def test_ema_blend_examples():
    b_prev, u = np.zeros(8), np.ones(8)
    assert_array_equal(ema_blend(b_prev, u, 1.0), u)
    assert_array_equal(ema_blend(b_prev, u, 0.0), b_prev)
    assert_allclose(ema_blend(b_prev, u, 0.5), np.full(8, 0.5))


def test_deadband_gate_examples():
    b_prev = np.zeros(8)
    inside = np.array([0.05] + [0.0] * 7)
    outside = np.array([0.2] + [0.0] * 7)
    boundary = np.array([0.1] + [0.0] * 7)
    assert_array_equal(deadband_gate(b_prev, inside, 0.1), b_prev)
    assert_array_equal(deadband_gate(b_prev, outside, 0.1), outside)
    assert_array_equal(deadband_gate(b_prev, boundary, 0.1), b_prev)


def test_radius_clamp_examples():
    center = np.zeros(8)
    far = np.array([2.0] + [0.0] * 7)
    assert_allclose(radius_clamp(far, center, 1.5), [1.5] + [0.0] * 7)
    assert_array_equal(radius_clamp(center, center, 1.5), center)
    near = np.array([1.0] + [0.0] * 7)
    assert_array_equal(radius_clamp(near, center, 1.5), near)


def test_policy_step_requires_seeded_state():
    with pytest.raises(PolicyError, match="state not seeded with centroid"):
        policy_step(PolicyConfig(PolicyKind.UNCAPPED), PolicyState(), np.ones(8), "hi", np.zeros(8))


def test_policy_step_updates_state():
    state = PolicyState.seeded(np.zeros(8))
    u = np.ones(8)
    b, hit = policy_step(PolicyConfig(PolicyKind.UNCAPPED), state, u, "hi", np.zeros(8))
    assert_array_equal(b, u)
    assert not hit
    assert_array_equal(state.b_prev, u)
    assert state.turn == 1


def test_hybrid_cache_replays_stored_vector():
    cfg = PolicyConfig(PolicyKind.HYBRID_CACHE)
    rng = np.random.default_rng(5)
    vectors = [rng.normal(size=8) for _ in range(5)]
    texts = ["hello", "how are you", "fine", "ok", "How  are YOU"]
    steps = run_policy(cfg, np.zeros(8), vectors, texts)
    assert [hit for _, hit in steps] == [False, False, False, False, True]
    assert_array_equal(steps[4][0], steps[1][0])


def test_normalize_cache_key():
    assert normalize_cache_key("  How  are\tYOU ") == "how are you"


def test_run_policy_checks_lengths():
    with pytest.raises(PolicyError):
        run_policy(PolicyConfig(PolicyKind.STATIC), np.zeros(8), [np.ones(8)], ["a", "b"])


# === 性质 ===

@pytest.mark.property
@settings(max_examples=1000, deadline=None)
@given(anchor=VECTOR, vectors=SEQUENCE)
def test_uncapped_and_static_identities(anchor, vectors):
    for b, u in zip(_targets(PolicyConfig(PolicyKind.UNCAPPED), anchor, vectors), vectors):
        assert_array_equal(b, u)
    for b in _targets(PolicyConfig(PolicyKind.STATIC), anchor, vectors):
        assert_array_equal(b, anchor)


@pytest.mark.property
@settings(max_examples=1000, deadline=None)
@given(anchor=VECTOR, vectors=SEQUENCE)
def test_limit_equivalences(anchor, vectors):
    uncapped = _targets(PolicyConfig(PolicyKind.UNCAPPED), anchor, vectors)
    frozen = [anchor] * len(vectors)
    cases = [
        (PolicyConfig(PolicyKind.EMA, alpha=1.0), uncapped),
        (PolicyConfig(PolicyKind.EMA, alpha=0.0), frozen),
        (PolicyConfig(PolicyKind.CAP, kappa=math.inf), uncapped),
        (PolicyConfig(PolicyKind.CAP, kappa=1e9), uncapped),
        (PolicyConfig(PolicyKind.CAP, kappa=0.0), frozen),
    ]
    for cfg, expected in cases:
        for b, e in zip(_targets(cfg, anchor, vectors), expected):
            assert_allclose(b, e, atol=TOL)


@pytest.mark.property
@settings(max_examples=1000, deadline=None)
@given(anchor=VECTOR, vectors=SEQUENCE)
def test_deadband_zero_epsilon_tracks_user(anchor, vectors):
    for b, u in zip(_targets(PolicyConfig(PolicyKind.DEADBAND, epsilon=0.0), anchor, vectors), vectors):
        assert_allclose(b, u, atol=TOL)
        assert cosine(u, b) == pytest.approx(1.0, abs=TOL)


@pytest.mark.property
@settings(max_examples=1000, deadline=None)
@given(anchor=VECTOR, vectors=SEQUENCE, kappa=st.floats(min_value=0.0, max_value=2.0))
def test_step_size_bound(anchor, vectors, kappa):
    for kind in (PolicyKind.CAP, PolicyKind.HYBRID, PolicyKind.HYBRID_RADIUS):
        cfg = PolicyConfig(kind, kappa=kappa)
        prev = anchor
        for b in _targets(cfg, anchor, vectors):
            assert np.linalg.norm(b - prev) <= kappa + 1e-12
            prev = b


@pytest.mark.property
@settings(max_examples=1000, deadline=None)
@given(anchor=VECTOR, vectors=SEQUENCE, rho=st.floats(min_value=0.01, max_value=3.0))
def test_radius_leash_bound(anchor, vectors, rho):
    cfg = PolicyConfig(PolicyKind.HYBRID_RADIUS, kappa=10.0, rho=rho)
    for b in _targets(cfg, anchor, vectors):
        assert np.linalg.norm(b - anchor) <= rho + 1e-9


@pytest.mark.property
@settings(max_examples=1000, deadline=None)
@given(b_prev=VECTOR, u=VECTOR)
def test_hybrid_equals_cap_when_saturated(b_prev, u):
    cfg_cap = PolicyConfig(PolicyKind.CAP)
    cfg_hybrid = PolicyConfig(PolicyKind.HYBRID)
    gap = float(np.linalg.norm(u - b_prev))
    assume(cfg_hybrid.alpha * gap >= cfg_hybrid.kappa)
    cap_b, _ = policy_step(cfg_cap, PolicyState.seeded(b_prev), u, "x", np.zeros(8))
    hyb_b, _ = policy_step(cfg_hybrid, PolicyState.seeded(b_prev), u, "x", np.zeros(8))
    assert_allclose(hyb_b, cap_b, atol=TOL)
