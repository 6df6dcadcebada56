# -*- coding: utf-8 -*-
"""
===================================
运行配置解析测试
===================================
"""

import json

import pytest

from src.enums import CorpusFormat, GeneratorMode, PersonaAnchor, PolicyKind
from src.errors import ConfigError
from src.run_config import RunConfig, load_run_config, parse_policy


def _base(**extra):
    data = {"corpora": [{"name": "toy", "path": "toy.jsonl"}], "seed": 7}
    data.update(extra)
    return data


def test_defaults():
    config = RunConfig.from_dict(_base())
    assert [p.kind for p in config.policies] == list(PolicyKind)
    assert config.corpora[0].format is CorpusFormat.SESSION_JSONL
    assert config.persona.anchor is PersonaAnchor.CENTROID
    assert config.thresholds == 0.5
    assert config.closed_loop is None
    assert load_run_config(None) == RunConfig()


@pytest.mark.parametrize(
    "data",
    [
        {"corpora": [], "colour": "blue"},
        {"persona": {"anchr": "centroid"}},
        {"policies": [{"kind": "cap", "kapa": 0.1}]},
        {"tost": {"sesoi": 0.1, "margin": 1}},
        {"closed_loop": {"generators": ["echo"], "retries": 2}},
    ],
)
def test_unknown_keys_are_rejected_at_any_level(data):
    with pytest.raises(ConfigError, match="unknown key"):
        RunConfig.from_dict(data)


def test_parse_policy():
    assert parse_policy("Hybrid").kind is PolicyKind.HYBRID
    cap = parse_policy({"kind": "cap", "kappa": "0.1", "label": "cap_small"})
    assert cap.kappa == 0.1 and cap.label == "cap_small"
    with pytest.raises(ConfigError, match="unknown PolicyKind"):
        parse_policy("turbo")
    with pytest.raises(ConfigError):
        parse_policy({"kind": "ema", "alpha": 1.5})
    with pytest.raises(ConfigError, match="missing 'kind'"):
        parse_policy({"kappa": 0.1})


@pytest.mark.parametrize(
    "extra",
    [
        {"policies": []},
        {"policies": ["cap", "cap"]},
        {"windows": [0, 3]},
        {"thresholds": [0.5, 0.5]},
        {"thresholds": -0.1},
        {"base_prompt": "   "},
        {"jobs": 0},
        {"comparisons": [{"baseline": "static", "treatment": "turbo"}]},
        {"comparisons": [{"baseline": "static", "treatment": "hybrid", "metrics": ["speed"]}]},
        {"validation": {"observed_path": "obs.csv", "policy": "hybrid", "corpus": "other"}},
        {"bootstrap": {"n_resamples": 0}},
        {"tost": {"alpha": 1.0}},
        {"closed_loop": {"max_sessions": 0}},
        {"closed_loop": {"max_reply_tokens": 0}},
        {"closed_loop": {"temperature": 2.5}},
        {"persona": {"archetype": "mine"}},
    ],
)
def test_semantic_validation(extra):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(_base(**extra))


def test_duplicate_corpus_names():
    with pytest.raises(ConfigError, match="corpus names"):
        RunConfig.from_dict({"corpora": [{"path": "a/toy.jsonl"}, {"path": "b/toy.jsonl"}]})


def test_with_overrides():
    config = RunConfig.from_dict(_base())
    assert config.with_overrides() is config

    updated = config.with_overrides(seed=3, output_dir="elsewhere", policies="static, uncapped",
                                    windows="1,3", closed_loop="echo,styled", jobs=2)
    assert updated.seed == 3
    assert updated.output_dir == "elsewhere"
    assert [p.label for p in updated.policies] == ["static", "uncapped"]
    assert updated.windows == (1, 3)
    assert updated.closed_loop.generators == (GeneratorMode.ECHO, GeneratorMode.STYLED)
    assert updated.jobs == 2

    with pytest.raises(ConfigError):
        config.with_overrides(windows="1,x")
    with pytest.raises(ConfigError):
        config.with_overrides(closed_loop="psychic")
    with pytest.raises(ConfigError):
        config.with_overrides(policies="static,static")


def test_config_hash_ignores_jobs_and_output_dir():
    config = RunConfig.from_dict(_base())
    assert len(config.config_hash) == 12
    assert config.config_hash == RunConfig.from_dict(_base()).config_hash
    assert config.with_overrides(jobs=8, output_dir="x").config_hash == config.config_hash
    assert config.with_overrides(seed=8).config_hash != config.config_hash
    assert config.with_overrides(policies="static").config_hash != config.config_hash


def test_load_run_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(_base(windows=[1, 2])), encoding="utf-8")
    assert load_run_config(path).windows == (1, 2)

    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "missing.json")

    bad = tmp_path / "bad.json"
    bad.write_text("{oops", encoding="utf-8")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_run_config(bad)

    wrong_type = tmp_path / "wrong.json"
    wrong_type.write_text(json.dumps(_base(seed="abc")), encoding="utf-8")
    with pytest.raises(ConfigError, match="invalid value"):
        load_run_config(wrong_type)


def test_closed_loop_generation_settings_are_optional():
    loop = RunConfig.from_dict(_base(closed_loop={"generators": ["echo"]})).closed_loop
    assert loop.max_reply_tokens is None
    assert loop.temperature is None

    loop = RunConfig.from_dict(_base(closed_loop={"max_reply_tokens": "128", "temperature": 0})).closed_loop
    assert loop.max_reply_tokens == 128
    assert loop.temperature == 0.0
