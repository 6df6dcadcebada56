# -*- coding: utf-8 -*-
"""
===================================
闭环回放与生成器测试
===================================

只使用本地 stub 与假客户端，不访问网络。
"""

from types import SimpleNamespace

import numpy as np
import pytest

from src.config import Config
from src.core.pipeline import replay_prepared
from src.enums import Direction, GeneratorMode, PolicyKind
from src.generators import (
    NEUTRAL_STYLED_REPLY,
    BaseGenerator,
    EchoGenerator,
    FixedGenerator,
    GeneratorError,
    GeneratorRequest,
    GeneratorUnavailableError,
    RemoteGenerator,
    StyledGenerator,
    create_generator,
    history_from_pairs,
    stub_generator,
)
from src.llmloop import ClosedLoopRunner, closed_loop_session
from src.policies import PolicyConfig
from src.promptgen import DEFAULT_BASE_PROMPT, InstructionSet, compose_prompt
from src.textfeat import informality_score

SUMMARY_FIELDS = ("synchrony", "stability", "coherence", "legibility", "flip_rate", "cache_hit_rate", "mean_churn")


class FailingGenerator(BaseGenerator):
    """对指定用户话语抛出不可用错误，其余回显"""

    name = "FailingGenerator"

    def __init__(self, poison: str):
        self.poison = poison

    def _generate(self, request: GeneratorRequest) -> str:
        if request.last_user_text == self.poison:
            raise GeneratorUnavailableError("upstream down")
        return request.last_user_text


def test_history_and_messages():
    history = history_from_pairs([("hi", "hello")], "how are you")
    assert history == (("user", "hi"), ("assistant", "hello"), ("user", "how are you"))
    request = GeneratorRequest(system_prompt="sys", history=history)
    assert request.last_user_text == "how are you"
    assert request.to_messages()[0] == {"role": "system", "content": "sys"}
    assert len(request.to_messages()) == 4


def test_stub_generators():
    request = GeneratorRequest(system_prompt="sys", history=(("user", "echo me"),))
    assert EchoGenerator().generate(request).text == "echo me"
    fixed = FixedGenerator("same").generate(request)
    assert fixed.text == "same" and fixed.provider_tag == "fixed" and not fixed.refused
    assert FixedGenerator("  ").generate(request).refused
    assert isinstance(stub_generator("styled"), StyledGenerator)
    assert isinstance(create_generator(GeneratorMode.ECHO), EchoGenerator)
    with pytest.raises(GeneratorError):
        stub_generator(GeneratorMode.REMOTE)


def test_styled_generator_follows_casual_instruction(fragment_table, lexicons):
    casual = InstructionSet((fragment_table.lookup(0, Direction.HIGH),))
    prompt = compose_prompt(DEFAULT_BASE_PROMPT, casual)
    generator = StyledGenerator(fragment_table)
    assert generator.active_fragments(prompt.full_text) == [(0, Direction.HIGH)]

    reply = generator.generate(GeneratorRequest(system_prompt=prompt.full_text, history=(("user", "hey"),))).text
    assert "lol" in reply
    assert informality_score(reply, lexicons) > 0.66

    neutral = compose_prompt(DEFAULT_BASE_PROMPT, InstructionSet())
    assert generator.generate(GeneratorRequest(system_prompt=neutral.full_text)).text == NEUTRAL_STYLED_REPLY


def test_echo_uncapped_reproduces_replay(persona, prepared, fragment_table, lexicons):
    policy = PolicyConfig(PolicyKind.UNCAPPED)
    for prep in prepared:
        loop = closed_loop_session(EchoGenerator(), policy, prep, persona, fragment_table=fragment_table,
                                   lexicons=lexicons)
        replay = replay_prepared(policy, prep, persona, fragment_table=fragment_table)
        for field in SUMMARY_FIELDS:
            assert abs(getattr(loop.summary, field) - getattr(replay.summary, field)) < 1e-12
        assert loop.replies == prep.user_texts
        assert loop.fidelity == pytest.approx(1.0)


def test_refusal_marks_session_incomplete(persona, prepared, fragment_table, lexicons):
    with pytest.raises(GeneratorError, match="refused"):
        closed_loop_session(FixedGenerator(""), PolicyConfig(PolicyKind.HYBRID), prepared[0], persona,
                            fragment_table=fragment_table, lexicons=lexicons)


def test_runner_drops_failed_session_for_all_policies(persona, prepared, fragment_table, lexicons):
    poison = prepared[1].user_texts[2]
    affected = {p.session_id for p in prepared if poison in p.user_texts}
    runner = ClosedLoopRunner(FailingGenerator(poison), persona, corpus="test", fragment_table=fragment_table,
                              lexicons=lexicons, max_in_flight=2)
    policies = [PolicyConfig(PolicyKind.UNCAPPED), PolicyConfig(PolicyKind.HYBRID)]
    result = runner.run(policies, prepared)

    assert {session_id for _, session_id, _ in result.failures} == affected
    assert len(result.failures) == 2 * len(affected)
    kept = {row.session_id for row in result.rows}
    assert kept == {p.session_id for p in prepared} - affected
    for summary in result.policy_summaries:
        assert summary.n_sessions == len(kept)
    assert {r["session_id"] for r in runner.fidelity_rows()} == kept


def test_runner_respects_max_sessions(persona, prepared, fragment_table, lexicons):
    runner = ClosedLoopRunner(StyledGenerator(fragment_table), persona, corpus="test", max_sessions=2,
                              fragment_table=fragment_table, lexicons=lexicons)
    result = runner.run([PolicyConfig(PolicyKind.HYBRID)], prepared)
    assert [row.session_id for row in result.rows] == ["s01", "s02"]
    rows = runner.fidelity_rows()
    assert [r["session_id"] for r in rows] == ["s01", "s02"]
    assert all(-1.0 <= r["fidelity"] <= 1.0 for r in rows)


def test_runner_is_deterministic(persona, prepared, fragment_table, lexicons):
    outputs = []
    for in_flight in (1, 4):
        runner = ClosedLoopRunner(StyledGenerator(fragment_table), persona, max_in_flight=in_flight,
                                  fragment_table=fragment_table, lexicons=lexicons)
        result = runner.run([PolicyConfig(PolicyKind.HYBRID), PolicyConfig(PolicyKind.STATIC)], prepared)
        outputs.append(([r.to_dict() for r in result.rows], runner.fidelity_rows()))
    assert outputs[0] == outputs[1]


# === 远程生成器（假客户端）===

def _fake_client(content):
    response = SimpleNamespace(choices=[SimpleNamespace(message=SimpleNamespace(content=content))])
    completions = SimpleNamespace(create=lambda **kwargs: response)
    return SimpleNamespace(chat=SimpleNamespace(completions=completions))


def test_remote_generator_with_fake_client():
    config = Config(generator_url="http://localhost:9/v1", generator_key="k", generator_model="m")
    generator = RemoteGenerator(config=config, client=_fake_client("Sure thing."))
    response = generator.generate(GeneratorRequest(system_prompt="sys", history=(("user", "hi"),)))
    assert response.text == "Sure thing."
    assert response.provider_tag == "remote:m"

    empty = RemoteGenerator(config=config, client=_fake_client(None))
    assert empty.generate(GeneratorRequest(system_prompt="sys")).refused


def test_remote_generator_temperature_falls_back_to_environment():
    config = Config(generator_url="http://localhost:9/v1", generator_key="k", generator_temperature=0.3)
    assert RemoteGenerator(config=config, client=_fake_client("x")).temperature == 0.3
    assert RemoteGenerator(config=config, temperature=0.0, client=_fake_client("x")).temperature == 0.0


def test_remote_generator_requires_configuration():
    with pytest.raises(GeneratorError, match="GENERATOR_URL"):
        RemoteGenerator(config=Config())


def test_remote_generator_gives_up_after_retries(monkeypatch):
    config = Config(generator_url="http://localhost:9/v1", generator_key="k", generator_max_retries=1)
    generator = RemoteGenerator(config=config, client=_fake_client("unused"))
    calls = []

    def unavailable(request):
        calls.append(request)
        raise GeneratorUnavailableError("connection refused")

    monkeypatch.setattr(generator, "_complete", unavailable)
    with pytest.raises(GeneratorError, match="after 1 attempts"):
        generator.generate(GeneratorRequest(system_prompt="sys"))
    assert len(calls) == 1


def test_closed_loop_uses_realized_style(persona, prepared, fragment_table, lexicons):
    loop = closed_loop_session(FixedGenerator("Thank you."), PolicyConfig(PolicyKind.UNCAPPED), prepared[0],
                               persona, fragment_table=fragment_table, lexicons=lexicons)
    # 回复恒定，实现的风格恒定：第 2 轮起稳定性为 1
    assert [t.stability for t in loop.turns[1:]] == [1.0] * (len(loop.turns) - 1)
    assert np.isfinite(loop.fidelity)
