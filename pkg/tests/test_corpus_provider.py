# -*- coding: utf-8 -*-
"""
===================================
语料加载与格式适配测试
===================================
"""

import json

import pytest

from corpus_provider import CorpusManager, filter_sessions
from corpus_provider.base import CorpusLoadError, UnknownCorpusFormatError, detokenize
from corpus_provider.daily_dialog import split_dialogue
from corpus_provider.session_jsonl import parse_session_jsonl
from src.enums import Speaker
from tests.conftest import make_session


def _line(session_id, event_type, text, turn, participant="p1"):
    return json.dumps(
        {"session_id": session_id, "participant_id": participant, "event_type": event_type, "text": text, "turn": turn}
    )


def test_parse_session_jsonl_groups_and_orders():
    lines = [
        _line("a", "bot_response", "hello there", 2),
        _line("a", "user_message", "hi", 1),
    ]
    result = parse_session_jsonl(lines)
    assert len(result.sessions) == 1
    session = result.sessions[0]
    assert [u.text for u in session.turns] == ["hi", "hello there"]
    assert [u.speaker for u in session.turns] == [Speaker.USER, Speaker.BOT]
    assert [u.turn_index for u in session.turns] == [0, 1]
    assert not result.rejects


def test_parse_session_jsonl_rejects_bad_lines():
    lines = [
        _line("a", "user_message", "hi", 1),
        _line("a", "system_note", "ignored", 2),
        "{not json",
        _line("a", "user_message", "dup", 1),
        json.dumps({"session_id": "a", "text": "missing"}),
        _line("a", "bot_response", "hey", 3),
    ]
    result = parse_session_jsonl(lines)
    assert len(result.sessions) == 1
    assert [u.text for u in result.sessions[0].turns] == ["hi", "hey"]
    assert [r.line_no for r in result.rejects] == [2, 3, 4, 5]
    assert "unknown event_type" in result.rejects[0].reason
    assert "duplicate" in result.rejects[2].reason


def test_empty_corpus_is_an_error(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("{bad\n", encoding="utf-8")
    with pytest.raises(CorpusLoadError, match="empty corpus"):
        CorpusManager().load(path, "session_jsonl")


def test_missing_path_and_unknown_format(tmp_path):
    manager = CorpusManager()
    with pytest.raises(CorpusLoadError, match="not found"):
        manager.load(tmp_path / "nope.jsonl", "session_jsonl")
    with pytest.raises(UnknownCorpusFormatError):
        manager.get_adapter("switchboard")
    with pytest.raises(UnknownCorpusFormatError):
        manager.adapt_external_corpus(tmp_path, "session_jsonl")


def test_session_jsonl_roundtrip(corpus_file, corpus):
    loaded = CorpusManager().load(corpus_file, "session_jsonl", source="test").sessions
    assert [s.session_id for s in loaded] == [s.session_id for s in corpus]
    assert [[u.text for u in s.turns] for s in loaded] == [[u.text for u in s.turns] for s in corpus]


def test_filter_sessions_threshold():
    two = make_session("two", "p", ["a b", "c d"], ["x", "y"])
    three = make_session("three", "p", ["a b", "c d", "e f"], ["x", "y", "z"])
    blank = make_session("blank", "p", ["a b", "   ", "c d"], ["x", "y", "z"])
    assert [s.session_id for s in filter_sessions([two, three, blank])] == ["three"]
    assert filter_sessions([]) == []


def test_detokenize():
    assert detokenize("Hello , how are you ?") == "Hello, how are you?"
    assert detokenize("I don ' t know") == "I don't know"


def test_daily_dialog_adapter(tmp_path):
    path = tmp_path / "dialogues_text.txt"
    path.write_text(
        "Hi , how are you ? __eou__ Fine , thanks . __eou__ Great ! __eou__ "
        "Bye . __eou__ See you . __eou__ Later ! __eou__\n"
        "One . __eou__ Two . __eou__\n",
        encoding="utf-8",
    )
    sessions = CorpusManager().adapt_external_corpus(path, "daily_dialog")
    assert [s.session_id for s in sessions] == ["dd-00001", "dd-00002"]
    first = sessions[0]
    assert len(first.user_turns) == 3 and len(first.bot_turns) == 3
    assert first.turns[0].text == "Hi, how are you?"
    assert first.participant_id == first.session_id
    assert split_dialogue("a __eou__ __eou__ b __eou__") == ["a", "b"]

    # 目录输入时定位 dialogues_text.txt
    assert len(CorpusManager().adapt_external_corpus(tmp_path, "daily_dialog")) == 2


def test_persona_chat_adapter(tmp_path):
    path = tmp_path / "train_self_original.txt"
    path.write_text(
        "1 your persona: i like dogs .\n"
        "2 hi , how are you ?\ti am good .\t\tcand a|cand b\n"
        "3 what do you do ?\ti teach .\n"
        "1 your persona: i swim .\n"
        "2 hello !\they !\n",
        encoding="utf-8",
    )
    sessions = CorpusManager().adapt_external_corpus(path, "persona_chat")
    assert len(sessions) == 2
    assert [u.text for u in sessions[0].turns] == ["hi, how are you?", "i am good.", "what do you do?", "i teach."]
    assert [u.speaker for u in sessions[0].turns] == [Speaker.USER, Speaker.BOT, Speaker.USER, Speaker.BOT]


def test_empathetic_adapter(tmp_path):
    path = tmp_path / "train.csv"
    path.write_text(
        "conv_id,utterance_idx,context,prompt,speaker_idx,utterance,selfeval,tags\n"
        "hit:1_conv:1,2,sad,I lost it,2,Oh no_comma_ that is awful.,,\n"
        "hit:1_conv:1,1,sad,I lost it,1,I lost my keys today.,,\n"
        "hit:1_conv:1,3,sad,I lost it,1,Yes_comma_ it was.,,\n"
        "hit:2_conv:2,1,joy,Won,5,We won!,,\n"
        "broken,line\n",
        encoding="utf-8",
    )
    sessions = CorpusManager().adapt_external_corpus(path, "empathetic")
    assert [s.session_id for s in sessions] == ["hit:1_conv:1", "hit:2_conv:2"]
    assert [u.text for u in sessions[0].turns] == ["I lost my keys today.", "Oh no, that is awful.", "Yes, it was."]
