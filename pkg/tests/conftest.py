# -*- coding: utf-8 -*-
"""
===================================
测试公共夹具
===================================

提供：
1. 随包词典与片段表（会话级缓存）
2. 小型合成会话语料（6 个会话，每个 4 轮 用户/机器人）
3. 在该语料上拟合的人设模型（随包原型作为一致性锚点）与向量化后的会话
"""

import json
import sys
from pathlib import Path
from typing import List

import pytest

# 让 `src` / `corpus_provider` 可以从仓库根目录导入
ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src.config import Config  # noqa: E402
from src.core.pipeline import fit_persona_from_sessions, prepare_session  # noqa: E402
from src.enums import FitSource, Speaker  # noqa: E402
from src.lexicon import load_lexicons  # noqa: E402
from src.models import SessionLog, Utterance  # noqa: E402
from src.persona import load_archetype  # noqa: E402
from src.promptgen import load_fragment_table  # noqa: E402

USER_LINES = [
    "hey!! how r u doing today lol",
    "I wish to understand the scope of our discussion.",
    "my friend and I talked about the trip, it was great",
    "Honestly I don't know what to think about this problem.",
    "ok cool thx",
    "Could you please explain the methodology in detail?",
    "I'm so sad and worried about my exam tomorrow.",
    "We should talk with the team before we decide anything.",
    "lol ok nvm. u good?",
    "The weather is lovely and I feel happy.",
    "Why does this happen? I think it depends on the context.",
    "Thank you, that was very helpful indeed.",
]

BOT_LINES = [
    "Sure, happy to help with that.",
    "Certainly. Let me outline the main considerations for you.",
    "That sounds like a wonderful trip with your friend!",
    "It can be hard to decide. Let's think it through together.",
    "No problem at all.",
    "The method works in three steps, which I will describe now.",
    "I'm sorry you feel that way. Exams can be stressful.",
    "Talking with the team first is a good idea.",
    "Yes, all good here, thanks for asking.",
    "Glad to hear you are feeling happy today.",
    "Good question. It usually depends on a few factors.",
    "You're welcome, I'm glad it helped.",
]


def make_session(session_id: str, participant_id: str, user_texts: List[str], bot_texts: List[str],
                 source: str = "test") -> SessionLog:
    """用户 / 机器人交替的会话；bot_texts 可以比 user_texts 短"""
    turns = []
    index = 0
    for i, user in enumerate(user_texts):
        turns.append(Utterance(text=user, speaker=Speaker.USER, turn_index=index))
        index += 1
        if i < len(bot_texts):
            turns.append(Utterance(text=bot_texts[i], speaker=Speaker.BOT, turn_index=index))
            index += 1
    return SessionLog(session_id=session_id, participant_id=participant_id, turns=turns, source=source)


def build_corpus(n_sessions: int = 6, turns_per_session: int = 4) -> List[SessionLog]:
    sessions = []
    for s in range(n_sessions):
        users = [USER_LINES[(s * 3 + t) % len(USER_LINES)] for t in range(turns_per_session)]
        bots = [BOT_LINES[(s * 5 + t) % len(BOT_LINES)] for t in range(turns_per_session)]
        sessions.append(make_session(f"s{s + 1:02d}", f"p{s + 1:02d}", users, bots))
    return sessions


def write_session_jsonl(sessions: List[SessionLog], path: Path) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for session in sessions:
            for record in session.to_records():
                f.write(json.dumps(record, ensure_ascii=False) + "\n")
    return path


@pytest.fixture(scope="session")
def lexicons():
    return load_lexicons()


@pytest.fixture(scope="session")
def fragment_table():
    return load_fragment_table()


@pytest.fixture
def corpus() -> List[SessionLog]:
    return build_corpus()


@pytest.fixture
def persona(corpus, lexicons):
    # 使用随包原型，archetype_z 不退化为零向量
    return fit_persona_from_sessions(corpus, "test", fit_on=FitSource.ALL, raw_archetype=load_archetype(),
                                     lexicons=lexicons)


@pytest.fixture
def prepared(corpus, persona, lexicons):
    return [prepare_session(s, persona, lexicons) for s in corpus]


@pytest.fixture
def corpus_file(tmp_path, corpus) -> Path:
    return write_session_jsonl(corpus, tmp_path / "corpus.jsonl")


@pytest.fixture
def env_config() -> Config:
    """不读 .env 的独立配置（单线程、无远程生成器）"""
    return Config(max_workers=1)


@pytest.fixture(autouse=True)
def _reset_config_singleton():
    yield
    Config.reset_instance()
