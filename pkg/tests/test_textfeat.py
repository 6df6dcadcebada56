# -*- coding: utf-8 -*-
"""
===================================
文本特征测试
===================================

覆盖音节、可读性、情感、非正式度、功能词与风格向量组装。
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.errors import TextFeatureError
from src.textfeat import (
    FEATURE_NAMES,
    N_FEATURES,
    category_rate,
    count_syllables,
    flesch_reading_ease,
    function_word_filter,
    function_word_ratio,
    informality_score,
    sentiment_compound,
    split_sentences,
    style_matrix,
    style_vector,
    tokenize,
)

WORDS = st.sampled_from(
    ["the", "cat", "sat", "on", "mat", "lol", "i", "love", "not", "friend", "think", "happy", "u", "discussion"]
)
PUNCT = st.sampled_from([" ", ". ", "! ", "?? ", ", "])


@st.composite
def utterances(draw):
    words = draw(st.lists(WORDS, min_size=1, max_size=20))
    seps = draw(st.lists(PUNCT, min_size=len(words), max_size=len(words)))
    return "".join(w + s for w, s in zip(words, seps))


def test_tokenize_lowercases_and_keeps_contractions():
    assert tokenize("Don't STOP, it's fine!") == ["don't", "stop", "it's", "fine"]
    assert tokenize("") == []


def test_split_sentences_drops_empty_segments():
    assert split_sentences("Hi. Hi there.") == ["Hi", " Hi there"]
    assert split_sentences("Wait!!! What??") == ["Wait", " What"]


@pytest.mark.parametrize("word,expected", [("cat", 1), ("table", 2), ("idea", 2), ("the", 1), ("42", 1)])
def test_count_syllables(word, expected):
    assert count_syllables(word) == expected


def test_flesch_reading_ease_examples():
    assert flesch_reading_ease("The cat sat.") == pytest.approx(119.19, abs=1e-9)
    assert flesch_reading_ease("Hi.") == pytest.approx(121.22, abs=1e-9)
    with pytest.raises(TextFeatureError, match="empty utterance"):
        flesch_reading_ease("")


def test_sentiment_sign_and_negation(lexicons):
    assert sentiment_compound("", lexicons) == 0.0
    positive = sentiment_compound("I love this", lexicons)
    negated = sentiment_compound("I do not love this", lexicons)
    assert positive > 0
    assert negated < positive
    assert negated <= 0


def test_informality_bins(lexicons):
    assert informality_score("I wish to understand the scope of our discussion.", lexicons) < 0.33
    assert informality_score("lol ok nvm. u good?", lexicons) > 0.66
    assert informality_score("", lexicons) == pytest.approx(0.5)


def test_function_word_ratio(lexicons):
    assert function_word_ratio("the cat sat on the mat", lexicons) == pytest.approx(0.5)
    assert function_word_ratio("cat mat", lexicons) == 0.0
    assert function_word_ratio("the the the", lexicons) == 1.0
    with pytest.raises(TextFeatureError):
        function_word_ratio("...", lexicons)


def test_category_rate():
    assert category_rate("friend talk", {"friend", "talk"}) == 1.0
    assert category_rate("", {"friend"}) == 0.0
    assert category_rate("my friend is here", {"friend"}) == pytest.approx(0.25)


def test_function_word_filter(lexicons):
    assert function_word_filter("the cat sat on the mat", lexicons) == "the on the"
    assert function_word_filter("cat mat", lexicons) == ""


def test_style_vector_layout(lexicons):
    vec = style_vector("Hi. Hi there.", lexicons)
    assert vec.avg_sentence_len == pytest.approx(1.5)
    arr = vec.to_array()
    assert arr.shape == (N_FEATURES,)
    assert list(vec.to_dict()) == list(FEATURE_NAMES)
    with pytest.raises(TextFeatureError, match="empty utterance"):
        style_vector("   ", lexicons)


def test_style_vector_is_deterministic(lexicons):
    text = "Honestly I don't know what to think about this problem!!"
    a = style_vector(text, lexicons).to_array()
    b = style_vector(text, lexicons).to_array()
    assert a.tobytes() == b.tobytes()


def test_style_matrix_stacks_vectors(lexicons):
    texts = ["ok cool thx", "Could you please explain the methodology in detail?"]
    matrix = style_matrix(texts, lexicons)
    assert matrix.shape == (2, N_FEATURES)
    for row, text in zip(matrix, texts):
        assert row.tobytes() == style_vector(text, lexicons).to_array().tobytes()
    assert style_matrix([], lexicons).shape == (0, N_FEATURES)
    with pytest.raises(TextFeatureError):
        style_matrix(["fine", "  "], lexicons)


@pytest.mark.property
@settings(max_examples=150, deadline=None)
@given(text=utterances())
def test_style_vector_ranges(lexicons, text):
    vec = style_vector(text, lexicons)
    arr = vec.to_array()
    assert np.all(np.isfinite(arr))
    assert 0.0 <= vec.informality <= 1.0
    assert -1.0 <= vec.sentiment <= 1.0
    assert vec.avg_sentence_len >= 1.0
    for value in (vec.social_rate, vec.cognitive_rate, vec.affective_rate, vec.function_word_ratio):
        assert 0.0 <= value <= 1.0


@pytest.mark.property
@settings(max_examples=150, deadline=None)
@given(text=utterances())
def test_function_word_filter_idempotent(lexicons, text):
    once = function_word_filter(text, lexicons)
    assert function_word_filter(once, lexicons) == once
    if once:
        assert function_word_ratio(once, lexicons) == 1.0
