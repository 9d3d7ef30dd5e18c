"""Lexical helpers shared by the embedder, wake matcher, and verb extractor."""
from __future__ import annotations

from egostream.text import (
    STOPWORDS,
    contains_token_subsequence,
    content_stems,
    normalize,
    split_clauses,
    stem,
    tokens,
)


class TestNormalize:
    def test_lowercase_punctuation_whitespace(self):
        assert normalize("When did I add sugar?") == "when did i add sugar"
        assert normalize("  Hey,   Assistant!  ") == "hey assistant"
        assert normalize("") == ""

    def test_underscore_treated_as_punctuation(self):
        assert normalize("add_sugar") == "add sugar"


class TestTokens:
    def test_order_preserved(self):
        assert tokens("Crack an egg, then whisk!") == ["crack", "an", "egg", "then", "whisk"]

    def test_empty(self):
        assert tokens("   ") == []


class TestStem:
    def test_inflection_table(self):
        cases = {
            "adds": "add",
            "added": "add",
            "adding": "add",
            "cracks": "crack",
            "cracked": "crack",
            "cracking": "crack",
            "cutting": "cut",
            "chopped": "chop",
            "whisks": "whisk",
            "stirring": "stir",
            "eggs": "egg",
            "glass": "glass",
            "mixes": "mix",
            "pour": "pour",
        }
        for word, expected in cases.items():
            assert stem(word) == expected, word

    def test_short_tokens_pass_through(self):
        assert stem("is") == "is"
        assert stem("us") == "us"


class TestContentStems:
    def test_drops_stopwords_and_stems(self):
        assert content_stems("when did I add sugar") == ["add", "sugar"]
        assert content_stems("adds sugar to the bowl") == ["add", "sugar", "bowl"]

    def test_all_stopwords_is_empty(self):
        assert content_stems("and then") == []
        assert "then" in STOPWORDS


class TestTokenSubsequence:
    def test_contiguous_run_matches(self):
        assert contains_token_subsequence("hey assistant when did i", "hey assistant")
        assert contains_token_subsequence("well hey assistant", "hey assistant")

    def test_token_boundaries_respected(self):
        # "hey assistant" must not match inside longer words
        assert not contains_token_subsequence("heyday assistants meeting", "hey assistant")
        # "how" must not match inside "show"
        assert not contains_token_subsequence("show me the next action", "how")

    def test_gap_breaks_the_run(self):
        assert not contains_token_subsequence("hey there assistant", "hey assistant")

    def test_empty_needle_never_matches(self):
        assert not contains_token_subsequence("anything", "")


class TestSplitClauses:
    def test_splits_on_and_then_comma(self):
        parts = split_clauses("when did I add sugar and when did I crack an egg")
        assert parts == ["when did I add sugar", "when did I crack an egg"]
        parts = split_clauses("add sugar, then whisk; pour")
        assert parts == ["add sugar", "whisk", "pour"]

    def test_query_order_preserved(self):
        parts = split_clauses("crack an egg and add sugar")
        assert parts == ["crack an egg", "add sugar"]

    def test_empty_fragments_dropped(self):
        assert split_clauses("and then, ") == []
