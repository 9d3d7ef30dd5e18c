"""Lexical utilities: normalization, tokenizing, light stemming, clause splits.

Everything here is deliberately deterministic and dependency-free. The mock
embedder, wake-word matcher, intent router, and verb extractor all share
these helpers so their notions of "token" agree.
"""
from __future__ import annotations

import re

_PUNCT_RE = re.compile(r"[^\w\s]|_")
_WS_RE = re.compile(r"\s+")

# Small function-word list. Content tokens are what survive this filter;
# grounding scores are driven by content-token overlap.
STOPWORDS = frozenset(
    """
    a an the i you he she it we they me my your his her its our their
    am is are was were be been being do did does doing have has had
    to of in on at by for with from into onto up down out off over
    and or but so then now just here there this that these those
    what when where which who whom why how
    can could should would will shall may might must
    not no yes please
    """.split()
)


def normalize(text: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    lowered = _PUNCT_RE.sub(" ", text.lower())
    return _WS_RE.sub(" ", lowered).strip()


def tokens(text: str) -> list[str]:
    """Normalized word tokens, in order."""
    norm = normalize(text)
    return norm.split() if norm else []


def stem(token: str) -> str:
    """Very light inflection stripper: plural -s/-es, -ed, -ing.

    Collapses "adds"/"added"/"adding" -> "add" and "cutting" -> "cut"
    without a statistical stemmer. Short tokens pass through untouched.
    """
    base = token
    if len(token) >= 6 and token.endswith("ing"):
        base = token[:-3]
    elif len(token) >= 5 and token.endswith("ed"):
        base = token[:-2]
    elif len(token) >= 4 and token.endswith("es") and token[-3] in "sxzh":
        base = token[:-2]
    elif len(token) >= 4 and token.endswith("s") and not token.endswith("ss"):
        base = token[:-1]
    else:
        return token
    # undouble trailing consonant: cutt -> cut, chopp -> chop
    if len(base) >= 4 and base[-1] == base[-2] and base[-1] not in "aeiouls":
        base = base[:-1]
    return base


def content_stems(text: str) -> list[str]:
    """Stemmed tokens with stopwords removed. May be empty."""
    return [stem(tok) for tok in tokens(text) if tok not in STOPWORDS]


def contains_token_subsequence(haystack: str, needle: str) -> bool:
    """True iff needle's tokens appear as a contiguous run in haystack's tokens.

    Token boundaries are respected: "hey assistant" is not contained in
    "heyday assistants meeting".
    """
    hay = tokens(haystack)
    ndl = tokens(needle)
    if not ndl or len(ndl) > len(hay):
        return False
    n = len(ndl)
    return any(hay[i : i + n] == ndl for i in range(len(hay) - n + 1))


_CLAUSE_SPLIT_RE = re.compile(r",|;|\band\b|\bthen\b", re.IGNORECASE)


def split_clauses(query: str) -> list[str]:
    """Split a query into action clauses on coordinating conjunctions/commas.

    Purely lexical; a real chat adapter may override with its own parse.
    Preserves query order and drops empty fragments.
    """
    parts = [part.strip() for part in _CLAUSE_SPLIT_RE.split(query)]
    return [part for part in parts if part]
