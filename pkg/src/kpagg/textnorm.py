"""Tokenization and stemming-based normalization for keyphrase matching.

A phrase or document is reduced to a sequence of normalized tokens: words
are extracted with a Unicode-aware pattern (hyphens and other punctuation
split tokens), lowercased, and purely ASCII-alphabetic tokens are Porter
stemmed; digits and non-ASCII tokens pass through lowercased. Two phrases
match when their normalized forms are equal; a phrase is *present* in a
document when its token sequence occurs contiguously in the document's
normalized tokens.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from . import porter

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_ASCII_ALPHA_RE = re.compile(r"[a-z]+\Z")


def tokenize(text: str) -> list[str]:
    """Split text into lowercase word tokens, dropping punctuation."""
    return [t.lower() for t in _TOKEN_RE.findall(text)]


def normalize_token(token: str) -> str:
    """Stem a lowercase token if it is plain ASCII letters, else keep it."""
    if _ASCII_ALPHA_RE.match(token):
        return porter.stem(token)
    return token


def normalize_tokens(text: str) -> list[str]:
    """Lowercased, stemmed token list for a piece of text."""
    return [normalize_token(t) for t in tokenize(text)]


@dataclass(frozen=True)
class NormalizedPhrase:
    """A keyphrase with its normalized form and, once classified, its
    present/absent status relative to a source document."""

    surface: str
    normalized: str
    is_present: bool | None = None

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self.normalized.split(" ")) if self.normalized else ()

    def classified(self, present: bool) -> "NormalizedPhrase":
        return replace(self, is_present=present)


def normalize_phrase(surface: str) -> NormalizedPhrase:
    return NormalizedPhrase(
        surface=surface, normalized=" ".join(normalize_tokens(surface))
    )


def _contains_run(haystack: list[str] | tuple[str, ...], needle: tuple[str, ...]) -> bool:
    n = len(needle)
    first = needle[0]
    for i in range(len(haystack) - n + 1):
        if haystack[i] == first and tuple(haystack[i : i + n]) == needle:
            return True
    return False


def is_present(phrase: NormalizedPhrase, source_tokens: list[str] | tuple[str, ...]) -> bool:
    """Whether the phrase occurs, token for token, inside the source."""
    needle = phrase.tokens
    if not needle:
        raise ValueError("cannot test presence of an empty phrase")
    return _contains_run(source_tokens, needle)


def dedup_preserve_order(phrases: list[NormalizedPhrase]) -> list[NormalizedPhrase]:
    """Keep the first phrase for each distinct normalized form.

    Phrases that normalize to nothing (no alphanumeric content) are dropped.
    """
    seen: set[str] = set()
    out: list[NormalizedPhrase] = []
    for p in phrases:
        if not p.normalized or p.normalized in seen:
            continue
        seen.add(p.normalized)
        out.append(p)
    return out
