"""Tokenization, wildcard vocabularies and theme/sentiment counting."""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import MalformedPattern

THEMES = ("CC", "RE", "GHI")

# letters/digits, with apostrophes and hyphens allowed only between them
_TOKEN_RE = re.compile(r"[^\W_]+(?:['\-][^\W_]+)*")
_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "‐": "-", "‑": "-"})


def tokenize(text: str) -> list[str]:
    """Split raw snippet text into lowercase tokens.

    Anything that is not a letter, digit, apostrophe or hyphen separates
    tokens; apostrophes and hyphens survive only inside a word.

    >>> tokenize("Carbon tax, NOW!")
    ['carbon', 'tax', 'now']
    >>> tokenize("CO2 cap-and-trade")
    ['co2', 'cap-and-trade']
    """
    return _TOKEN_RE.findall(text.translate(_APOSTROPHES).lower())


@dataclass(frozen=True, order=True)
class WildcardPattern:
    """A single- or multi-token pattern; the wildcard applies to the last token."""

    stem: str
    is_wildcard: bool = False

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(self.stem.split(" "))

    def __len__(self) -> int:
        return len(self.words)

    def __str__(self) -> str:
        return self.stem + ("*" if self.is_wildcard else "")


def compile_pattern(source: str) -> WildcardPattern:
    """Parse ``"hurricane*"`` style sources into a :class:`WildcardPattern`."""
    text = " ".join(source.split()).lower()
    if not text:
        raise MalformedPattern(f"empty pattern: {source!r}")
    if text.count("*") > 1 or ("*" in text and not text.endswith("*")):
        raise MalformedPattern(f"'*' is only allowed once, at the end: {source!r}")
    is_wildcard = text.endswith("*")
    stem = text[:-1] if is_wildcard else text
    if not stem or stem.endswith(" "):
        raise MalformedPattern(f"wildcard needs a non-empty stem: {source!r}")
    for word in stem.split(" "):
        if tokenize(word) != [word]:
            raise MalformedPattern(f"{word!r} in {source!r} is not a single token")
    return WildcardPattern(stem, is_wildcard)


@dataclass(frozen=True)
class ThemeVocabulary:
    theme: str
    patterns: frozenset[WildcardPattern]
    # first word -> patterns, split by whether the first word is matched exactly
    _exact: Mapping[str, tuple[WildcardPattern, ...]] = field(
        init=False, repr=False, compare=False)
    _prefix: Mapping[str, tuple[WildcardPattern, ...]] = field(
        init=False, repr=False, compare=False)

    def __post_init__(self):
        exact: dict[str, list[WildcardPattern]] = defaultdict(list)
        prefix: dict[str, list[WildcardPattern]] = defaultdict(list)
        for pat in sorted(self.patterns):
            words = pat.words
            if len(words) == 1 and pat.is_wildcard:
                prefix[words[0]].append(pat)
            else:
                exact[words[0]].append(pat)
        object.__setattr__(self, "_exact", {k: tuple(v) for k, v in exact.items()})
        object.__setattr__(self, "_prefix", {k: tuple(v) for k, v in prefix.items()})

    @classmethod
    def from_sources(cls, theme: str, sources: Iterable[str]) -> "ThemeVocabulary":
        return cls(theme, frozenset(compile_pattern(s) for s in sources))

    def candidates(self, token: str) -> list[WildcardPattern]:
        """Patterns whose first word can match ``token``."""
        out = list(self._exact.get(token, ()))
        if self._prefix:
            for end in range(1, len(token) + 1):
                out.extend(self._prefix.get(token[:end], ()))
        return out


def pattern_matches_at(pattern: WildcardPattern, tokens: Sequence[str], start: int) -> bool:
    words = pattern.words
    if start + len(words) > len(tokens):
        return False
    last = len(words) - 1
    for j, word in enumerate(words):
        tok = tokens[start + j]
        if j == last and pattern.is_wildcard:
            if not tok.startswith(word):
                return False
        elif tok != word:
            return False
    return True


def match_spans(tokens: Sequence[str], vocab: ThemeVocabulary) -> list[tuple[int, int]]:
    """Return the shortest match ``(start, end)`` for every start position."""
    spans = []
    for i, tok in enumerate(tokens):
        best = 0
        for pat in vocab.candidates(tok):
            k = len(pat)
            if (best == 0 or k < best) and pattern_matches_at(pat, tokens, i):
                best = k
        if best:
            spans.append((i, i + best))
    return spans


def count_theme_matches(tokens: Sequence[str], vocab: ThemeVocabulary) -> int:
    """Count non-overlapping occurrences of the vocabulary in ``tokens``.

    A phrase occurrence consumes its tokens, so a token is never counted
    twice for one theme. Where occurrences overlap the count is the largest
    number of disjoint ones (earliest-end greedy), which keeps the count
    monotone in the vocabulary.
    """
    count = 0
    last_end = 0
    for start, end in sorted(match_spans(tokens, vocab), key=lambda s: (s[1], s[0])):
        if start >= last_end:
            count += 1
            last_end = end
    return count


@dataclass(frozen=True)
class SentimentLexicon:
    entries: Mapping[str, tuple[bool, bool]]

    def __post_init__(self):
        for word in self.entries:
            if tokenize(word) != [word]:
                raise ValueError(f"lexicon entry {word!r} is not a lowercase token")

    @classmethod
    def from_words(cls, positive: Iterable[str] = (), negative: Iterable[str] = ()):
        pos, neg = set(positive), set(negative)
        return cls({w: (w in pos, w in neg) for w in sorted(pos | neg)})


def count_sentiment(tokens: Sequence[str], lex: SentimentLexicon) -> tuple[int, int]:
    pos = neg = 0
    get = lex.entries.get
    for tok in tokens:
        hit = get(tok)
        if hit is not None:
            pos += hit[0]
            neg += hit[1]
    return pos, neg


@dataclass(frozen=True)
class ThemeCounts:
    counts: Mapping[str, int]
    word_count: int
    pos_words: int = 0
    neg_words: int = 0


def count_text(text: str, vocabularies: Mapping[str, ThemeVocabulary],
               lex: SentimentLexicon | None = None) -> ThemeCounts:
    tokens = tokenize(text)
    counts = {theme: count_theme_matches(tokens, v) for theme, v in vocabularies.items()}
    pos, neg = count_sentiment(tokens, lex) if lex is not None else (0, 0)
    return ThemeCounts(counts, len(tokens), pos, neg)


def _pattern_lines(path) -> Iterable[tuple[int, str]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if line:
                yield lineno, line


def load_vocabulary(path, theme: str) -> ThemeVocabulary:
    """Read a one-pattern-per-line vocabulary file (``#`` starts a comment)."""
    patterns = set()
    for lineno, line in _pattern_lines(path):
        try:
            pat = compile_pattern(line)
        except MalformedPattern as exc:
            raise MalformedPattern(f"{path}:{lineno}: {exc}") from None
        patterns.add(pat)
    return ThemeVocabulary(theme, frozenset(patterns))


def load_keywords(path) -> list[str]:
    return [line for _, line in _pattern_lines(path)]


def load_lexicon(path) -> SentimentLexicon:
    """Read an EmoLex-style ``word<TAB>category<TAB>flag`` file.

    Only the ``positive`` and ``negative`` categories are used.
    """
    flags: dict[str, list[bool]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n\r")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated columns")
            word, category, flag = (p.strip() for p in parts)
            if flag not in ("0", "1"):
                raise ValueError(f"{path}:{lineno}: flag must be 0 or 1, got {flag!r}")
            if category not in ("positive", "negative"):
                continue
            entry = flags.setdefault(word.lower(), [False, False])
            if flag == "1":
                entry[0 if category == "positive" else 1] = True
    return SentimentLexicon({w: (p, n) for w, (p, n) in sorted(flags.items()) if p or n})


def load_vocabularies(paths: Mapping[str, str | Path]) -> dict[str, ThemeVocabulary]:
    return {theme: load_vocabulary(path, theme) for theme, path in paths.items()}
