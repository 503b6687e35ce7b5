"""Deterministic text utilities shared by chunking, BM25 and the eval metrics.

The tokenizer is a fixed rule, not a model vocabulary: tokens are
whitespace-delimited runs, except that every CJK character is its own
token. This keeps chunk boundaries and retrieval statistics reproducible
across machines and runs.
"""

from __future__ import annotations

import re

# Inclusive codepoint ranges treated as CJK (one token per character).
_CJK_RANGES = (
    (0x3040, 0x30FF),    # hiragana + katakana
    (0x3400, 0x4DBF),    # CJK extension A
    (0x4E00, 0x9FFF),    # CJK unified ideographs
    (0xAC00, 0xD7AF),    # hangul syllables
    (0xF900, 0xFAFF),    # CJK compatibility ideographs
    (0x20000, 0x2A6DF),  # CJK extension B
)


def is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def tokenize_with_spans(text: str) -> list[tuple[str, int, int]]:
    """Tokenize, returning (token, char_start, char_end) triples.

    Character offsets index into the original string, so a run of tokens
    can be mapped back to the exact substring that produced it.
    """
    spans: list[tuple[str, int, int]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if is_cjk(ch):
            spans.append((ch, i, i + 1))
            i += 1
            continue
        j = i + 1
        while j < n and not text[j].isspace() and not is_cjk(text[j]):
            j += 1
        spans.append((text[i:j], i, j))
        i = j
    return spans


def tokenize(text: str) -> list[str]:
    return [tok for tok, _, _ in tokenize_with_spans(text)]


_SENTENCE_END = re.compile(r"(?<=[.!?。！？])(?:\s+|$)")


def split_sentences(text: str) -> list[str]:
    """Split on terminal punctuation (. ! ? 。 ！ ？) followed by whitespace
    or end of text. Deliberately simple; returns stripped, non-empty pieces.
    """
    parts = _SENTENCE_END.split(text)
    return [p.strip() for p in parts if p and p.strip()]
