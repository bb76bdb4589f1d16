"""Tokenizer interface and the mock tokenizer shipped for desk-scale runs.

A tokenizer turns text into an ordered list of ``(token_id, byte_start,
byte_end)`` triples, offsets measured in UTF-8 bytes of the input.  Real text
encoders are out of scope; the mock splits on whitespace/punctuation and ids
tokens with a stable 64-bit hash (first 8 bytes of blake2b), so fixtures are
reproducible across platforms and languages.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Protocol


@dataclass(frozen=True)
class Token:
    token_id: int
    byte_start: int
    byte_end: int


class Tokenizer(Protocol):
    def tokenize(self, text: str) -> list[Token]: ...


# Word runs or single punctuation marks; whitespace is never part of a token.
_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def stable_token_id(token_bytes: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(token_bytes, digest_size=8).digest(), "big")


class MockTokenizer:
    """Whitespace/punctuation splitter with UTF-8 byte offsets."""

    def tokenize(self, text: str) -> list[Token]:
        # Cumulative byte offset of each character boundary.
        byte_at = [0]
        for ch in text:
            byte_at.append(byte_at[-1] + len(ch.encode("utf-8")))
        return [
            Token(
                stable_token_id(m.group(0).encode("utf-8")),
                byte_at[m.start()],
                byte_at[m.end()],
            )
            for m in _TOKEN_RE.finditer(text)
        ]
