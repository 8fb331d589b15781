"""Token counting for chunking and budgets.

Only a count-and-split contract is needed, so the default tokenizer is a
deterministic approximation: one token per four UTF-8 bytes.  A token is a
run of whole characters closed as soon as it holds at least four bytes, so
splitting never cuts a character and counts add up exactly across pieces
cut at token boundaries.
"""

from __future__ import annotations

from typing import Protocol

from cgm.errors import ContractError


class Tokenizer(Protocol):
    def count(self, text: str) -> int: ...

    def split(self, text: str, max_tokens: int) -> list[str]: ...


def _utf8_len(o: int) -> int:
    if o < 0x80 or 0xDC80 <= o <= 0xDCFF:  # ascii, or a surrogate-escaped raw byte
        return 1
    if o < 0x800:
        return 2
    return 3 if o < 0x10000 else 4


class ByteTokenizer:
    def __init__(self, bytes_per_token: int = 4):
        if bytes_per_token < 1:
            raise ContractError("bytes_per_token must be positive")
        self.bytes_per_token = bytes_per_token

    def _boundaries(self, text: str) -> list[int]:
        """Character offsets where each token ends."""
        ends = []
        acc = 0
        for i, ch in enumerate(text):
            acc += _utf8_len(ord(ch))
            if acc >= self.bytes_per_token:
                ends.append(i + 1)
                acc = 0
        if acc:
            ends.append(len(text))
        return ends

    def count(self, text: str) -> int:
        if text.isascii():
            return -(-len(text) // self.bytes_per_token)
        return len(self._boundaries(text))

    def split(self, text: str, max_tokens: int) -> list[str]:
        if max_tokens < 1:
            raise ContractError("max_tokens must be >= 1")
        if not text:
            return []
        if text.isascii():
            step = max_tokens * self.bytes_per_token
            return [text[i: i + step] for i in range(0, len(text), step)]
        ends = self._boundaries(text)
        cuts = [0] + ends[max_tokens - 1:: max_tokens]
        if cuts[-1] != len(text):
            cuts.append(len(text))
        return [text[a:b] for a, b in zip(cuts, cuts[1:])]


class WhitespaceTokenizer:
    """Tokens are maximal non-space runs; whitespace attaches to the next token."""

    def _starts(self, text: str) -> list[int]:
        starts = []
        prev_space = True
        for i, ch in enumerate(text):
            space = ch.isspace()
            if not space and prev_space:
                starts.append(i)
            prev_space = space
        return starts

    def count(self, text: str) -> int:
        return len(text.split())

    def split(self, text: str, max_tokens: int) -> list[str]:
        if max_tokens < 1:
            raise ContractError("max_tokens must be >= 1")
        if not text:
            return []
        starts = self._starts(text)
        cuts = [0] + starts[max_tokens::max_tokens] + [len(text)]
        pieces = [text[a:b] for a, b in zip(cuts, cuts[1:])]
        return pieces or [text]


DEFAULT_TOKENIZER = ByteTokenizer()
