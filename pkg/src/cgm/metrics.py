"""Evaluation metrics: exact match, Levenshtein edit similarity, file recall."""

from __future__ import annotations

from typing import Iterable

from cgm.errors import ContractError


def _normalize(text: str) -> str:
    return text.rstrip("\r\n")


def exact_match(prediction: str, reference: str) -> int:
    """1 if the strings are identical once trailing newlines are dropped."""
    return int(_normalize(prediction) == _normalize(reference))


def levenshtein(a: str, b: str) -> int:
    """Character-level edit distance (unit-cost insert, delete, substitute)."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def edit_similarity(prediction: str, reference: str) -> float:
    """``1 - lev(y, y*) / max(|y|, |y*|)``; two empty strings score 1.0.

    Trailing newlines are dropped first, as for :func:`exact_match`, so an
    exact match always has similarity 1.
    """
    prediction, reference = _normalize(prediction), _normalize(reference)
    longest = max(len(prediction), len(reference))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(prediction, reference) / longest


def file_recall(predicted: Iterable[str], oracle: Iterable[str]) -> float:
    """Fraction of oracle files present in ``predicted``."""
    oracle_set = set(oracle)
    if not oracle_set:
        raise ContractError("oracle file set must be nonempty")
    return len(set(predicted) & oracle_set) / len(oracle_set)
