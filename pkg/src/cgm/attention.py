"""A single-head attention layer used to check mask locality numerically.

Queries, keys and values are the embeddings themselves.  Forbidden positions
are left out of the softmax normalisation entirely, so their weights are
exactly zero rather than merely tiny.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cgm.chunking import AttentionMask
from cgm.errors import ContractError


def _check(emb: np.ndarray, mask: AttentionMask, scale: float | None) -> tuple[np.ndarray, float]:
    emb = np.asarray(emb, dtype=np.float64)
    if emb.ndim != 2 or emb.shape[1] < 1:
        raise ContractError("embeddings must be a 2-d array with at least one column")
    if scale is None:
        scale = 1.0 / np.sqrt(emb.shape[1])
    if emb.shape[0] != mask.n:
        raise ContractError(f"{emb.shape[0]} embedding rows for a mask of size {mask.n}")
    if not np.all(np.isfinite(emb)):
        raise ContractError("embeddings must be finite")
    if not scale > 0:
        raise ContractError("scale must be positive")
    if not np.all(mask.allow.any(axis=1)):
        raise ContractError("every row of the mask must allow at least one position")
    return emb, scale


def attention_weights(emb: np.ndarray, mask: AttentionMask, scale: float | None = None) -> np.ndarray:
    emb, scale = _check(emb, mask, scale)
    logits = scale * (emb @ emb.T)
    weights = np.zeros_like(logits)
    for i in range(logits.shape[0]):
        allowed = np.flatnonzero(mask.allow[i])
        row = logits[i, allowed]
        ex = np.exp(row - row.max())
        weights[i, allowed] = ex / ex.sum()
    return weights


def attention_forward(emb: np.ndarray, mask: AttentionMask, scale: float | None = None) -> np.ndarray:
    """Masked self-attention; ``scale`` defaults to ``1/sqrt(d)``."""
    return attention_weights(emb, mask, scale) @ np.asarray(emb, dtype=np.float64)


@dataclass
class LocalityReport:
    passed: bool
    max_forbidden_weight: float
    max_forbidden_sensitivity: float
    min_allowed_sensitivity: float
    violations: list[tuple[int, int, str]] = field(default_factory=list)

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} forbidden_weight_max={self.max_forbidden_weight:.3e} "
            f"forbidden_sensitivity_max={self.max_forbidden_sensitivity:.3e} "
            f"allowed_sensitivity_min={self.min_allowed_sensitivity:.3e} violations={len(self.violations)}"
        )


def sensitivity(emb: np.ndarray, mask: AttentionMask, step: float = 1e-4, scale: float | None = None) -> np.ndarray:
    """``S[i, j]``: largest change of output row i when one coordinate of row j
    moves by ``step`` (forward finite difference, max-norm)."""
    emb = np.asarray(emb, dtype=np.float64)
    base = attention_forward(emb, mask, scale)
    n, d = emb.shape
    out = np.zeros((n, n))
    for j in range(n):
        for k in range(d):
            bumped = emb.copy()
            bumped[j, k] += step
            delta = np.abs(attention_forward(bumped, mask, scale) - base).max(axis=1)
            out[:, j] = np.maximum(out[:, j], delta)
    return out


def verify_locality(
    emb: np.ndarray,
    mask: AttentionMask,
    step: float = 1e-4,
    threshold: float = 1e-9,
    scale: float | None = None,
) -> LocalityReport:
    """Check that attention weights and finite-difference sensitivity are
    supported exactly on the mask."""
    w = attention_weights(emb, mask, scale)
    s = sensitivity(emb, mask, step, scale)
    forbidden = ~mask.allow
    violations: list[tuple[int, int, str]] = []
    for i, j in zip(*np.nonzero(forbidden & (w != 0.0))):
        violations.append((int(i), int(j), "nonzero weight"))
    for i, j in zip(*np.nonzero(forbidden & (s > threshold))):
        violations.append((int(i), int(j), "sensitive to forbidden position"))
    for i, j in zip(*np.nonzero(mask.allow & (s <= threshold))):
        violations.append((int(i), int(j), "insensitive to allowed position"))
    return LocalityReport(
        passed=not violations,
        max_forbidden_weight=float(np.abs(w[forbidden]).max()) if forbidden.any() else 0.0,
        max_forbidden_sensitivity=float(s[forbidden].max()) if forbidden.any() else 0.0,
        min_allowed_sensitivity=float(s[mask.allow].min()),
        violations=sorted(violations),
    )
