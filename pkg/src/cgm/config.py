"""Run configuration: defaults, a JSON config file, then command-line flags."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from cgm.errors import ContractError


@dataclass(frozen=True)
class Config:
    chunk_size: int = 512
    recon_budget: int = 8000
    p_add: float = 0.10
    p_omit: float = 0.10
    rerank_k1: int = 10
    rerank_k2: int = 5
    top_k_semantic: int = 5
    backend_url: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("chunk_size", "recon_budget", "rerank_k1", "rerank_k2", "top_k_semantic"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ContractError(f"{name} must be a positive integer, got {value!r}")
        for name in ("p_add", "p_omit"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                raise ContractError(f"{name} must lie in [0, 1], got {value!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ContractError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.backend_url is not None and not isinstance(self.backend_url, str):
            raise ContractError("backend_url must be a string")

    def merged(self, values: Mapping[str, Any]) -> Config:
        """A copy with ``values`` applied; ``None`` entries are ignored."""
        known = {f.name for f in dataclasses.fields(self)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ContractError(f"unknown config keys: {', '.join(unknown)}")
        return dataclasses.replace(self, **{k: v for k, v in values.items() if v is not None})

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def load_config(path: str | Path | None, overrides: Mapping[str, Any] | None = None) -> Config:
    cfg = Config()
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ContractError(f"{path}: config is not valid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ContractError(f"{path}: config must be a JSON object")
        cfg = cfg.merged(doc)
    return cfg.merged(overrides or {})
