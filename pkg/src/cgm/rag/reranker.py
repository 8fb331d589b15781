"""Two-stage file reranking.

Stage 1 orders every candidate from the issue and the file paths alone and
keeps ``k1``; stage 2 scores each survivor from the issue and the file's
skeleton and keeps ``k2``.  Orderings are by score, ties broken by path.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from cgm.errors import ContractError
from cgm.graph import FILE_KINDS, CodeGraph, NodeKind
from cgm.rag.backend import BackendError, ModelBackend, load_template, render
from cgm.rag.skeleton import skeleton

log = logging.getLogger(__name__)

DEFAULT_K1 = 10
DEFAULT_K2 = 5
_WORD_RE = re.compile(r"[a-z0-9]+")
_SCORE_RE = re.compile(r"SCORE:\s*(-?\d+(?:\.\d+)?)", re.IGNORECASE)


@dataclass
class RerankResult:
    stage1: list[str]
    stage2: list[str]
    stage1_scores: dict[str, float]
    stage2_scores: dict[str, float]
    warnings: list[str] = field(default_factory=list)


def words(text: str) -> set[str]:
    return set(_WORD_RE.findall(text.lower()))


def path_words(path: str) -> set[str]:
    return words(path[:-3] if path.endswith(".py") else path)


def skeleton_text(graph: CodeGraph, file_id: str) -> str:
    return skeleton(graph, file_id).text if graph.nodes[file_id].kind is NodeKind.FILE else ""


def _ranked(scores: dict[str, float], graph: CodeGraph) -> list[str]:
    return sorted(scores, key=lambda f: (-scores[f], graph.nodes[f].qualified_path))


def _stage1_backend(issue: str, files: list[str], graph: CodeGraph, backend: ModelBackend, k: int) -> dict[str, float]:
    paths = {graph.nodes[f].qualified_path: f for f in files}
    prompt = render(load_template("rerank_stage1"), issue=issue, files="\n".join(sorted(paths)), k=str(k))
    listed: list[str] = []
    for line in backend.complete(prompt).splitlines():
        path = line.strip().lstrip("-* ").strip("`")
        if path in paths and paths[path] not in listed:
            listed.append(paths[path])
    if not listed:
        raise BackendError("stage 1 reply names no candidate path")
    # listed files outrank everything, in the order given
    return {f: float(len(listed) - listed.index(f)) if f in listed else 0.0 for f in files}


def _stage2_score(issue: str, file_id: str, graph: CodeGraph, backend: ModelBackend) -> float:
    prompt = render(
        load_template("rerank_stage2"),
        issue=issue,
        file_path=graph.nodes[file_id].qualified_path,
        skeleton=skeleton_text(graph, file_id),
    )
    m = _SCORE_RE.search(backend.complete(prompt))
    if m is None:
        raise BackendError(f"stage 2 reply for {file_id} has no SCORE line")
    return float(m.group(1))


def rerank(
    issue_text: str,
    candidate_files: Sequence[str],
    graph: CodeGraph,
    backend: ModelBackend | None = None,
    k1: int = DEFAULT_K1,
    k2: int = DEFAULT_K2,
    max_workers: int = 8,
) -> RerankResult:
    if not candidate_files:
        raise ContractError("candidate file list must be nonempty")
    if k1 < 1 or k2 < 1:
        raise ContractError("k1 and k2 must be positive")
    files = list(dict.fromkeys(candidate_files))
    for f in files:
        if graph.node(f).kind not in FILE_KINDS:
            raise ContractError(f"{f} is not a file node")
    warnings: list[str] = []
    issue_words = words(issue_text)

    s1 = {f: float(len(issue_words & path_words(graph.nodes[f].qualified_path))) for f in files}
    if backend is not None:
        try:
            s1 = _stage1_backend(issue_text, files, graph, backend, k1)
        except Exception as exc:  # any backend failure degrades to lexical scoring
            log.warning("stage 1 backend failed, using lexical scores: %s", exc)
            warnings.append(f"stage1: {exc}")
    stage1 = _ranked(s1, graph)[:k1]

    s2 = {f: float(len(issue_words & words(skeleton_text(graph, f)))) for f in stage1}
    if backend is not None:
        try:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                got = list(pool.map(lambda f: _stage2_score(issue_text, f, graph, backend), stage1))
            s2 = dict(zip(stage1, got))
        except Exception as exc:
            log.warning("stage 2 backend failed, using lexical scores: %s", exc)
            warnings.append(f"stage2: {exc}")
    stage2 = _ranked(s2, graph)[:k2]
    return RerankResult(stage1, stage2, {f: s1[f] for f in stage1}, s2, warnings)
