"""Anchor matching and subgraph expansion."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from cgm.builder import module_name
from cgm.graph import (
    FILE_KINDS,
    IN_FILE_KINDS,
    REFERENCE_KINDS,
    CodeGraph,
    CodeNode,
    descendants,
    dumps_graph,
    induce_subgraph,
    neighbors,
)
from cgm.rag.backend import HashingEmbedder, ModelBackend
from cgm.rag.rewriter import RewriteResult

log = logging.getLogger(__name__)

DEFAULT_TOP_K_SEMANTIC = 5
PROVENANCE_ORDER = ("extractor", "inferer", "one-hop", "ancestor", "file-expansion")


@dataclass
class AnchorSet:
    extractor_anchors: list[str]
    inferer_anchors: list[str]
    scores: dict[str, float]
    warnings: list[str] = field(default_factory=list)

    @property
    def all(self) -> list[str]:
        return list(dict.fromkeys(self.extractor_anchors + self.inferer_anchors))


@dataclass
class RetrievalSubgraph:
    graph: CodeGraph
    provenance: dict[str, str]
    warnings: list[str] = field(default_factory=list)

    def dumps(self) -> str:
        return dumps_graph(self.graph, extra={"provenance": dict(sorted(self.provenance.items()))})


def node_aliases(graph: CodeGraph, node: CodeNode) -> set[str]:
    """Every whole-token spelling under which ``node`` can be string-matched.

    These are its name, its qualified path, the trailing ``/`` components of
    its file path, and the trailing components of its dotted module name
    (``pkg.mod.Class.method`` answers to ``Class.method`` and ``method``).
    """
    if node.id == graph.root:
        return set()
    aliases = {node.name, node.qualified_path}
    path, _, inner = node.qualified_path.partition(":")
    if not inner:
        parts = path.split("/")
        aliases.update("/".join(parts[i:]) for i in range(len(parts)))
    if node.kind in FILE_KINDS or node.kind in IN_FILE_KINDS:
        if path.endswith(".py"):
            dotted = module_name(path).split(".")
            if inner:
                dotted += inner.split(".")
            aliases.update(".".join(dotted[i:]) for i in range(len(dotted)))
        elif inner:
            segs = inner.split(".")
            aliases.update(".".join(segs[i:]) for i in range(len(segs)))
    aliases.discard("")
    return aliases


def string_anchors(graph: CodeGraph, terms: Iterable[str]) -> list[str]:
    wanted = set(terms)
    return sorted(n.id for n in graph.nodes.values() if not wanted.isdisjoint(node_aliases(graph, n)))


def _unit(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def semantic_scores(graph: CodeGraph, query: str, backend: ModelBackend | None = None) -> dict[str, float]:
    """Cosine similarity between the query and every node's content."""
    embedder = backend if backend is not None else HashingEmbedder()
    ids = sorted(graph.nodes)
    q = _unit(embedder.embed(query))
    mat = np.array([_unit(embedder.embed(graph.nodes[i].content)) for i in ids])
    if mat.ndim != 2 or mat.shape[1] != q.shape[0]:
        raise ValueError("embedding dimensions disagree")
    sims = np.clip(mat @ q, -1.0, 1.0)
    return {nid: float(s) for nid, s in zip(ids, sims)}


def match_anchors(
    graph: CodeGraph,
    rw: RewriteResult,
    backend: ModelBackend | None = None,
    top_k_semantic: int = DEFAULT_TOP_K_SEMANTIC,
) -> AnchorSet:
    """String-matched anchors from the entities and keywords, plus the
    ``top_k_semantic`` nodes closest to the inferred query."""
    warnings: list[str] = []
    ext = string_anchors(graph, [*rw.entities, *rw.keywords])
    try:
        sims = semantic_scores(graph, rw.inferred_query, backend)
    except Exception as exc:  # backend failure: retry offline
        log.warning("embedding backend failed, using hashing embedder: %s", exc)
        warnings.append(f"embed: {exc}")
        sims = semantic_scores(graph, rw.inferred_query, None)
    ranked = sorted(sims, key=lambda nid: (-sims[nid], nid))
    inf = ranked[: max(0, top_k_semantic)]
    scores = {nid: sims[nid] for nid in inf}
    scores.update({nid: 1.0 for nid in ext})
    return AnchorSet(ext, inf, scores, warnings)


def expand_subgraph(graph: CodeGraph, anchors: AnchorSet) -> RetrievalSubgraph:
    """Anchors, their one-hop neighbours, the CONTAINS chain up to the root and
    the whole inside of every file reached.

    One hop follows reference edges in both directions plus the CONTAINS
    parent; children are reached only through file expansion.
    """
    provenance: dict[str, str] = {}

    def mark(nids: Iterable[str], why: str) -> None:
        for nid in nids:
            provenance.setdefault(nid, why)

    if not anchors.all:
        log.warning("no anchors; returning the root alone")
        return RetrievalSubgraph(induce_subgraph(graph, []), {graph.root: "ancestor"}, ["no anchors matched"])
    for nid in anchors.all:
        graph.require(nid)
    mark(anchors.extractor_anchors, "extractor")
    mark(anchors.inferer_anchors, "inferer")
    for nid in anchors.all:
        mark(neighbors(graph, nid, "both", REFERENCE_KINDS), "one-hop")
        parent = graph.parent(nid)
        if parent is not None:
            mark([parent], "one-hop")
    for nid in list(provenance):
        mark(graph.ancestors(nid), "ancestor")
    mark([graph.root], "ancestor")
    for nid in sorted(provenance):
        if graph.nodes[nid].kind in FILE_KINDS:
            mark(descendants(graph, nid), "file-expansion")
    sub = induce_subgraph(graph, provenance)
    return RetrievalSubgraph(sub, dict(sorted(provenance.items())), list(anchors.warnings))
