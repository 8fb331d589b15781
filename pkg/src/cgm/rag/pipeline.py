"""The full retrieval pipeline: rewrite, anchor, expand, rerank, read."""

from __future__ import annotations

from dataclasses import dataclass

from cgm.chunking import DEFAULT_CHUNK_SIZE
from cgm.graph import FILE_KINDS, CodeGraph
from cgm.rag.backend import ModelBackend
from cgm.rag.reader import ReaderInput, assemble_reader_input
from cgm.rag.reranker import DEFAULT_K1, DEFAULT_K2, RerankResult, rerank
from cgm.rag.retriever import DEFAULT_TOP_K_SEMANTIC, AnchorSet, RetrievalSubgraph, expand_subgraph, match_anchors
from cgm.rag.rewriter import RewriteResult, rewrite
from cgm.tokens import Tokenizer


@dataclass
class PipelineResult:
    rewrite: RewriteResult
    anchors: AnchorSet
    subgraph: RetrievalSubgraph
    rerank: RerankResult | None
    reader: ReaderInput


def rerank_candidates(graph: CodeGraph, sub: RetrievalSubgraph) -> list[str]:
    """Files of the retrieved subgraph, or of the whole graph when it has none."""
    found = sorted(n for n in sub.graph.nodes if sub.graph.nodes[n].kind in FILE_KINDS)
    return found or sorted(n.id for n in graph.files())


def run_pipeline(
    graph: CodeGraph,
    issue_text: str,
    backend: ModelBackend | None = None,
    top_k_semantic: int = DEFAULT_TOP_K_SEMANTIC,
    k1: int = DEFAULT_K1,
    k2: int = DEFAULT_K2,
    tokenizer: Tokenizer | None = None,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> PipelineResult:
    rw = rewrite(issue_text, backend, graph)
    anchors = match_anchors(graph, rw, backend, top_k_semantic)
    sub = expand_subgraph(graph, anchors)
    candidates = rerank_candidates(graph, sub)
    ranked = rerank(issue_text, candidates, graph, backend, k1, k2) if candidates else None
    selected = [f for f in ranked.stage2 if f in sub.graph.nodes] if ranked else []
    reader = assemble_reader_input(sub, selected, issue_text, tokenizer, chunk_size)
    return PipelineResult(rw, anchors, sub, ranked, reader)
