"""Graph retrieval pipeline with pluggable model backends and offline fallbacks."""

from cgm.rag.backend import BackendError, HashingEmbedder, HttpBackend, ModelBackend
from cgm.rag.pipeline import PipelineResult, run_pipeline
from cgm.rag.reader import ReaderInput, assemble_reader_input
from cgm.rag.reranker import RerankResult, rerank
from cgm.rag.retriever import AnchorSet, RetrievalSubgraph, expand_subgraph, match_anchors
from cgm.rag.rewriter import RewriteResult, rewrite
from cgm.rag.skeleton import SkeletonDoc, skeleton

__all__ = [
    "AnchorSet",
    "BackendError",
    "HashingEmbedder",
    "HttpBackend",
    "ModelBackend",
    "PipelineResult",
    "ReaderInput",
    "RerankResult",
    "RetrievalSubgraph",
    "RewriteResult",
    "SkeletonDoc",
    "assemble_reader_input",
    "expand_subgraph",
    "match_anchors",
    "rerank",
    "rewrite",
    "run_pipeline",
    "skeleton",
]
