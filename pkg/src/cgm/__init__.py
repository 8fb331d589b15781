"""Code graphs for repository-level code models.

Build a typed graph of a Python repository, linearize it back to source,
chunk it into node tokens with a graph-aware attention mask, sample training
data from it and retrieve issue-relevant subgraphs.
"""

from cgm.builder import BuildResult, SourceTree, build_graph
from cgm.chunking import AttentionMask, ChunkedGraph, build_mask, chunk_graph
from cgm.errors import BuildError, CGMError, ContractError, UnknownNodeError
from cgm.graph import (
    CodeEdge,
    CodeGraph,
    CodeNode,
    EdgeKind,
    LineRange,
    NodeKind,
    dump_graph,
    load_graph,
    validate_graph,
)
from cgm.linearize import linearize, split_linearized, topo_sort_files
from cgm.metrics import edit_similarity, exact_match, file_recall
from cgm.samples import make_issuefix_sample, make_reconstruction_sample, sample_subgraph
from cgm.tokens import ByteTokenizer

__version__ = "0.1.0"

__all__ = [
    "AttentionMask",
    "BuildError",
    "BuildResult",
    "ByteTokenizer",
    "CGMError",
    "ChunkedGraph",
    "CodeEdge",
    "CodeGraph",
    "CodeNode",
    "ContractError",
    "EdgeKind",
    "LineRange",
    "NodeKind",
    "SourceTree",
    "UnknownNodeError",
    "build_graph",
    "build_mask",
    "chunk_graph",
    "dump_graph",
    "edit_similarity",
    "exact_match",
    "file_recall",
    "linearize",
    "load_graph",
    "make_issuefix_sample",
    "make_reconstruction_sample",
    "sample_subgraph",
    "split_linearized",
    "topo_sort_files",
    "validate_graph",
]
