"""Chunked node layout and the graph-aware attention mask.

Each node's text is cut into chunks of at most ``chunk_size`` tokens.  Every
chunk becomes one node-token position that copies the original node's
connections, and chunks of the same node attend to each other.  In the mask,
node tokens come first and attend only along (symmetrised) graph adjacency;
the text tokens that follow are causal among themselves and see every node
token.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cgm.errors import BuildError, ContractError
from cgm.graph import CodeGraph
from cgm.linearize import layout_order
from cgm.tokens import DEFAULT_TOKENIZER, Tokenizer

DEFAULT_CHUNK_SIZE = 512


@dataclass(frozen=True)
class ChunkNode:
    chunk_id: str
    origin: str
    index: int
    text: str


@dataclass(frozen=True, eq=False)
class ChunkedGraph:
    chunks: tuple[ChunkNode, ...]
    adjacency: np.ndarray  # bool, (n_chunks, n_chunks), symmetric, reflexive
    origin_graph: CodeGraph

    def __len__(self) -> int:
        return len(self.chunks)

    def positions(self, origin: str) -> list[int]:
        return [i for i, c in enumerate(self.chunks) if c.origin == origin]

    def to_dict(self) -> dict:
        rows, cols = np.nonzero(np.triu(self.adjacency, k=1))
        return {
            "chunks": [
                {"chunk_id": c.chunk_id, "origin": c.origin, "index": c.index, "text": c.text} for c in self.chunks
            ],
            "edges": [[int(a), int(b)] for a, b in zip(rows, cols)],
        }


def origin_adjacency(graph: CodeGraph, order: list[str]) -> np.ndarray:
    """Undirected, reflexive adjacency over ``order`` (edge direction ignored)."""
    index = {nid: i for i, nid in enumerate(order)}
    adj = np.eye(len(order), dtype=bool)
    for e in graph.edges:
        a, b = index.get(e.src), index.get(e.dst)
        if a is not None and b is not None:
            adj[a, b] = adj[b, a] = True
    return adj


def chunk_graph(graph: CodeGraph, tokenizer: Tokenizer | None = None, chunk_size: int = DEFAULT_CHUNK_SIZE) -> ChunkedGraph:
    """Split every node into chunk positions; empty nodes keep one empty chunk."""
    if chunk_size < 1:
        raise ContractError("chunk_size must be >= 1")
    tok = tokenizer or DEFAULT_TOKENIZER
    order = layout_order(graph)
    chunks: list[ChunkNode] = []
    owner: list[int] = []
    for i, nid in enumerate(order):
        content = graph.nodes[nid].content
        try:
            pieces = tok.split(content, chunk_size) if content else []
        except Exception as exc:  # tokenizer plug-ins may fail arbitrarily
            raise BuildError(f"tokenizer failed on {nid}: {exc}") from exc
        for k, piece in enumerate(pieces or [""]):
            chunks.append(ChunkNode(f"{nid}@{k}", nid, k, piece))
            owner.append(i)
    own = np.asarray(owner, dtype=np.intp)
    adj = origin_adjacency(graph, order)[np.ix_(own, own)]
    return ChunkedGraph(tuple(chunks), adj, graph)


@dataclass(frozen=True, eq=False)
class AttentionMask:
    allow: np.ndarray  # bool (n, n); allow[i, j]: position i may attend to j
    node_count: int
    text_count: int

    @property
    def n(self) -> int:
        return self.node_count + self.text_count

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, AttentionMask)
            and self.node_count == other.node_count
            and self.text_count == other.text_count
            and np.array_equal(self.allow, other.allow)
        )


def build_mask(cg: ChunkedGraph, text_token_count: int) -> AttentionMask:
    if text_token_count < 0:
        raise ContractError("text_token_count must be >= 0")
    k, t = len(cg.chunks), text_token_count
    allow = np.zeros((k + t, k + t), dtype=bool)
    allow[:k, :k] = cg.adjacency | cg.adjacency.T | np.eye(k, dtype=bool)
    allow[k:, :k] = True
    allow[k:, k:] = np.tril(np.ones((t, t), dtype=bool))
    return AttentionMask(allow, k, t)


def format_mask(mask: AttentionMask) -> str:
    rows = ["".join("1" if v else "0" for v in row) for row in mask.allow]
    return f"n={mask.n} node={mask.node_count} text={mask.text_count}\n" + "".join(r + "\n" for r in rows)


def parse_mask(text: str) -> AttentionMask:
    lines = text.splitlines()
    if not lines:
        raise ContractError("empty mask file")
    try:
        fields = dict(part.split("=", 1) for part in lines[0].split())
        n, node, txt = int(fields["n"]), int(fields["node"]), int(fields["text"])
    except (KeyError, ValueError) as exc:
        raise ContractError(f"bad mask header {lines[0]!r}") from exc
    rows = lines[1: 1 + n]
    if n != node + txt or len(rows) != n or any(len(r) != n or set(r) - {"0", "1"} for r in rows):
        raise ContractError("mask body does not match its header")
    allow = np.array([[c == "1" for c in r] for r in rows], dtype=bool).reshape(n, n)
    return AttentionMask(allow, node, txt)


def write_mask(mask: AttentionMask, path: str | Path) -> None:
    Path(path).write_text(format_mask(mask), encoding="ascii")


def read_mask(path: str | Path) -> AttentionMask:
    return parse_mask(Path(path).read_text(encoding="ascii"))
