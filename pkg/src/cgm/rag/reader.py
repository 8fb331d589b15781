"""Reader input: the retrieved subgraph as node tokens, the issue and the
selected files' full source as text tokens, and the joint attention mask."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

from cgm.chunking import DEFAULT_CHUNK_SIZE, AttentionMask, ChunkedGraph, build_mask, chunk_graph
from cgm.graph import FILE_KINDS, CodeGraph
from cgm.rag.backend import load_template, render
from cgm.rag.retriever import RetrievalSubgraph
from cgm.text import reassemble
from cgm.tokens import DEFAULT_TOKENIZER, Tokenizer

log = logging.getLogger(__name__)


@dataclass(eq=False)
class ReaderInput:
    chunked: ChunkedGraph
    mask: AttentionMask
    prompt: str
    files: list[str]
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        # the text block of the mask is fully determined by text_count
        return {
            "files": list(self.files),
            "prompt": self.prompt,
            "node_tokens": self.chunked.to_dict(),
            "mask": {"node_count": self.mask.node_count, "text_count": self.mask.text_count},
        }

    def to_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), ensure_ascii=True, separators=(",", ":")).encode("ascii")


def render_files(graph: CodeGraph, file_ids: Sequence[str]) -> str:
    blocks = []
    for fid in file_ids:
        text = reassemble(graph, fid)
        if text and not text.endswith(("\n", "\r")):
            text += "\n"
        blocks.append(f'<file path="{graph.nodes[fid].qualified_path}">\n{text}</file>\n')
    return "".join(blocks)


def render_reader_prompt(issue_text: str, graph: CodeGraph, file_ids: Sequence[str]) -> str:
    return render(load_template("reader"), issue=issue_text.rstrip(), files=render_files(graph, file_ids))


def assemble_reader_input(
    sub: RetrievalSubgraph | CodeGraph,
    selected_files: Sequence[str],
    issue_text: str,
    tokenizer: Tokenizer | None = None,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> ReaderInput:
    """Selected files absent from the subgraph (or not files) are dropped with
    a warning; the rest keep their given order."""
    graph = sub.graph if isinstance(sub, RetrievalSubgraph) else sub
    tok = tokenizer or DEFAULT_TOKENIZER
    warnings: list[str] = []
    files: list[str] = []
    for fid in dict.fromkeys(selected_files):
        node = graph.nodes.get(fid)
        if node is None or node.kind not in FILE_KINDS:
            log.warning("selected file %s is not a file of the subgraph; dropped", fid)
            warnings.append(f"dropped {fid}")
        else:
            files.append(fid)
    prompt = render_reader_prompt(issue_text, graph, files)
    cg = chunk_graph(graph, tok, chunk_size)
    mask = build_mask(cg, tok.count(prompt))
    return ReaderInput(cg, mask, prompt, files, warnings)
