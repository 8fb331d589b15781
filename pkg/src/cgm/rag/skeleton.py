"""File skeletons: class and function declarations only, nested by indentation."""

from __future__ import annotations

import io
import re
import textwrap
import tokenize
from dataclasses import dataclass

from cgm.errors import ContractError
from cgm.graph import CodeGraph, NodeKind, descendants
from cgm.text import split_lines

_DECL_RE = re.compile(r"^\s*(?:async\s+def|def|class)\b")
_WS_RE = re.compile(r"\s+")
_OPEN_RE = re.compile(r"([(\[{]) ")
_CLOSE_RE = re.compile(r",? ([)\]}])")


@dataclass(frozen=True)
class SkeletonDoc:
    file_id: str
    text: str


def declaration(content: str) -> str:
    """The ``def``/``class`` header of an entity's source, on one line and
    without comments or the trailing colon."""
    lines = split_lines(content)
    start = next((i for i, line in enumerate(lines) if _DECL_RE.match(line)), 0)
    src = textwrap.dedent("".join(lines[start:]))
    rows = src.splitlines(keepends=True)
    offsets = [0]
    for row in rows:
        offsets.append(offsets[-1] + len(row))
    chars = list(src)
    cut, depth = len(src), 0
    try:
        for tok in tokenize.generate_tokens(io.StringIO(src).readline):
            a = offsets[tok.start[0] - 1] + tok.start[1]
            if tok.type == tokenize.COMMENT:
                chars[a: a + len(tok.string)] = " " * len(tok.string)
            elif tok.type == tokenize.OP and tok.string in "([{":
                depth += 1
            elif tok.type == tokenize.OP and tok.string in ")]}":
                depth -= 1
            elif tok.type == tokenize.OP and tok.string == ":" and depth == 0:
                cut = a
                break
    except (tokenize.TokenError, IndentationError, SyntaxError):
        head = rows[0] if rows else ""
        return _WS_RE.sub(" ", head.split("#")[0]).strip().rstrip(":").rstrip()
    head = _WS_RE.sub(" ", "".join(chars[:cut])).strip()
    return _CLOSE_RE.sub(r"\1", _OPEN_RE.sub(r"\1", head))


def skeleton(graph: CodeGraph, file_id: str) -> SkeletonDoc:
    node = graph.node(file_id)
    if node.kind is not NodeKind.FILE:
        raise ContractError(f"{file_id} is not a FILE node")
    decls = []
    for nid in descendants(graph, file_id):
        n = graph.nodes[nid]
        if n.kind not in (NodeKind.CLASS, NodeKind.FUNCTION):
            continue
        depth = sum(1 for a in graph.ancestors(nid) if graph.nodes[a].kind in (NodeKind.CLASS, NodeKind.FUNCTION))
        decls.append((n.range.start_line, depth, nid, "    " * depth + declaration(n.content) + ": ..."))
    decls.sort()
    return SkeletonDoc(file_id, "".join(d[-1] + "\n" for d in decls))
