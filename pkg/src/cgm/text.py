"""Line handling and the child-placeholder convention used after deduplication.

When a parent node's text is stripped of its children, each child span is
replaced by one line ``<indent># <CHILD:node_id>``.  :func:`reassemble`
reverses this, expanding placeholders for the children that are present.
"""

from __future__ import annotations

import re
from typing import TYPE_CHECKING, Container

if TYPE_CHECKING:
    from cgm.graph import CodeGraph

_LINE_RE = re.compile(r"[^\r\n]*(?:\r\n|\r|\n)|[^\r\n]+$")
PLACEHOLDER_RE = re.compile(r"^([ \t]*)# <CHILD:(.+)>$")


def split_lines(text: str) -> list[str]:
    """Split keeping line terminators; ``"".join(split_lines(t)) == t``."""
    return _LINE_RE.findall(text)


def strip_eol(line: str) -> str:
    return line.rstrip("\r\n")


def indent_of(line: str) -> str:
    return line[: len(line) - len(line.lstrip(" \t"))]


def placeholder(node_id: str, indent: str = "") -> str:
    return f"{indent}# <CHILD:{node_id}>\n"


def placeholder_id(line: str) -> str | None:
    m = PLACEHOLDER_RE.match(strip_eol(line))
    return m.group(2) if m else None


def reassemble(graph: CodeGraph, node_id: str, present: Container[str] | None = None) -> str:
    """Text of ``node_id`` with placeholders of its present children expanded.

    ``present`` defaults to every node of ``graph``.  Placeholders of children
    that are absent stay in place verbatim.
    """
    node = graph.node(node_id)
    kids = set(graph.children(node_id))
    if not kids:
        return node.content
    parts = []
    for line in split_lines(node.content):
        cid = placeholder_id(line)
        if cid is not None and cid in kids and (present is None or cid in present):
            parts.append(reassemble(graph, cid, present))
        else:
            parts.append(line)
    return "".join(parts)
