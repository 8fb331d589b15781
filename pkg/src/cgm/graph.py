"""Code graph data model, structural validation and traversal helpers.

A :class:`CodeGraph` is a directed multigraph over typed code entities.  Its
``contains`` edges form a spanning tree rooted at the single REPO node; the
reference edges (calls, imports, extends, implements) are free to form cycles.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Mapping

from cgm.errors import ContractError, UnknownNodeError

SCHEMA_VERSION = 1


class NodeKind(str, Enum):
    REPO = "repo"
    PACKAGE = "package"
    FILE = "file"
    TEXTFILE = "textfile"
    CLASS = "class"
    FUNCTION = "function"
    ATTRIBUTE = "attribute"


class EdgeKind(str, Enum):
    CONTAINS = "contains"
    CALLS = "calls"
    EXTENDS = "extends"
    IMPORTS = "imports"
    IMPLEMENTS = "implements"


VIRTUAL_KINDS = frozenset({NodeKind.REPO, NodeKind.PACKAGE})
FILE_KINDS = frozenset({NodeKind.FILE, NodeKind.TEXTFILE})
IN_FILE_KINDS = frozenset({NodeKind.CLASS, NodeKind.FUNCTION, NodeKind.ATTRIBUTE})
REFERENCE_KINDS = frozenset(EdgeKind) - {EdgeKind.CONTAINS}
ALL_EDGE_KINDS = frozenset(EdgeKind)

# Languages whose graphs may carry IMPLEMENTS edges.
INTERFACE_LANGUAGES = frozenset({"java"})

_CONTAINS_CHILDREN = {
    NodeKind.REPO: frozenset({NodeKind.PACKAGE, NodeKind.FILE, NodeKind.TEXTFILE}),
    NodeKind.PACKAGE: frozenset({NodeKind.PACKAGE, NodeKind.FILE, NodeKind.TEXTFILE}),
    NodeKind.FILE: IN_FILE_KINDS,
    NodeKind.CLASS: IN_FILE_KINDS,
    NodeKind.FUNCTION: IN_FILE_KINDS,
}


@dataclass(frozen=True, order=True)
class LineRange:
    """1-based inclusive line span.  ``LineRange.EMPTY`` marks virtual nodes."""

    start_line: int
    end_line: int

    @property
    def is_empty(self) -> bool:
        return self.start_line == 0 and self.end_line == 0

    def contains(self, other: LineRange) -> bool:
        return self.start_line <= other.start_line and other.end_line <= self.end_line

    def overlaps(self, other: LineRange) -> bool:
        return not (self.end_line < other.start_line or other.end_line < self.start_line)


LineRange.EMPTY = LineRange(0, 0)  # type: ignore[attr-defined]


def make_node_id(kind: NodeKind, qualified_path: str, start_line: int | None = None) -> str:
    """Build the stable id ``<kind>:<qualified_path>[#<start_line>]``."""
    base = f"{NodeKind(kind).value}:{qualified_path}"
    return base if start_line is None else f"{base}#{start_line}"


@dataclass(frozen=True)
class CodeNode:
    id: str
    kind: NodeKind
    name: str
    qualified_path: str
    content: str = ""
    range: LineRange = LineRange(0, 0)
    file_of: str | None = None

    def with_content(self, content: str) -> CodeNode:
        return CodeNode(self.id, self.kind, self.name, self.qualified_path, content, self.range, self.file_of)


@dataclass(frozen=True, order=True)
class CodeEdge:
    src: str
    dst: str
    kind: EdgeKind

    def key(self) -> tuple[str, str, str]:
        return (self.src, self.dst, self.kind.value)


@dataclass(frozen=True)
class CodeGraph:
    """Immutable code graph.

    ``edges`` is normalised on construction: duplicates on ``(src, dst, kind)``
    are collapsed and the tuple is sorted, so two graphs with the same content
    compare and serialise identically.
    """

    nodes: Mapping[str, CodeNode]
    edges: tuple[CodeEdge, ...]
    root: str
    subject_language: str = "python"

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", dict(sorted(self.nodes.items())))
        unique = {e.key(): e for e in self.edges}
        object.__setattr__(self, "edges", tuple(unique[k] for k in sorted(unique)))

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, node_id: str) -> CodeNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def require(self, node_id: str) -> None:
        if node_id not in self.nodes:
            raise UnknownNodeError(node_id)

    # -- indexes (built lazily; the graph is immutable) -----------------------

    @cached_property
    def _out(self) -> dict[str, list[CodeEdge]]:
        out: dict[str, list[CodeEdge]] = {}
        for e in self.edges:
            out.setdefault(e.src, []).append(e)
        return out

    @cached_property
    def _in(self) -> dict[str, list[CodeEdge]]:
        inc: dict[str, list[CodeEdge]] = {}
        for e in self.edges:
            inc.setdefault(e.dst, []).append(e)
        return inc

    @cached_property
    def _parent(self) -> dict[str, str]:
        parent: dict[str, str] = {}
        for e in self.edges:
            if e.kind is EdgeKind.CONTAINS and e.dst not in parent:
                parent[e.dst] = e.src
        return parent

    @cached_property
    def _children(self) -> dict[str, list[str]]:
        children: dict[str, list[str]] = {}
        for e in self.edges:
            if e.kind is EdgeKind.CONTAINS:
                children.setdefault(e.src, []).append(e.dst)
        return children

    def out_edges(self, node_id: str) -> list[CodeEdge]:
        return self._out.get(node_id, [])

    def in_edges(self, node_id: str) -> list[CodeEdge]:
        return self._in.get(node_id, [])

    def parent(self, node_id: str) -> str | None:
        return self._parent.get(node_id)

    def children(self, node_id: str) -> list[str]:
        return self._children.get(node_id, [])

    def ancestors(self, node_id: str) -> list[str]:
        """CONTAINS-ancestors of ``node_id``, nearest first, ending at the root."""
        chain = []
        seen = {node_id}
        cur = self._parent.get(node_id)
        while cur is not None and cur not in seen:
            chain.append(cur)
            seen.add(cur)
            cur = self._parent.get(cur)
        return chain

    def nodes_of_kind(self, *kinds: NodeKind) -> list[CodeNode]:
        wanted = set(kinds)
        return [n for n in self.nodes.values() if n.kind in wanted]

    def files(self, include_text: bool = True) -> list[CodeNode]:
        kinds = FILE_KINDS if include_text else {NodeKind.FILE}
        return [n for n in self.nodes.values() if n.kind in kinds]

    def file_by_path(self, path: str) -> CodeNode:
        for n in self.files():
            if n.qualified_path == path:
                return n
        raise UnknownNodeError(path)

    def reference_edges(self) -> list[CodeEdge]:
        return [e for e in self.edges if e.kind is not EdgeKind.CONTAINS]


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Violation:
    subject: str
    code: str
    message: str = field(compare=False, default="")

    def __str__(self) -> str:
        return f"{self.subject}: {self.code}" + (f" ({self.message})" if self.message else "")


def validate_graph(graph: CodeGraph) -> list[Violation]:
    """Return every structural violation of ``graph``; an empty list means valid.

    Violations are data rather than exceptions and come back sorted by the id
    of the offending node or edge.
    """
    out: list[Violation] = []
    nodes = graph.nodes

    repos = [n.id for n in nodes.values() if n.kind is NodeKind.REPO]
    if graph.root not in nodes:
        out.append(Violation(graph.root, "root missing"))
    elif nodes[graph.root].kind is not NodeKind.REPO:
        out.append(Violation(graph.root, "root is not a REPO node"))
    for rid in repos:
        if rid != graph.root:
            out.append(Violation(rid, "extra REPO node"))

    for key, n in nodes.items():
        if key != n.id:
            out.append(Violation(key, "id mismatch", f"stored under {key!r} but id is {n.id!r}"))
        r = n.range
        if r.start_line > r.end_line:
            out.append(Violation(n.id, "inverted line range"))
        if n.kind in VIRTUAL_KINDS:
            if n.content:
                out.append(Violation(n.id, "virtual node has content"))
            if not r.is_empty:
                out.append(Violation(n.id, "virtual node has line range"))
            if n.file_of is not None:
                out.append(Violation(n.id, "unexpected file_of"))
        elif r.start_line < 1:
            out.append(Violation(n.id, "line range not 1-based"))

    parents: dict[str, list[str]] = {}
    for e in graph.edges:
        eid = f"{e.src}->{e.dst}[{e.kind.value}]"
        if e.src not in nodes or e.dst not in nodes:
            out.append(Violation(eid, "dangling edge"))
            continue
        s, d = nodes[e.src].kind, nodes[e.dst].kind
        if e.kind is EdgeKind.CONTAINS:
            if e.src == e.dst:
                out.append(Violation(eid, "contains self-loop"))
                continue
            parents.setdefault(e.dst, []).append(e.src)
            allowed = _CONTAINS_CHILDREN.get(s)
            if allowed is None:
                out.append(Violation(eid, "illegal contains parent", s.value))
            elif d not in allowed:
                out.append(Violation(eid, "illegal contains child", f"{s.value} -> {d.value}"))
        elif e.kind in (EdgeKind.EXTENDS, EdgeKind.IMPLEMENTS):
            if s is not NodeKind.CLASS or d is not NodeKind.CLASS:
                out.append(Violation(eid, f"{e.kind.value} endpoints must be classes"))
            if e.kind is EdgeKind.IMPLEMENTS and graph.subject_language not in INTERFACE_LANGUAGES:
                out.append(Violation(eid, "implements illegal for language", graph.subject_language))
        elif e.kind is EdgeKind.IMPORTS:
            if s is not NodeKind.FILE:
                out.append(Violation(eid, "imports source must be a file"))
            if d not in (NodeKind.FILE, NodeKind.CLASS, NodeKind.FUNCTION):
                out.append(Violation(eid, "illegal imports target", d.value))
        elif e.kind is EdgeKind.CALLS:
            if s not in (NodeKind.FUNCTION, NodeKind.FILE):
                out.append(Violation(eid, "illegal calls source", s.value))
            if d not in (NodeKind.FUNCTION, NodeKind.CLASS):
                out.append(Violation(eid, "illegal calls target", d.value))

    for nid, n in nodes.items():
        ps = parents.get(nid, [])
        if nid == graph.root:
            if ps:
                out.append(Violation(nid, "root has contains-parent"))
            continue
        if not ps:
            out.append(Violation(nid, "missing contains-parent"))
            continue
        if len(ps) > 1:
            out.append(Violation(nid, "multiple contains-parents", ", ".join(sorted(ps))))
        parent = nodes[ps[0]]
        pq = parent.qualified_path
        if pq and not (n.qualified_path.startswith(pq) and len(n.qualified_path) > len(pq)):
            out.append(Violation(nid, "qualified path does not extend parent"))

    # Every node must hang off the root through contains edges (tree, no cycles).
    if graph.root in nodes:
        reached = {graph.root}
        queue = deque([graph.root])
        while queue:
            for child in graph.children(queue.popleft()):
                if child not in reached:
                    reached.add(child)
                    queue.append(child)
        for nid, ps in parents.items():
            if nid not in reached and len(ps) == 1:
                out.append(Violation(nid, "unreachable from root", "contains cycle"))

    # file_of must name the nearest FILE/TEXTFILE ancestor.
    for nid, n in nodes.items():
        if n.kind in VIRTUAL_KINDS or n.kind in FILE_KINDS:
            if n.file_of is not None and n.kind in FILE_KINDS:
                out.append(Violation(nid, "unexpected file_of"))
            continue
        owner = next((a for a in graph.ancestors(nid) if a in nodes and nodes[a].kind in FILE_KINDS), None)
        if owner is not None and n.file_of != owner:
            out.append(Violation(nid, "file_of mismatch", f"{n.file_of!r} != {owner!r}"))

    return sorted(out)


def assert_valid(graph: CodeGraph) -> None:
    report = validate_graph(graph)
    if report:
        shown = "; ".join(str(v) for v in report[:5])
        raise ContractError(f"invalid code graph ({len(report)} violations): {shown}")


# -- traversal ----------------------------------------------------------------


def neighbors(
    graph: CodeGraph,
    node_id: str,
    direction: str = "both",
    kinds: Iterable[EdgeKind] | None = None,
) -> list[str]:
    """Ids adjacent to ``node_id``, filtered by edge direction and kind, sorted."""
    graph.require(node_id)
    if direction not in ("out", "in", "both"):
        raise ContractError(f"direction must be out, in or both, got {direction!r}")
    wanted = ALL_EDGE_KINDS if kinds is None else frozenset(EdgeKind(k) for k in kinds)
    found: set[str] = set()
    if direction in ("out", "both"):
        found.update(e.dst for e in graph.out_edges(node_id) if e.kind in wanted)
    if direction in ("in", "both"):
        found.update(e.src for e in graph.in_edges(node_id) if e.kind in wanted)
    return sorted(found)


def induce_subgraph(graph: CodeGraph, node_ids: Iterable[str]) -> CodeGraph:
    """Subgraph on ``node_ids`` closed under CONTAINS-ancestors (root included).

    Every original edge whose endpoints both survive is kept, so the result is
    a valid graph whenever the input is.
    """
    keep = {graph.root}
    for nid in node_ids:
        graph.require(nid)
        if nid in keep:
            continue
        keep.add(nid)
        cur = graph.parent(nid)
        while cur is not None and cur not in keep:
            keep.add(cur)
            cur = graph.parent(cur)
    if len(keep) == len(graph.nodes):
        return graph
    nodes = {nid: graph.nodes[nid] for nid in keep}
    edges = tuple(e for e in graph.edges if e.src in keep and e.dst in keep)
    return CodeGraph(nodes, edges, graph.root, graph.subject_language)


def descendants(graph: CodeGraph, node_id: str) -> list[str]:
    out = []
    stack = list(reversed(graph.children(node_id)))
    while stack:
        nid = stack.pop()
        out.append(nid)
        stack.extend(reversed(graph.children(nid)))
    return out


def downstream_closure(graph: CodeGraph, node_ids: Iterable[str]) -> set[str]:
    """``node_ids`` together with all of their CONTAINS-descendants."""
    result: set[str] = set()
    for nid in node_ids:
        graph.require(nid)
        result.add(nid)
        result.update(descendants(graph, nid))
    return result


# -- serialization ------------------------------------------------------------


def node_to_dict(n: CodeNode) -> dict[str, Any]:
    return {
        "id": n.id,
        "kind": n.kind.value,
        "name": n.name,
        "qualified_path": n.qualified_path,
        "content": n.content,
        "range": {"start_line": n.range.start_line, "end_line": n.range.end_line},
        "file_of": n.file_of,
    }


def graph_to_dict(graph: CodeGraph) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "subject_language": graph.subject_language,
        "root": graph.root,
        "nodes": [node_to_dict(n) for n in graph.nodes.values()],
        "edges": [{"src": e.src, "dst": e.dst, "kind": e.kind.value} for e in graph.edges],
    }


def graph_from_dict(doc: Mapping[str, Any]) -> CodeGraph:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ContractError(f"unsupported graph schema_version {version!r}")
    try:
        nodes = {}
        for rec in doc["nodes"]:
            r = rec["range"]
            n = CodeNode(
                id=rec["id"],
                kind=NodeKind(rec["kind"]),
                name=rec["name"],
                qualified_path=rec["qualified_path"],
                content=rec["content"],
                range=LineRange(int(r["start_line"]), int(r["end_line"])),
                file_of=rec.get("file_of"),
            )
            nodes[n.id] = n
        edges = tuple(CodeEdge(e["src"], e["dst"], EdgeKind(e["kind"])) for e in doc["edges"])
        return CodeGraph(nodes, edges, doc["root"], doc["subject_language"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ContractError(f"malformed graph document: {exc}") from exc


def dumps_graph(graph: CodeGraph, extra: Mapping[str, Any] | None = None) -> str:
    doc = graph_to_dict(graph)
    if extra:
        doc.update(extra)
    # ensure_ascii keeps surrogate-escaped bytes from non-UTF-8 files representable
    return json.dumps(doc, indent=1, ensure_ascii=True) + "\n"


def dump_graph(graph: CodeGraph, path: str | Path, extra: Mapping[str, Any] | None = None) -> None:
    Path(path).write_text(dumps_graph(graph, extra), encoding="ascii")


def load_graph_document(path: str | Path) -> dict[str, Any]:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ContractError(f"{path}: not a graph document ({exc})") from exc


def load_graph(path: str | Path) -> CodeGraph:
    return graph_from_dict(load_graph_document(path))
