"""Graph-to-code linearization.

Virtual nodes (repo, packages) come first as header lines, then one block per
file in import-topological order, each holding the file text rebuilt from the
nodes present in the (sub)graph.
"""

from __future__ import annotations

import re

import networkx as nx

from cgm.graph import CodeGraph, EdgeKind, FILE_KINDS, NodeKind
from cgm.text import reassemble, split_lines

_BANNER_RE = re.compile(r"^# <(FILE|FILE-NOEOL):(.*)>$")


def file_import_graph(graph: CodeGraph) -> nx.DiGraph:
    """Dependency digraph over file nodes: an edge ``a -> b`` means b imports a."""
    g = nx.DiGraph()
    files = graph.files()
    g.add_nodes_from(f.id for f in files)
    for e in graph.edges:
        if e.kind is not EdgeKind.IMPORTS:
            continue
        dst = graph.nodes.get(e.dst)
        if dst is None:
            continue
        target = dst.id if dst.kind in FILE_KINDS else dst.file_of
        if target and target != e.src and target in g and e.src in g:
            g.add_edge(target, e.src)
    return g


def break_import_cycles(graph: CodeGraph, deps: nx.DiGraph) -> nx.DiGraph:
    """Drop edges until ``deps`` is acyclic.

    Within each non-trivial strongly connected component the import made by the
    file with the greatest path is dropped (its greatest-path target first),
    and components are recomputed after every drop.
    """
    deps = deps.copy()
    path = {n: graph.nodes[n].qualified_path for n in deps}
    while not nx.is_directed_acyclic_graph(deps):
        sccs = [c for c in nx.strongly_connected_components(deps) if len(c) > 1]
        sccs.sort(key=lambda c: min(path[n] for n in c))
        for comp in sccs:
            inner = [(a, b) for a, b in deps.edges if a in comp and b in comp]
            if not inner:
                continue
            # edge (imported -> importer): the importer is the import's source
            imported, importer = max(inner, key=lambda ab: (path[ab[1]], path[ab[0]]))
            deps.remove_edge(imported, importer)
        # self-loops cannot arise: file_import_graph skips self-imports
    return deps


def topo_sort_files(graph: CodeGraph) -> list[str]:
    """All file ids (FILE and TEXTFILE), imported files before their importers.

    Ties are broken by qualified path; import cycles are broken first.
    """
    deps = break_import_cycles(graph, file_import_graph(graph))
    return list(nx.lexicographical_topological_sort(deps, key=lambda n: graph.nodes[n].qualified_path))


def layout_order(graph: CodeGraph) -> list[str]:
    """Deterministic node order: repo, packages by path, then files in
    topological order, each followed by its descendants in line order."""
    order = [graph.root] if graph.root in graph.nodes else []
    order += sorted((n.id for n in graph.nodes_of_kind(NodeKind.PACKAGE)), key=lambda i: graph.nodes[i].qualified_path)
    depth_cache: dict[str, int] = {}

    def depth(nid: str) -> int:
        if nid not in depth_cache:
            depth_cache[nid] = len(graph.ancestors(nid))
        return depth_cache[nid]

    in_file: dict[str, list[str]] = {}
    for n in graph.nodes.values():
        if n.file_of is not None:
            in_file.setdefault(n.file_of, []).append(n.id)
    for fid in topo_sort_files(graph):
        order.append(fid)
        members = in_file.get(fid, [])
        members.sort(key=lambda i: (graph.nodes[i].range.start_line, depth(i), i))
        order.extend(members)
    return order


def repo_header(graph: CodeGraph) -> str:
    lines = []
    if graph.root in graph.nodes:
        lines.append(f"# <REPO:{graph.nodes[graph.root].name}>\n")
    for n in sorted(graph.nodes_of_kind(NodeKind.PACKAGE), key=lambda n: n.qualified_path):
        lines.append(f"# <PACKAGE:{n.qualified_path}>\n")
    return "".join(lines)


def file_block(graph: CodeGraph, file_id: str) -> str:
    text = reassemble(graph, file_id, graph.nodes)
    path = graph.nodes[file_id].qualified_path
    if text and not text.endswith(("\n", "\r")):
        return f"# <FILE-NOEOL:{path}>\n{text}\n"
    return f"# <FILE:{path}>\n{text}"


def linearize(subgraph: CodeGraph) -> str:
    """Render ``subgraph`` as text.

    Placeholders of children missing from ``subgraph`` stay in the output.
    """
    parts = [repo_header(subgraph)]
    parts.extend(file_block(subgraph, fid) for fid in topo_sort_files(subgraph))
    return "".join(parts)


def split_linearized(text: str) -> tuple[list[str], dict[str, str]]:
    """Inverse of :func:`linearize`: header lines and ``{path: file text}``."""
    header: list[str] = []
    files: dict[str, str] = {}
    current: list[str] | None = None
    path = ""
    noeol = False

    def flush() -> None:
        if current is not None:
            body = "".join(current)
            files[path] = body[:-1] if noeol and body.endswith("\n") else body

    for line in split_lines(text):
        m = _BANNER_RE.match(line.rstrip("\r\n"))
        if m:
            flush()
            current, path, noeol = [], m.group(2), m.group(1) == "FILE-NOEOL"
        elif current is None:
            header.append(line.rstrip("\r\n"))
        else:
            current.append(line)
    flush()
    return header, files
