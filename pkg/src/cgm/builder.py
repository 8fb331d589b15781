"""Build a :class:`~cgm.graph.CodeGraph` from a Python source tree.

Construction runs in three passes:

1. :func:`build_hierarchy` lays down the containment spine (repo, packages,
   files, then classes/functions/attributes found by walking each AST).
2. :func:`resolve_references` adds imports, extends and calls edges using a
   lightweight symbol table.  Calls through a class-typed receiver are
   over-approximated with class hierarchy analysis: the implementation found
   on the receiver class plus every override in its subclasses.  Receivers
   get a class from annotations, ``x = C()`` bindings, ``self``/``cls`` and
   instance attributes assigned in the class's methods.
3. :func:`dedup_parent_text` removes child text from parents, leaving one
   placeholder line per child.

Resolution failures never abort the build; they are collected as
:class:`BuildWarning` records.
"""

from __future__ import annotations

import ast
import builtins
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Iterable, Iterator, Mapping, Protocol

from cgm.errors import BuildError
from cgm.graph import (
    CodeEdge,
    CodeGraph,
    CodeNode,
    EdgeKind,
    LineRange,
    NodeKind,
    make_node_id,
)
from cgm.text import indent_of, placeholder, placeholder_id, split_lines

log = logging.getLogger(__name__)

SOURCE_SUFFIX = ".py"
IGNORED_DIRS = frozenset({"__pycache__", "node_modules"})
_BUILTIN_NAMES = frozenset(dir(builtins))
_BUILTIN_VALUE = "<builtin>"
_LITERALS = (ast.Constant, ast.JoinedStr, ast.List, ast.Dict, ast.Set, ast.Tuple, ast.ListComp, ast.DictComp,
             ast.SetComp)
_STDLIB = frozenset(getattr(sys, "stdlib_module_names", ()))


@dataclass(frozen=True)
class BuildWarning:
    path: str
    line: int
    kind: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}:{self.line} {self.kind} {self.message}"


# -- source trees -------------------------------------------------------------


@dataclass(frozen=True)
class SourceFile:
    path: str
    data: bytes

    @property
    def text(self) -> str:
        # surrogateescape keeps undecodable bytes so the round trip stays exact
        return self.data.decode("utf-8", errors="surrogateescape")


@dataclass
class SourceTree:
    """A repository snapshot: relative POSIX paths mapped to raw bytes."""

    files: list[SourceFile]
    root_dir: Path | None = None
    name: str = "repo"

    def __post_init__(self) -> None:
        seen = set()
        for f in self.files:
            p = PurePosixPath(f.path)
            if p.is_absolute() or ".." in p.parts or not f.path or str(p) != f.path:
                raise BuildError(f"illegal relative path {f.path!r}")
            if f.path in seen:
                raise BuildError(f"duplicate path {f.path!r}")
            seen.add(f.path)
        self.files = sorted(self.files, key=lambda f: f.path)

    @classmethod
    def from_directory(cls, root: str | Path) -> SourceTree:
        root = Path(root)
        if not root.is_dir():
            raise BuildError(f"not a directory: {root}")
        files = []
        try:
            for dirpath, dirnames, filenames in os.walk(root):
                dirnames[:] = sorted(d for d in dirnames if not d.startswith(".") and d not in IGNORED_DIRS)
                for fn in sorted(filenames):
                    full = Path(dirpath) / fn
                    if full.is_symlink() or not full.is_file():
                        continue
                    rel = full.relative_to(root).as_posix()
                    files.append(SourceFile(rel, full.read_bytes()))
        except OSError as exc:
            raise BuildError(f"cannot read {root}: {exc}") from exc
        return cls(files, root_dir=root, name=root.resolve().name or "repo")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str | bytes], name: str = "repo") -> SourceTree:
        files = [SourceFile(p, d.encode("utf-8") if isinstance(d, str) else d) for p, d in mapping.items()]
        return cls(files, name=name)


class SyntaxProvider(Protocol):
    """Parses one source file into a Python ``ast.Module``."""

    def parse(self, text: str, path: str) -> ast.Module: ...


class PythonSyntaxProvider:
    def parse(self, text: str, path: str) -> ast.Module:
        return ast.parse(text, filename=path)


# -- hierarchy ----------------------------------------------------------------

_SCOPE_TYPES = (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)


def _block_bodies(stmt: ast.stmt) -> Iterator[list[ast.stmt]]:
    """Statement lists nested in a compound statement (not in nested scopes)."""
    for name in ("body", "orelse", "finalbody"):
        body = getattr(stmt, name, None)
        if isinstance(body, list) and body and isinstance(body[0], ast.stmt):
            yield body
    for handler in getattr(stmt, "handlers", ()) or ():
        yield handler.body
    for case in getattr(stmt, "cases", ()) or ():
        yield case.body


def _scope_statements(body: list[ast.stmt]) -> Iterator[ast.stmt]:
    """Statements that belong to the scope owning ``body``, depth first."""
    for stmt in body:
        yield stmt
        if not isinstance(stmt, _SCOPE_TYPES):
            for inner in _block_bodies(stmt):
                yield from _scope_statements(inner)


def _target_name(target: ast.expr, in_method: bool) -> str | None:
    if isinstance(target, ast.Name):
        return target.id
    if in_method and isinstance(target, ast.Attribute) and isinstance(target.value, ast.Name):
        if target.value.id in ("self", "cls"):
            return target.attr
    if isinstance(target, (ast.Tuple, ast.List)):
        for elt in target.elts:
            name = _target_name(elt, in_method)
            if name:
                return name
    if isinstance(target, ast.Starred):
        return _target_name(target.value, in_method)
    return None


def _attribute_name(stmt: ast.stmt, in_method: bool) -> str | None:
    if isinstance(stmt, ast.Assign):
        for t in stmt.targets:
            name = _target_name(t, in_method)
            if name:
                return name
    elif isinstance(stmt, ast.AnnAssign):
        return _target_name(stmt.target, in_method)
    return None


def _char_col(line: str, byte_col: int) -> int:
    return len(line.encode("utf-8", errors="surrogateescape")[:byte_col].decode("utf-8", errors="surrogateescape"))


def _entity_span(stmt: ast.stmt, lines: list[str]) -> LineRange | None:
    """Line span of ``stmt`` if it exclusively owns its lines, else ``None``.

    A span qualifies when only whitespace (or a decorator ``@``) precedes it on
    its first line and only whitespace or a comment follows it on its last.
    """
    first = stmt
    start, col = stmt.lineno, stmt.col_offset
    decorators = getattr(stmt, "decorator_list", None) or []
    if decorators:
        first = min(decorators, key=lambda d: (d.lineno, d.col_offset))
        if first.lineno < start:
            start, col = first.lineno, first.col_offset
    end, end_col = stmt.end_lineno, stmt.end_col_offset
    if end is None or end_col is None or start < 1 or end > len(lines):
        return None
    head = lines[start - 1]
    if head[: _char_col(head, col)].strip() not in ("", "@"):
        return None
    tail = lines[end - 1].rstrip("\r\n")
    rest = tail[_char_col(tail, end_col):].strip()
    if rest and not rest.startswith("#"):
        return None
    return LineRange(start, end)


@dataclass
class _Entity:
    kind: NodeKind
    name: str
    span: LineRange
    stmt: ast.stmt
    children: list[_Entity] = field(default_factory=list)


def _collect_entities(
    body: list[ast.stmt], lines: list[str], bounds: LineRange, in_method: bool, skipped: list[tuple[int, str]]
) -> list[_Entity]:
    out: list[_Entity] = []
    last_end = bounds.start_line - 1
    for stmt in _scope_statements(body):
        if isinstance(stmt, ast.ClassDef):
            kind, name = NodeKind.CLASS, stmt.name
        elif isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
            kind, name = NodeKind.FUNCTION, stmt.name
        else:
            name = _attribute_name(stmt, in_method)
            if name is None:
                continue
            kind = NodeKind.ATTRIBUTE
        span = _entity_span(stmt, lines)
        if span is None or not bounds.contains(span) or span.start_line <= last_end:
            if kind is not NodeKind.ATTRIBUTE:
                skipped.append((stmt.lineno, f"{kind.value} {name} shares lines with other code"))
            continue
        ent = _Entity(kind, name, span, stmt)
        if kind is not NodeKind.ATTRIBUTE:
            ent.children = _collect_entities(
                stmt.body, lines, span, in_method=kind is NodeKind.FUNCTION, skipped=skipped
            )
        out.append(ent)
        last_end = span.end_line
    return out


class _GraphDraft:
    def __init__(self, language: str):
        self.language = language
        self.nodes: dict[str, CodeNode] = {}
        self.edges: list[CodeEdge] = []

    def add(self, kind: NodeKind, name: str, qpath: str, content: str = "", rng: LineRange = LineRange(0, 0),
            file_of: str | None = None, parent: str | None = None) -> str:
        nid = make_node_id(kind, qpath)
        if nid in self.nodes:
            nid = make_node_id(kind, qpath, rng.start_line)
            n = 2
            while nid in self.nodes:
                nid = f"{make_node_id(kind, qpath, rng.start_line)}.{n}"
                n += 1
        self.nodes[nid] = CodeNode(nid, kind, name, qpath, content, rng, file_of)
        if parent is not None:
            self.edges.append(CodeEdge(parent, nid, EdgeKind.CONTAINS))
        return nid

    def graph(self, root: str) -> CodeGraph:
        return CodeGraph(self.nodes, tuple(self.edges), root, self.language)


def _file_range(lines: list[str]) -> LineRange:
    return LineRange(1, max(1, len(lines)))


def build_hierarchy(
    tree: SourceTree,
    subject_language: str = "python",
    provider: SyntaxProvider | None = None,
    warnings: list[BuildWarning] | None = None,
) -> CodeGraph:
    """Containment-only graph: repo, packages, files and in-file entities.

    Files that fail to parse are demoted to TEXTFILE with a warning.
    """
    if subject_language != "python":
        raise BuildError(f"no parser for subject language {subject_language!r}")
    provider = provider or PythonSyntaxProvider()
    warnings = warnings if warnings is not None else []
    draft = _GraphDraft(subject_language)
    root = draft.add(NodeKind.REPO, tree.name, "")
    packages: dict[str, str] = {"": root}

    def package_for(dirpath: str) -> str:
        if dirpath in packages:
            return packages[dirpath]
        parent_dir = str(PurePosixPath(dirpath).parent)
        parent = package_for("" if parent_dir == "." else parent_dir)
        packages[dirpath] = draft.add(NodeKind.PACKAGE, PurePosixPath(dirpath).name, dirpath, parent=parent)
        return packages[dirpath]

    for sf in tree.files:
        parent_dir = str(PurePosixPath(sf.path).parent)
        parent = package_for("" if parent_dir == "." else parent_dir)
        text = sf.text
        lines = split_lines(text)
        fname = PurePosixPath(sf.path).name
        module = None
        if sf.path.endswith(SOURCE_SUFFIX):
            try:
                module = provider.parse(text, sf.path)
            except (SyntaxError, ValueError) as exc:
                line = getattr(exc, "lineno", None) or 1
                warnings.append(BuildWarning(sf.path, line, "parse-error", f"demoted to textfile: {exc.__class__.__name__}"))
        if module is None:
            draft.add(NodeKind.TEXTFILE, fname, sf.path, text, _file_range(lines), parent=parent)
            continue
        frange = _file_range(lines)
        fid = draft.add(NodeKind.FILE, fname, sf.path, text, frange, parent=parent)
        skipped: list[tuple[int, str]] = []
        entities = _collect_entities(module.body, lines, frange, False, skipped)
        for line, msg in skipped:
            warnings.append(BuildWarning(sf.path, line, "skipped-entity", msg))
        _add_entities(draft, entities, fid, sf.path + ":", fid, lines)
    return draft.graph(root)


def _add_entities(draft: _GraphDraft, entities: list[_Entity], parent: str, prefix: str, fid: str,
                  lines: list[str]) -> None:
    for ent in entities:
        qpath = prefix + ent.name
        content = "".join(lines[ent.span.start_line - 1: ent.span.end_line])
        nid = draft.add(ent.kind, ent.name, qpath, content, ent.span, file_of=fid, parent=parent)
        _add_entities(draft, ent.children, nid, qpath + ".", fid, lines)


# -- reference resolution -----------------------------------------------------


def module_name(path: str) -> str:
    parts = list(PurePosixPath(path).with_suffix("").parts)
    if parts and parts[-1] == "__init__":
        parts.pop()
    return ".".join(parts)


@dataclass
class _FileInfo:
    fid: str
    path: str
    module: str
    is_package: bool
    tree: ast.Module
    defs: dict[str, str] = field(default_factory=dict)
    imports: dict[str, tuple] = field(default_factory=dict)


@dataclass
class _Scope:
    """Name environment of one function or module body."""

    owner: str  # node id that calls are attributed to
    defs: dict[str, str] = field(default_factory=dict)
    typed: dict[str, set[str]] = field(default_factory=dict)  # receiver name -> class ids
    parent: _Scope | None = None
    cls: str | None = None  # enclosing class for methods
    shadowed: set[str] = field(default_factory=set)  # untyped parameters


class _Resolver:
    def __init__(self, graph: CodeGraph, tree: SourceTree, provider: SyntaxProvider, warnings: list[BuildWarning]):
        self.graph = graph
        self.warnings = warnings
        self.edges: set[CodeEdge] = set()
        self.files: dict[str, _FileInfo] = {}
        self.modules: dict[str, str] = {}
        self.by_stmt: dict[tuple[str, int, str, str], str] = {}
        self.members: dict[str, dict[str, str]] = {}
        # class id -> instance attribute -> class ids (or _BUILTIN_VALUE)
        self.attr_types: dict[str, dict[str, set[str]]] = {}
        self.bases: dict[str, list[str]] = {}
        self.subclasses: dict[str, set[str]] = {}
        self._mro: dict[str, list[str]] = {}

        for n in graph.nodes.values():
            if n.kind in (NodeKind.CLASS, NodeKind.FUNCTION) and n.file_of:
                self.by_stmt[(n.file_of, n.range.start_line, n.kind.value, n.name)] = n.id
        for n in graph.nodes.values():
            if n.kind in (NodeKind.CLASS, NodeKind.FUNCTION):
                parent = graph.parent(n.id)
                if parent and graph.nodes[parent].kind is NodeKind.CLASS:
                    self.members.setdefault(parent, {})
                    # later definitions shadow earlier ones, as at runtime
                    prev = self.members[parent].get(n.name)
                    if prev is None or graph.nodes[prev].range.start_line <= n.range.start_line:
                        self.members[parent][n.name] = n.id

        sources = {f.path: f for f in tree.files}
        for n in graph.nodes_of_kind(NodeKind.FILE):
            sf = sources.get(n.qualified_path)
            if sf is None:
                continue
            try:
                mod = provider.parse(sf.text, sf.path)
            except (SyntaxError, ValueError):
                continue
            info = _FileInfo(n.id, n.qualified_path, module_name(n.qualified_path),
                             PurePosixPath(n.qualified_path).name == "__init__.py", mod)
            self.files[n.id] = info
            self.modules.setdefault(info.module, n.id)
        self._suffix: dict[str, list[str]] = {}
        for mod in self.modules:
            parts = mod.split(".")
            for i in range(1, len(parts)):
                self._suffix.setdefault(".".join(parts[i:]), []).append(mod)

    # -- helpers ----------------------------------------------------------

    def warn(self, path: str, line: int, kind: str, msg: str) -> None:
        self.warnings.append(BuildWarning(path, line, kind, msg))

    def edge(self, src: str, dst: str, kind: EdgeKind) -> None:
        self.edges.add(CodeEdge(src, dst, kind))

    def node_for(self, info: _FileInfo, stmt: ast.stmt) -> str | None:
        kind = "class" if isinstance(stmt, ast.ClassDef) else "function"
        start = stmt.lineno
        if getattr(stmt, "decorator_list", None):
            start = min(start, *(d.lineno for d in stmt.decorator_list))
        return self.by_stmt.get((info.fid, start, kind, stmt.name))

    def find_module(self, name: str) -> str | None:
        if name in self.modules:
            return name
        cands = self._suffix.get(name, [])
        return cands[0] if len(cands) == 1 else None

    def kind(self, nid: str) -> NodeKind:
        return self.graph.nodes[nid].kind

    # values are ("node", id) or ("module", dotted name)

    def module_value(self, name: str) -> tuple | None:
        found = self.find_module(name)
        if found is not None:
            return ("node", self.modules[found])
        if any(m == name or m.startswith(name + ".") for m in self.modules):
            return ("module", name)
        return None

    def member(self, value: tuple, attr: str, depth: int = 0) -> tuple | None:
        if depth > 20:
            return None
        tag, ref = value
        if tag == "module":
            return self.module_value(f"{ref}.{attr}")
        kind = self.kind(ref)
        if kind is NodeKind.FILE:
            info = self.files.get(ref)
            if info is None:
                return None
            if attr in info.defs:
                return ("node", info.defs[attr])
            if attr in info.imports:
                return self.ref_value(info.imports[attr], depth + 1)
            return self.module_value(f"{info.module}.{attr}" if info.module else attr)
        if kind is NodeKind.CLASS:
            for cls in self.mro(ref):
                hit = self.members.get(cls, {}).get(attr)
                if hit:
                    return ("node", hit)
        return None

    def ref_value(self, ref: tuple, depth: int = 0) -> tuple | None:
        if ref[0] == "module":
            return self.module_value(ref[1])
        _, mod, attr = ref
        base = self.module_value(mod)
        if base is None:
            return None
        return self.member(base, attr, depth)

    def lookup(self, scope: _Scope, name: str, info: _FileInfo) -> tuple | None:
        s: _Scope | None = scope
        while s is not None:
            if name in s.defs:
                return ("node", s.defs[name])
            s = s.parent
        if name in info.imports:
            return self.ref_value(info.imports[name])
        return None

    def resolve_expr(self, expr: ast.expr, scope: _Scope, info: _FileInfo) -> tuple | None:
        if isinstance(expr, ast.Name):
            return self.lookup(scope, expr.id, info)
        if isinstance(expr, ast.Attribute):
            base = self.resolve_expr(expr.value, scope, info)
            return self.member(base, expr.attr) if base else None
        if isinstance(expr, ast.Constant) and isinstance(expr.value, str):
            try:
                inner = ast.parse(expr.value, mode="eval").body
            except SyntaxError:
                return None
            return self.resolve_expr(inner, scope, info)
        return None

    def annotation_classes(self, ann: ast.expr | None, scope: _Scope, info: _FileInfo) -> set[str]:
        if ann is None:
            return set()
        if isinstance(ann, ast.BinOp) and isinstance(ann.op, ast.BitOr):
            return self.annotation_classes(ann.left, scope, info) | self.annotation_classes(ann.right, scope, info)
        if isinstance(ann, ast.Subscript):
            inner = ann.slice
            elts = inner.elts if isinstance(inner, ast.Tuple) else [inner]
            out: set[str] = set()
            for e in elts:
                out |= self.annotation_classes(e, scope, info)
            return out
        v = self.resolve_expr(ann, scope, info)
        if v and v[0] == "node" and self.kind(v[1]) is NodeKind.CLASS:
            return {v[1]}
        return set()

    # -- class hierarchy --------------------------------------------------

    def mro(self, cls: str) -> list[str]:
        if cls in self._mro:
            return self._mro[cls]
        self._mro[cls] = [cls]  # recursion guard for cyclic inheritance
        seqs = [list(self.mro(b)) for b in self.bases.get(cls, [])] + [list(self.bases.get(cls, []))]
        result = [cls]
        while True:
            seqs = [s for s in seqs if s]
            if not seqs:
                break
            for s in seqs:
                head = s[0]
                if not any(head in t[1:] for t in seqs):
                    break
            else:
                # inconsistent hierarchy: fall back to depth-first order
                for s in seqs:
                    result.extend(c for c in s if c not in result)
                break
            result.append(head)
            for s in seqs:
                if s[0] == head:
                    del s[0]
        self._mro[cls] = result
        return result

    def all_subclasses(self, cls: str) -> set[str]:
        out: set[str] = set()
        stack = [cls]
        while stack:
            for sub in self.subclasses.get(stack.pop(), ()):
                if sub not in out and sub != cls:
                    out.add(sub)
                    stack.append(sub)
        return out

    def dispatch(self, cls: str, method: str) -> set[str]:
        """Over-approximated targets of ``method`` called on a ``cls`` receiver."""
        targets = set()
        for c in self.mro(cls):
            hit = self.members.get(c, {}).get(method)
            if hit:
                targets.add(hit)
                break
        for sub in self.all_subclasses(cls):
            hit = self.members.get(sub, {}).get(method)
            if hit:
                targets.add(hit)
        return targets

    # -- passes -----------------------------------------------------------

    def collect_symbols(self) -> None:
        for info in self.files.values():
            for stmt in _scope_statements(info.tree.body):
                if isinstance(stmt, (ast.ClassDef, ast.FunctionDef, ast.AsyncFunctionDef)):
                    nid = self.node_for(info, stmt)
                    if nid:
                        info.defs[stmt.name] = nid
            for node in ast.walk(info.tree):
                if isinstance(node, ast.Import):
                    for alias in node.names:
                        if alias.asname:
                            info.imports[alias.asname] = ("module", alias.name)
                        else:
                            head = alias.name.split(".")[0]
                            info.imports[head] = ("module", head)
                elif isinstance(node, ast.ImportFrom):
                    base = self.absolute_module(info, node)
                    if base is None:
                        continue
                    for alias in node.names:
                        if alias.name != "*":
                            info.imports[alias.asname or alias.name] = ("symbol", base, alias.name)

    def absolute_module(self, info: _FileInfo, node: ast.ImportFrom) -> str | None:
        if not node.level:
            return node.module or ""
        parts = info.module.split(".") if info.module else []
        if not info.is_package:
            parts = parts[:-1]
        drop = node.level - 1
        if drop > len(parts):
            return None
        parts = parts[: len(parts) - drop] if drop else parts
        if node.module:
            parts = parts + node.module.split(".")
        return ".".join(parts)

    def resolve_imports(self) -> None:
        for info in self.files.values():
            for node in ast.walk(info.tree):
                if isinstance(node, ast.Import):
                    for alias in node.names:
                        v = self.module_value(alias.name)
                        if v and v[0] == "node":
                            self.import_edge(info, v[1])
                        elif v is None and not self.external(alias.name):
                            self.warn(info.path, node.lineno, "unresolved-import", alias.name)
                elif isinstance(node, ast.ImportFrom):
                    base = self.absolute_module(info, node)
                    bv = self.module_value(base) if base is not None else None
                    if bv is None:
                        if base is None or not self.external(base):
                            self.warn(info.path, node.lineno, "unresolved-import", "." * node.level + (node.module or ""))
                        continue
                    for alias in node.names:
                        if alias.name == "*":
                            if bv[0] == "node":
                                self.import_edge(info, bv[1])
                            continue
                        v = self.member(bv, alias.name)
                        if v and v[0] == "node":
                            self.import_edge(info, v[1])
                        elif bv[0] == "node":
                            # a plain variable: depend on the defining file
                            self.import_edge(info, bv[1])
                        else:
                            self.warn(info.path, node.lineno, "unresolved-import", f"{base}.{alias.name}")

    def external(self, module: str) -> bool:
        head = module.split(".")[0]
        return head in _STDLIB or head == "__future__"

    def import_edge(self, info: _FileInfo, target: str) -> None:
        kind = self.kind(target)
        if kind is NodeKind.ATTRIBUTE:
            target = self.graph.nodes[target].file_of or target
            kind = self.kind(target)
        if kind in (NodeKind.FILE, NodeKind.CLASS, NodeKind.FUNCTION) and target != info.fid:
            self.edge(info.fid, target, EdgeKind.IMPORTS)

    def resolve_bases(self) -> None:
        for info in self.files.values():
            module_scope = _Scope(info.fid, defs=dict(info.defs))
            self._walk_classes(info, info.tree.body, module_scope)
        for cls, bs in self.bases.items():
            for b in bs:
                self.subclasses.setdefault(b, set()).add(cls)
                self.edge(cls, b, EdgeKind.EXTENDS)

    def _walk_classes(self, info: _FileInfo, body: list[ast.stmt], scope: _Scope) -> None:
        local = _Scope(scope.owner, parent=scope)
        for stmt in _scope_statements(body):
            if isinstance(stmt, _SCOPE_TYPES):
                nid = self.node_for(info, stmt)
                if nid:
                    local.defs[stmt.name] = nid
        for stmt in _scope_statements(body):
            if isinstance(stmt, ast.ClassDef):
                nid = self.node_for(info, stmt)
                if nid is None:
                    continue
                resolved = []
                for base in stmt.bases:
                    v = self.resolve_expr(base, local, info)
                    if v and v[0] == "node" and self.kind(v[1]) is NodeKind.CLASS and v[1] != nid:
                        resolved.append(v[1])
                    elif not (isinstance(base, ast.Name) and base.id in _BUILTIN_NAMES):
                        self.warn(info.path, base.lineno, "unresolved-base", ast.unparse(base))
                self.bases[nid] = list(dict.fromkeys(resolved))
                self._walk_classes(info, stmt.body, local)
            elif isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
                self._walk_classes(info, stmt.body, local)

    def resolve_calls(self) -> None:
        # attribute types first, so uses in earlier files see later classes
        for info in self.files.values():
            scope = _Scope(info.fid, defs=dict(info.defs))
            pending = [stmt for stmt in info.tree.body if isinstance(stmt, ast.ClassDef)]
            while pending:
                classdef = pending.pop()
                nid = self.node_for(info, classdef)
                if nid is not None:
                    self._collect_attr_types(info, classdef, scope, nid)
                pending.extend(s for s in classdef.body if isinstance(s, ast.ClassDef))
        for info in self.files.values():
            scope = _Scope(info.fid, defs=dict(info.defs))
            self._visit_body(info, info.tree.body, scope)

    def _bind_locals(self, info: _FileInfo, body: list[ast.stmt], scope: _Scope) -> None:
        for stmt in _scope_statements(body):
            if isinstance(stmt, _SCOPE_TYPES):
                nid = self.node_for(info, stmt)
                if nid:
                    scope.defs[stmt.name] = nid
        for stmt in _scope_statements(body):
            if isinstance(stmt, (ast.Assign, ast.AnnAssign)) and isinstance(stmt.value, ast.Call):
                targets = stmt.targets if isinstance(stmt, ast.Assign) else [stmt.target]
                v = self.resolve_expr(stmt.value.func, scope, info)
                if v and v[0] == "node" and self.kind(v[1]) is NodeKind.CLASS:
                    for t in targets:
                        if isinstance(t, ast.Name):
                            scope.typed.setdefault(t.id, set()).add(v[1])
            if isinstance(stmt, ast.AnnAssign) and isinstance(stmt.target, ast.Name):
                classes = self.annotation_classes(stmt.annotation, scope, info)
                if classes:
                    scope.typed.setdefault(stmt.target.id, set()).update(classes)

    def _visit_body(self, info: _FileInfo, body: list[ast.stmt], scope: _Scope) -> None:
        self._bind_locals(info, body, scope)
        for stmt in body:
            self._visit_stmt(info, stmt, scope)

    def _visit_function(self, info: _FileInfo, stmt: ast.FunctionDef | ast.AsyncFunctionDef, scope: _Scope,
                        cls: str | None, deco_scope: _Scope) -> None:
        for dec in stmt.decorator_list:
            self._visit_expr(info, dec, deco_scope)
        for default in [*stmt.args.defaults, *(d for d in stmt.args.kw_defaults if d is not None)]:
            self._visit_expr(info, default, deco_scope)
        nid = self.node_for(info, stmt)
        if nid is None:
            return
        fscope = self._param_scope(info, stmt, scope, cls, nid)
        self._visit_body(info, stmt.body, fscope)

    def _param_scope(self, info: _FileInfo, fn: ast.FunctionDef | ast.AsyncFunctionDef, scope: _Scope,
                     cls: str | None, owner: str) -> _Scope:
        fscope = _Scope(owner, parent=scope, cls=cls)
        params = [*fn.args.posonlyargs, *fn.args.args, *fn.args.kwonlyargs]
        for extra in (fn.args.vararg, fn.args.kwarg):
            if extra is not None:
                fscope.shadowed.add(extra.arg)
        for i, arg in enumerate(params):
            classes = self.annotation_classes(arg.annotation, scope, info)
            if i == 0 and cls is not None and arg.arg in ("self", "cls"):
                classes = classes | {cls}
            if classes:
                fscope.typed[arg.arg] = classes
            else:
                fscope.shadowed.add(arg.arg)
        return fscope

    def _collect_attr_types(self, info: _FileInfo, classdef: ast.ClassDef, scope: _Scope, cls: str) -> None:
        """Types of ``self.x`` from assignments in the class's own methods."""
        table = self.attr_types.setdefault(cls, {})
        for fn in classdef.body:
            if not isinstance(fn, (ast.FunctionDef, ast.AsyncFunctionDef)) or not fn.args.args:
                continue
            me = fn.args.args[0].arg
            fscope = self._param_scope(info, fn, scope, cls, cls)
            self._bind_locals(info, fn.body, fscope)
            for stmt in _scope_statements(fn.body):
                if isinstance(stmt, ast.Assign):
                    targets, value, ann = stmt.targets, stmt.value, None
                elif isinstance(stmt, ast.AnnAssign):
                    targets, value, ann = [stmt.target], stmt.value, stmt.annotation
                else:
                    continue
                for t in targets:
                    if not (isinstance(t, ast.Attribute) and isinstance(t.value, ast.Name) and t.value.id == me):
                        continue
                    found = self.annotation_classes(ann, scope, info)
                    if isinstance(value, ast.Name):
                        found |= self._typed(fscope, value.id) or set()
                    elif isinstance(value, ast.Call):
                        made = self.resolve_expr(value.func, fscope, info)
                        if made and made[0] == "node" and self.kind(made[1]) is NodeKind.CLASS:
                            found.add(made[1])
                    elif isinstance(value, _LITERALS) and not found:
                        found.add(_BUILTIN_VALUE)
                    if found:
                        table.setdefault(t.attr, set()).update(found)

    def _attr_classes(self, recv: ast.Attribute, scope: _Scope) -> set[str] | None:
        """Classes recorded for ``obj.attr`` when ``obj`` is a typed name."""
        if not isinstance(recv.value, ast.Name):
            return None
        owners = self._typed(scope, recv.value.id)
        if not owners:
            return None
        out: set[str] = set()
        for owner in owners:
            for base in self.mro(owner):
                hit = self.attr_types.get(base, {}).get(recv.attr)
                if hit:
                    out |= hit
                    break
        return out or None

    def _visit_stmt(self, info: _FileInfo, stmt: ast.AST, scope: _Scope, cls: str | None = None) -> None:
        if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
            self._visit_function(info, stmt, scope, cls, scope)
            return
        if isinstance(stmt, ast.ClassDef):
            for expr in [*stmt.decorator_list, *stmt.bases, *(k.value for k in stmt.keywords)]:
                self._visit_expr(info, expr, scope)
            nid = self.node_for(info, stmt)
            # class bodies run in the enclosing frame; their names are not
            # visible from methods, so methods nest under ``scope`` directly
            body_scope = _Scope(scope.owner, parent=scope, cls=nid)
            self._bind_locals(info, stmt.body, body_scope)
            if nid is not None and nid not in self.attr_types:
                self._collect_attr_types(info, stmt, scope, nid)  # classes local to a function
            for inner in stmt.body:
                if isinstance(inner, (ast.FunctionDef, ast.AsyncFunctionDef)):
                    self._visit_function(info, inner, scope, nid, body_scope)
                else:
                    self._visit_stmt(info, inner, body_scope, cls=nid)
            return
        for child in ast.iter_child_nodes(stmt):
            if isinstance(child, ast.expr):
                self._visit_expr(info, child, scope)
            else:
                self._visit_stmt(info, child, scope, cls)

    def _visit_expr(self, info: _FileInfo, expr: ast.expr, scope: _Scope) -> None:
        for node in ast.walk(expr):
            if isinstance(node, ast.Call):
                self._resolve_call(info, node, scope)

    def _resolve_call(self, info: _FileInfo, call: ast.Call, scope: _Scope) -> None:
        src = scope.owner
        func = call.func
        targets: set[str] = set()
        if isinstance(func, ast.Name):
            v = self.lookup(scope, func.id, info)
            if v and v[0] == "node":
                targets.add(v[1])
            elif v is None and func.id not in _BUILTIN_NAMES and not self._external_name(func.id, scope, info):
                self.warn(info.path, call.lineno, "unresolved-call", func.id)
        elif isinstance(func, ast.Attribute):
            recv, method = func.value, func.attr
            if (isinstance(recv, ast.Call) and isinstance(recv.func, ast.Name) and recv.func.id == "super"):
                cls = self._enclosing_class(scope)
                if cls is not None:
                    for base in self.mro(cls)[1:]:
                        hit = self.members.get(base, {}).get(method)
                        if hit:
                            targets.add(hit)
                            break
                if not targets:
                    self.warn(info.path, call.lineno, "unresolved-call", f"super().{method}")
            elif isinstance(recv, ast.Name) and self._typed(scope, recv.id) is not None:
                for cls in self._typed(scope, recv.id) or ():
                    targets |= self.dispatch(cls, method)
                if not targets:
                    self.warn(info.path, call.lineno, "unresolved-call", f"{recv.id}.{method}")
            elif isinstance(recv, _LITERALS):
                pass  # builtin-typed literal receiver
            elif isinstance(recv, ast.Attribute) and (held := self._attr_classes(recv, scope)) is not None:
                for cls in held - {_BUILTIN_VALUE}:
                    targets |= self.dispatch(cls, method)
                if not targets and _BUILTIN_VALUE not in held:
                    self.warn(info.path, call.lineno, "unresolved-call", ast.unparse(func))
            else:
                if isinstance(recv, ast.Call):
                    # ``C(...).m()``: the receiver is a fresh instance of C
                    made = self.resolve_expr(recv.func, scope, info)
                    if made and made[0] == "node" and self.kind(made[1]) is NodeKind.CLASS:
                        targets |= self.dispatch(made[1], method)
                base = None if targets else self.resolve_expr(recv, scope, info)
                if base and base[0] == "node" and self.kind(base[1]) is NodeKind.CLASS:
                    targets |= self.dispatch(base[1], method)
                elif base is not None:
                    v = self.member(base, method)
                    if v and v[0] == "node":
                        targets.add(v[1])
                if not targets and not self._external_receiver(recv, scope, info):
                    self.warn(info.path, call.lineno, "unresolved-call", ast.unparse(func))
        for t in targets:
            if self.kind(t) in (NodeKind.FUNCTION, NodeKind.CLASS):
                self.edge(src, t, EdgeKind.CALLS)

    def _external_name(self, name: str, scope: _Scope, info: _FileInfo) -> bool:
        """``name`` is bound by an import of a standard-library module."""
        s: _Scope | None = scope
        while s is not None:
            if name in s.defs or name in s.shadowed or name in s.typed:
                return False
            s = s.parent
        ref = info.imports.get(name)
        return ref is not None and self.external(ref[1])

    def _external_receiver(self, recv: ast.expr, scope: _Scope, info: _FileInfo) -> bool:
        while isinstance(recv, (ast.Attribute, ast.Call, ast.Subscript)):
            recv = recv.func if isinstance(recv, ast.Call) else recv.value
        return isinstance(recv, ast.Name) and self._external_name(recv.id, scope, info)

    def _typed(self, scope: _Scope, name: str) -> set[str] | None:
        s: _Scope | None = scope
        while s is not None:
            if name in s.typed:
                return s.typed[name]
            if name in s.defs or name in s.shadowed:
                return None
            s = s.parent
        return None

    def _enclosing_class(self, scope: _Scope) -> str | None:
        s: _Scope | None = scope
        while s is not None:
            if s.cls is not None:
                return s.cls
            s = s.parent
        return None


def resolve_references(
    graph: CodeGraph,
    tree: SourceTree,
    provider: SyntaxProvider | None = None,
    warnings: list[BuildWarning] | None = None,
) -> CodeGraph:
    """Add IMPORTS, EXTENDS and CALLS edges to a hierarchy-only graph."""
    warnings = warnings if warnings is not None else []
    r = _Resolver(graph, tree, provider or PythonSyntaxProvider(), warnings)
    r.collect_symbols()
    r.resolve_imports()
    r.resolve_bases()
    r.resolve_calls()
    edges = graph.edges + tuple(sorted(r.edges))
    return CodeGraph(graph.nodes, edges, graph.root, graph.subject_language)


# -- parent text deduplication ------------------------------------------------


def _already_deduped(lines: list[str], kids: Iterable[str]) -> bool:
    marks = {placeholder_id(line) for line in lines}
    return all(k in marks for k in kids)


def dedup_parent_text(graph: CodeGraph) -> CodeGraph:
    """Replace every child span in its parent's text by a placeholder line.

    Applies to same-file containment only (files, classes, functions).
    Idempotent: a parent that already carries placeholders for all of its
    children is left untouched.
    """
    new_nodes = dict(graph.nodes)
    for nid, node in graph.nodes.items():
        kids = [graph.nodes[c] for c in graph.children(nid)]
        kids = [k for k in kids if k.kind in (NodeKind.CLASS, NodeKind.FUNCTION, NodeKind.ATTRIBUTE)]
        if not kids or node.kind not in (NodeKind.FILE, NodeKind.CLASS, NodeKind.FUNCTION):
            continue
        lines = split_lines(node.content)
        if _already_deduped(lines, (k.id for k in kids)):
            continue
        kids.sort(key=lambda k: (k.range.start_line, k.id))
        base = node.range.start_line
        out: list[str] = []
        pos = 0
        prev_end = base - 1
        for k in kids:
            if not node.range.contains(k.range):
                raise BuildError(f"{k.id} lies outside its parent {nid}")
            if k.range.start_line <= prev_end:
                raise BuildError(f"overlapping sibling ranges under {nid} at {k.id}")
            lo, hi = k.range.start_line - base, k.range.end_line - base
            if hi >= len(lines):
                raise BuildError(f"{k.id} range exceeds the text of {nid}")
            out.extend(lines[pos:lo])
            out.append(placeholder(k.id, indent_of(lines[lo])))
            pos = hi + 1
            prev_end = k.range.end_line
        out.extend(lines[pos:])
        new_nodes[nid] = node.with_content("".join(out))
    return CodeGraph(new_nodes, graph.edges, graph.root, graph.subject_language)


# -- pipeline -----------------------------------------------------------------


@dataclass
class BuildResult:
    graph: CodeGraph
    warnings: list[BuildWarning]


def build_graph(
    tree: SourceTree | str | Path,
    subject_language: str = "python",
    provider: SyntaxProvider | None = None,
) -> BuildResult:
    """Run hierarchy, reference resolution and dedup on ``tree``."""
    if not isinstance(tree, SourceTree):
        tree = SourceTree.from_directory(tree)
    warnings: list[BuildWarning] = []
    g = build_hierarchy(tree, subject_language, provider, warnings)
    g = resolve_references(g, tree, provider, warnings)
    g = dedup_parent_text(g)
    log.debug("built %d nodes, %d edges, %d warnings", len(g.nodes), len(g.edges), len(warnings))
    return BuildResult(g, warnings)
