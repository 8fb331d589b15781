"""Issue rewriting: pull code elements and keywords out of an issue and
produce a query text for semantic search."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from cgm.errors import ContractError
from cgm.graph import FILE_KINDS, VIRTUAL_KINDS, CodeGraph
from cgm.rag.backend import BackendError, ModelBackend, load_template, render

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:[./-][A-Za-z0-9_]+)*")


@dataclass
class RewriteResult:
    entities: list[str]
    keywords: list[str]
    inferred_query: str
    warnings: list[str] = field(default_factory=list)


def issue_tokens(text: str) -> list[str]:
    """Identifier-like tokens of ``text`` plus the parts of dotted or slashed
    tokens, in first-occurrence order."""
    out: dict[str, None] = {}
    for m in _TOKEN_RE.finditer(text):
        tok = m.group(0).rstrip(".-/")
        out.setdefault(tok)
        for part in re.split(r"[./-]", tok):
            if part:
                out.setdefault(part)
    return list(out)


def symbol_names(graph: CodeGraph | None) -> set[str]:
    """Names a string-matched entity may refer to: node names and file paths."""
    if graph is None:
        return set()
    names: set[str] = set()
    for n in graph.nodes.values():
        if n.kind in VIRTUAL_KINDS and n.id == graph.root:
            continue
        names.add(n.name)
        if n.kind in FILE_KINDS:
            names.add(n.qualified_path)
    names.discard("")
    return names


def _identifier_like(tok: str) -> bool:
    return (
        any(c in tok for c in "_./")
        or any(c.isdigit() for c in tok)
        or (tok[:1].islower() and any(c.isupper() for c in tok[1:]))
        or (tok[:1].isupper() and any(c.isupper() for c in tok[1:]) and any(c.islower() for c in tok))
    )


def fallback_rewrite(issue_text: str, graph: CodeGraph | None = None) -> RewriteResult:
    symbols = symbol_names(graph)
    entities, keywords = [], []
    for tok in issue_tokens(issue_text):
        if tok in symbols:
            entities.append(tok)
        elif _identifier_like(tok):
            keywords.append(tok)
    return RewriteResult(entities, keywords, issue_text)


def _bullets(lines: list[str]) -> list[str]:
    items = []
    for line in lines:
        line = line.strip()
        if line.startswith(("- ", "* ")):
            item = line[2:].strip().strip("`")
            if item and item not in items:
                items.append(item)
    return items


def parse_extractor_output(text: str) -> tuple[list[str], list[str]]:
    sections: dict[str, list[str]] = {"ENTITIES": [], "KEYWORDS": []}
    current = None
    for line in text.splitlines():
        head = line.strip().rstrip(":").upper()
        if head in sections:
            current = head
        elif current is not None:
            sections[current].append(line)
    if current is None:
        raise BackendError("extractor output has no ENTITIES/KEYWORDS sections")
    return _bullets(sections["ENTITIES"]), _bullets(sections["KEYWORDS"])


def parse_inferer_output(text: str) -> str:
    _, sep, rest = text.partition("QUERY:")
    query = (rest if sep else text).strip()
    if not query:
        raise BackendError("inferer output is empty")
    return query


def rewrite(issue_text: str, backend: ModelBackend | None = None, graph: CodeGraph | None = None) -> RewriteResult:
    """Extract entities/keywords and an inferred query from an issue.

    Without a backend (or when a backend call fails) the deterministic
    fallback is used: entities are issue tokens naming a graph symbol,
    keywords are the remaining identifier-like tokens and the query is the
    issue text itself.
    """
    if not issue_text.strip():
        raise ContractError("issue text must be nonempty")
    fallback = fallback_rewrite(issue_text, graph)
    if backend is None:
        return fallback
    result = RewriteResult(fallback.entities, fallback.keywords, fallback.inferred_query)
    try:
        out = backend.complete(render(load_template("extractor"), issue=issue_text))
        result.entities, result.keywords = parse_extractor_output(out)
    except Exception as exc:  # any backend failure degrades to the fallback
        log.warning("extractor failed, using fallback: %s", exc)
        result.warnings.append(f"extractor: {exc}")
    try:
        out = backend.complete(render(load_template("inferer"), issue=issue_text))
        result.inferred_query = parse_inferer_output(out)
    except Exception as exc:
        log.warning("inferer failed, using fallback: %s", exc)
        result.warnings.append(f"inferer: {exc}")
    return result
