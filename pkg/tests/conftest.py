import os

import pytest
from hypothesis import HealthCheck, settings

from cgm.builder import SourceTree, build_graph
from cgm.fixtures import corpus, fixture_tree
from cgm.graph import CodeEdge, CodeGraph, CodeNode, EdgeKind, LineRange, NodeKind, make_node_id

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def node(kind, qp, content="", rng=(0, 0), name=None, file_of=None):
    kind = NodeKind(kind)
    if name is None:
        name = qp.replace(":", "/").replace(".", "/").split("/")[-1] if qp else "repo"
        if kind in (NodeKind.FILE, NodeKind.TEXTFILE):
            name = qp.split("/")[-1]
    return CodeNode(make_node_id(kind, qp), kind, name, qp, content, LineRange(*rng), file_of)


def graph(nodes, edges, language="python"):
    """Graph from CodeNodes and (src, dst, kind) triples; the REPO node is the root."""
    by_id = {n.id: n for n in nodes}
    root = next(n.id for n in nodes if n.kind is NodeKind.REPO)
    return CodeGraph(by_id, tuple(CodeEdge(s, d, EdgeKind(k)) for s, d, k in edges), root, language)


def build(files, name="repo"):
    return build_graph(SourceTree.from_mapping(files, name))


@pytest.fixture(scope="session")
def corpus_graphs():
    return {name: build_graph(fixture_tree(name)).graph for name in corpus()}


@pytest.fixture(scope="session")
def corpus_files():
    return corpus()


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(number, title, ok, detail)``."""

    def record(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title}: {detail}"
        request.config.stash.setdefault(ACCEPTANCE, []).append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
