import networkx as nx
from hypothesis import given, settings, strategies as st

from cgm.fixtures import random_import_repo
from cgm.graph import EdgeKind, NodeKind, induce_subgraph
from cgm.linearize import file_import_graph, layout_order, linearize, split_linearized, topo_sort_files
from conftest import build
from oracles import import_order_violations


def paths(g, ids):
    return [g.nodes[i].qualified_path for i in ids]


def file_imports(g):
    """(importer, imported) file pairs, read straight off IMPORTS edges."""
    pairs = set()
    for e in g.edges:
        if e.kind is EdgeKind.IMPORTS:
            dst = g.nodes[e.dst]
            target = dst.id if dst.kind in (NodeKind.FILE, NodeKind.TEXTFILE) else dst.file_of
            if target != e.src:
                pairs.add((e.src, target))
    return pairs


def test_three_chain():
    g = build({"a.py": "import b\n", "b.py": "import c\n", "c.py": "X = 1\n"}).graph
    assert paths(g, topo_sort_files(g)) == ["c.py", "b.py", "a.py"]


def test_no_imports_is_path_order():
    g = build({"z.py": "", "m.py": "", "a/b.py": "", "a.txt": "t"}).graph
    assert paths(g, topo_sort_files(g)) == ["a.txt", "a/b.py", "m.py", "z.py"]


def test_mutual_import_drops_later_importer_edge():
    g = build({"a.py": "import b\n", "b.py": "import a\n"}).graph
    # b.py's import of a is dropped, leaving a -> b: b first
    assert paths(g, topo_sort_files(g)) == ["b.py", "a.py"]


def test_cycle_fixture_is_total_and_deterministic(corpus_graphs):
    g = corpus_graphs["cycles"]
    order = topo_sort_files(g)
    assert sorted(order) == sorted(n.id for n in g.files())
    assert order == topo_sort_files(g)
    assert not nx.is_directed_acyclic_graph(file_import_graph(g))


@settings(max_examples=40)
@given(st.integers(2, 12), st.integers(0, 10_000))
def test_random_dags_have_no_violations(n, seed):
    g = build(random_import_repo(n, seed)).graph
    assert import_order_violations(topo_sort_files(g), file_imports(g)) == 0


@settings(max_examples=25)
@given(st.integers(2, 10), st.integers(0, 10_000))
def test_random_cyclic_imports_give_total_order(n, seed):
    g = build(random_import_repo(n, seed, cyclic=True)).graph
    order = topo_sort_files(g)
    assert sorted(order) == sorted(n.id for n in g.files())
    assert order == topo_sort_files(build(random_import_repo(n, seed, cyclic=True)).graph)


def test_repo_only_is_header_line():
    g = build({"a.py": "x = 1\n"}, name="demo").graph
    assert linearize(induce_subgraph(g, [])) == "# <REPO:demo>\n"


def test_single_file_round_trip():
    src = "import os\n\n\ndef f():\n    return os.sep\n"
    g = build({"main.py": src}, name="one").graph
    text = linearize(g)
    assert text == "# <REPO:one>\n# <FILE:main.py>\n" + src
    header, files = split_linearized(text)
    assert header == ["# <REPO:one>"] and files == {"main.py": src}


def test_absent_child_keeps_placeholder():
    src = "import os\n\n\ndef f():\n    return os.sep\n"
    g = build({"main.py": src}).graph
    sub = induce_subgraph(g, ["file:main.py"])
    assert "# <CHILD:function:main.py:f>\n" in linearize(sub)


def test_packages_precede_files(corpus_graphs):
    text = linearize(corpus_graphs["nested"])
    header, _ = split_linearized(text)
    assert header == ["# <REPO:nested>", "# <PACKAGE:app>", "# <PACKAGE:app/core>", "# <PACKAGE:app/core/parts>"]


def test_round_trip_every_corpus_file(corpus_files, corpus_graphs):
    for name, files in corpus_files.items():
        _, got = split_linearized(linearize(corpus_graphs[name]))
        want = {p: d.decode("utf-8", "surrogateescape") if isinstance(d, bytes) else d for p, d in files.items()}
        assert got == want, name


def test_layout_in_file_nodes_in_line_order(corpus_graphs):
    g = corpus_graphs["shapes"]
    order = layout_order(g)
    assert order[0] == g.root
    for fid in topo_sort_files(g):
        members = [i for i in order if g.nodes[i].file_of == fid]
        starts = [g.nodes[i].range.start_line for i in members]
        assert starts == sorted(starts)
        assert order.index(fid) < min((order.index(i) for i in members), default=len(order))


def test_linearize_is_deterministic(corpus_graphs):
    g = corpus_graphs["synth20"]
    assert linearize(g) == linearize(g)
