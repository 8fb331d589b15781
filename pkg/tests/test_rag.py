import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgm.errors import ContractError
from cgm.graph import FILE_KINDS, NodeKind, descendants, validate_graph
from cgm.rag import (
    AnchorSet,
    BackendError,
    HashingEmbedder,
    HttpBackend,
    assemble_reader_input,
    expand_subgraph,
    match_anchors,
    rerank,
    rewrite,
    run_pipeline,
    skeleton,
)
from cgm.rag.backend import load_template, render
from cgm.rag.rewriter import RewriteResult
from cgm.text import reassemble
from cgm.tokens import DEFAULT_TOKENIZER as TOK
from conftest import build, graph, node
from oracles import cosine


class Stub:
    """Answers each template with a canned completion."""

    def __init__(self, stage1=None, score="SCORE: 1", vector=None):
        self.stage1 = stage1
        self.score = score
        self.vector = vector
        self.prompts = []

    def complete(self, prompt):
        self.prompts.append(prompt)
        if "ENTITIES:" in prompt:
            return "ENTITIES:\n- Trainer\n- `ml/model.py`\nKEYWORDS:\n- resume\n"
        if "QUERY:" in prompt:
            return "QUERY:\nrestores model weights from disk\n"
        if "Candidate files:" in prompt:
            return self.stage1 if self.stage1 is not None else prompt
        return self.score

    def embed(self, text):
        if self.vector is None:
            raise BackendError("no embeddings here")
        return self.vector(text)


class Broken:
    def complete(self, prompt):
        raise BackendError("down")

    def embed(self, text):
        raise BackendError("down")


@pytest.fixture(scope="module")
def trainer(corpus_graphs):
    return corpus_graphs["trainer"]


# -- rewriter ------------------------------------------------------------------


def test_fallback_finds_named_entities(trainer):
    issue = "Resuming fails: trainer.py calls load_checkpoint with a stale path_arg"
    rw = rewrite(issue, graph=trainer)
    assert set(rw.entities) == {"trainer.py", "load_checkpoint"}
    assert "path_arg" in rw.keywords
    assert rw.inferred_query == issue and rw.warnings == []


def test_fallback_without_symbols():
    rw = rewrite("something in foo_bar breaks")
    assert rw.entities == [] and rw.inferred_query == "something in foo_bar breaks"
    assert rw.keywords == ["foo_bar"]


def test_stub_backend_fields(trainer):
    rw = rewrite("resume is broken", Stub(), trainer)
    assert rw.entities == ["Trainer", "ml/model.py"]
    assert rw.keywords == ["resume"]
    assert rw.inferred_query == "restores model weights from disk"


def test_backend_failure_falls_back(trainer, caplog):
    issue = "load_checkpoint raises"
    rw = rewrite(issue, Broken(), trainer)
    assert rw.entities == rewrite(issue, graph=trainer).entities
    assert rw.inferred_query == issue
    assert len(rw.warnings) == 2 and "failed" in caplog.text


def test_empty_issue_rejected():
    with pytest.raises(ContractError):
        rewrite("   \n")


def test_render_is_single_pass():
    out = render("<{issue}> {files}", issue="{files}", files="F")
    assert out == "<{files}> F"
    assert "{issue}" in load_template("extractor")


# -- anchors and expansion -------------------------------------------------------


def test_entity_equal_to_function_name(trainer):
    a = match_anchors(trainer, RewriteResult(["accuracy"], [], "x"), top_k_semantic=0)
    assert a.extractor_anchors == ["function:ml/metrics.py:accuracy"]
    assert a.scores == {"function:ml/metrics.py:accuracy": 1.0}


def test_whole_token_matching(trainer):
    a = match_anchors(trainer, RewriteResult(["check"], ["point"], "x"), top_k_semantic=0)
    assert a.extractor_anchors == []
    a = match_anchors(trainer, RewriteResult(["checkpoint.py", "Trainer.fit"], [], "x"), top_k_semantic=0)
    assert a.extractor_anchors == ["file:ml/checkpoint.py", "function:ml/trainer.py:Trainer.fit"]


def test_query_equal_to_content_ranks_first(trainer):
    target = trainer.nodes["function:ml/data/loader.py:batches"]
    a = match_anchors(trainer, RewriteResult([], [], target.content), top_k_semantic=3)
    assert a.inferer_anchors[0] == target.id


def five_nodes():
    nodes = [
        node("repo", "", name="r"),
        node("file", "m.py", "def alpha():\n    pass\n\ndef beta():\n    pass\n", (1, 5)),
        node("function", "m.py:alpha", "def alpha():\n    pass\n", (1, 2), file_of="file:m.py"),
        node("function", "m.py:beta", "def beta():\n    pass\n", (4, 5), file_of="file:m.py"),
        node("textfile", "notes.txt", "alpha notes", (1, 1)),
    ]
    edges = [("repo:", "file:m.py", "contains"), ("repo:", "textfile:notes.txt", "contains"),
             ("file:m.py", "function:m.py:alpha", "contains"), ("file:m.py", "function:m.py:beta", "contains")]
    return graph(nodes, edges)


@pytest.mark.parametrize("query", ["def alpha", "notes about beta", "pass"])
def test_top_two_against_brute_force(query):
    g = five_nodes()
    emb = HashingEmbedder()
    sims = {nid: cosine(emb.embed(query), emb.embed(n.content)) for nid, n in g.nodes.items()}
    want = sorted(sims, key=lambda i: (-round(sims[i], 12), i))[:2]
    a = match_anchors(g, RewriteResult([], [], query), top_k_semantic=2)
    assert a.inferer_anchors == want
    for nid in want:
        assert a.scores[nid] == pytest.approx(sims[nid], abs=1e-12)


def test_embedding_backend_and_failure(trainer):
    vec = lambda t: [len(t) % 7, 1.0, 0.5]  # noqa: E731
    a = match_anchors(trainer, RewriteResult([], [], "q"), Stub(vector=vec), top_k_semantic=2)
    assert len(a.inferer_anchors) == 2 and a.warnings == []
    a = match_anchors(trainer, RewriteResult([], [], "q"), Broken(), top_k_semantic=2)
    assert len(a.inferer_anchors) == 2 and a.warnings


def test_function_anchor_expansion(trainer):
    sub = expand_subgraph(trainer, AnchorSet(["function:ml/checkpoint.py:load_checkpoint"], [], {}, []))
    p = sub.provenance
    assert p["function:ml/checkpoint.py:load_checkpoint"] == "extractor"
    # caller, importer and container one hop out
    assert p["function:ml/trainer.py:Trainer.resume"] == "one-hop"
    assert p["file:ml/trainer.py"] == "one-hop"
    assert p["file:ml/checkpoint.py"] == "one-hop"
    assert p["package:ml"] == p["repo:"] == "ancestor"
    assert p["function:ml/checkpoint.py:save_checkpoint"] == "file-expansion"
    assert "file:ml/model.py" not in p and "file:scripts/train.py" not in p


def test_root_anchor_is_root_only(trainer):
    sub = expand_subgraph(trainer, AnchorSet(["repo:"], [], {}, []))
    assert list(sub.graph.nodes) == ["repo:"]
    empty = expand_subgraph(trainer, AnchorSet([], [], {}, []))
    assert list(empty.graph.nodes) == ["repo:"] and empty.warnings


def check_retrieval_invariants(full, sub):
    g = sub.graph
    assert validate_graph(g) == []
    u = nx.Graph()
    u.add_nodes_from(g.nodes)
    u.add_edges_from((e.src, e.dst) for e in g.edges)
    assert nx.is_connected(u)
    for n in g.nodes.values():
        if n.kind in FILE_KINDS:
            assert set(descendants(full, n.id)) <= set(g.nodes)


@settings(max_examples=40)
@given(st.data())
def test_expansion_invariants(corpus_graphs, data):
    name = data.draw(st.sampled_from(["shapes", "nested", "cycles", "trainer", "synth10"]))
    g = corpus_graphs[name]
    ids = data.draw(st.lists(st.sampled_from(sorted(g.nodes)), min_size=1, max_size=4, unique=True))
    sub = expand_subgraph(g, AnchorSet(ids, [], {}, []))
    assert set(ids) <= set(sub.graph.nodes)
    check_retrieval_invariants(g, sub)


# -- skeleton --------------------------------------------------------------------


def skel(src, path="m.py"):
    g = build({path: src}).graph
    return skeleton(g, f"file:{path}").text


def test_skeleton_examples():
    assert skel("def f(x):\n    # note\n    return x\n") == "def f(x): ...\n"
    assert skel("") == ""
    assert skel("class A:\n    def a(self):\n        pass\n\n    def b(self):\n        pass\n") == (
        "class A: ...\n    def a(self): ...\n    def b(self): ...\n"
    )


def test_skeleton_multiline_signature():
    src = "def g(\n    a: int = 1,  # first\n    *rest,\n) -> list[int]:\n    return [a]\n"
    assert skel(src) == "def g(a: int = 1, *rest) -> list[int]: ...\n"


def test_skeleton_requires_file(trainer):
    with pytest.raises(ContractError):
        skeleton(trainer, "class:ml/model.py:Model")


def test_skeleton_shorter_than_file(corpus_graphs):
    for g in corpus_graphs.values():
        for f in g.nodes_of_kind(NodeKind.FILE):
            body = reassemble(g, f.id)
            if any(n.kind in (NodeKind.CLASS, NodeKind.FUNCTION) for n in g.nodes.values() if n.file_of == f.id):
                assert TOK.count(skeleton(g, f.id).text) < TOK.count(body), f.id


# -- rerank ----------------------------------------------------------------------


def many_files(n=12):
    files = {f"pkg/mod{i:02d}.py": f"def fn{i}(x):\n    return x + {i}\n" for i in range(n)}
    files["pkg/parser.py"] = "def parse_header(line):\n    return line.split(':')\n"
    return build(files).graph


def test_three_candidates_all_kept(trainer):
    c = ["file:ml/model.py", "file:ml/metrics.py", "file:ml/trainer.py"]
    r = rerank("the trainer forgets model weights", c, trainer)
    assert sorted(r.stage1) == sorted(c) and sorted(r.stage2) == sorted(c)
    assert r.stage1[:2] == ["file:ml/model.py", "file:ml/trainer.py"]


def test_single_overlapping_path_ranks_first():
    g = many_files()
    cands = sorted(n.id for n in g.files())
    r = rerank("crash while reading the parser output", cands, g)
    assert r.stage1[0] == "file:pkg/parser.py"
    assert r.stage1_scores["file:pkg/parser.py"] == 1.0
    assert sorted(r.stage1_scores.values())[:-1] == [0.0] * 9


def test_k_contract_and_determinism():
    g = many_files()
    cands = sorted(n.id for n in g.files())
    r = rerank("fn3 returns the wrong value", cands, g)
    assert len(r.stage1) == 10 and len(r.stage2) == 5
    assert set(r.stage2) <= set(r.stage1)
    assert r.stage2[0] == "file:pkg/mod03.py"
    again = rerank("fn3 returns the wrong value", list(reversed(cands)), g)
    assert (again.stage1, again.stage2) == (r.stage1, r.stage2)


def test_backend_rerank():
    g = many_files()
    cands = sorted(n.id for n in g.files())
    stub = Stub(stage1="pkg/mod05.py\npkg/mod01.py\nnot/a/file.py\n", score="SCORE: 4")
    r = rerank("issue", cands, g, stub)
    assert r.stage1[:2] == ["file:pkg/mod05.py", "file:pkg/mod01.py"]
    assert len(r.stage1) == 10 and len(r.stage2) == 5 and r.warnings == []
    # equal stage-2 scores fall back to path order
    assert r.stage2 == sorted(r.stage1, key=lambda f: g.nodes[f].qualified_path)[:5]


def test_backend_failure_in_rerank():
    g = many_files()
    cands = sorted(n.id for n in g.files())
    r = rerank("parser", cands, g, Broken())
    assert r.stage1 == rerank("parser", cands, g).stage1
    assert len(r.warnings) == 2


def test_rerank_errors(trainer):
    with pytest.raises(ContractError):
        rerank("x", [], trainer)
    with pytest.raises(ContractError):
        rerank("x", ["class:ml/model.py:Model"], trainer)


# -- reader ----------------------------------------------------------------------


def test_empty_selection_prompt(trainer):
    ri = assemble_reader_input(trainer, [], "It crashes.")
    assert "<issue>\nIt crashes.\n</issue>" in ri.prompt and "<file" not in ri.prompt


def test_selected_file_embedded_verbatim(corpus_files, corpus_graphs):
    g = corpus_graphs["trainer"]
    ri = assemble_reader_input(g, ["file:ml/checkpoint.py"], "issue")
    want = corpus_files["trainer"]["ml/checkpoint.py"]
    assert f'<file path="ml/checkpoint.py">\n{want}</file>\n' in ri.prompt


def test_mask_size(trainer):
    ri = assemble_reader_input(trainer, ["file:ml/model.py"], "issue")
    n = len(ri.chunked.chunks) + TOK.count(ri.prompt)
    assert ri.mask.allow.shape == (n, n)


def test_bad_selection_dropped(trainer):
    ri = assemble_reader_input(trainer, ["file:ml/model.py", "class:ml/model.py:Model", "file:zzz.py"], "i")
    assert ri.files == ["file:ml/model.py"] and len(ri.warnings) == 2


# -- pipeline --------------------------------------------------------------------


def test_pipeline_deterministic(corpus_graphs):
    g = corpus_graphs["trainer"]
    issue = "Trainer.resume in trainer.py loads the wrong checkpoint"
    a, b = run_pipeline(g, issue), run_pipeline(g, issue)
    assert a.reader.to_bytes() == b.reader.to_bytes()
    assert "file:ml/trainer.py" in a.subgraph.graph.nodes
    assert "file:ml/trainer.py" in a.reader.files
    json.loads(a.reader.to_bytes())


def test_pipeline_with_no_match(corpus_graphs):
    out = run_pipeline(corpus_graphs["shapes"], "zzz", top_k_semantic=0)
    assert list(out.subgraph.graph.nodes) == ["repo:"]
    assert out.rerank is not None and out.reader.files == []


# -- http backend ----------------------------------------------------------------


class _Handler(BaseHTTPRequestHandler):
    fail_first = 0

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        if type(self).fail_first > 0:
            type(self).fail_first -= 1
            self.send_response(500)
            self.end_headers()
            return
        if self.path == "/complete":
            doc = {"text": f"echo:{body['prompt']}:{self.headers.get('Authorization')}"}
        else:
            doc = {"vector": [1.0, float(len(body["text"]))]}
        data = json.dumps(doc).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    srv = HTTPServer(("127.0.0.1", 0), _Handler)
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    yield f"http://127.0.0.1:{srv.server_port}"
    srv.shutdown()
    srv.server_close()


def test_http_backend_round_trip(server):
    b = HttpBackend(server, token="tok")
    assert b.complete("hi") == "echo:hi:Bearer tok"
    assert b.embed("abc") == [1.0, 3.0]


def test_http_backend_retries_once(server):
    _Handler.fail_first = 1
    assert HttpBackend(server).complete("x") == "echo:x:None"
    _Handler.fail_first = 2
    with pytest.raises(BackendError):
        HttpBackend(server).complete("x")
    _Handler.fail_first = 0


def test_http_backend_from_env(monkeypatch):
    monkeypatch.delenv("CGM_BACKEND_URL", raising=False)
    assert HttpBackend.from_env() is None
    monkeypatch.setenv("CGM_BACKEND_URL", "http://h:1/")
    monkeypatch.setenv("CGM_BACKEND_TOKEN", "t")
    b = HttpBackend.from_env()
    assert (b.url, b.token) == ("http://h:1", "t")


def test_unreachable_backend_degrades(trainer):
    dead = HttpBackend("http://127.0.0.1:9", timeout=0.5)
    out = run_pipeline(trainer, "load_checkpoint is slow", backend=dead)
    assert out.rewrite.warnings and out.anchors.warnings and out.rerank.warnings
    offline = run_pipeline(trainer, "load_checkpoint is slow")
    assert out.reader.to_bytes() == offline.reader.to_bytes()


def test_hashing_embedder_unit_norm():
    v = HashingEmbedder().embed("some text")
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert not HashingEmbedder().embed("").any()
