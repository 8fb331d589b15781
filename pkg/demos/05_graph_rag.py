"""Walk an issue through retrieval: rewrite, anchor, expand, rerank, and
assemble the reader input. No model backend is configured, so every stage
uses its offline fallback.

Run: python demos/05_graph_rag.py
"""

from cgm import build_graph
from cgm.fixtures import fixture_tree
from cgm.rag import run_pipeline, skeleton

g = build_graph(fixture_tree("trainer")).graph
issue = "After save_checkpoint runs, Trainer.resume in trainer.py loads stale weights."

out = run_pipeline(g, issue)
print("entities:", out.rewrite.entities)
print("keywords:", out.rewrite.keywords)
print("string anchors:", out.anchors.extractor_anchors)
print("semantic anchors:", out.anchors.inferer_anchors)

print(f"\nretrieved subgraph: {len(out.subgraph.graph.nodes)} of {len(g.nodes)} nodes")
for nid, why in out.subgraph.provenance.items():
    print(f"  {why:15s} {nid}")

print("\nstage 1:", [g.nodes[f].qualified_path for f in out.rerank.stage1])
print("stage 2:", [g.nodes[f].qualified_path for f in out.rerank.stage2])
print("\nskeleton of ml/trainer.py:")
print(skeleton(g, "file:ml/trainer.py").text)

r = out.reader
print(f"reader input: {len(r.chunked.chunks)} node tokens + {r.mask.text_count} text tokens")
