"""Turn a graph back into source text, then cut token-budgeted subgraphs out
of a larger repository for reconstruction training.

Run: python demos/03_linearize_and_sample.py
"""

from cgm import build_graph
from cgm.fixtures import LARGEST, corpus, fixture_tree
from cgm.linearize import linearize, split_linearized, topo_sort_files
from cgm.samples import make_reconstruction_sample, sample_seed
from cgm.tokens import DEFAULT_TOKENIZER as tok

g = build_graph(fixture_tree("trainer")).graph
print("file order (imports first):")
for fid in topo_sort_files(g):
    print("  ", g.nodes[fid].qualified_path)

text = linearize(g)
print("\n" + "\n".join(text.splitlines()[:12]) + "\n...")

_, files = split_linearized(text)
same = all(files[p] == src for p, src in corpus()["trainer"].items())
print(f"\nevery file recovered byte for byte: {same}")

big = build_graph(fixture_tree(LARGEST)).graph
print(f"\n{LARGEST}: {tok.count(linearize(big))} tokens in total")
for i in range(3):
    s = make_reconstruction_sample(big, budget=8000, seed=sample_seed(0, i))
    print(f"  sample {i}: {len(s.input_graph.nodes):3d} nodes, {tok.count(s.target)} tokens")
