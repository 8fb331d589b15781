"""Generate issue-fix samples whose file lists are deliberately noisy.

Run: python demos/04_issuefix_samples.py
"""

from cgm import build_graph
from cgm.fixtures import fixture_tree
from cgm.samples import make_issuefix_sample, sample_seed

g = build_graph(fixture_tree("trainer")).graph
oracle = ["file:ml/trainer.py", "file:ml/checkpoint.py"]
issue = "Trainer.resume ignores the path given to the constructor."
patch = "--- a/ml/trainer.py\n+++ b/ml/trainer.py\n"

s = make_issuefix_sample(g, oracle, issue, patch, seed=sample_seed(0, 0))
print(s.prompt)
print("subgraph nodes:", len(s.input_graph.nodes))

# About one sample in ten names an extra file and about one in ten drops one.
n = 2000
flags = [make_issuefix_sample(g, oracle, issue, patch, seed=sample_seed(1, i)).noise_flags for i in range(n)]
print(f"added irrelevant file: {sum(f['added_irrelevant'] for f in flags) / n:.3f}")
print(f"omitted oracle file:   {sum(f['omitted_oracle'] for f in flags) / n:.3f}")
