"""Build a code graph for a small shapes package and look at what came out.

Run: python demos/01_build_graph.py
"""

from collections import Counter

from cgm import build_graph
from cgm.fixtures import fixture_tree
from cgm.graph import EdgeKind, validate_graph

result = build_graph(fixture_tree("shapes"))
g = result.graph

print("nodes by kind:", dict(Counter(n.kind.value for n in g.nodes.values())))
print("edges by kind:", dict(Counter(e.kind.value for e in g.edges)))
print("validation problems:", validate_graph(g))

# `total(s: Shape)` calls `s.area()`. Statically the receiver could be any
# Shape subclass, so the call fans out to every override.
caller = "function:shapes/report.py:total"
print(f"\n{caller} may call:")
for e in sorted(g.edges, key=lambda e: e.dst):
    if e.src == caller and e.kind is EdgeKind.CALLS:
        print("  ", e.dst)

print("\nbuilder warnings:", result.warnings or "none")
