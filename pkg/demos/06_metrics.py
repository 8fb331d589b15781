"""Score predictions with exact match, edit similarity and file recall.

Run: python demos/06_metrics.py
"""

from cgm.metrics import edit_similarity, exact_match, file_recall

pairs = [
    ("return x + 1\n", "return x + 1"),
    ("kitten", "sitting"),
    ("def f(a, b):", "def f(a, c):"),
    ("", "abc"),
]
for pred, ref in pairs:
    print(f"{pred!r:18} vs {ref!r:18} EM={exact_match(pred, ref)} ES={edit_similarity(pred, ref):.4f}")

print("\nrecall:", file_recall({"a.py", "c.py", "x.py"}, {"a.py", "b.py", "c.py"}))
