"""Training-sample generation.

Two kinds of sample are produced:

* ``reconstruction``: a token-budgeted random subgraph paired with its
  linearized text (graph-to-code pre-training).
* ``issuefix``: the subgraph around a set of oracle files, a prompt naming
  the files to edit (with controlled noise) and the reference patch.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Sequence

from cgm.errors import ContractError
from cgm.graph import (
    CodeGraph,
    FILE_KINDS,
    NodeKind,
    downstream_closure,
    induce_subgraph,
    neighbors,
)
from cgm.linearize import linearize
from cgm.text import indent_of, placeholder
from cgm.tokens import DEFAULT_TOKENIZER, Tokenizer

DEFAULT_BUDGET = 8000
DEFAULT_P_ADD = 0.10
DEFAULT_P_OMIT = 0.10


@dataclass
class TrainingSample:
    kind: str  # "reconstruction" or "issuefix"
    input_graph: CodeGraph
    target: str
    prompt: str = ""
    noise_flags: dict[str, bool] = field(default_factory=lambda: {"added_irrelevant": False, "omitted_oracle": False})
    prompt_files: list[str] = field(default_factory=list)

    def to_record(self, graph_ref: str = "") -> dict[str, Any]:
        return {
            "kind": self.kind,
            "prompt": self.prompt,
            "target": self.target,
            "noise_flags": dict(self.noise_flags),
            "subgraph_ref": {"graph": graph_ref, "nodes": sorted(self.input_graph.nodes)},
        }

    def to_json(self, graph_ref: str = "") -> str:
        return json.dumps(self.to_record(graph_ref), sort_keys=False, ensure_ascii=True)


def sample_seed(seed: int, index: int) -> str:
    """Per-sample seed for sample ``index`` of a run seeded with ``seed``."""
    return f"{seed}:{index}"


# -- subgraph sampling --------------------------------------------------------


class _CostModel:
    """Approximate token cost of linearizing a growing node set.

    Adding a node contributes its own text, minus the placeholder line it
    replaces in its parent, plus a header or banner line for virtual and file
    nodes.  The estimate guides growth; the final size is checked exactly.
    """

    def __init__(self, graph: CodeGraph, tok: Tokenizer):
        self.graph = graph
        self.tok = tok
        self._cache: dict[str, int] = {}

    def cost(self, nid: str) -> int:
        if nid not in self._cache:
            n = self.graph.nodes[nid]
            tok = self.tok
            if n.kind is NodeKind.REPO:
                c = tok.count(f"# <REPO:{n.name}>\n")
            elif n.kind is NodeKind.PACKAGE:
                c = tok.count(f"# <PACKAGE:{n.qualified_path}>\n")
            elif n.kind in FILE_KINDS:
                c = tok.count(f"# <FILE-NOEOL:{n.qualified_path}>\n") + tok.count(n.content) + 1
            else:
                ph = placeholder(nid, indent_of(n.content))
                c = max(0, tok.count(n.content) - tok.count(ph)) + 1
            self._cache[nid] = c
        return self._cache[nid]


def sample_subgraph(
    graph: CodeGraph,
    budget: int = DEFAULT_BUDGET,
    seed: int | str = 0,
    tokenizer: Tokenizer | None = None,
) -> CodeGraph:
    """Grow a connected subgraph breadth-first from a random anchor.

    Growth follows edges of every kind in both directions and stops at the
    first node whose addition would exceed ``budget`` tokens of linearized
    text.  The returned graph always fits the budget.
    """
    tok = tokenizer or DEFAULT_TOKENIZER
    if tok.count(linearize(graph)) <= budget:
        return graph
    rng = random.Random(seed)
    candidates = sorted(graph.nodes)
    rng.shuffle(candidates)
    costs = _CostModel(graph, tok)
    for anchor in candidates:
        chain = [anchor, *graph.ancestors(anchor)]
        total = sum(costs.cost(n) for n in chain)
        if total > budget:
            continue
        selected = set(chain)
        groups: list[list[str]] = [chain]
        queue = deque(chain)
        full = False
        while queue and not full:
            u = queue.popleft()
            for v in neighbors(graph, u, "both"):
                if v in selected:
                    continue
                new = [v] + [a for a in graph.ancestors(v) if a not in selected]
                delta = sum(costs.cost(n) for n in new)
                if total + delta > budget:
                    full = True
                    break
                selected.update(new)
                groups.append(new)
                total += delta
                queue.extend(new)
        sub = induce_subgraph(graph, selected)
        # the cost model is an estimate; trim whole growth steps until exact
        while tok.count(linearize(sub)) > budget and len(groups) > 1:
            selected.difference_update(groups.pop())
            sub = induce_subgraph(graph, selected)
        if tok.count(linearize(sub)) <= budget:
            return sub
    raise ContractError(f"budget {budget} admits no node together with its ancestor chain")


def make_reconstruction_sample(
    graph: CodeGraph,
    budget: int = DEFAULT_BUDGET,
    seed: int | str = 0,
    tokenizer: Tokenizer | None = None,
) -> TrainingSample:
    sub = sample_subgraph(graph, budget, seed, tokenizer)
    return TrainingSample("reconstruction", sub, linearize(sub))


# -- issue-fix samples --------------------------------------------------------


def issuefix_subgraph(graph: CodeGraph, oracle_files: Sequence[str]) -> CodeGraph:
    """Oracle files, everything inside them, and their one-hop neighbours."""
    keep = downstream_closure(graph, oracle_files)
    for fid in oracle_files:
        keep.update(neighbors(graph, fid, "both"))
    return induce_subgraph(graph, keep)


def render_issuefix_prompt(issue_text: str, paths: Sequence[str]) -> str:
    listed = "".join(f"- {p}\n" for p in paths) or "(none given)\n"
    return f"<issue>\n{issue_text.rstrip()}\n</issue>\nFiles to modify:\n{listed}"


def make_issuefix_sample(
    graph: CodeGraph,
    oracle_files: Sequence[str],
    issue_text: str,
    patch_text: str,
    seed: int | str = 0,
    p_add: float = DEFAULT_P_ADD,
    p_omit: float = DEFAULT_P_OMIT,
) -> TrainingSample:
    """Issue-fix sample with prompt noise.

    With probability ``p_add`` one uniformly chosen non-oracle FILE is added to
    the prompt; independently, with probability ``p_omit`` one oracle file is
    dropped from it (even when it is the only one).  The subgraph is never
    affected by the noise.
    """
    if not oracle_files:
        raise ContractError("oracle_files must be nonempty")
    if not (0.0 <= p_add <= 1.0 and 0.0 <= p_omit <= 1.0):
        raise ContractError("probabilities must lie in [0, 1]")
    oracle = list(dict.fromkeys(oracle_files))
    for fid in oracle:
        if graph.node(fid).kind not in FILE_KINDS:
            raise ContractError(f"{fid} is not a file node")
    rng = random.Random(seed)
    # fixed draw order keeps samples reproducible whatever the probabilities
    u_add, u_omit = rng.random(), rng.random()
    paths = [graph.nodes[f].qualified_path for f in oracle]
    added = omitted = False
    if u_omit < p_omit:
        paths.pop(rng.randrange(len(paths)))
        omitted = True
    if u_add < p_add:
        others = sorted(n.qualified_path for n in graph.nodes_of_kind(NodeKind.FILE) if n.id not in oracle)
        if others:
            paths.insert(rng.randrange(len(paths) + 1), rng.choice(others))
            added = True
    return TrainingSample(
        kind="issuefix",
        input_graph=issuefix_subgraph(graph, oracle),
        target=patch_text,
        prompt=render_issuefix_prompt(issue_text, paths),
        noise_flags={"added_irrelevant": added, "omitted_oracle": omitted},
        prompt_files=paths,
    )
