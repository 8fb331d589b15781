"""Command-line entry point: ``cgm <subcommand> ...``.

Exit status is 0 on success, 1 on a contract error or invalid graph, 2 on an
I/O error and 64 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from cgm.attention import verify_locality
from cgm.builder import build_graph
from cgm.chunking import build_mask, chunk_graph, read_mask, write_mask
from cgm.config import Config, load_config
from cgm.errors import CGMError, ContractError
from cgm.fixtures import SINGLE_FILE, corpus, write_corpus, write_files
from cgm.graph import CodeGraph, assert_valid, dumps_graph, load_graph, validate_graph
from cgm.linearize import linearize, split_linearized
from cgm.metrics import edit_similarity, exact_match, file_recall
from cgm.rag.backend import BACKEND_TOKEN_ENV, BACKEND_URL_ENV, HttpBackend, ModelBackend
from cgm.rag.reader import assemble_reader_input
from cgm.rag.reranker import rerank
from cgm.rag.retriever import expand_subgraph, match_anchors
from cgm.rag.rewriter import rewrite
from cgm.rag.skeleton import skeleton
from cgm.samples import make_issuefix_sample, make_reconstruction_sample, sample_seed, sample_subgraph
from cgm.tokens import DEFAULT_TOKENIZER

EXIT_OK, EXIT_CONTRACT, EXIT_IO, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


# -- helpers ------------------------------------------------------------------


def _read_text(path: str) -> str:
    with open(path, encoding="utf-8", newline="") as fh:
        return fh.read()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="")


def _graph(path: str) -> CodeGraph:
    """Load a graph file and refuse it unless it validates."""
    g = load_graph(path)
    assert_valid(g)
    return g


def _list_file(path: str) -> list[str]:
    return [line.strip() for line in _read_text(path).splitlines() if line.strip()]


def _file_ids(graph: CodeGraph, entries: Sequence[str]) -> list[str]:
    """Map entries given as file ids or file paths to file ids."""
    ids = []
    for e in entries:
        node = graph.nodes.get(e)
        ids.append(node.id if node is not None else graph.file_by_path(e).id)
    return ids


def _issue(path: str) -> str:
    text = _read_text(path)
    if not text.strip():
        raise ContractError(f"{path}: issue text is empty")
    return text


def _backend(cfg: Config) -> ModelBackend | None:
    url = cfg.backend_url or os.environ.get(BACKEND_URL_ENV)
    return HttpBackend(url, os.environ.get(BACKEND_TOKEN_ENV)) if url else None


def _json(doc) -> str:
    return json.dumps(doc, indent=1, ensure_ascii=True) + "\n"


# -- subcommands --------------------------------------------------------------


def cmd_build(args, cfg: Config) -> int:
    if not Path(args.repo).is_dir():
        raise FileNotFoundError(f"{args.repo}: not a directory")
    result = build_graph(args.repo, subject_language=args.language)
    assert_valid(result.graph)
    Path(args.out).write_text(dumps_graph(result.graph), encoding="ascii")
    lines = "".join(f"{w}\n" for w in result.warnings)
    if args.warnings:
        Path(args.warnings).write_text(lines, encoding="utf-8")
    elif lines:
        sys.stderr.write(lines)
    return EXIT_OK


def cmd_validate(args, cfg: Config) -> int:
    report = validate_graph(load_graph(args.graph))
    sys.stdout.write("".join(f"{v}\n" for v in report))
    return EXIT_CONTRACT if report else EXIT_OK


def cmd_chunk(args, cfg: Config) -> int:
    cg = chunk_graph(_graph(args.graph), DEFAULT_TOKENIZER, cfg.chunk_size)
    _emit(_json(cg.to_dict()), args.out)
    return EXIT_OK


def cmd_mask(args, cfg: Config) -> int:
    if args.text_tokens < 0:
        raise ContractError("--text-tokens must be >= 0")
    cg = chunk_graph(_graph(args.graph), DEFAULT_TOKENIZER, cfg.chunk_size)
    write_mask(build_mask(cg, args.text_tokens), args.out)
    return EXIT_OK


def cmd_simulate_attention(args, cfg: Config) -> int:
    mask = read_mask(args.mask)
    if args.dim < 1:
        raise ContractError("--dim must be >= 1")
    emb = np.random.default_rng(cfg.seed).uniform(-1.0, 1.0, size=(mask.n, args.dim))
    report = verify_locality(emb, mask, step=args.step, threshold=args.threshold)
    print(report)
    for i, j, what in report.violations[:20]:
        print(f"  ({i}, {j}) {what}")
    return EXIT_OK if report.passed else EXIT_CONTRACT


def cmd_linearize(args, cfg: Config) -> int:
    text = linearize(_graph(args.graph))
    _emit(text, args.out)
    if args.split_dir:
        _, files = split_linearized(text)
        write_files(files, args.split_dir)
    return EXIT_OK


def cmd_sample(args, cfg: Config) -> int:
    sub = sample_subgraph(_graph(args.graph), cfg.recon_budget, sample_seed(cfg.seed, args.index))
    Path(args.out).write_text(dumps_graph(sub), encoding="ascii")
    print(f"nodes={len(sub.nodes)} tokens={DEFAULT_TOKENIZER.count(linearize(sub))}")
    return EXIT_OK


def _synthetic_task(graph: CodeGraph, seed: str) -> tuple[str, list[str], str]:
    rng = random.Random(seed)
    files = sorted(n.id for n in graph.files(include_text=False))
    if not files:
        raise ContractError("graph has no source files to build issue-fix tasks from")
    oracle = rng.sample(files, k=min(len(files), rng.randint(1, 2)))
    paths = [graph.nodes[f].qualified_path for f in oracle]
    issue = "Unexpected behaviour in " + " and ".join(paths) + ".\n"
    patch = "".join(f"--- a/{p}\n+++ b/{p}\n" for p in paths)
    return issue, oracle, patch


def cmd_dataset_gen(args, cfg: Config) -> int:
    graph = _graph(args.graph)
    if args.count < 0:
        raise ContractError("--count must be >= 0")
    tasks = None
    if args.tasks:
        try:
            tasks = [json.loads(line) for line in _read_text(args.tasks).splitlines() if line.strip()]
        except json.JSONDecodeError as exc:
            raise ContractError(f"{args.tasks}: not JSON lines ({exc})") from exc
        if not tasks:
            raise ContractError(f"{args.tasks}: no tasks")
    lines = []
    for i in range(args.count):
        seed = sample_seed(cfg.seed, i)
        if args.mode == "recon":
            sample = make_reconstruction_sample(graph, cfg.recon_budget, seed)
        else:
            if tasks is None:
                issue, oracle, patch = _synthetic_task(graph, f"task:{seed}")
            else:
                task = tasks[i % len(tasks)]
                try:
                    issue, patch = task["issue"], task["patch"]
                    oracle = _file_ids(graph, task["oracle_files"])
                except (KeyError, TypeError) as exc:
                    raise ContractError(f"malformed task record {i % len(tasks)}: {exc}") from exc
            sample = make_issuefix_sample(graph, oracle, issue, patch, seed, cfg.p_add, cfg.p_omit)
        lines.append(sample.to_json(graph_ref=args.graph) + "\n")
    _emit("".join(lines), args.out)
    return EXIT_OK


def cmd_rewrite(args, cfg: Config) -> int:
    rw = rewrite(_issue(args.issue), _backend(cfg), _graph(args.graph))
    doc = {"entities": rw.entities, "keywords": rw.keywords, "inferred_query": rw.inferred_query}
    _emit(_json(doc), args.out)
    return EXIT_OK


def cmd_retrieve(args, cfg: Config) -> int:
    graph = _graph(args.graph)
    backend = _backend(cfg)
    rw = rewrite(_issue(args.issue), backend, graph)
    anchors = match_anchors(graph, rw, backend, cfg.top_k_semantic)
    sub = expand_subgraph(graph, anchors)
    assert_valid(sub.graph)
    Path(args.out).write_text(sub.dumps(), encoding="ascii")
    return EXIT_OK


def cmd_rerank(args, cfg: Config) -> int:
    graph = _graph(args.graph)
    if args.candidates:
        candidates = _file_ids(graph, _list_file(args.candidates))
    else:
        candidates = sorted(n.id for n in graph.files())
    result = rerank(_issue(args.issue), candidates, graph, _backend(cfg), cfg.rerank_k1, cfg.rerank_k2)
    chosen = result.stage1 if args.stage1 else result.stage2
    _emit("".join(graph.nodes[f].qualified_path + "\n" for f in chosen), args.out)
    return EXIT_OK


def cmd_skeleton(args, cfg: Config) -> int:
    graph = _graph(args.graph)
    (fid,) = _file_ids(graph, [args.file])
    _emit(skeleton(graph, fid).text, args.out)
    return EXIT_OK


def cmd_reader_input(args, cfg: Config) -> int:
    graph = _graph(args.graph)
    entries = _list_file(args.files) if args.files else []
    selected = [e if e in graph.nodes else _path_or_keep(graph, e) for e in entries]
    reader = assemble_reader_input(graph, selected, _issue(args.issue), DEFAULT_TOKENIZER, cfg.chunk_size)
    Path(args.out).write_bytes(reader.to_bytes())
    if args.mask_out:
        write_mask(reader.mask, args.mask_out)
    return EXIT_OK


def _path_or_keep(graph: CodeGraph, entry: str) -> str:
    # unknown entries are passed through so the reader can warn and drop them
    for n in graph.files():
        if n.qualified_path == entry:
            return n.id
    return entry


def cmd_eval(args, cfg: Config) -> int:
    if args.metric == "recall":
        score = file_recall(_list_file(args.pred), _list_file(args.ref))
        print(format(score, ".10g"))
    elif args.metric == "em":
        print(exact_match(_read_text(args.pred), _read_text(args.ref)))
    else:
        print(format(edit_similarity(_read_text(args.pred), _read_text(args.ref)), ".10g"))
    return EXIT_OK


def cmd_fixtures(args, cfg: Config) -> int:
    if args.name is None:
        for path in write_corpus(args.out):
            print(path)
        return EXIT_OK
    repos = dict(corpus(), single=SINGLE_FILE)
    if args.name not in repos:
        raise ContractError(f"unknown fixture {args.name!r}; choose from {', '.join(sorted(repos))}")
    print(write_files(repos[args.name], args.out))
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    # SUPPRESS keeps subparser defaults from clobbering values given earlier
    p = argparse.ArgumentParser(add_help=False)
    s = argparse.SUPPRESS
    p.add_argument("--config", default=s, help="JSON config file")
    p.add_argument("--print-config", action="store_true", default=s, help="print the effective config and exit")
    p.add_argument("--seed", type=int, default=s)
    p.add_argument("--chunk-size", type=int, default=s)
    p.add_argument("--budget", dest="recon_budget", type=int, default=s)
    p.add_argument("--p-add", type=float, default=s)
    p.add_argument("--p-omit", type=float, default=s)
    p.add_argument("--k1", dest="rerank_k1", type=int, default=s)
    p.add_argument("--k2", dest="rerank_k2", type=int, default=s)
    p.add_argument("--top-k-semantic", type=int, default=s)
    p.add_argument("--backend", dest="backend_url", default=s, help="model backend base URL")
    p.add_argument("-v", "--verbose", action="store_true", default=s)
    return p


_CONFIG_KEYS = ("seed", "chunk_size", "recon_budget", "p_add", "p_omit", "rerank_k1", "rerank_k2",
                "top_k_semantic", "backend_url")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="cgm", description="Code graph toolkit.", parents=[common])
    sub = parser.add_subparsers(dest="command", metavar="<command>", parser_class=_Parser)

    def add(name: str, func: Callable, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_, parents=[common])
        p.set_defaults(func=func)
        return p

    p = add("build", cmd_build, "build a code graph from a repository directory")
    p.add_argument("--repo", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--warnings")
    p.add_argument("--language", default="python")

    p = add("validate", cmd_validate, "check a graph file and list violations")
    p.add_argument("--graph", required=True)

    p = add("chunk", cmd_chunk, "split graph nodes into chunk positions")
    p.add_argument("--graph", required=True)
    p.add_argument("--out")

    p = add("mask", cmd_mask, "write the attention mask for a graph plus text tokens")
    p.add_argument("--graph", required=True)
    p.add_argument("--text-tokens", type=int, required=True)
    p.add_argument("--out", required=True)

    p = add("simulate-attention", cmd_simulate_attention, "check mask locality numerically")
    p.add_argument("--mask", required=True)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--threshold", type=float, default=1e-9)

    p = add("linearize", cmd_linearize, "print a graph as source text")
    p.add_argument("--graph", required=True)
    p.add_argument("--out")
    p.add_argument("--split-dir", help="also write the recovered files under this directory")

    p = add("sample", cmd_sample, "sample a token-budgeted subgraph")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--index", type=int, default=0, help="sample index under the run seed")

    p = add("dataset-gen", cmd_dataset_gen, "generate training samples as JSON lines")
    p.add_argument("--graph", required=True)
    p.add_argument("--mode", choices=("recon", "issuefix"), required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--tasks", help="JSON lines of {issue, patch, oracle_files}")

    p = add("rewrite", cmd_rewrite, "extract entities, keywords and a query from an issue")
    p.add_argument("--graph", required=True)
    p.add_argument("--issue", required=True)
    p.add_argument("--out")

    p = add("retrieve", cmd_retrieve, "retrieve the subgraph relevant to an issue")
    p.add_argument("--graph", required=True)
    p.add_argument("--issue", required=True)
    p.add_argument("--out", required=True)

    p = add("rerank", cmd_rerank, "pick the files most likely to need edits")
    p.add_argument("--graph", required=True)
    p.add_argument("--issue", required=True)
    p.add_argument("--candidates", help="file with one file path or id per line (default: all files)")
    p.add_argument("--stage1", action="store_true", help="print the first-stage list instead")
    p.add_argument("--out")

    p = add("skeleton", cmd_skeleton, "print a file's declaration skeleton")
    p.add_argument("--graph", required=True)
    p.add_argument("--file", required=True, help="file path or id")
    p.add_argument("--out")

    p = add("reader-input", cmd_reader_input, "assemble node tokens, prompt and mask")
    p.add_argument("--graph", required=True)
    p.add_argument("--issue", required=True)
    p.add_argument("--files", help="file with one selected file path or id per line")
    p.add_argument("--out", required=True)
    p.add_argument("--mask-out")

    p = add("eval", cmd_eval, "score a prediction against a reference")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--metric", choices=("em", "es", "recall"), required=True)

    p = add("fixtures", cmd_fixtures, "write the bundled fixture repositories")
    p.add_argument("--out", required=True)
    p.add_argument("--name", help="write only this fixture")
    return parser


def _print_config(argv: list[str]) -> int:
    common = _common()
    common.error = _Parser.error.__get__(common)  # type: ignore[method-assign]
    try:
        args, _ = common.parse_known_args(argv)
        overrides = {k: getattr(args, k) for k in _CONFIG_KEYS if hasattr(args, k)}
        sys.stdout.write(load_config(getattr(args, "config", None), overrides).dumps())
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except CGMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except (OSError, UnicodeDecodeError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--print-config" in argv:
        # report the effective config without requiring subcommand arguments
        return _print_config(argv)
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        overrides = {k: getattr(args, k) for k in _CONFIG_KEYS if hasattr(args, k)}
        cfg = load_config(getattr(args, "config", None), overrides)
        if getattr(args, "func", None) is None:
            parser.print_usage(sys.stderr)
            print("cgm: a subcommand is required", file=sys.stderr)
            return EXIT_USAGE
        return args.func(args, cfg)
    except CGMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except (OSError, UnicodeDecodeError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
