"""Deterministic fixture repositories.

The corpus has ten small repositories of 3 to 40 files, each planting a
situation the builder and the pipeline must handle: base/override dispatch,
import cycles and recursion, multiple inheritance, nested packages with
relative imports, awkward text (CRLF, missing final newline, non-UTF-8 bytes,
syntax errors, one-liners) and synthetic repositories of growing size.
"""

from __future__ import annotations

import random
from pathlib import Path
from typing import Mapping

from cgm.builder import SourceTree

Files = dict[str, "str | bytes"]

# calls out of ``shapes/report.py:total`` under class-hierarchy over-approximation
SHAPES_EXPECTED_CALLS = frozenset({
    "function:shapes/base.py:Shape.area",
    "function:shapes/circle.py:Circle.area",
    "function:shapes/square.py:Square.area",
    "function:shapes/square.py:UnitSquare.area",
})

SINGLE_FILE = {
    "main.py": (
        "import sys\n"
        "\n"
        "\n"
        "def greet(name):\n"
        "    return f\"hello {name}\"\n"
        "\n"
        "\n"
        "def main(argv=None):\n"
        "    args = sys.argv[1:] if argv is None else argv\n"
        "    for name in args:\n"
        "        print(greet(name))\n"
        "\n"
        "\n"
        "if __name__ == \"__main__\":\n"
        "    main()\n"
    ),
}


def _shapes() -> Files:
    return {
        "shapes/__init__.py": "from shapes.base import Shape\n",
        "shapes/base.py": (
            "class Shape:\n"
            "    \"\"\"Abstract plane figure.\"\"\"\n"
            "\n"
            "    def area(self):\n"
            "        raise NotImplementedError\n"
            "\n"
            "    def describe(self):\n"
            "        return f\"{type(self).__name__} of area {self.area()}\"\n"
        ),
        "shapes/circle.py": (
            "import math\n"
            "\n"
            "from shapes.base import Shape\n"
            "\n"
            "\n"
            "class Circle(Shape):\n"
            "    def __init__(self, r):\n"
            "        self.r = r\n"
            "\n"
            "    def area(self):\n"
            "        return math.pi * self.r ** 2\n"
        ),
        "shapes/square.py": (
            "from shapes.base import Shape\n"
            "\n"
            "\n"
            "class Square(Shape):\n"
            "    def __init__(self, side):\n"
            "        self.side = side\n"
            "\n"
            "    def area(self):\n"
            "        return self.side * self.side\n"
            "\n"
            "\n"
            "class UnitSquare(Square):\n"
            "    def __init__(self):\n"
            "        super().__init__(1)\n"
            "\n"
            "    def area(self):\n"
            "        return 1\n"
        ),
        "shapes/blob.py": (
            "from shapes.base import Shape\n"
            "\n"
            "\n"
            "class Blob(Shape):\n"
            "    \"\"\"Inherits area unchanged.\"\"\"\n"
            "\n"
            "    def wobble(self):\n"
            "        return 0\n"
        ),
        "shapes/report.py": (
            "from shapes.base import Shape\n"
            "\n"
            "\n"
            "def total(s: Shape):\n"
            "    return s.area()\n"
            "\n"
            "\n"
            "def report(items):\n"
            "    return sum(total(s) for s in items)\n"
        ),
    }


def _cycles() -> Files:
    return {
        "loop/__init__.py": "",
        "loop/a.py": (
            "from loop import b\n"
            "\n"
            "\n"
            "def fact(n):\n"
            "    return 1 if n <= 1 else n * fact(n - 1)\n"
            "\n"
            "\n"
            "def is_even(n):\n"
            "    return True if n == 0 else b.is_odd(n - 1)\n"
        ),
        "loop/b.py": (
            "from loop import c\n"
            "from loop.a import is_even\n"
            "\n"
            "\n"
            "def is_odd(n):\n"
            "    return False if n == 0 else is_even(n - 1)\n"
            "\n"
            "\n"
            "def ping():\n"
            "    return c.pong()\n"
        ),
        "loop/c.py": (
            "from loop import a\n"
            "\n"
            "\n"
            "def pong():\n"
            "    return a.fact(3)\n"
        ),
        "loop/d.py": (
            "from loop.c import pong\n"
            "\n"
            "\n"
            "def run():\n"
            "    return pong()\n"
        ),
    }


def _diamond() -> Files:
    return {
        "diamond/__init__.py": "",
        "diamond/base.py": (
            "class A:\n"
            "    def who(self):\n"
            "        return \"A\"\n"
            "\n"
            "    def hello(self):\n"
            "        return \"hello from \" + self.who()\n"
        ),
        "diamond/mid.py": (
            "from diamond.base import A\n"
            "\n"
            "\n"
            "class B(A):\n"
            "    def who(self):\n"
            "        return \"B\"\n"
            "\n"
            "\n"
            "class C(A):\n"
            "    def who(self):\n"
            "        return \"C\"\n"
            "\n"
            "    def extra(self):\n"
            "        return 3\n"
        ),
        "diamond/leaf.py": (
            "from diamond.mid import B, C\n"
            "\n"
            "\n"
            "class D(B, C):\n"
            "    def both(self):\n"
            "        return self.who() + str(self.extra())\n"
            "\n"
            "\n"
            "def make():\n"
            "    d = D()\n"
            "    return d.hello()\n"
        ),
    }


def _nested() -> Files:
    return {
        "app/__init__.py": "",
        "app/util.py": (
            "def helper(x):\n"
            "    return x * 2\n"
            "\n"
            "\n"
            "VERSION = \"1.0\"\n"
        ),
        "app/core/__init__.py": "from .engine import Engine\n",
        "app/core/engine.py": (
            "from ..util import helper\n"
            "from .parts import gear\n"
            "\n"
            "\n"
            "class Engine:\n"
            "    def start(self):\n"
            "        return helper(gear.turn())\n"
        ),
        "app/core/parts/__init__.py": "",
        "app/core/parts/gear.py": (
            "from ... import util\n"
            "\n"
            "\n"
            "def turn():\n"
            "    return util.helper(1)\n"
        ),
        "app/cli.py": (
            "from app.core import Engine\n"
            "\n"
            "\n"
            "def main():\n"
            "    return Engine().start()\n"
        ),
    }


def _texty() -> Files:
    return {
        "README.md": "# Texty\n\nA repository full of awkward text.\n",
        "notes.txt": "no trailing newline here",
        "data/config.toml": "[tool]\nname = \"texty\"\r\n",
        "latin.txt": "caf\xe9\n".encode("latin-1"),
        "crlf.py": "def crlf():\r\n    return 1\r\n\r\n\r\nclass K:\r\n    x = 1\r\n",
        "noeol.py": "def tail():\n    return 'eof'",
        "unicode_mod.py": (
            "# -*- coding: utf-8 -*-\n"
            "GREETING = \"h\u00e9llo w\u00f6rld \u2603\"\n"
            "\n"
            "\n"
            "def \u00e9t\u00e9(x):\n"
            "    \"\"\"\u65e5\u672c\u8a9e docstring\"\"\"\n"
            "    return x\n"
        ),
        "broken.py": "def oops(:\n    pass\n",
        "oneliners.py": (
            "def one(): return 1\n"
            "a = 1; b = 2\n"
            "class Tiny: pass\n"
            "def two():\n"
            "    return one() + one()\n"
        ),
        "empty.py": "",
    }


def _trainer() -> Files:
    return {
        "ml/__init__.py": "",
        "ml/trainer.py": (
            "from ml.checkpoint import load_checkpoint, save_checkpoint\n"
            "from ml.model import Model\n"
            "\n"
            "\n"
            "class Trainer:\n"
            "    def __init__(self, model: Model, path):\n"
            "        self.model = model\n"
            "        self.path = path\n"
            "\n"
            "    def resume(self):\n"
            "        self.model.weights = load_checkpoint(self.path)\n"
            "\n"
            "    def fit(self, batches):\n"
            "        for batch in batches:\n"
            "            self.model.step(batch)\n"
            "        save_checkpoint(self.path, self.model.weights)\n"
        ),
        "ml/checkpoint.py": (
            "import json\n"
            "\n"
            "\n"
            "def load_checkpoint(path):\n"
            "    with open(path) as fh:\n"
            "        return json.load(fh)\n"
            "\n"
            "\n"
            "def save_checkpoint(path, weights):\n"
            "    with open(path, \"w\") as fh:\n"
            "        json.dump(weights, fh)\n"
        ),
        "ml/model.py": (
            "class Model:\n"
            "    def __init__(self):\n"
            "        self.weights = []\n"
            "\n"
            "    def step(self, batch):\n"
            "        self.weights.append(sum(batch))\n"
        ),
        "ml/metrics.py": (
            "def accuracy(pred, gold):\n"
            "    hits = sum(p == g for p, g in zip(pred, gold))\n"
            "    return hits / max(1, len(gold))\n"
        ),
        "ml/data/__init__.py": "",
        "ml/data/loader.py": (
            "def batches(items, size):\n"
            "    for i in range(0, len(items), size):\n"
            "        yield items[i:i + size]\n"
        ),
        "scripts/train.py": (
            "from ml.model import Model\n"
            "from ml.trainer import Trainer\n"
            "\n"
            "\n"
            "def main():\n"
            "    Trainer(Model(), \"ckpt.json\").fit([[1, 2], [3]])\n"
        ),
    }


_WORDS = (
    "alpha beta gamma delta kappa sigma omega vector matrix buffer cache index "
    "record token parser loader writer reader schema queue stack graph node edge "
    "window filter mapper reducer router handler session packet frame"
).split()


def synthetic_repo(n_files: int, seed: int = 0, body_lines: int = 6) -> Files:
    """``n_files`` modules spread over a few packages.

    Module ``i`` imports up to two earlier modules and calls into them, so the
    import graph is acyclic.  Every module defines one class with methods and a
    few functions.
    """
    rng = random.Random(f"synthetic:{n_files}:{seed}")
    files: Files = {}
    mods: list[tuple[str, str, list[str]]] = []  # (path, dotted, function names)
    n_pkgs = max(1, n_files // 8)
    for p in range(n_pkgs):
        files[f"syn/pkg{p}/__init__.py"] = ""
    while len(files) < n_files and len(mods) < n_files:
        i = len(mods)
        pkg = f"pkg{i % n_pkgs}"
        path, dotted = f"syn/{pkg}/mod{i}.py", f"syn.{pkg}.mod{i}"
        deps = rng.sample(mods, k=min(len(mods), rng.randint(0, 2)))
        lines = ['"""Synthetic module %d."""\n' % i, "\n"]
        for dpath, ddot, _ in deps:
            lines.append(f"import {ddot}\n")
        lines.append("\n\n")
        cls = f"{rng.choice(_WORDS).title()}{i}"
        lines.append(f"class {cls}:\n")
        lines.append(f"    \"\"\"Holds {rng.choice(_WORDS)} state.\"\"\"\n\n")
        lines.append("    def __init__(self, size=0):\n        self.size = size\n        self.items = []\n\n")
        for m in range(rng.randint(2, 4)):
            meth = f"{rng.choice(_WORDS)}_{m}"
            lines.append(f"    def {meth}(self, x):\n")
            for k in range(body_lines):
                lines.append(f"        x = x * {k + 2} + self.size  # {rng.choice(_WORDS)} step {k}\n")
            lines.append("        self.items.append(x)\n        return x\n\n")
        funcs = []
        for f in range(rng.randint(2, 3)):
            fn = f"{rng.choice(_WORDS)}_{i}_{f}"
            funcs.append(fn)
            lines.append(f"\ndef {fn}(value):\n")
            lines.append(f"    \"\"\"Combine {rng.choice(_WORDS)} and {rng.choice(_WORDS)}.\"\"\"\n")
            lines.append(f"    obj = {cls}(value)\n")
            for k in range(body_lines):
                lines.append(f"    value = value + {k} * obj.size\n")
            for dpath, ddot, dfuncs in deps:
                lines.append(f"    value += {ddot}.{rng.choice(dfuncs)}(value)\n")
            lines.append("    return value\n\n")
        files[path] = "".join(lines).rstrip("\n") + "\n"
        mods.append((path, dotted, funcs))
    return files


def corpus() -> dict[str, Files]:
    """The ten fixture repositories, keyed by name."""
    return {
        "shapes": _shapes(),
        "cycles": _cycles(),
        "diamond": _diamond(),
        "nested": _nested(),
        "texty": _texty(),
        "trainer": _trainer(),
        "synth10": synthetic_repo(10),
        "synth20": synthetic_repo(20),
        "synth30": synthetic_repo(30),
        "synth40": synthetic_repo(40, body_lines=14),
    }


LARGEST = "synth40"


def fixture_tree(name: str) -> SourceTree:
    if name == "single":
        return SourceTree.from_mapping(SINGLE_FILE, name)
    repos = corpus()
    if name not in repos:
        raise KeyError(f"unknown fixture {name!r}; choose from single, {', '.join(sorted(repos))}")
    return SourceTree.from_mapping(repos[name], name)


def write_files(files: Mapping[str, str | bytes], root: str | Path) -> Path:
    root = Path(root)
    for rel, data in files.items():
        target = root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data if isinstance(data, bytes) else data.encode("utf-8"))
    return root


def write_corpus(root: str | Path) -> list[Path]:
    root = Path(root)
    out = [write_files(files, root / name) for name, files in corpus().items()]
    out.append(write_files(SINGLE_FILE, root / "single"))
    return out


def random_import_repo(n_files: int, seed: int, cyclic: bool = False, p_edge: float = 0.3) -> Files:
    """Flat package whose modules import each other at random.

    Without ``cyclic`` every import points to a module with a smaller hidden
    rank, so the import graph is a DAG; the rank order is shuffled against
    the file names so that name order is no help.  With ``cyclic`` a few back
    edges are added on top.
    """
    rng = random.Random(f"imports:{n_files}:{seed}:{cyclic}")
    names = [f"m{i:02d}" for i in range(n_files)]
    rank = names[:]
    rng.shuffle(rank)
    deps: dict[str, set[str]] = {m: set() for m in names}
    for i, m in enumerate(rank):
        for earlier in rank[:i]:
            if rng.random() < p_edge:
                deps[m].add(earlier)
    if cyclic and n_files > 1:
        for _ in range(rng.randint(1, 3)):
            a, b = rng.sample(range(n_files), 2)
            lo, hi = min(a, b), max(a, b)
            deps[rank[lo]].add(rank[hi])
    files: Files = {"flat/__init__.py": ""}
    for m in names:
        body = "".join(f"from flat import {d}\n" for d in sorted(deps[m]))
        files[f"flat/{m}.py"] = body + f"\n\ndef f_{m}():\n    return {len(deps[m])}\n"
    return files
