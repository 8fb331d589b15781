import json
import subprocess
import sys

import pytest

from cgm.cli import EXIT_CONTRACT, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from cgm.fixtures import corpus, write_files
from cgm.graph import load_graph


@pytest.fixture
def built(tmp_path):
    files = corpus()["trainer"]
    repo = tmp_path / "repo"
    write_files(files, repo)
    out = tmp_path / "g.json"
    assert main(["build", "--repo", str(repo), "--out", str(out)]) == EXIT_OK
    return tmp_path, out, files


def write(path, text):
    path.write_text(text)
    return str(path)


def test_build_linearize_round_trip(built, tmp_path):
    _, g, files = built
    split = tmp_path / "split"
    assert main(["linearize", "--graph", str(g), "--out", str(tmp_path / "lin.txt"), "--split-dir", str(split)]) == 0
    for rel, text in files.items():
        assert (split / rel).read_bytes() == text.encode()
    assert main(["validate", "--graph", str(g)]) == EXIT_OK


def test_exit_codes(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["validate"]) == EXIT_USAGE
    assert main(["validate", "--graph", str(tmp_path / "missing.json")]) == EXIT_IO
    bad = write(tmp_path / "bad.json", "{not json")
    assert main(["validate", "--graph", bad]) == EXIT_CONTRACT


def test_validate_reports_violations(built, capsys):
    _, g, _ = built
    doc = json.loads(g.read_text())
    doc["edges"].append({"src": "repo:", "dst": "nowhere", "kind": "calls"})
    g.write_text(json.dumps(doc))
    assert main(["validate", "--graph", str(g)]) == EXIT_CONTRACT
    assert "dangling edge" in capsys.readouterr().out
    assert main(["chunk", "--graph", str(g)]) == EXIT_CONTRACT


def test_print_config_precedence(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", json.dumps({"seed": 5, "chunk_size": 100}))
    assert main(["sample", "--print-config", "--config", cfg, "--seed", "7"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert (doc["seed"], doc["chunk_size"], doc["recon_budget"]) == (7, 100, 8000)
    assert main(["sample", "--print-config", "--k1", "0"]) == EXIT_CONTRACT


def test_rerank_prints_five(tmp_path, capsys):
    files = {f"pkg/mod{i:02d}.py": f"def fn{i}():\n    return {i}\n" for i in range(12)}
    write_files(files, tmp_path / "r")
    g = str(tmp_path / "g.json")
    assert main(["build", "--repo", str(tmp_path / "r"), "--out", g]) == 0
    issue = write(tmp_path / "issue.txt", "fn4 in mod04 misbehaves\n")
    capsys.readouterr()
    assert main(["rerank", "--graph", g, "--issue", issue]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 5 and lines[0] == "pkg/mod04.py"
    assert main(["rerank", "--graph", g, "--issue", issue, "--stage1"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 10


def test_retrieval_commands(built, capsys):
    tmp, g, _ = built
    issue = write(tmp / "issue.txt", "load_checkpoint in checkpoint.py fails\n")
    sub = tmp / "sub.json"
    assert main(["retrieve", "--graph", str(g), "--issue", issue, "--out", str(sub)]) == 0
    assert "file:ml/checkpoint.py" in load_graph(sub).nodes
    capsys.readouterr()
    assert main(["rewrite", "--graph", str(g), "--issue", issue]) == 0
    assert "load_checkpoint" in json.loads(capsys.readouterr().out)["entities"]
    assert main(["skeleton", "--graph", str(g), "--file", "ml/checkpoint.py"]) == 0
    assert capsys.readouterr().out == "def load_checkpoint(path): ...\ndef save_checkpoint(path, weights): ...\n"
    sel = write(tmp / "files.txt", "ml/checkpoint.py\n")
    outs = []
    for name in ("a.json", "b.json"):
        assert main(["reader-input", "--graph", str(sub), "--issue", issue, "--files", sel, "--out", str(tmp / name)]) == 0
        outs.append((tmp / name).read_bytes())
    assert outs[0] == outs[1]
    assert json.loads(outs[0])["files"] == ["file:ml/checkpoint.py"]


def test_dataset_and_sample(built):
    tmp, g, _ = built
    out = tmp / "ds.jsonl"
    assert main(["dataset-gen", "--graph", str(g), "--mode", "issuefix", "--count", "5", "--seed", "2",
                 "--out", str(out)]) == 0
    recs = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(recs) == 5 and {r["kind"] for r in recs} == {"issuefix"}
    tasks = write(tmp / "t.jsonl", json.dumps({"issue": "i", "patch": "p", "oracle_files": ["ml/model.py"]}) + "\n")
    assert main(["dataset-gen", "--graph", str(g), "--mode", "issuefix", "--count", "2", "--tasks", tasks,
                 "--out", str(out)]) == 0
    assert all(json.loads(line)["target"] == "p" for line in out.read_text().splitlines())
    assert main(["dataset-gen", "--graph", str(g), "--mode", "recon", "--count", "2", "--budget", "300",
                 "--out", str(out)]) == 0
    assert main(["sample", "--graph", str(g), "--out", str(tmp / "s.json"), "--budget", "300"]) == 0


def test_chunk_mask_simulate(built, capsys):
    tmp, g, _ = built
    mask = tmp / "mask.npz"
    assert main(["mask", "--graph", str(g), "--text-tokens", "6", "--out", str(mask)]) == 0
    assert main(["simulate-attention", "--mask", str(mask)]) == 0
    assert main(["mask", "--graph", str(g), "--text-tokens", "-1", "--out", str(mask)]) == EXIT_CONTRACT


def test_eval(tmp_path, capsys):
    p, r = write(tmp_path / "p", "kitten"), write(tmp_path / "r", "sitting")
    assert main(["eval", "--pred", p, "--ref", r, "--metric", "es"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1 - 3 / 7)
    assert main(["eval", "--pred", p, "--ref", r, "--metric", "em"]) == 0
    assert capsys.readouterr().out.strip() == "0"


def test_console_module(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cgm.cli", "fixtures", "--out", str(tmp_path), "--name", "shapes"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "shapes").is_dir()
