import json

import pytest

from csdia.annotation import parse_annotation
from csdia.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, gradcheck_suite, main
from csdia.raster import decode_image
from csdia.synthgen import load_corpus

FAST = ["--epochs1", "1", "--epochs2", "1"]


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    assert main(["gen", "--per-class", "4", "--seed", "2", "--out", str(d)]) == EXIT_OK
    return d


def test_gen_and_stats(corpus_dir, capsys):
    assert len(load_corpus(corpus_dir).examples) == 48
    capsys.readouterr()
    assert main(["stats", "--corpus", str(corpus_dir)]) == EXIT_OK
    total = [l for l in capsys.readouterr().out.splitlines() if l.startswith("Total")]
    assert len(total) == 1 and total[0].split()[1] == "48"


def test_gen_class_subset(tmp_path):
    assert main(["gen", "--classes", "stack,queue", "--per-class", "4", "--canvas", "96x80",
                 "--out", str(tmp_path)]) == EXIT_OK
    c = load_corpus(tmp_path)
    assert {e.class_label for e in c.examples} == {"stack", "queue"}
    assert {(e.diagram.width, e.diagram.height) for e in c.examples} == {(96, 80)}


def test_topo_writes_canvas_sized_png(corpus_dir, tmp_path):
    ann = next(corpus_dir.glob("*.json"))
    assert ann.name != "corpus.json"
    a = parse_annotation(ann.read_bytes())
    assert main(["topo", "--in", str(ann), "--out", str(tmp_path)]) == EXIT_OK
    assert main(["topo", "--in", str(ann), "--undirected", "--out", str(tmp_path)]) == EXIT_OK
    d = decode_image((tmp_path / f"{ann.stem}.topo.png").read_bytes())
    u = decode_image((tmp_path / f"{ann.stem}.topo-u.png").read_bytes())
    assert (d.width, d.height) == (u.width, u.height) == (a.canvas_w, a.canvas_h)


def test_help_and_usage_errors(capsys):
    assert main(["--help"]) == EXIT_OK
    assert main(["train", "--help"]) == EXIT_OK
    assert main([]) == EXIT_USAGE
    assert main(["gen", "--bogus"]) == EXIT_USAGE
    assert main(["gen"]) == EXIT_USAGE
    assert main(["gen", "--per-class", "4", "--canvas", "huge", "--out", "x"]) == EXIT_USAGE


def test_data_errors(tmp_path):
    assert main(["topo", "--in", str(tmp_path / "missing.json")]) == EXIT_DATA
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["topo", "--in", str(bad)]) == EXIT_DATA
    assert main(["stats", "--corpus", str(tmp_path / "nothing")]) == EXIT_DATA


def test_train_then_eval(corpus_dir, tmp_path):
    out = tmp_path / "run"
    assert main(["train", "--corpus", str(corpus_dir), "--out", str(out), "--branches", "topology", *FAST]) == EXIT_OK
    assert {"metrics.json", "confusion.csv", "model.npz"} <= {p.name for p in out.iterdir()}
    trained = json.loads((out / "metrics.json").read_text())["overall_accuracy"]
    assert main(["eval", "--corpus", str(corpus_dir), "--checkpoint", str(out / "model.npz"),
                 "--out", str(tmp_path / "ev")]) == EXIT_OK
    assert json.loads((tmp_path / "ev" / "metrics.json").read_text())["overall_accuracy"] == trained
    assert main(["eval", "--corpus", str(corpus_dir), "--checkpoint", str(tmp_path / "none.npz"),
                 "--out", str(tmp_path / "ev")]) == EXIT_DATA


def test_embeddings_file(corpus_dir, tmp_path):
    emb = tmp_path / "vec.txt"
    emb.write_text("stack 1 0 0\nqueue 0 1 0\nnode 0 0 1\n")
    assert main(["train", "--corpus", str(corpus_dir), "--embeddings", str(emb), "--out",
                 str(tmp_path / "r"), "--branches", "text", *FAST]) == EXIT_OK
    assert main(["train", "--corpus", str(corpus_dir), "--embeddings", str(tmp_path / "no.txt"),
                 "--out", str(tmp_path / "r"), *FAST]) == EXIT_DATA


@pytest.mark.parametrize("cmd,report", [("ablate", "ablation.csv"), ("direction", "direction.csv")])
def test_experiment_reruns_are_byte_identical(corpus_dir, tmp_path, cmd, report):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([cmd, "--corpus", str(corpus_dir), "--out", str(a), *FAST]) == EXIT_OK
    assert main([cmd, "--corpus", str(corpus_dir), "--out", str(b), "--jobs", "2", *FAST]) == EXIT_OK
    for p in a.glob("*.csv"):
        assert p.read_bytes() == (b / p.name).read_bytes(), p.name
    assert (a / report).exists()


def test_gradcheck_command(capsys):
    assert main(["gradcheck"]) == EXIT_OK
    errors = gradcheck_suite(0)
    assert errors["linear"] < 1e-7 and errors["relu"] < 1e-7 and max(errors.values()) < 1e-4
