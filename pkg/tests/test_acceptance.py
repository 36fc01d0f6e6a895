"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line in ``ACCEPTANCE_LINES``; conftest prints the
collected lines in the terminal summary. Criteria 4 and 5 train full models on
the default corpus and take several minutes.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from csdia.annotation import SEMANTIC_SHAPE, BBox, Relation, canonical, parse_annotation, serialize_annotation
from csdia.cli import EXIT_OK, gradcheck_suite, main
from csdia.harness import DIRECTION_PAIR, Hyper, ablate, direction_study
from csdia.raster import decode_image, encode_png
from csdia.synthgen import CorpusSpec, example_rng, generate_corpus, generate_diagram, paired_graphs, restyle
from csdia.tensornet import Flatten, Linear, ReLU, Sequential, grad_check
from csdia.topology import RenderMode, TopologyNode, edge_geometry, lambda_r, node_geometry, render_topology

D, U = RenderMode.DIRECTED_AWARE, RenderMode.UNDIRECTED_ONLY
ACCEPTANCE_LINES: dict[tuple[int, str], str] = {}


def record(n: int, ok: bool, detail: str, part: str = ""):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[n, part] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def default_corpus():
    return generate_corpus(CorpusSpec(per_class_count=40, seed=0))


def test_criterion_1_gradient_oracle():
    t0 = time.perf_counter()
    errors = gradcheck_suite(0)
    rng = np.random.default_rng(1)
    # linear and relu on their own, with nothing else in the graph
    lin = Sequential([Linear(5, 3)])
    lin.init_params(rng)
    errors["linear-alone"] = grad_check(lin, rng.normal(size=(1, 5)), 2)
    relu = Sequential([ReLU(), Flatten()])
    errors["relu-alone"] = grad_check(relu, rng.normal(size=(1, 6)) + 0.1, 4)
    elapsed = time.perf_counter() - t0
    strict = [k for k in errors if k.startswith(("linear", "relu"))]
    ok = (all(errors[k] < 1e-7 for k in strict) and max(errors.values()) < 1e-4 and elapsed < 60)
    worst = max(errors, key=errors.get)
    record(1, ok, f"worst {worst} {errors[worst]:.2e}; linear/relu max "
                  f"{max(errors[k] for k in strict):.2e}; {elapsed:.1f} s")


@pytest.mark.parametrize("cls", ["binary tree", "non-binary tree"])
def test_criterion_2_shape_invariance(cls):
    mismatches, restyled = 0, 0
    for i in range(100):
        e = generate_diagram(cls, example_rng(100, cls, i))
        e2 = restyle(e, np.random.default_rng([100, i]))
        labels = [o.label for o in e.annotation.objects if o.kind == SEMANTIC_SHAPE]
        labels2 = [o.label for o in e2.annotation.objects if o.kind == SEMANTIC_SHAPE]
        restyled += labels != labels2 or e.diagram != e2.diagram
        for mode in (D, U):
            mismatches += render_topology(e.annotation, mode) != render_topology(e2.annotation, mode)
    # a pair that is not actually restyled would make the check vacuous
    ok = mismatches == 0 and restyled >= 90
    record(2, ok, f"{cls}: {mismatches} mismatching pairs of 100 ({restyled} restyled)", cls)


def test_criterion_3_direction_distinguishable():
    violations, with_edges = 0, 0
    for i in range(100):
        d, u = paired_graphs(np.random.default_rng([300, i]))
        du = render_topology(d.annotation, U)
        violations += du != render_topology(u.annotation, U)
        if d.annotation.relations:
            with_edges += 1
            violations += render_topology(d.annotation, D) == du
    record(3, violations == 0, f"{violations} violations over 100 pairs ({with_edges} with edges)")


@pytest.mark.slow
def test_criterion_4_ablation_ordering(default_corpus):
    t0 = time.perf_counter()
    rows = {r.variant: r.accuracy for r in ablate(default_corpus, Hyper())}
    elapsed = time.perf_counter() - t0
    full, diagram = rows["diagram+topology+text"], rows["diagram"]
    ok = full >= diagram and full >= 0.85 and elapsed < 600
    table = ", ".join(f"{k} {v:.3f}" for k, v in rows.items())
    record(4, ok, f"full {full:.3f} vs diagram {diagram:.3f}; {elapsed:.0f} s [{table}]")


@pytest.mark.slow
def test_criterion_5_direction_ordering(default_corpus):
    rep = direction_study(default_corpus, Hyper())
    d_all, u_all = rep.directed.overall_accuracy, rep.undirected.overall_accuracy
    d_pair, u_pair = rep.pair_accuracy(DIRECTION_PAIR)
    parts = {"overall ordering": d_all >= u_all, "undirected pair <= 0.65": u_pair <= 0.65,
             "directed pair >= 0.9": d_pair >= 0.9}
    failed = [k for k, v in parts.items() if not v]
    record(5, not failed, f"overall {d_all:.3f} vs {u_all:.3f}; pair directed-aware {d_pair:.3f}, "
                          f"undirected-only {u_pair:.3f}" + (f"; failed: {', '.join(failed)}" if failed else ""))


def test_criterion_6_unit_values():
    lam = lambda_r(100, 100)
    r = node_geometry(BBox(left=100, right=400, lower=200, upper=500), 1000, 1000).radius
    nodes = {1: TopologyNode(1, 0, 0, 10), 2: TopologyNode(2, 40, 0, 20)}
    wu = edge_geometry(Relation(1, "line", 1, 2), nodes, D)
    wd = edge_geometry(Relation(2, "arrow", 1, 2), nodes, D)
    ok = (abs(lam - 0.316228) <= 1e-6 and abs(r - 30.197) <= 0.01
          and (wu.w_head, wu.w_tail) == (15, 15) and (wd.w_head, wd.w_tail) == (0, 20))
    record(6, ok, f"lambda {lam:.7f}; radius {r:.4f}; undirected {(wu.w_head, wu.w_tail)}; "
                  f"directed {(wd.w_head, wd.w_tail)}")


def _csvs(d: Path) -> dict[str, bytes]:
    return {str(p.relative_to(d)): p.read_bytes() for p in sorted(d.rglob("*.csv"))}


def test_criterion_7_cli_determinism(tmp_path):
    fast = ["--epochs1", "2", "--epochs2", "1"]
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        corpus = out / "corpus"
        codes = [main(["gen", "--per-class", "4", "--seed", "3", "--out", str(corpus)])]
        for cmd in ("ablate", "direction", "sweep"):
            codes.append(main([cmd, "--corpus", str(corpus), "--seed", "3", "--out", str(out / cmd), *fast]))
        codes.append(main(["train", "--corpus", str(corpus), "--seed", "3", "--out", str(out / "train"), *fast]))
        assert codes == [EXIT_OK] * 5
        runs.append(_csvs(out))
    a, b = runs
    differing = sorted(k for k in a if a[k] != b.get(k)) + sorted(set(b) - set(a))
    record(7, not differing and len(a) > 0, f"{len(a)} CSV reports compared; {len(differing)} differ")


def test_criterion_8_round_trips(default_corpus):
    bad_ann = bad_png = 0
    for e in default_corpus.examples:
        data = serialize_annotation(e.annotation)
        back = parse_annotation(data)
        bad_ann += back != canonical(e.annotation) or serialize_annotation(back) != data
        png = encode_png(e.diagram)
        img = decode_image(png)
        bad_png += img != e.diagram or encode_png(img) != png
    n = len(default_corpus.examples)
    record(8, bad_ann == 0 and bad_png == 0, f"{n} examples; {bad_ann} annotation and {bad_png} PNG mismatches")
