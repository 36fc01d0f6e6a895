import csv
import dataclasses
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csdia.annotation import CLASS_NAMES, class_index
from csdia.dpn import DPN, ModelConfig, model_forward, tiny_config
from csdia.harness import (
    ABLATION_VARIANTS,
    SWEEP_DIMS,
    AblationRow,
    DirectionReport,
    FeatureCache,
    Hyper,
    Metrics,
    ablate,
    dim_sweep,
    direction_study,
    evaluate,
    format_table,
    train,
    write_ablation,
    write_direction,
    write_sweep,
)
from csdia.synthgen import Corpus, CorpusSpec, generate_corpus

QUICK = Hyper(epochs_phase1=2, epochs_phase2=1)


@pytest.fixture(scope="module")
def two_class():
    return generate_corpus(CorpusSpec(per_class_count=8, seed=5, classes=("stack", "binary tree")))


@pytest.fixture(scope="module")
def undirected_only():
    return generate_corpus(CorpusSpec(per_class_count=4, seed=6,
                                      classes=("binary tree", "undirected graph", "array list")))


def test_tiny_corpus_is_fit(two_class):
    model, m = train(two_class, ModelConfig(), Hyper())
    assert all(math.isfinite(x) for x in m.loss_history) and len(m.loss_history) == 60
    assert evaluate(model, two_class.split("train")).overall_accuracy == 1.0


def test_training_is_deterministic(two_class):
    cfg = ModelConfig(use_text=False)
    (m1, a), (m2, b) = train(two_class, cfg, QUICK), train(two_class, cfg, QUICK)
    assert a.loss_history == b.loss_history
    assert np.array_equal(a.confusion, b.confusion)
    for x, y in zip(m1.params().values(), m2.params().values()):
        assert x.tobytes() == y.tobytes()


def test_evaluate_does_not_mutate(two_class):
    model, _ = train(two_class, tiny_config(), QUICK)
    before = {k: v.copy() for k, v in model.params().items()}
    a = evaluate(model, two_class.split("test"))
    b = evaluate(model, two_class.split("test"))
    assert a.overall_accuracy == b.overall_accuracy and np.array_equal(a.confusion, b.confusion)
    for k, v in model.params().items():
        assert np.array_equal(v, before[k])


def test_empty_split_is_an_error(two_class):
    only_test = Corpus(two_class.spec, [e for e in two_class.examples if e.split == "test"])
    with pytest.raises(ValueError, match="train split"):
        train(only_test, ModelConfig(), QUICK)
    only_train = Corpus(two_class.spec, [e for e in two_class.examples if e.split == "train"])
    with pytest.raises(ValueError, match="test split"):
        train(only_train, ModelConfig(), QUICK)


def test_hyper_validation():
    with pytest.raises(ValueError):
        Hyper(reduction="max")
    h = Hyper()
    assert h.epochs == 60 and h.lr_at(29) == 4e-3 and h.lr_at(30) == 1e-4


labels = st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11)), min_size=1, max_size=200)


@settings(max_examples=60)
@given(labels)
def test_accuracy_is_confusion_trace_ratio(pairs):
    y, p = zip(*pairs)
    m = Metrics.from_predictions(y, p)
    assert m.confusion.sum() == len(pairs)
    assert m.overall_accuracy == np.trace(m.confusion) / len(pairs)
    assert m.overall_accuracy == sum(a == b for a, b in pairs) / len(pairs)
    for i, a in enumerate(m.per_class_accuracy):
        assert math.isnan(a) if i not in y else 0 <= a <= 1


@settings(max_examples=30)
@given(st.lists(st.integers(0, 11), min_size=1, max_size=100), st.integers(0, 11))
def test_constant_predictor_scores_its_class_share(y, k):
    m = Metrics.from_predictions(y, [k] * len(y))
    assert m.overall_accuracy == y.count(k) / len(y)


def test_perfect_predictor_is_diagonal():
    y = list(range(12)) * 2
    m = Metrics.from_predictions(y, y)
    assert m.overall_accuracy == 1.0 and np.array_equal(m.confusion, 2 * np.eye(12, dtype=np.int64))


def test_subset_accuracy_uses_pair_rows_only():
    d, u = class_index("directed graph"), class_index("undirected graph")
    y = [d, d, u, u, 0, 0]
    p = [d, u, u, 3, 1, 1]  # other classes' mistakes do not count
    m = Metrics.from_predictions(y, p)
    assert m.subset_accuracy(["directed graph", "undirected graph"]) == 0.5


def test_ablation_rows_in_order(small_corpus):
    rows = ablate(small_corpus, QUICK)
    assert [r.variant for r in rows] == [v for v, _ in ABLATION_VARIANTS] == [
        "diagram", "topology", "diagram+topology", "diagram+text", "topology+text", "diagram+topology+text"]
    assert all(0 <= r.accuracy <= 1 for r in rows)


def _retexted(e):
    a = e.annotation
    objs = tuple(replace(o, description="completely unrelated phrase") for o in a.objects)
    return replace(e, annotation=replace(a, objects=objs))


def test_text_free_variants_ignore_text(small_corpus):
    test = small_corpus.split("test")[:5]
    for name, flags in ABLATION_VARIANTS:
        model, _ = train(small_corpus, dataclasses.replace(ModelConfig(), **flags), Hyper(epochs_phase1=1, epochs_phase2=0))
        same = all(np.array_equal(model_forward(e, model), model_forward(_retexted(e), model)) for e in test)
        assert same == ("text" not in name), name


def test_direction_study_layout(small_corpus):
    rep = direction_study(small_corpus, QUICK)
    rows = rep.rows()
    assert len(rows) == 13 and [r[0] for r in rows] == [*CLASS_NAMES, "overall"]
    d, u = rep.pair_accuracy()
    assert 0 <= d <= 1 and 0 <= u <= 1


def test_direction_columns_equal_without_directed_classes(undirected_only):
    rep = direction_study(undirected_only, QUICK)
    for _, a, b in rep.rows():
        assert a == b or (math.isnan(a) and math.isnan(b))
    assert np.array_equal(rep.directed.confusion, rep.undirected.confusion)


def test_sweep_points_and_determinism(small_corpus):
    assert SWEEP_DIMS == (20, 40, 60, 80, 100, 120, 140, 160, 180, 200)
    h = Hyper(epochs_phase1=1, epochs_phase2=0)
    a = dim_sweep(small_corpus, h)
    assert [d for d, _ in a] == list(SWEEP_DIMS) and all(0 <= x <= 1 for _, x in a)
    assert dim_sweep(small_corpus, h, dims=(20, 200)) == [a[0], a[-1]]


def test_parallel_matches_serial(small_corpus):
    h = Hyper(epochs_phase1=1, epochs_phase2=0)
    assert dim_sweep(small_corpus, h, dims=(40, 60), jobs=2) == dim_sweep(small_corpus, h, dims=(40, 60))


def test_feature_cache_reuses_features(small_corpus):
    cache = FeatureCache()
    e = small_corpus.examples[0]
    assert cache.get(e, ModelConfig()) is cache.get(e, ModelConfig(use_text=False))
    assert cache.get(e, ModelConfig()) is not cache.get(e, ModelConfig(topology_mode="undirected-only"))


def test_report_writers(tmp_path):
    m = Metrics.from_predictions([0, 1, 2], [0, 1, 1], [1.5, 0.5])
    write_ablation([AblationRow("diagram", m), AblationRow("topology", m)], tmp_path)
    rows = list(csv.reader(open(tmp_path / "ablation.csv")))
    assert rows == [["variant", "accuracy"], ["diagram", "0.666667"], ["topology", "0.666667"]]
    assert (tmp_path / "metrics-diagram.json").exists() and (tmp_path / "confusion-diagram.csv").exists()

    write_direction(DirectionReport(m, m), tmp_path)
    rows = list(csv.reader(open(tmp_path / "direction.csv")))
    assert rows[0] == ["class", "acc_directed", "acc_undirected"] and len(rows) == 14
    assert rows[-1] == ["overall", "0.666667", "0.666667"] and rows[4][1] == "nan"

    write_sweep([(20, 0.5), (40, 1.0)], tmp_path)
    assert (tmp_path / "sweep.csv").read_text() == "dim,accuracy\n20,0.500000\n40,1.000000\n"


def test_format_table():
    text = format_table(["a", "bb"], [("x", 0.5), ("yyy", 1.0)])
    assert text.splitlines() == ["a    bb", "---  --------", "x    0.500000", "yyy  1.000000"]
