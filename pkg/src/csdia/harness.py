"""Training loop, metrics, and the three experiment suites (ablation, direction, sweep)."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .annotation import CLASS_NAMES, class_index
from .dpn import DPN, Features, HashEmbeddingTable, ModelConfig, featurize, stack_features
from .synthgen import Corpus, Example
from .tensornet import SGD, batch_cross_entropy, softmax
from .topology import RenderMode

log = logging.getLogger(__name__)

NUM_CLASSES = len(CLASS_NAMES)


@dataclass(frozen=True)
class Hyper:
    """Two-phase constant learning-rate schedule with heavy-ball momentum."""

    epochs_phase1: int = 30
    lr_phase1: float = 4e-3
    epochs_phase2: int = 30
    lr_phase2: float = 1e-4
    momentum: float = 0.9
    batch_size: int = 16
    seed: int = 0
    reduction: str = "mean"  # how a batch's summed gradient is scaled: "mean" or "sum"

    def __post_init__(self):
        if self.reduction not in ("mean", "sum"):
            raise ValueError(f"reduction must be 'mean' or 'sum', got {self.reduction!r}")

    @property
    def epochs(self) -> int:
        return self.epochs_phase1 + self.epochs_phase2

    def lr_at(self, epoch: int) -> float:
        return self.lr_phase1 if epoch < self.epochs_phase1 else self.lr_phase2


@dataclass
class Metrics:
    overall_accuracy: float
    per_class_accuracy: list[float]
    confusion: np.ndarray  # (12, 12) int64, rows = true class, cols = predicted
    loss_history: list[float] = field(default_factory=list)

    @classmethod
    def from_predictions(cls, y_true: Sequence[int], y_pred: Sequence[int],
                         loss_history: Sequence[float] = ()) -> Metrics:
        conf = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
        for t, p in zip(y_true, y_pred):
            conf[t, p] += 1
        total = int(conf.sum())
        overall = float(np.trace(conf)) / total if total else float("nan")
        rows = conf.sum(axis=1)
        per_class = [float(conf[i, i]) / rows[i] if rows[i] else float("nan")
                     for i in range(NUM_CLASSES)]
        return cls(overall, per_class, conf, list(loss_history))

    def subset_accuracy(self, classes: Sequence[str]) -> float:
        idx = [class_index(c) for c in classes]
        n = int(self.confusion[idx].sum())
        return float(sum(self.confusion[i, i] for i in idx)) / n if n else float("nan")

    def to_dict(self) -> dict:
        def clean(x):
            return None if isinstance(x, float) and math.isnan(x) else x
        return {
            "overall_accuracy": clean(self.overall_accuracy),
            "per_class_accuracy": {c: clean(a) for c, a in zip(CLASS_NAMES, self.per_class_accuracy)},
            "confusion": self.confusion.tolist(),
            "loss_history": self.loss_history,
        }


class FeatureCache:
    """Featurises each example once per (side, topology mode)."""

    def __init__(self, table=None, embedding_dim: int = 50, invert: bool = False):
        self.table = table if table is not None else HashEmbeddingTable(embedding_dim)
        self.invert = invert
        self._store: dict[tuple, Features] = {}

    def get(self, e: Example, config: ModelConfig) -> Features:
        full = dataclasses.replace(config, use_diagram=True, use_text=True, use_topology=True)
        key = (id(e), config.input_side, config.topology_mode, config.embedding_dim)
        f = self._store.get(key)
        if f is None:
            f = featurize(e.annotation, e.diagram, full, self.table, self.invert)
            self._store[key] = f
        return f

    def batch(self, examples: Sequence[Example], config: ModelConfig):
        feats = [self.get(e, config) for e in examples]
        y = np.array([class_index(e.class_label) for e in examples], dtype=np.int64)
        return stack_features(feats, config), y


def _predict(model: DPN, inputs: dict[str, np.ndarray], chunk: int = 64) -> np.ndarray:
    n = len(next(iter(inputs.values())))
    preds = []
    for s in range(0, n, chunk):
        part = {k: v[s:s + chunk] for k, v in inputs.items()}
        preds.append(np.argmax(model.logits(part), axis=1))
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def evaluate(model: DPN, examples: Sequence[Example], cache: FeatureCache | None = None,
             loss_history: Sequence[float] = ()) -> Metrics:
    """One forward per example, argmax prediction; parameters are untouched."""
    cache = cache or FeatureCache(embedding_dim=model.config.embedding_dim)
    if not examples:
        return Metrics.from_predictions([], [], loss_history)
    inputs, y = cache.batch(examples, model.config)
    return Metrics.from_predictions(y.tolist(), _predict(model, inputs).tolist(), loss_history)


def train(corpus: Corpus, config: ModelConfig, hyper: Hyper = Hyper(), table=None,
          cache: FeatureCache | None = None,
          on_epoch: Callable[[int, float], None] | None = None) -> tuple[DPN, Metrics]:
    """Train from scratch on the train split and evaluate on the test split.

    Each batch's per-example gradients are summed (and divided by the batch
    size when ``hyper.reduction == "mean"``), then applied in a single SGD
    step. Everything is seeded from ``hyper.seed``.
    """
    train_ex, test_ex = corpus.split("train"), corpus.split("test")
    if not train_ex:
        raise ValueError("corpus has an empty train split")
    if not test_ex:
        raise ValueError("corpus has an empty test split")
    cache = cache or FeatureCache(table, config.embedding_dim, corpus.invert)
    inputs, y = cache.batch(train_ex, config)

    model = DPN(config, seed=np.random.default_rng([hyper.seed, 1]))
    shuffle = np.random.default_rng([hyper.seed, 2])
    opt = SGD(hyper.lr_phase1, hyper.momentum)
    named = model.named_params()
    params = [p for _, p, _, _ in named]
    n = len(y)
    history = []
    for epoch in range(hyper.epochs):
        opt.learning_rate = hyper.lr_at(epoch)
        order = shuffle.permutation(n)
        total = 0.0
        for s in range(0, n, hyper.batch_size):
            idx = order[s:s + hyper.batch_size]
            model.zero_grad()
            loss, g = batch_cross_entropy(model.logits({k: v[idx] for k, v in inputs.items()}), y[idx])
            if hyper.reduction == "mean":
                g = g / len(idx)
            model.backward(g, input_grads=False)
            opt.step(params, [grads[k] for _, _, grads, k in named])
            total += loss
        history.append(total / n)
        if on_epoch:
            on_epoch(epoch, history[-1])
        if not math.isfinite(history[-1]):
            log.warning("non-finite training loss at epoch %d", epoch)
    return model, evaluate(model, test_ex, cache, history)


# --- experiment suites -----------------------------------------------------

ABLATION_VARIANTS: tuple[tuple[str, dict], ...] = (
    ("diagram", dict(use_diagram=True, use_topology=False, use_text=False)),
    ("topology", dict(use_diagram=False, use_topology=True, use_text=False)),
    ("diagram+topology", dict(use_diagram=True, use_topology=True, use_text=False)),
    ("diagram+text", dict(use_diagram=True, use_topology=False, use_text=True)),
    ("topology+text", dict(use_diagram=False, use_topology=True, use_text=True)),
    ("diagram+topology+text", dict(use_diagram=True, use_topology=True, use_text=True)),
)

SWEEP_DIMS = tuple(range(20, 201, 20))
DIRECTION_PAIR = ("directed graph", "undirected graph")


def _run_one(args) -> Metrics:
    corpus, config, hyper, table = args
    return train(corpus, config, hyper, table)[1]


def _run_all(jobs_args: list, jobs: int, cache: FeatureCache) -> list[Metrics]:
    if jobs <= 1:
        return [train(c, cfg, h, cache=cache)[1] for c, cfg, h, _ in jobs_args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, jobs_args))


@dataclass
class AblationRow:
    variant: str
    metrics: Metrics

    @property
    def accuracy(self) -> float:
        return self.metrics.overall_accuracy


def ablate(corpus: Corpus, hyper: Hyper = Hyper(), table=None,
           base: ModelConfig = ModelConfig(), jobs: int = 1) -> list[AblationRow]:
    cache = FeatureCache(table, base.embedding_dim, corpus.invert)
    args = [(corpus, dataclasses.replace(base, **flags), hyper, table)
            for _, flags in ABLATION_VARIANTS]
    results = _run_all(args, jobs, cache)
    return [AblationRow(name, m) for (name, _), m in zip(ABLATION_VARIANTS, results)]


@dataclass
class DirectionReport:
    directed: Metrics
    undirected: Metrics

    def rows(self) -> list[tuple[str, float, float]]:
        out = [(c, self.directed.per_class_accuracy[i], self.undirected.per_class_accuracy[i])
               for i, c in enumerate(CLASS_NAMES)]
        out.append(("overall", self.directed.overall_accuracy, self.undirected.overall_accuracy))
        return out

    def pair_accuracy(self, classes: Sequence[str] = DIRECTION_PAIR) -> tuple[float, float]:
        """Share of the pair's test examples labelled correctly (12-way argmax)."""
        return self.directed.subset_accuracy(classes), self.undirected.subset_accuracy(classes)


def direction_study(corpus: Corpus, hyper: Hyper = Hyper(), table=None,
                    base: ModelConfig = ModelConfig(), jobs: int = 1) -> DirectionReport:
    """Topology-only models trained with directed-aware and undirected-only rendering."""
    cache = FeatureCache(table, base.embedding_dim, corpus.invert)
    topo = dataclasses.replace(base, use_diagram=False, use_text=False, use_topology=True)
    args = [(corpus, dataclasses.replace(topo, topology_mode=mode), hyper, table)
            for mode in (RenderMode.DIRECTED_AWARE, RenderMode.UNDIRECTED_ONLY)]
    d, u = _run_all(args, jobs, cache)
    return DirectionReport(d, u)


def dim_sweep(corpus: Corpus, hyper: Hyper = Hyper(), dims: Sequence[int] = SWEEP_DIMS,
              table=None, base: ModelConfig = ModelConfig(), jobs: int = 1) -> list[tuple[int, float]]:
    """Full model per topology dimension, other dimensions fixed."""
    cache = FeatureCache(table, base.embedding_dim, corpus.invert)
    full = dataclasses.replace(base, use_diagram=True, use_text=True, use_topology=True)
    args = [(corpus, dataclasses.replace(full, dim_topology=d), hyper, table) for d in dims]
    results = _run_all(args, jobs, cache)
    return [(d, m.overall_accuracy) for d, m in zip(dims, results)]


# --- reports ---------------------------------------------------------------

def fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_metrics(m: Metrics, out_dir: Path, stem: str = "metrics"):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{stem}.json").write_text(json.dumps(m.to_dict(), indent=2) + "\n", encoding="utf-8")
    _write_csv(out_dir / f"{stem.replace('metrics', 'confusion')}.csv",
               ["true\\pred", *CLASS_NAMES],
               [[c, *m.confusion[i].tolist()] for i, c in enumerate(CLASS_NAMES)])


def write_ablation(rows: Sequence[AblationRow], out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "ablation.csv", ["variant", "accuracy"],
               [[r.variant, fmt(r.accuracy)] for r in rows])
    for r in rows:
        write_metrics(r.metrics, out_dir, f"metrics-{r.variant}")


def write_direction(rep: DirectionReport, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "direction.csv", ["class", "acc_directed", "acc_undirected"],
               [[c, fmt(a), fmt(b)] for c, a, b in rep.rows()])
    write_metrics(rep.directed, out_dir, "metrics-directed")
    write_metrics(rep.undirected, out_dir, "metrics-undirected")


def write_sweep(points: Sequence[tuple[int, float]], out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "sweep.csv", ["dim", "accuracy"], [[d, fmt(a)] for d, a in points])


def format_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [[str(h) for h in header]] + [
        [fmt(v) if isinstance(v, float) else str(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def probabilities(model: DPN, inputs: dict[str, np.ndarray]) -> np.ndarray:
    return softmax(model.logits(inputs))
