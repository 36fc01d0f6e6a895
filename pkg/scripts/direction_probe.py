"""How much direction signal do topology rasters carry for the graph pair?

Compares the topology-only network against a one-feature threshold rule
(ink per unit of edge length) on the directed/undirected graph classes.
"""

import argparse

import numpy as np

from csdia.dpn import ModelConfig
from csdia.harness import DIRECTION_PAIR, Hyper, train
from csdia.synthgen import CorpusSpec, generate_corpus
from csdia.topology import RenderMode, node_geometry, render_topology


def ink_per_length(a, mode) -> float:
    nodes = {o.id: node_geometry(o.bbox, a.canvas_w, a.canvas_h) for o in a.semantic_objects()}
    length = sum(np.hypot(nodes[r.head_id].cx - nodes[r.tail_id].cx, nodes[r.head_id].cy - nodes[r.tail_id].cy)
                 for r in a.relations)
    return float((render_topology(a, mode).pixels > 0).sum() / max(length, 1.0))


def threshold_accuracy(train_x, train_y, test_x, test_y) -> float:
    """Best single threshold on train (either polarity), scored on test."""
    best = (-1.0, 0.0, 1)
    for t in np.unique(train_x):
        for sign in (1, -1):
            acc = np.mean((sign * (train_x - t) >= 0) == train_y)
            best = max(best, (acc, t, sign))
    _, t, sign = best
    return float(np.mean((sign * (test_x - t) >= 0) == test_y))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--per-class", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    corpus = generate_corpus(CorpusSpec(per_class_count=args.per_class, seed=args.seed, classes=DIRECTION_PAIR))
    for mode in (RenderMode.DIRECTED_AWARE, RenderMode.UNDIRECTED_ONLY):
        feats = {}
        for split in ("train", "test"):
            ex = corpus.split(split)
            feats[split] = (np.array([ink_per_length(e.annotation, mode) for e in ex]),
                            np.array([e.class_label == DIRECTION_PAIR[0] for e in ex]))
        rule = threshold_accuracy(*feats["train"], *feats["test"])
        _, m = train(corpus, ModelConfig(use_diagram=False, use_text=False, topology_mode=mode), Hyper(seed=args.seed))
        print(f"{mode.value:16s} threshold rule {rule:.3f}  topology network {m.overall_accuracy:.3f}")


if __name__ == "__main__":
    main()
