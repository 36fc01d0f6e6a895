"""Run the ablation, direction study and topology-dimension sweep on one corpus.

Example:
    python3 scripts/run_experiments.py --out results --per-class 40 --seed 0
"""

import argparse
import logging
import time
from pathlib import Path

from csdia.harness import (
    Hyper,
    ablate,
    dim_sweep,
    direction_study,
    fmt,
    format_table,
    write_ablation,
    write_direction,
    write_sweep,
)
from csdia.synthgen import CorpusSpec, generate_corpus, write_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--per-class", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--experiments", default="ablate,direction,sweep")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    out = Path(args.out)
    corpus = generate_corpus(CorpusSpec(per_class_count=args.per_class, seed=args.seed))
    write_corpus(corpus, out / "corpus")
    hyper = Hyper(seed=args.seed)
    todo = set(args.experiments.split(","))

    if "ablate" in todo:
        t0 = time.perf_counter()
        rows = ablate(corpus, hyper, jobs=args.jobs)
        write_ablation(rows, out / "ablation")
        print(format_table(["variant", "accuracy"], [(r.variant, r.accuracy) for r in rows]))
        print(f"ablation took {time.perf_counter() - t0:.0f} s\n")

    if "direction" in todo:
        rep = direction_study(corpus, hyper, jobs=args.jobs)
        write_direction(rep, out / "direction")
        print(format_table(["class", "directed-aware", "undirected-only"], rep.rows()))
        d, u = rep.pair_accuracy()
        print(f"graph pair: directed-aware {fmt(d)}  undirected-only {fmt(u)}\n")

    if "sweep" in todo:
        points = dim_sweep(corpus, hyper, jobs=args.jobs)
        write_sweep(points, out / "sweep")
        print(format_table(["dim", "accuracy"], points))


if __name__ == "__main__":
    main()
