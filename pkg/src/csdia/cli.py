"""Command-line entry point: ``csdia <command> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .annotation import CLASS_NAMES, AnnotationParseError, AnnotationValidationError, parse_annotation
from .dpn import DPN, ModelConfig, dpn_grad_check, load_embeddings, load_model, save_model, tiny_config
from .harness import (
    Hyper,
    ablate,
    dim_sweep,
    direction_study,
    evaluate,
    FeatureCache,
    fmt,
    format_table,
    train,
    write_ablation,
    write_direction,
    write_metrics,
    write_sweep,
)
from .raster import PNGError, encode_png
from .synthgen import CorpusSpec, PlacementError, corpus_stats, format_stats, generate_corpus, load_corpus, write_corpus
from .tensornet import Conv2d, Flatten, Linear, MaxPool2, ReLU, Sequential, grad_check
from .topology import RenderMode, render_topology

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _canvas(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    return w, h


def _add_training_flags(p: argparse.ArgumentParser, jobs: bool = True):
    p.add_argument("--corpus", required=True, help="corpus directory written by `gen`")
    p.add_argument("--embeddings", help="GloVe-style text file; default is a hash-derived table")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory for reports")
    p.add_argument("--epochs1", type=int, default=Hyper.epochs_phase1, help="epochs at the first learning rate")
    p.add_argument("--epochs2", type=int, default=Hyper.epochs_phase2, help="epochs at the second learning rate")
    p.add_argument("--batch-size", type=int, default=Hyper.batch_size)
    if jobs:
        p.add_argument("--jobs", type=int, default=1, help="train independent variants in parallel")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="csdia", description="Synthetic diagram corpus, topology rendering and DPN experiments.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("--classes", default="all", help="'all' or a comma-separated list of class names")
    p.add_argument("--per-class", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--canvas", type=_canvas, default=CorpusSpec.canvas, help="canvas size as WxH")
    p.add_argument("--train-fraction", type=float, default=CorpusSpec.train_fraction)
    p.add_argument("--out", required=True)

    p = sub.add_parser("topo", help="render the topology image of one annotation")
    p.add_argument("--in", dest="input", required=True, help="annotation JSON file")
    p.add_argument("--undirected", action="store_true", help="ignore relation direction")
    p.add_argument("--out", help="output directory (default: next to the input)")

    p = sub.add_parser("stats", help="per-class counts of a corpus")
    p.add_argument("--corpus", required=True)

    p = sub.add_parser("train", help="train one model and evaluate it on the test split")
    _add_training_flags(p, jobs=False)
    p.add_argument("--branches", default="diagram,topology,text",
                   help="comma-separated subset of diagram,topology,text")
    p.add_argument("--undirected", action="store_true", help="undirected-only topology rendering")

    p = sub.add_parser("eval", help="evaluate a saved model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--out", required=True)

    for name, text in (("ablate", "train the six branch combinations"),
                       ("direction", "directed-aware vs undirected-only topology models"),
                       ("sweep", "full model across topology feature sizes")):
        _add_training_flags(sub.add_parser(name, help=text))

    p = sub.add_parser("gradcheck", help="finite-difference checks of every layer and a tiny model")
    p.add_argument("--seed", type=int, default=0)
    return ap


# --- commands --------------------------------------------------------------

def _hyper(args) -> Hyper:
    if args.epochs1 < 0 or args.epochs2 < 0 or args.epochs1 + args.epochs2 == 0:
        raise UsageError("epoch counts must be non-negative and not both zero")
    if args.batch_size < 1:
        raise UsageError("--batch-size must be positive")
    if getattr(args, "jobs", 1) < 1:
        raise UsageError("--jobs must be positive")
    return Hyper(epochs_phase1=args.epochs1, epochs_phase2=args.epochs2,
                 batch_size=args.batch_size, seed=args.seed)


def _table(args):
    if not args.embeddings:
        return None
    path = Path(args.embeddings)
    if not path.is_file():
        raise DataError(f"embeddings file not found: {path}")
    return load_embeddings(path.read_bytes())


def _base_config(table) -> ModelConfig:
    if table is not None and table.dim:
        return ModelConfig(embedding_dim=table.dim)
    return ModelConfig()


def _corpus(args):
    d = Path(args.corpus)
    if not d.is_dir():
        raise DataError(f"corpus directory not found: {d}")
    return load_corpus(d)


def cmd_gen(args) -> int:
    if args.classes == "all":
        classes = CLASS_NAMES
    else:
        classes = tuple(c.strip() for c in args.classes.split(","))
        unknown = [c for c in classes if c not in CLASS_NAMES]
        if unknown:
            raise UsageError(f"unknown class {unknown[0]!r}; choose from {', '.join(CLASS_NAMES)}")
    try:
        spec = CorpusSpec(per_class_count=args.per_class, canvas=args.canvas, seed=args.seed,
                          train_fraction=args.train_fraction, classes=classes)
    except ValueError as e:
        raise UsageError(str(e)) from None
    out = write_corpus(generate_corpus(spec), args.out)
    print(f"wrote {len(classes) * spec.per_class_count} diagrams to {out}")
    return EXIT_OK


def cmd_topo(args) -> int:
    src = Path(args.input)
    if not src.is_file():
        raise DataError(f"annotation file not found: {src}")
    ann = parse_annotation(src.read_bytes())
    mode = RenderMode.UNDIRECTED_ONLY if args.undirected else RenderMode.DIRECTED_AWARE
    suffix = ".topo-u.png" if args.undirected else ".topo.png"
    out_dir = Path(args.out) if args.out else src.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    dest = out_dir / (src.stem + suffix)
    dest.write_bytes(encode_png(render_topology(ann, mode)))
    print(dest)
    return EXIT_OK


def cmd_stats(args) -> int:
    print(format_stats(corpus_stats(_corpus(args).examples)))
    return EXIT_OK


def cmd_train(args) -> int:
    hyper = _hyper(args)
    branches = {b.strip() for b in args.branches.split(",") if b.strip()}
    if not branches or branches - {"diagram", "topology", "text"}:
        raise UsageError(f"--branches must be a subset of diagram,topology,text, got {args.branches!r}")
    table = _table(args)
    corpus = _corpus(args)
    config = dataclasses.replace(
        _base_config(table),
        use_diagram="diagram" in branches, use_topology="topology" in branches, use_text="text" in branches,
        topology_mode=RenderMode.UNDIRECTED_ONLY if args.undirected else RenderMode.DIRECTED_AWARE)
    model, metrics = train(corpus, config, hyper, table)
    out = Path(args.out)
    write_metrics(metrics, out)
    save_model(out / "model.npz", model)
    print(f"test accuracy {metrics.overall_accuracy:.6f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise DataError(f"checkpoint not found: {ckpt}")
    table = _table(args)
    corpus = _corpus(args)
    model = load_model(ckpt)
    cache = FeatureCache(table, model.config.embedding_dim, corpus.invert)
    metrics = evaluate(model, corpus.split(args.split), cache)
    write_metrics(metrics, Path(args.out))
    print(f"{args.split} accuracy {metrics.overall_accuracy:.6f}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    hyper = _hyper(args)
    table = _table(args)
    rows = ablate(_corpus(args), hyper, table, _base_config(table), jobs=args.jobs)
    write_ablation(rows, Path(args.out))
    print(format_table(["variant", "accuracy"], [(r.variant, r.accuracy) for r in rows]))
    return EXIT_OK


def cmd_direction(args) -> int:
    hyper = _hyper(args)
    table = _table(args)
    rep = direction_study(_corpus(args), hyper, table, _base_config(table), jobs=args.jobs)
    write_direction(rep, Path(args.out))
    print(format_table(["class", "directed-aware", "undirected-only"], rep.rows()))
    d, u = rep.pair_accuracy()
    print(f"graph pair: directed-aware {fmt(d)}  undirected-only {fmt(u)}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    hyper = _hyper(args)
    table = _table(args)
    points = dim_sweep(_corpus(args), hyper, table=table, base=_base_config(table), jobs=args.jobs)
    write_sweep(points, Path(args.out))
    print(format_table(["dim", "accuracy"], points))
    return EXIT_OK


def gradcheck_suite(seed: int = 0) -> dict[str, float]:
    """Max relative gradient error per layer type and for a tiny end-to-end model."""
    rng = np.random.default_rng(seed)
    nets = {
        "linear": (Sequential([Linear(6, 4)]), rng.normal(size=(1, 6))),
        "relu": (Sequential([Linear(6, 5), ReLU(), Linear(5, 3)]), rng.normal(size=(1, 6))),
        "conv2d": (Sequential([Conv2d(2, 3), Flatten(), Linear(3 * 36, 3)]), rng.normal(size=(1, 2, 6, 6))),
        "maxpool2": (Sequential([Conv2d(1, 2), MaxPool2(), Flatten(), Linear(2 * 9, 3)]),
                     rng.normal(size=(1, 1, 6, 6))),
    }
    out = {}
    for name, (net, x) in nets.items():
        net.init_params(rng)
        out[name] = grad_check(net, x, target=1)
    model = DPN(tiny_config(), seed=rng)
    side = model.config.input_side
    inputs = {"diagram": rng.random((1, 1, side, side)), "topology": rng.random((1, 1, side, side)),
              "text": rng.normal(size=(1, model.config.embedding_dim))}
    out["dpn-tiny"] = max(dpn_grad_check(model, inputs, target=3).values())
    return out


def cmd_gradcheck(args) -> int:
    errors = gradcheck_suite(args.seed)
    worst = 0.0
    for name, err in errors.items():
        limit = 1e-7 if name in ("linear", "relu") else 1e-4
        status = "ok" if err < limit else "FAIL"
        worst = max(worst, err / limit)
        print(f"{name:10s} max relative error {err:.3e} (limit {limit:.0e}) {status}")
    return EXIT_OK if worst < 1 else EXIT_INTERNAL


COMMANDS = {
    "gen": cmd_gen, "topo": cmd_topo, "stats": cmd_stats, "train": cmd_train, "eval": cmd_eval,
    "ablate": cmd_ablate, "direction": cmd_direction, "sweep": cmd_sweep, "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"csdia {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, AnnotationParseError, AnnotationValidationError,
            PNGError, PlacementError, ValueError) as e:
        msg = str(e).splitlines()[0] if str(e) else type(e).__name__
        print(f"csdia {args.command}: {msg}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # pragma: no cover - last-resort diagnostic
        print(f"csdia {args.command}: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
