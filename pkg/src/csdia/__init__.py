"""Diagram classification with explicit topology: annotations, rendering, a numpy DPN and experiments."""

from .annotation import CLASS_NAMES, DiagramAnnotation, parse_annotation, serialize_annotation
from .dpn import DPN, ModelConfig
from .harness import Hyper, Metrics, ablate, dim_sweep, direction_study, evaluate, train
from .synthgen import CorpusSpec, generate_corpus, generate_diagram, paired_graphs
from .topology import RenderMode, render_topology

__version__ = "0.1.0"

__all__ = [
    "CLASS_NAMES", "DiagramAnnotation", "parse_annotation", "serialize_annotation",
    "DPN", "ModelConfig", "Hyper", "Metrics", "ablate", "dim_sweep", "direction_study",
    "evaluate", "train", "CorpusSpec", "generate_corpus", "generate_diagram", "paired_graphs",
    "RenderMode", "render_topology",
]
