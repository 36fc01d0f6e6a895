"""Three-branch diagram classifier.

Branches (each optional):

* diagram  -- small CNN over the rendered diagram, reduced to ``dim_diagram``
* text     -- mean word embedding -> FC+ReLU (hidden) -> FC+ReLU (``dim_text``)
* topology -- same CNN architecture, separate weights, over the topology raster

Enabled branch vectors are concatenated in the order diagram, text, topology,
fused by FC+ReLU to ``fused_dim``, and classified by one linear layer and a
softmax. Disabled branches are left out of the concatenation entirely.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .annotation import DiagramAnnotation
from .raster import to_input
from .tensornet import (
    DTYPE,
    Conv2d,
    Flatten,
    Linear,
    MaxPool2,
    ReLU,
    Sequential,
    ShapeError,
    load_params,
    numeric_gradient,
    relative_error,
    save_params,
    softmax,
    softmax_cross_entropy,
)
from .topology import RenderMode, render_topology

BRANCHES = ("diagram", "text", "topology")


@dataclass(frozen=True)
class ModelConfig:
    use_diagram: bool = True
    use_topology: bool = True
    use_text: bool = True
    dim_diagram: int = 120
    dim_topology: int = 100
    dim_text: int = 40
    reducer_hidden: int = 80
    fused_dim: int = 128
    input_side: int = 64
    num_classes: int = 12
    embedding_dim: int = 50
    topology_mode: RenderMode = RenderMode.DIRECTED_AWARE

    def __post_init__(self):
        if not (self.use_diagram or self.use_topology or self.use_text):
            raise ValueError("at least one branch must be enabled")
        for f in ("dim_diagram", "dim_topology", "dim_text", "reducer_hidden",
                  "fused_dim", "num_classes", "embedding_dim"):
            if getattr(self, f) < 1:
                raise ValueError(f"{f} must be >= 1")
        if self.input_side < 4 or self.input_side % 4:
            raise ValueError("input_side must be a positive multiple of 4")
        object.__setattr__(self, "topology_mode", RenderMode(self.topology_mode))

    @property
    def enabled(self) -> tuple[str, ...]:
        flags = {"diagram": self.use_diagram, "text": self.use_text, "topology": self.use_topology}
        return tuple(b for b in BRANCHES if flags[b])

    def branch_dim(self, branch: str) -> int:
        return {"diagram": self.dim_diagram, "text": self.dim_text,
                "topology": self.dim_topology}[branch]

    @property
    def concat_dim(self) -> int:
        return sum(self.branch_dim(b) for b in self.enabled)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["topology_mode"] = self.topology_mode.value
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> ModelConfig:
        return cls(**{**d, "topology_mode": RenderMode(d["topology_mode"])})


# --- embeddings ------------------------------------------------------------

@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]

    def get(self, token: str) -> np.ndarray | None:
        return self.vectors.get(token)

    def __len__(self):
        return len(self.vectors)


class HashEmbeddingTable:
    """Deterministic stand-in for pretrained vectors: one Gaussian per token.

    Each vector is rescaled to ``norm`` (default sqrt(dim), the typical length
    of a GloVe vector with unit-variance entries). The token's UTF-8 bytes are hashed (BLAKE2b, 8 bytes) into the seed of a
    PCG64 stream; no file or network access is needed.
    """

    def __init__(self, dim: int = 50, norm: float | None = None):
        self.dim = dim
        self.norm = float(np.sqrt(dim)) if norm is None else norm
        self._cache: dict[str, np.ndarray] = {}

    def get(self, token: str) -> np.ndarray:
        v = self._cache.get(token)
        if v is None:
            seed = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")
            v = np.random.Generator(np.random.PCG64(seed)).standard_normal(self.dim)
            v *= self.norm / np.linalg.norm(v)
            self._cache[token] = v
        return v


def load_embeddings(data: bytes | str) -> EmbeddingTable:
    """Parse GloVe-style text: one ``token v1 ... vd`` line per token."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    vectors: dict[str, np.ndarray] = {}
    dim = 0
    for lineno, line in enumerate(data.splitlines(), 1):
        parts = line.rstrip().split(" ")
        if not parts or parts == [""]:
            continue
        token, values = parts[0], parts[1:]
        if dim == 0:
            dim = len(values)
            if dim == 0:
                raise ValueError(f"line {lineno}: token {token!r} has no values")
        elif len(values) != dim:
            raise ValueError(f"line {lineno}: ragged embedding, {len(values)} values where {dim} expected")
        try:
            vectors[token] = np.array([float(v) for v in values], dtype=DTYPE)
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric value") from None
    return EmbeddingTable(dim=dim, vectors=vectors)


def embed_text(tokens: Sequence[str], table, dim: int) -> np.ndarray:
    """Mean of token vectors; OOV tokens count as zero vectors.

    Tokens are lower-cased and sorted first so the result depends only on the
    token multiset, bit for bit.
    """
    toks = sorted(t.lower() for t in tokens)
    if not toks:
        return np.zeros(dim, DTYPE)
    acc = np.zeros(dim, DTYPE)
    for t in toks:
        v = table.get(t)
        if v is not None:
            if len(v) != dim:
                raise ShapeError(f"embedding for {t!r} has dim {len(v)}, expected {dim}")
            acc += v
    return acc / len(toks)


# --- model -----------------------------------------------------------------

def visual_net(side: int, hidden: int, out_dim: int) -> Sequential:
    flat = 16 * (side // 4) ** 2
    return Sequential([
        Conv2d(1, 8), ReLU(), MaxPool2(),
        Conv2d(8, 16), ReLU(), MaxPool2(),
        Flatten(),
        Linear(flat, hidden), ReLU(),
        Linear(hidden, out_dim), ReLU(),
    ])


def text_net(emb_dim: int, hidden: int, out_dim: int) -> Sequential:
    return Sequential([Linear(emb_dim, hidden), ReLU(), Linear(hidden, out_dim), ReLU()])


@dataclass
class Features:
    """Per-example branch inputs; arrays for disabled branches may be None."""

    diagram: np.ndarray | None  # (1, side, side)
    topology: np.ndarray | None  # (1, side, side)
    text: np.ndarray | None  # (embedding_dim,)


class DPN:
    def __init__(self, config: ModelConfig, seed: int | np.random.Generator = 0):
        self.config = config
        c = config
        self.branches: dict[str, Sequential] = {}
        if c.use_diagram:
            self.branches["diagram"] = visual_net(c.input_side, c.reducer_hidden, c.dim_diagram)
        if c.use_text:
            self.branches["text"] = text_net(c.embedding_dim, c.reducer_hidden, c.dim_text)
        if c.use_topology:
            self.branches["topology"] = visual_net(c.input_side, c.reducer_hidden, c.dim_topology)
        self.fusion = Sequential([Linear(c.concat_dim, c.fused_dim), ReLU()])
        self.classifier = Sequential([Linear(c.fused_dim, c.num_classes)])
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        for net in self._modules().values():
            net.init_params(rng)
        self._splits: list[tuple[str, int, int]] = []

    def _modules(self) -> dict[str, Sequential]:
        mods = dict(self.branches)
        mods["fusion"] = self.fusion
        mods["classifier"] = self.classifier
        return mods

    def named_params(self):
        """(name, array, grads dict, key) for every trainable array, in fixed order."""
        out = []
        for name, net in self._modules().items():
            out.extend(net.named_params(prefix=f"{name}."))
        return out

    def params(self) -> dict[str, np.ndarray]:
        return {name: p for name, p, _, _ in self.named_params()}

    def grads(self) -> dict[str, np.ndarray]:
        return {name: g[k] for name, _, g, k in self.named_params()}

    def zero_grad(self):
        for net in self._modules().values():
            net.zero_grad()

    def branch_vectors(self, inputs: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
        vecs = {}
        for b, net in self.branches.items():
            x = inputs.get(b)
            if x is None:
                raise ValueError(f"missing input for enabled branch {b!r}")
            if b != "text" and x.shape[-1] != self.config.input_side:
                raise ShapeError(f"{b} input side {x.shape[-1]} != configured {self.config.input_side}")
            vecs[b] = net.forward(x)
        return vecs

    def logits(self, inputs: Mapping[str, np.ndarray]) -> np.ndarray:
        vecs = self.branch_vectors(inputs)
        return self.fuse_logits(vecs)

    def fuse_logits(self, vecs: Mapping[str, np.ndarray]) -> np.ndarray:
        parts, self._splits, start = [], [], 0
        for b in self.config.enabled:
            v = vecs[b]
            parts.append(v)
            self._splits.append((b, start, start + v.shape[1]))
            start += v.shape[1]
        r = self.fusion.forward(np.concatenate(parts, axis=1))
        return self.classifier.forward(r)

    def forward(self, inputs: Mapping[str, np.ndarray]) -> np.ndarray:
        return softmax(self.logits(inputs))

    def backward(self, grad_logits: np.ndarray, input_grads: bool = True) -> dict[str, np.ndarray]:
        """Backpropagate logit gradients; returns gradients w.r.t. branch inputs.

        With ``input_grads=False`` the image branches skip their (unused) input
        gradient and report None for it.
        """
        for b in ("diagram", "topology"):
            if b in self.branches:
                self.branches[b].layers[0].input_grad = input_grads
        g = self.fusion.backward(self.classifier.backward(grad_logits))
        return {b: self.branches[b].backward(g[:, lo:hi]) for b, lo, hi in self._splits}

    # entry points on single examples

    def text_branch(self, x_t: np.ndarray) -> np.ndarray:
        return self.branches["text"].forward(np.asarray(x_t, DTYPE)[None, :])[0]

    def visual_branch(self, x: np.ndarray, which: str = "diagram") -> np.ndarray:
        if x.shape[-1] != self.config.input_side or x.shape[-2] != self.config.input_side:
            raise ShapeError(f"expected side {self.config.input_side}, got {x.shape}")
        return self.branches[which].forward(np.asarray(x, DTYPE)[None])[0]

    def fuse_classify(self, v_d=None, v_t=None, v_l=None) -> np.ndarray:
        given = {"diagram": v_d, "text": v_t, "topology": v_l}
        vecs = {}
        for b in self.config.enabled:
            if given[b] is None:
                raise ValueError(f"enabled branch {b!r} needs a vector")
            vecs[b] = np.asarray(given[b], DTYPE)[None, :]
        return softmax(self.fuse_logits(vecs))[0]


def text_branch(x_t, model: DPN):
    return model.text_branch(x_t)


def visual_branch(x, model: DPN, which: str = "diagram"):
    return model.visual_branch(x, which)


def fuse_classify(v_d, v_t, v_l, model: DPN):
    return model.fuse_classify(v_d, v_t, v_l)


# --- inputs ----------------------------------------------------------------

def featurize(annotation: DiagramAnnotation, diagram, config: ModelConfig, table,
              invert: bool = False) -> Features:
    side = config.input_side
    return Features(
        diagram=to_input(diagram, side, invert) if config.use_diagram else None,
        topology=(to_input(render_topology(annotation, config.topology_mode), side, False)
                  if config.use_topology else None),
        text=(embed_text(annotation.text_tokens(), table, config.embedding_dim)
              if config.use_text else None),
    )


def stack_features(feats: Sequence[Features], config: ModelConfig) -> dict[str, np.ndarray]:
    out = {}
    for b in config.enabled:
        out[b] = np.stack([getattr(f, b) for f in feats])
    return out


def model_forward(example, model: DPN, table=None, invert: bool = False) -> np.ndarray:
    """Class probabilities for one example (annotation + rendered diagram)."""
    table = table if table is not None else HashEmbeddingTable(model.config.embedding_dim)
    f = featurize(example.annotation, example.diagram, model.config, table, invert)
    return model.forward(stack_features([f], model.config))[0]


def predict(example, model: DPN, table=None, invert: bool = False) -> int:
    return int(np.argmax(model_forward(example, model, table, invert)))


# --- verification ----------------------------------------------------------

def dpn_grad_check(model: DPN, inputs: Mapping[str, np.ndarray], target: int,
                   eps: float = 1e-5) -> dict[str, float]:
    """Max relative error per parameter group and per branch input (batch of one)."""
    inputs = {k: np.array(v, dtype=DTYPE) for k, v in inputs.items()}

    def loss() -> float:
        return softmax_cross_entropy(model.logits(inputs)[0], target)[0]

    model.zero_grad()
    _, g = softmax_cross_entropy(model.logits(inputs)[0], target)
    in_grads = model.backward(g[None, :])
    errors = {}
    for b, gi in in_grads.items():
        errors[f"input.{b}"] = relative_error(gi, numeric_gradient(loss, inputs[b], eps))
    for name, p, grads, k in model.named_params():
        errors[name] = relative_error(grads[k], numeric_gradient(loss, p, eps))
    return errors


def tiny_config(**overrides) -> ModelConfig:
    base = dict(input_side=16, dim_diagram=8, dim_topology=8, dim_text=8,
                reducer_hidden=8, fused_dim=8)
    base.update(overrides)
    return ModelConfig(**base)


# --- checkpoints -----------------------------------------------------------

def save_model(path, model: DPN):
    save_params(path, model.params(), {"format": "csdia-dpn/1", "config": model.config.to_dict()})


def load_model(path) -> DPN:
    params, header = load_params(path)
    config = ModelConfig.from_dict(header["config"])
    model = DPN(config, seed=0)
    current = model.params()
    if set(current) != set(params):
        raise ValueError("checkpoint parameters do not match its config")
    for k, v in params.items():
        if current[k].shape != v.shape:
            raise ShapeError(f"{k}: checkpoint shape {v.shape} != model shape {current[k].shape}")
        current[k][...] = v
    return model
