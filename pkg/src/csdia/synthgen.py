"""Seeded generator of annotated synthetic diagrams for the 12 categories.

Randomness comes from numpy's PCG64 bit generator. Every example gets its
own child stream ``SeedSequence([seed, class_index, example_index])`` so the
corpus is a pure function of :class:`CorpusSpec` and examples can be built in
any order.

Each example is produced in three stages drawn from that stream, in order:
layout (boxes and edges), text (descriptions), then a single 63-bit style
seed that drives the drawn shape of every node. Keeping the style stream
separate is what lets :func:`restyle` and :func:`paired_graphs` reuse a
layout while changing only how it is drawn.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .annotation import (
    CLASS_NAMES,
    LOGICAL_SYMBOL,
    SEMANTIC_SHAPE,
    BBox,
    DiagramAnnotation,
    DiagramObject,
    GlobalAttributes,
    Relation,
    class_index,
    parse_annotation,
    serialize_annotation,
)
from .raster import (
    GrayRaster,
    decode_image,
    encode_png,
    fill_wedge,
    new_raster,
    stroke_polygon,
)

DEFAULT_CANVAS = (64, 64)
DEFAULT_TRAIN_FRACTION = 951 / 1294
PLACEMENT_ATTEMPTS = 1000
SHAPES = ("circle", "rectangle", "diamond")

COMMON_WORDS = ("element", "value")
CLASS_WORDS: dict[str, tuple[str, ...]] = {
    "array list": ("index", "contiguous", "slot", "offset"),
    "linked list": ("pointer", "next", "node", "traverse"),
    "binary tree": ("left", "right", "binary", "subtree"),
    "non-binary tree": ("children", "branch", "ancestor", "degree"),
    "queue": ("enqueue", "dequeue", "front", "rear"),
    "stack": ("push", "pop", "top", "lifo"),
    "directed graph": ("directed", "source", "target", "outgoing"),
    "undirected graph": ("undirected", "adjacent", "neighbor", "incident"),
    "deadlock": ("thread", "resource", "wait", "hold"),
    "flow chart": ("start", "decision", "process", "loop"),
    "logic circuit": ("gate", "input", "output", "signal"),
    "network topology": ("router", "switch", "host", "link"),
}

# label synonyms used by restyle(); first entry is the generator default
LABEL_SYNONYMS: dict[str, tuple[str, ...]] = {
    "cell": ("cell", "slot", "box"),
    "node": ("node", "vertex", "item"),
    "marker": ("marker", "pointer", "label"),
    "thread": ("thread", "process", "task"),
    "resource": ("resource", "lock", "device"),
    "step": ("step", "process", "action"),
    "decision": ("decision", "branch", "condition"),
    "input": ("input", "signal", "pin"),
    "gate": ("gate", "and gate", "or gate"),
    "output": ("output", "result", "pin"),
    "hub": ("hub", "switch", "router"),
    "host": ("host", "computer", "terminal"),
}


class PlacementError(RuntimeError):
    pass


def vocabulary(class_label: str) -> tuple[str, ...]:
    return COMMON_WORDS + CLASS_WORDS[class_label]


@dataclass(frozen=True)
class CorpusSpec:
    per_class_count: int = 40
    canvas: tuple[int, int] = DEFAULT_CANVAS
    seed: int = 0
    train_fraction: float = DEFAULT_TRAIN_FRACTION
    classes: tuple[str, ...] = CLASS_NAMES

    def __post_init__(self):
        if self.per_class_count < 4:
            raise ValueError("per_class_count must be >= 4")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if min(self.canvas) < 16:
            raise ValueError("canvas sides must be >= 16")
        for c in self.classes:
            class_index(c)

    def test_count(self) -> int:
        return int(math.floor((1.0 - self.train_fraction) * self.per_class_count + 1e-9))


@dataclass(eq=False)
class Example:
    annotation: DiagramAnnotation
    diagram: GrayRaster
    split: str = "train"
    name: str = ""

    @property
    def class_label(self) -> str:
        return self.annotation.global_.class_label


@dataclass(eq=False)
class Corpus:
    spec: CorpusSpec
    examples: list[Example] = field(default_factory=list)
    invert: bool = False  # True for dark-ink-on-white sources

    def split(self, name: str) -> list[Example]:
        return [e for e in self.examples if e.split == name]


# --- layout ----------------------------------------------------------------

@dataclass
class _Node:
    bbox: BBox
    role: str
    shape: str | None = None  # forced drawn shape, otherwise sampled


@dataclass
class _Layout:
    nodes: list[_Node]
    edges: list[tuple[int, int, bool]]  # (head index, tail index, directed)


class _Geom:
    """Canvas-relative size constants (calibrated for a 128 px canvas)."""

    def __init__(self, w: int, h: int):
        self.w, self.h = w, h
        u = min(w, h) / 128.0
        self.margin = max(1, round(4 * u))
        self.gap = max(2, round(6 * u))
        self.smin = max(3, round(10 * u))
        self.smax = max(self.smin, round(16 * u))

    def size(self, rng) -> int:
        return int(rng.integers(self.smin, self.smax + 1))


def _box(cx: float, cy: float, bw: int, bh: int) -> BBox:
    left = int(round(cx - bw / 2))
    lower = int(round(cy - bh / 2))
    return BBox(left=left, right=left + bw, lower=lower, upper=lower + bh)


def _fits(b: BBox, g: _Geom) -> bool:
    return b.left >= 0 and b.lower >= 0 and b.right <= g.w and b.upper <= g.h


def _require(cond: bool, what: str):
    if not cond:
        raise PlacementError(f"canvas too small: {what}")


def _row_of_cells(rng, g: _Geom, n: int, reserve_y: int = 0) -> list[BBox]:
    cw = min(g.size(rng), (g.w - 2 * g.margin) // n)
    ch = g.size(rng)
    _require(cw >= 3, f"{n} cells in a row")
    lo_y = g.margin + reserve_y
    hi_y = g.h - g.margin - reserve_y - ch
    _require(hi_y >= lo_y, "row height")
    x0 = int(rng.integers(g.margin, g.w - g.margin - n * cw + 1))
    y0 = int(rng.integers(lo_y, hi_y + 1))
    return [BBox(x0 + i * cw, x0 + (i + 1) * cw, y0, y0 + ch) for i in range(n)]


def _layout_array(rng, g):
    n = int(rng.integers(4, 9))
    return _Layout([_Node(b, "cell") for b in _row_of_cells(rng, g, n)], [])


def _layout_linked_list(rng, g):
    n = int(rng.integers(3, 8))
    s = g.size(rng)
    gap = int(rng.integers(g.gap, 2 * g.gap + 1))
    avail = g.w - 2 * g.margin
    if n * s + (n - 1) * gap > avail:
        gap = g.gap
        s = (avail - (n - 1) * gap) // n
    _require(s >= 3, f"{n} linked-list boxes")
    total = n * s + (n - 1) * gap
    x0 = int(rng.integers(g.margin, g.w - g.margin - total + 1))
    y0 = int(rng.integers(g.margin, g.h - g.margin - s + 1))
    nodes = [_Node(BBox(x0 + i * (s + gap), x0 + i * (s + gap) + s, y0, y0 + s), "node")
             for i in range(n)]
    return _Layout(nodes, [(i, i + 1, True) for i in range(n - 1)])


def _random_tree(rng, n: int, max_fanout: int, max_depth: int) -> list[int]:
    parent = [-1]
    depth = [0]
    kids = [0]
    for k in range(1, n):
        open_ = [i for i in range(k) if kids[i] < max_fanout and depth[i] < max_depth]
        p = open_[int(rng.integers(len(open_)))]
        parent.append(p)
        depth.append(depth[p] + 1)
        kids.append(0)
        kids[p] += 1
    return parent


def _tree_layout(rng, g: _Geom, parent: list[int]) -> _Layout:
    n = len(parent)
    children: list[list[int]] = [[] for _ in range(n)]
    for k in range(1, n):
        children[parent[k]].append(k)
    depth = [0] * n
    for k in range(1, n):
        depth[k] = depth[parent[k]] + 1
    levels = max(depth) + 1

    # leaves get consecutive slots in DFS order; parents sit at their children's mean
    slot: list[float] = [0.0] * n
    counter = [0]

    def place(v: int):
        if not children[v]:
            slot[v] = counter[0] + 0.5
            counter[0] += 1
            return
        for c in children[v]:
            place(c)
        slot[v] = sum(slot[c] for c in children[v]) / len(children[v])

    place(0)
    leaves = counter[0]
    span_w = (g.w - 2 * g.margin) * float(rng.uniform(0.75, 1.0))
    span_h = (g.h - 2 * g.margin) * float(rng.uniform(0.7, 1.0))
    slot_w = span_w / leaves
    level_h = span_h / levels
    s = min(g.size(rng), int(slot_w) - g.gap // 2, int(level_h) - g.gap)
    _require(s >= 3, f"tree with {leaves} leaves and {levels} levels")
    x0 = g.margin + float(rng.uniform(0, g.w - 2 * g.margin - span_w))
    y0 = g.margin + float(rng.uniform(0, g.h - 2 * g.margin - span_h))
    nodes = []
    for v in range(n):
        b = _box(x0 + slot[v] * slot_w, y0 + (depth[v] + 0.5) * level_h, s, s)
        _require(_fits(b, g), "tree node outside canvas")
        nodes.append(_Node(b, "node"))
    edges = [(parent[k], k, False) for k in range(1, n)]
    return _Layout(nodes, edges)


def _layout_binary_tree(rng, g):
    n = int(rng.integers(3, 10))
    return _tree_layout(rng, g, _random_tree(rng, n, max_fanout=2, max_depth=3))


def _layout_nonbinary_tree(rng, g):
    n = int(rng.integers(4, 11))
    for _ in range(PLACEMENT_ATTEMPTS):
        parent = _random_tree(rng, n, max_fanout=4, max_depth=3)
        fanout = [parent.count(i) for i in range(n)]
        is_star = fanout[0] == n - 1
        # must branch beyond two, and only the 4-node case may be a star
        if max(fanout) >= 3 and (n == 4 or not is_star):
            return _tree_layout(rng, g, parent)
    raise PlacementError("could not sample a non-binary tree")


def _layout_queue(rng, g):
    n = int(rng.integers(4, 9))
    ms = max(3, g.smin - 2)
    cells = _row_of_cells(rng, g, n, reserve_y=ms + g.gap)
    nodes = [_Node(b, "cell") for b in cells]
    for cell_i in (0, n - 1):
        c = cells[cell_i]
        cx = (c.left + c.right) / 2
        if rng.integers(2):
            b = _box(cx, c.lower - g.gap - ms / 2, ms, ms)
        else:
            b = _box(cx, c.upper + g.gap + ms / 2, ms, ms)
        nodes.append(_Node(b, "marker"))
    front, rear = n, n + 1
    return _Layout(nodes, [(front, 0, True), (n - 1, rear, True)])


def _layout_stack(rng, g):
    n = int(rng.integers(3, 8))
    cw = min(int(rng.integers(g.smin + 4, g.smax + 7)), g.w // 3)
    ch = min(int(rng.integers(g.smin - 2, g.smin + 3)), (g.h - 2 * g.margin) // n)
    _require(ch >= 3, f"{n} stacked cells")
    ms = max(3, g.smin - 2)
    on_right = bool(rng.integers(2))
    reserve = ms + g.gap
    x_lo = g.margin + (0 if on_right else reserve)
    x_hi = g.w - g.margin - cw - (reserve if on_right else 0)
    _require(x_hi >= x_lo, "stack width")
    x0 = int(rng.integers(x_lo, x_hi + 1))
    y0 = int(rng.integers(g.margin, g.h - g.margin - n * ch + 1))
    cells = [BBox(x0, x0 + cw, y0 + i * ch, y0 + (i + 1) * ch) for i in range(n)]
    top = cells[0]
    cy = (top.lower + top.upper) / 2
    mx = top.right + g.gap + ms / 2 if on_right else top.left - g.gap - ms / 2
    nodes = [_Node(b, "cell") for b in cells] + [_Node(_box(mx, cy, ms, ms), "marker")]
    return _Layout(nodes, [(n, 0, True)])


def _scatter(rng, g: _Geom, n: int, role: str) -> list[_Node]:
    nodes: list[_Node] = []
    for _ in range(n):
        for _attempt in range(PLACEMENT_ATTEMPTS):
            s = g.size(rng)
            x = int(rng.integers(g.margin, g.w - g.margin - s + 1))
            y = int(rng.integers(g.margin, g.h - g.margin - s + 1))
            b = BBox(x, x + s, y, y + s)
            padded = BBox(x - g.gap, x + s + g.gap, y - g.gap, y + s + g.gap)
            if not any(padded.overlaps(o.bbox) for o in nodes):
                nodes.append(_Node(b, role))
                break
        else:
            raise PlacementError(
                f"canvas too small to place {n} non-overlapping boxes "
                f"after {PLACEMENT_ATTEMPTS} attempts"
            )
    return nodes


def _has_cycle(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    out: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n
    for a, b in edges:
        out[a].append(b)
        indeg[b] += 1
    stack = [v for v in range(n) if indeg[v] == 0]
    seen = 0
    while stack:
        v = stack.pop()
        seen += 1
        for w in out[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                stack.append(w)
    return seen < n


def _layout_graph(rng, g, directed: bool = True):
    """Random graph; the undirected class reuses the directed law verbatim.

    Edges are distinct unordered pairs (no antiparallel arcs) with
    m in [n+1, min(2n, n(n-1)/2)], oriented so at least one directed cycle
    exists. Only the drawn symbol differs between the two classes.
    """
    n = int(rng.integers(4, 9))
    nodes = _scatter(rng, g, n, "node")
    pairs = list(combinations(range(n), 2))
    m_hi = min(2 * n, len(pairs))
    m = int(rng.integers(n + 1, m_hi + 1))
    for _ in range(PLACEMENT_ATTEMPTS):
        chosen = rng.choice(len(pairs), size=m, replace=False)
        flips = rng.integers(2, size=m)
        arcs = [(pairs[c][1], pairs[c][0]) if f else pairs[c] for c, f in zip(chosen, flips)]
        if _has_cycle(n, arcs):
            return _Layout(nodes, [(a, b, directed) for a, b in arcs])
    raise PlacementError("could not sample a cyclic directed graph")


def _layout_deadlock(rng, g):
    s = g.size(rng)
    half_w = float(rng.uniform(0.2, 0.38)) * g.w
    half_h = float(rng.uniform(0.2, 0.38)) * g.h
    _require(2 * half_w - s >= g.gap and 2 * half_h - s >= g.gap, "deadlock square")
    cx = float(rng.uniform(g.margin + half_w + s / 2, g.w - g.margin - half_w - s / 2))
    cy = float(rng.uniform(g.margin + half_h + s / 2, g.h - g.margin - half_h - s / 2))
    corners = [(-1, -1, "thread"), (1, -1, "resource"), (1, 1, "thread"), (-1, 1, "resource")]
    nodes = []
    for sx, sy, role in corners:
        b = _box(cx + sx * half_w, cy + sy * half_h, s, s)
        _require(_fits(b, g), "deadlock node outside canvas")
        nodes.append(_Node(b, role))
    # T1 -> R1 -> T2 -> R2 -> T1
    return _Layout(nodes, [(0, 1, True), (1, 2, True), (2, 3, True), (3, 0, True)])


def _layout_flow_chart(rng, g):
    n = int(rng.integers(4, 8))
    bw = g.size(rng) + int(rng.integers(0, 7))
    bh = min(int(rng.integers(g.smin - 2, g.smin + 3)), (g.h - 2 * g.margin - (n - 1) * g.gap) // n)
    _require(bh >= 3, f"flow chart with {n} steps")
    step = (g.h - 2 * g.margin - bh) / (n - 1)
    step = min(step, bh + 2 * g.gap)
    total = (n - 1) * step + bh
    y0 = float(rng.uniform(g.margin, g.h - g.margin - total))
    x_mid = float(rng.uniform(g.margin + bw, g.w - g.margin - bw))
    decision = int(rng.integers(1, n - 1))
    target = int(rng.integers(0, decision))
    nodes = []
    for i in range(n):
        jitter = float(rng.uniform(-bw / 3, bw / 3))
        b = _box(x_mid + jitter, y0 + i * step + bh / 2, bw, bh)
        _require(_fits(b, g), "flow chart step outside canvas")
        if i == decision:
            nodes.append(_Node(b, "decision", shape="diamond"))
        else:
            nodes.append(_Node(b, "step"))
    edges = [(i, i + 1, True) for i in range(n - 1)] + [(decision, target, True)]
    return _Layout(nodes, edges)


def _column(g: _Geom, x: float, k: int, s: int, rng) -> list[BBox]:
    avail = g.h - 2 * g.margin
    pitch = avail / k
    _require(pitch >= s + g.gap // 2, f"column of {k} boxes")
    off = float(rng.uniform(-pitch / 6, pitch / 6))
    return [_box(x, g.margin + (i + 0.5) * pitch + off, s, s) for i in range(k)]


def _layout_logic_circuit(rng, g):
    k_in = int(rng.integers(2, 5))
    k_gate = int(rng.integers(2, 4))
    s = g.size(rng)
    ncols = 4
    pitch = (g.w - 2 * g.margin) / ncols
    xs = [g.margin + (c + 0.5) * pitch for c in range(ncols)]
    inputs = _column(g, xs[0], k_in, s, rng)
    edges: list[tuple[int, int, bool]] = []
    if k_gate == 2:
        gates = [_column(g, xs[1], 1, s, rng)[0], _column(g, xs[2], 1, s, rng)[0]]
        g1, g2 = k_in, k_in + 1
        for i in range(k_in):
            to = g2 if (i == k_in - 1 and k_in >= 3 and rng.integers(2)) else g1
            edges.append((i, to, True))
        edges.append((g1, g2, True))
        last = g2
    else:
        gates = _column(g, xs[1], 2, s, rng) + [_column(g, xs[2], 1, s, rng)[0]]
        g1, g2, g3 = k_in, k_in + 1, k_in + 2
        edges.append((0, g1, True))
        edges.append((1, g2, True))
        for i in range(2, k_in):
            edges.append((i, (g1, g2, g3)[int(rng.integers(3))], True))
        edges += [(g1, g3, True), (g2, g3, True)]
        last = g3
    out = _column(g, xs[3], 1, s, rng)[0]
    nodes = ([_Node(b, "input") for b in inputs] + [_Node(b, "gate") for b in gates]
             + [_Node(out, "output")])
    for nd in nodes:
        _require(_fits(nd.bbox, g), "logic circuit node outside canvas")
    edges.append((last, len(nodes) - 1, True))
    return _Layout(nodes, edges)


def _layout_network(rng, g):
    n = int(rng.integers(4, 9))
    s = min(g.size(rng), g.smin + 4)
    radius = float(rng.uniform(0.28, 0.36)) * min(g.w, g.h)
    cx = float(rng.uniform(g.margin + radius + s / 2, g.w - g.margin - radius - s / 2 + 1e-9))
    cy = float(rng.uniform(g.margin + radius + s / 2, g.h - g.margin - radius - s / 2 + 1e-9))
    phase = float(rng.uniform(0, 2 * math.pi))
    nodes = [_Node(_box(cx, cy, s + 2, s + 2), "hub")]
    for k in range(n):
        a = phase + 2 * math.pi * k / n
        nodes.append(_Node(_box(cx + radius * math.cos(a), cy + radius * math.sin(a), s, s), "host"))
    for i, a in enumerate(nodes):
        _require(_fits(a.bbox, g), "network node outside canvas")
        for b in nodes[i + 1:]:
            _require(not a.bbox.overlaps(b.bbox), "network nodes overlap")
    return _Layout(nodes, [(0, k, False) for k in range(1, n + 1)])


MAX_FIT_SCALE = 3.0
FIT_JITTER = 0.05  # fraction of the canvas side


def _fit(layout: _Layout, g: _Geom, rng) -> _Layout:
    """Scale a layout about its extent so it fills the canvas, then centre it.

    Diagrams in the wild are cropped to their content; this reproduces that
    framing. Scale is uniform (at most MAX_FIT_SCALE, never shrinking) and the
    placement gets a small random offset, clipped to the free space.
    """
    boxes = [nd.bbox for nd in layout.nodes]
    l0 = min(b.left for b in boxes)
    lo0 = min(b.lower for b in boxes)
    uw = max(b.right for b in boxes) - l0
    uh = max(b.upper for b in boxes) - lo0
    f = min(MAX_FIT_SCALE, (g.w - 2 * g.margin) / uw, (g.h - 2 * g.margin) / uh)
    f = max(f, 1.0)

    def origin(extent: float, side: int) -> float:
        free = side - 2 * g.margin - extent
        if free <= 0:
            return float(g.margin)
        j = FIT_JITTER * side
        off = free / 2 + float(rng.uniform(-j, j))
        return g.margin + min(max(off, 0.0), free)

    ox, oy = origin(uw * f, g.w), origin(uh * f, g.h)

    def mx(x):
        return int(round(ox + (x - l0) * f))

    def my(y):
        return int(round(oy + (y - lo0) * f))

    nodes = []
    for nd in layout.nodes:
        b = nd.bbox
        nb = BBox(mx(b.left), mx(b.right), my(b.lower), my(b.upper))
        _require(_fits(nb, g), "fitted node outside canvas")
        nodes.append(_Node(nb, nd.role, nd.shape))
    return _Layout(nodes, layout.edges)


_LAYOUTS = {
    "array list": _layout_array,
    "linked list": _layout_linked_list,
    "binary tree": _layout_binary_tree,
    "non-binary tree": _layout_nonbinary_tree,
    "queue": _layout_queue,
    "stack": _layout_stack,
    "directed graph": lambda rng, g: _layout_graph(rng, g, directed=True),
    "undirected graph": lambda rng, g: _layout_graph(rng, g, directed=False),
    "deadlock": _layout_deadlock,
    "flow chart": _layout_flow_chart,
    "logic circuit": _layout_logic_circuit,
    "network topology": _layout_network,
}


# --- drawing ---------------------------------------------------------------

ARROW_LEN = 5.0
ARROW_WIDTH = 5.0


def _outline(r: GrayRaster, b: BBox, shape: str):
    l, lo, rt, up = b.left + 0.5, b.lower + 0.5, b.right - 0.5, b.upper - 0.5
    if shape == "rectangle":
        pts = [(l, lo), (rt, lo), (rt, up), (l, up)]
    elif shape == "diamond":
        mx, my = (l + rt) / 2, (lo + up) / 2
        pts = [(mx, lo), (rt, my), (mx, up), (l, my)]
    else:
        mx, my = (l + rt) / 2, (lo + up) / 2
        ax, ay = (rt - l) / 2, (up - lo) / 2
        pts = [(mx + ax * math.cos(t), my + ay * math.sin(t))
               for t in np.linspace(0, 2 * math.pi, 20, endpoint=False)]
    stroke_polygon(r, pts, 1.0)


def _exit_point(b: BBox, toward: tuple[float, float]) -> tuple[float, float]:
    cx, cy = (b.left + b.right) / 2, (b.lower + b.upper) / 2
    dx, dy = toward[0] - cx, toward[1] - cy
    ts = []
    if dx:
        ts.append(b.width / 2 / abs(dx))
    if dy:
        ts.append(b.height / 2 / abs(dy))
    t = min(ts) if ts else 0.0
    return cx + dx * t, cy + dy * t


def _center(b: BBox) -> tuple[float, float]:
    return (b.left + b.right) / 2, (b.lower + b.upper) / 2


def _edge_segment(a: BBox, b: BBox):
    return _exit_point(a, _center(b)), _exit_point(b, _center(a))


def _draw(canvas: tuple[int, int], bboxes: Sequence[BBox], shapes: Sequence[str],
          edges: Sequence[tuple[int, int, bool]]) -> GrayRaster:
    r = new_raster(*canvas)
    for b, shape in zip(bboxes, shapes):
        _outline(r, b, shape)
    for h, t, directed in edges:
        p0, p1 = _edge_segment(bboxes[h], bboxes[t])
        length = math.dist(p0, p1)
        if length > 0:
            fill_wedge(r, p0, 1.0, p1, 1.0)
        if directed and length > 0:
            ux, uy = (p1[0] - p0[0]) / length, (p1[1] - p0[1]) / length
            al = min(ARROW_LEN, length)
            base = (p1[0] - ux * al, p1[1] - uy * al)
            fill_wedge(r, base, ARROW_WIDTH, p1, 0.0)
    return r


def _symbol_bbox(a: BBox, b: BBox, canvas: tuple[int, int]) -> BBox:
    (x0, y0), (x1, y1) = _edge_segment(a, b)
    w, h = canvas
    left = max(0, int(math.floor(min(x0, x1))) - 1)
    right = min(w, int(math.ceil(max(x0, x1))) + 1)
    lower = max(0, int(math.floor(min(y0, y1))) - 1)
    upper = min(h, int(math.ceil(max(y0, y1))) + 1)
    return BBox(left, right, lower, upper)


def _sample_words(rng, vocab: Sequence[str]) -> str:
    k = min(int(rng.integers(2, 5)), len(vocab))
    idx = rng.choice(len(vocab), size=k, replace=False)
    return " ".join(vocab[i] for i in idx)


def _assemble(class_label: str, layout: _Layout, canvas: tuple[int, int],
              global_desc: str, node_desc: Sequence[str], style_seed: int,
              source: str) -> Example:
    n = len(layout.nodes)
    objects = [
        DiagramObject(id=i + 1, kind=SEMANTIC_SHAPE, label=nd.role,
                      bbox=nd.bbox, description=node_desc[i])
        for i, nd in enumerate(layout.nodes)
    ]
    relations = []
    for j, (h, t, directed) in enumerate(layout.edges):
        symbol = "arrow" if directed else "line"
        objects.append(DiagramObject(
            id=n + j + 1, kind=LOGICAL_SYMBOL, label=symbol,
            bbox=_symbol_bbox(layout.nodes[h].bbox, layout.nodes[t].bbox, canvas),
        ))
        relations.append(Relation(id=j + 1, symbol_label=symbol, head_id=h + 1, tail_id=t + 1))
    ann = DiagramAnnotation(
        global_=GlobalAttributes(source=source, class_label=class_label, description=global_desc),
        canvas_w=canvas[0], canvas_h=canvas[1],
        objects=tuple(objects), relations=tuple(relations),
    )
    style = np.random.default_rng(style_seed)
    shapes = [nd.shape or SHAPES[int(style.integers(len(SHAPES)))] for nd in layout.nodes]
    diagram = _draw(canvas, [nd.bbox for nd in layout.nodes], shapes, layout.edges)
    return Example(annotation=ann, diagram=diagram)


def generate_diagram(class_label: str, rng: np.random.Generator,
                     canvas: tuple[int, int] = DEFAULT_CANVAS, source: str = "synthetic") -> Example:
    class_index(class_label)
    g = _Geom(*canvas)
    layout = _fit(_LAYOUTS[class_label](rng, g), g, rng)
    vocab = vocabulary(class_label)
    global_desc = _sample_words(rng, vocab)
    node_desc = [_sample_words(rng, vocab) for _ in layout.nodes]
    style_seed = int(rng.integers(2**63))
    return _assemble(class_label, layout, canvas, global_desc, node_desc, style_seed, source)


def restyle(e: Example, rng: np.random.Generator) -> Example:
    """Redraw ``e`` with freshly sampled node shapes and label synonyms.

    Boxes, relations and descriptions are kept, so the topology is unchanged.
    """
    a = e.annotation
    sem = sorted(a.semantic_objects(), key=lambda o: o.id)
    pos = {o.id: i for i, o in enumerate(sem)}
    objects = []
    for o in a.objects:
        if o.kind == SEMANTIC_SHAPE:
            pool = LABEL_SYNONYMS.get(o.label, (o.label,))
            for syn in LABEL_SYNONYMS.values():
                if o.label in syn:
                    pool = syn
            o = replace(o, label=pool[int(rng.integers(len(pool)))])
        objects.append(o)
    shapes = [SHAPES[int(rng.integers(len(SHAPES)))] for _ in sem]
    edges = [(pos[r.head_id], pos[r.tail_id], r.directed) for r in a.relations]
    diagram = _draw((a.canvas_w, a.canvas_h), [o.bbox for o in sem], shapes, edges)
    return Example(annotation=replace(a, objects=tuple(objects)), diagram=diagram,
                   split=e.split, name=e.name)


def paired_graphs(rng: np.random.Generator, canvas: tuple[int, int] = DEFAULT_CANVAS):
    """A directed-graph example and an undirected-graph twin with the same layout.

    The pair shares boxes, edge endpoints, descriptions and node shapes; only
    relation symbols (and the arrowheads they imply) differ. Descriptions use
    the words common to every class so neither member leaks its class in text.
    """
    g = _Geom(*canvas)
    layout = _fit(_layout_graph(rng, g, directed=True), g, rng)
    global_desc = _sample_words(rng, COMMON_WORDS)
    node_desc = [_sample_words(rng, COMMON_WORDS) for _ in layout.nodes]
    style_seed = int(rng.integers(2**63))
    directed = _assemble("directed graph", layout, canvas, global_desc, node_desc,
                         style_seed, "synthetic-pair")
    flat = _Layout(layout.nodes, [(h, t, False) for h, t, _ in layout.edges])
    undirected = _assemble("undirected graph", flat, canvas, global_desc, node_desc,
                           style_seed, "synthetic-pair")
    return directed, undirected


def example_rng(seed: int, class_label: str, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence([seed & (2**64 - 1), class_index(class_label), index])
    return np.random.Generator(np.random.PCG64(ss))


def slug(class_label: str) -> str:
    return class_label.replace(" ", "-")


def generate_corpus(spec: CorpusSpec) -> Corpus:
    n_test = spec.test_count()
    examples = []
    for c in spec.classes:
        for i in range(spec.per_class_count):
            e = generate_diagram(c, example_rng(spec.seed, c, i), spec.canvas,
                                 source=f"synthetic:seed={spec.seed}:{slug(c)}:{i}")
            e.split = "test" if i >= spec.per_class_count - n_test else "train"
            e.name = f"{slug(c)}-{i:04d}"
            examples.append(e)
    return Corpus(spec=spec, examples=examples)


# --- statistics ------------------------------------------------------------

@dataclass(frozen=True)
class StatsRow:
    category: str
    diagrams: int
    objects: int
    relations: int


def corpus_stats(examples: Iterable[Example]) -> list[StatsRow]:
    """Per-class counts in fixed category order, followed by a Total row."""
    counts = {c: [0, 0, 0] for c in CLASS_NAMES}
    for e in examples:
        row = counts[e.class_label]
        row[0] += 1
        row[1] += len(e.annotation.objects)
        row[2] += len(e.annotation.relations)
    rows = [StatsRow(c, *counts[c]) for c in CLASS_NAMES]
    rows.append(StatsRow("Total", *(sum(r[k] for r in counts.values()) for k in range(3))))
    return rows


def format_stats(rows: Sequence[StatsRow]) -> str:
    out = [f"{'Category':<18}{'Diagrams':>10}{'Objects':>10}{'Relations':>11}", "-" * 49]
    for r in rows:
        if r.category == "Total":
            out.append("-" * 49)
        out.append(f"{r.category.title():<18}{r.diagrams:>10,}{r.objects:>10,}{r.relations:>11,}")
    return "\n".join(out)


# --- corpus directories ----------------------------------------------------

MANIFEST = "manifest.csv"
CORPUS_META = "corpus.json"


def write_corpus(corpus: Corpus, out_dir: str | os.PathLike) -> Path:
    """One ``.json`` annotation and one ``.png`` diagram per example plus a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path", "class", "split"])
    for e in corpus.examples:
        (out / f"{e.name}.json").write_bytes(serialize_annotation(e.annotation))
        (out / f"{e.name}.png").write_bytes(encode_png(e.diagram))
        w.writerow([f"{e.name}.json", e.class_label, e.split])
    (out / MANIFEST).write_text(buf.getvalue(), encoding="utf-8")
    s = corpus.spec
    meta = {
        "per_class_count": s.per_class_count, "canvas": list(s.canvas), "seed": s.seed,
        "train_fraction": s.train_fraction, "classes": list(s.classes),
        "invert": corpus.invert, "rng": "numpy PCG64 via SeedSequence([seed, class, index])",
    }
    (out / CORPUS_META).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return out


def load_corpus(corpus_dir: str | os.PathLike) -> Corpus:
    d = Path(corpus_dir)
    manifest = d / MANIFEST
    if not manifest.exists():
        raise FileNotFoundError(f"no {MANIFEST} in {d}")
    meta = {}
    if (d / CORPUS_META).exists():
        meta = json.loads((d / CORPUS_META).read_text(encoding="utf-8"))
    examples = []
    with manifest.open(newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            ann = parse_annotation((d / row["path"]).read_bytes())
            if ann.global_.class_label != row["class"]:
                raise ValueError(f"{row['path']}: manifest class {row['class']!r} "
                                 f"!= annotation class {ann.global_.class_label!r}")
            png = d / (Path(row["path"]).stem + ".png")
            diagram = decode_image(png.read_bytes())
            if (diagram.width, diagram.height) != (ann.canvas_w, ann.canvas_h):
                raise ValueError(f"{png.name}: image size does not match annotation canvas")
            if row["split"] not in ("train", "test"):
                raise ValueError(f"{row['path']}: unknown split {row['split']!r}")
            examples.append(Example(ann, diagram, row["split"], Path(row["path"]).stem))
    classes = tuple(meta.get("classes") or sorted({e.class_label for e in examples},
                                                  key=class_index))
    per_class = meta.get("per_class_count") or max(
        4, min((sum(e.class_label == c for e in examples) for c in classes), default=4))
    spec = CorpusSpec(
        per_class_count=per_class,
        canvas=tuple(meta.get("canvas", DEFAULT_CANVAS)),
        seed=meta.get("seed", 0),
        train_fraction=meta.get("train_fraction", DEFAULT_TRAIN_FRACTION),
        classes=classes,
    )
    return Corpus(spec=spec, examples=examples, invert=bool(meta.get("invert", False)))
