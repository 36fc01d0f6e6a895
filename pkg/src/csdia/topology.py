"""Topology rendering: objects become circles, relations become tapered wedges.

Circle centres sit at bounding-box midpoints. Radii follow

    lambda_r = (H * W) ** (1/8) / 10
    r        = lambda_r**2 * sqrt(box_h * box_w) / pi      (floored at 2 px)

Undirected relations are drawn with constant width (r_head + r_tail) / 2;
directed ones taper from 0 at the head to r_tail at the tail.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping

from .annotation import SEMANTIC_SHAPE, BBox, DiagramAnnotation, Relation
from .raster import GrayRaster, fill_circle, fill_wedge, new_raster

MIN_RADIUS = 2.0


class RenderMode(str, enum.Enum):
    DIRECTED_AWARE = "directed-aware"
    UNDIRECTED_ONLY = "undirected-only"


@dataclass(frozen=True)
class TopologyNode:
    object_id: int
    cx: float
    cy: float
    radius: float


@dataclass(frozen=True)
class TopologyEdge:
    head: int
    tail: int
    w_head: float
    w_tail: float
    directed: bool


def lambda_r(canvas_w: int, canvas_h: int) -> float:
    return (canvas_h * canvas_w) ** (1.0 / 8.0) / 10.0


def raw_radius(b: BBox, canvas_w: int, canvas_h: int) -> float:
    """Unclamped radius; exposed so scaling behaviour can be checked exactly."""
    lam = lambda_r(canvas_w, canvas_h)
    return lam * lam * math.sqrt(b.height * b.width) / math.pi


def node_geometry(b: BBox, canvas_w: int, canvas_h: int, object_id: int = 0) -> TopologyNode:
    return TopologyNode(
        object_id=object_id,
        cx=(b.left + b.right) / 2.0,
        cy=(b.lower + b.upper) / 2.0,
        radius=max(raw_radius(b, canvas_w, canvas_h), MIN_RADIUS),
    )


def edge_geometry(rel: Relation, nodes: Mapping[int, TopologyNode], mode: RenderMode) -> TopologyEdge:
    for which, oid in (("head", rel.head_id), ("tail", rel.tail_id)):
        if oid not in nodes:
            raise KeyError(f"relation {rel.id}: {which} object {oid} has no topology node")
    r_head = nodes[rel.head_id].radius
    r_tail = nodes[rel.tail_id].radius
    if rel.directed and RenderMode(mode) is RenderMode.DIRECTED_AWARE:
        return TopologyEdge(rel.head_id, rel.tail_id, 0.0, r_tail, True)
    w = (r_head + r_tail) / 2.0
    return TopologyEdge(rel.head_id, rel.tail_id, w, w, False)


def topology_geometry(a: DiagramAnnotation, mode: RenderMode) -> tuple[dict[int, TopologyNode], list[TopologyEdge]]:
    nodes = {
        o.id: node_geometry(o.bbox, a.canvas_w, a.canvas_h, o.id)
        for o in a.objects if o.kind == SEMANTIC_SHAPE
    }
    kinds = {o.id: o.kind for o in a.objects}
    edges = []
    for rel in a.relations:
        for oid in (rel.head_id, rel.tail_id):
            if oid not in nodes:
                raise ValueError(
                    f"relation {rel.id} references object {oid} of kind "
                    f"{kinds.get(oid, 'missing')!r}; only semantic shapes can be endpoints"
                )
        edges.append(edge_geometry(rel, nodes, mode))
    return nodes, edges


def render_topology(a: DiagramAnnotation, mode: RenderMode = RenderMode.DIRECTED_AWARE) -> GrayRaster:
    """Rasterise the abstract topology of ``a`` at canvas resolution.

    Wedges go down first and circles on top, so the circles hide wedge ends.
    Logical-symbol objects are not drawn.
    """
    nodes, edges = topology_geometry(a, mode)
    r = new_raster(a.canvas_w, a.canvas_h)
    for e in edges:
        h, t = nodes[e.head], nodes[e.tail]
        if (h.cx, h.cy) == (t.cx, t.cy):
            continue  # coincident centres: the circles already cover the edge
        fill_wedge(r, (h.cx, h.cy), e.w_head, (t.cx, t.cy), e.w_tail)
    for n in nodes.values():
        fill_circle(r, n.cx, n.cy, n.radius)
    return r
