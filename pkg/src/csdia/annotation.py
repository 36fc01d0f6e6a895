"""Annotation data model for diagrams: global attributes, objects, relations.

The on-disk carrier is UTF-8 JSON, one diagram per file::

    {
      "source": "...", "class": "binary tree", "description": "...",
      "canvas": [w, h],
      "objects": [{"id": 1, "kind": "semantic-shape", "label": "node",
                   "description": "", "bbox": [left, lower, right, upper]}],
      "relations": [{"id": 1, "symbol": "line", "head": 1, "tail": 2}]
    }

Serialization is canonical: keys in the order above, objects and relations
sorted by id, so equal annotations always produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

CLASS_NAMES: tuple[str, ...] = (
    "array list",
    "linked list",
    "binary tree",
    "non-binary tree",
    "queue",
    "stack",
    "directed graph",
    "undirected graph",
    "deadlock",
    "flow chart",
    "logic circuit",
    "network topology",
)
_CLASS_INDEX = {name: i for i, name in enumerate(CLASS_NAMES)}

SEMANTIC_SHAPE = "semantic-shape"
LOGICAL_SYMBOL = "logical-symbol"
OBJECT_KINDS = (SEMANTIC_SHAPE, LOGICAL_SYMBOL)
SYMBOLS = ("arrow", "line")

MIN_CANVAS = 16


class AnnotationParseError(ValueError):
    """Malformed annotation text; carries the line/column of the failure."""

    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {msg}")
        self.line = line
        self.column = column


class AnnotationValidationError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


def class_index(label: str) -> int:
    try:
        return _CLASS_INDEX[label]
    except KeyError:
        raise ValueError(
            f"unknown class {label!r}; expected one of: {', '.join(CLASS_NAMES)}"
        ) from None


def class_name(index: int) -> str:
    if not 0 <= index < len(CLASS_NAMES):
        raise ValueError(f"class index {index} outside [0, {len(CLASS_NAMES)})")
    return CLASS_NAMES[index]


@dataclass(frozen=True)
class BBox:
    left: int
    right: int
    lower: int
    upper: int

    @property
    def width(self) -> int:
        return self.right - self.left

    @property
    def height(self) -> int:
        return self.upper - self.lower

    def as_list(self) -> list[int]:
        # file order is [left, lower, right, upper]
        return [self.left, self.lower, self.right, self.upper]

    def overlaps(self, other: BBox) -> bool:
        """True if the open interiors intersect; shared edges do not count."""
        return (
            self.left < other.right
            and other.left < self.right
            and self.lower < other.upper
            and other.lower < self.upper
        )


@dataclass(frozen=True)
class DiagramObject:
    id: int
    kind: str
    label: str
    bbox: BBox
    description: str = ""


@dataclass(frozen=True)
class Relation:
    id: int
    symbol_label: str
    head_id: int
    tail_id: int

    @property
    def directed(self) -> bool:
        return self.symbol_label == "arrow"


@dataclass(frozen=True)
class GlobalAttributes:
    source: str
    class_label: str
    description: str = ""


@dataclass(frozen=True)
class DiagramAnnotation:
    global_: GlobalAttributes
    canvas_w: int
    canvas_h: int
    objects: tuple[DiagramObject, ...] = field(default_factory=tuple)
    relations: tuple[Relation, ...] = field(default_factory=tuple)

    def object_by_id(self) -> dict[int, DiagramObject]:
        return {o.id: o for o in self.objects}

    def semantic_objects(self) -> list[DiagramObject]:
        return [o for o in self.objects if o.kind == SEMANTIC_SHAPE]

    def text_tokens(self) -> list[str]:
        """Whitespace tokens of the global description and every object description."""
        tokens = self.global_.description.split()
        for o in self.objects:
            tokens.extend(o.description.split())
        return tokens


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def validate(a: DiagramAnnotation) -> list[str]:
    """Return a list of invariant violations; empty means the annotation is valid."""
    out: list[str] = []
    g = a.global_
    if g.class_label not in _CLASS_INDEX:
        out.append(
            f"global.class: {g.class_label!r} is not one of the 12 categories "
            f"({', '.join(CLASS_NAMES)})"
        )
    for name, v in (("canvas_w", a.canvas_w), ("canvas_h", a.canvas_h)):
        if not _is_int(v) or v < MIN_CANVAS:
            out.append(f"{name}: must be an integer >= {MIN_CANVAS}, got {v!r}")

    seen: set[int] = set()
    for o in a.objects:
        where = f"objects[id={o.id}]"
        if not _is_int(o.id) or o.id < 1:
            out.append(f"{where}.id: must be a positive integer")
        elif o.id in seen:
            out.append(f"{where}.id: duplicate object id {o.id}")
        seen.add(o.id)
        if o.kind not in OBJECT_KINDS:
            out.append(f"{where}.kind: {o.kind!r} not in {OBJECT_KINDS}")
        if not o.label:
            out.append(f"{where}.label: must be non-empty")
        b = o.bbox
        if not all(_is_int(v) for v in (b.left, b.right, b.lower, b.upper)):
            out.append(f"{where}.bbox: coordinates must be integers")
            continue
        if b.right <= b.left:
            out.append(f"{where}.bbox: BBox ordering requires right > left ({b.right} <= {b.left})")
        if b.upper <= b.lower:
            out.append(f"{where}.bbox: BBox ordering requires upper > lower ({b.upper} <= {b.lower})")
        if min(b.left, b.right, b.lower, b.upper) < 0:
            out.append(f"{where}.bbox: coordinates must be >= 0")
        if _is_int(a.canvas_w) and _is_int(a.canvas_h):
            if max(b.left, b.right) > a.canvas_w or max(b.lower, b.upper) > a.canvas_h:
                out.append(f"{where}.bbox: exceeds canvas {a.canvas_w}x{a.canvas_h}")

    rel_seen: set[int] = set()
    for r in a.relations:
        where = f"relations[id={r.id}]"
        if not _is_int(r.id) or r.id < 1:
            out.append(f"{where}.id: must be a positive integer")
        elif r.id in rel_seen:
            out.append(f"{where}.id: duplicate relation id {r.id}")
        rel_seen.add(r.id)
        if r.symbol_label not in SYMBOLS:
            out.append(f"{where}.symbol: {r.symbol_label!r} not in {SYMBOLS}")
        if r.head_id not in seen:
            out.append(f"{where}: dangling head_id {r.head_id}")
        if r.tail_id not in seen:
            out.append(f"{where}: dangling tail_id {r.tail_id}")
        if r.head_id == r.tail_id:
            out.append(f"{where}: head_id equals tail_id ({r.head_id})")
    return out


def _check_keys(d: Any, where: str, required: dict[str, type]) -> list[str]:
    if not isinstance(d, dict):
        return [f"{where}: expected an object"]
    errs = []
    for key, typ in required.items():
        if key not in d:
            errs.append(f"{where}.{key}: missing")
        elif typ is int and not _is_int(d[key]):
            errs.append(f"{where}.{key}: expected integer, got {d[key]!r}")
        elif typ is not int and not isinstance(d[key], typ):
            errs.append(f"{where}.{key}: expected {typ.__name__}, got {d[key]!r}")
    return errs


def _int_list(v: Any, n: int) -> bool:
    return isinstance(v, list) and len(v) == n and all(_is_int(x) for x in v)


def parse_annotation(data: bytes | str) -> DiagramAnnotation:
    """Parse annotation text; raise on malformed syntax or invariant violations."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise AnnotationParseError(f"invalid UTF-8: {e.reason}", 1, e.start + 1) from None
    else:
        text = data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise AnnotationParseError(e.msg, e.lineno, e.colno) from None

    errs = _check_keys(doc, "annotation", {
        "source": str, "class": str, "description": str, "canvas": list,
        "objects": list, "relations": list,
    })
    if errs:
        raise AnnotationValidationError(errs)
    if not _int_list(doc["canvas"], 2):
        raise AnnotationValidationError(["canvas: expected [w, h] integers"])

    objects = []
    for i, od in enumerate(doc["objects"]):
        where = f"objects[{i}]"
        e = _check_keys(od, where, {"id": int, "kind": str, "label": str, "bbox": list})
        if not e and not _int_list(od["bbox"], 4):
            e.append(f"{where}.bbox: expected [left, lower, right, upper] integers")
        if not e and not isinstance(od.get("description", ""), str):
            e.append(f"{where}.description: expected str")
        if e:
            errs.extend(e)
            continue
        left, lower, right, upper = od["bbox"]
        objects.append(DiagramObject(
            id=od["id"], kind=od["kind"], label=od["label"],
            bbox=BBox(left=left, right=right, lower=lower, upper=upper),
            description=od.get("description", ""),
        ))
    relations = []
    for i, rd in enumerate(doc["relations"]):
        e = _check_keys(rd, f"relations[{i}]", {"id": int, "symbol": str, "head": int, "tail": int})
        if e:
            errs.extend(e)
            continue
        relations.append(Relation(id=rd["id"], symbol_label=rd["symbol"],
                                  head_id=rd["head"], tail_id=rd["tail"]))
    if errs:
        raise AnnotationValidationError(errs)

    a = DiagramAnnotation(
        global_=GlobalAttributes(doc["source"], doc["class"], doc["description"]),
        canvas_w=doc["canvas"][0],
        canvas_h=doc["canvas"][1],
        objects=tuple(objects),
        relations=tuple(relations),
    )
    violations = validate(a)
    if violations:
        raise AnnotationValidationError(violations)
    return a


def canonical(a: DiagramAnnotation) -> DiagramAnnotation:
    """Same annotation with objects and relations sorted by id."""
    return DiagramAnnotation(
        global_=a.global_, canvas_w=a.canvas_w, canvas_h=a.canvas_h,
        objects=tuple(sorted(a.objects, key=lambda o: o.id)),
        relations=tuple(sorted(a.relations, key=lambda r: r.id)),
    )


def to_dict(a: DiagramAnnotation) -> dict[str, Any]:
    a = canonical(a)
    return {
        "source": a.global_.source,
        "class": a.global_.class_label,
        "description": a.global_.description,
        "canvas": [a.canvas_w, a.canvas_h],
        "objects": [
            {"id": o.id, "kind": o.kind, "label": o.label,
             "description": o.description, "bbox": o.bbox.as_list()}
            for o in a.objects
        ],
        "relations": [
            {"id": r.id, "symbol": r.symbol_label, "head": r.head_id, "tail": r.tail_id}
            for r in a.relations
        ],
    }


def serialize_annotation(a: DiagramAnnotation) -> bytes:
    violations = validate(a)
    if violations:
        raise AnnotationValidationError(violations)
    d = to_dict(a)
    # one object / relation per line keeps diffs readable
    lines = ["{"]
    for key in ("source", "class", "description", "canvas"):
        lines.append(f"  {json.dumps(key)}: {json.dumps(d[key], ensure_ascii=False)},")
    for key, last in (("objects", False), ("relations", True)):
        items = d[key]
        if not items:
            lines.append(f"  {json.dumps(key)}: []" + ("" if last else ","))
            continue
        lines.append(f"  {json.dumps(key)}: [")
        for i, item in enumerate(items):
            sep = "," if i < len(items) - 1 else ""
            lines.append("    " + json.dumps(item, ensure_ascii=False) + sep)
        lines.append("  ]" + ("" if last else ","))
    lines.append("}")
    return ("\n".join(lines) + "\n").encode("utf-8")
