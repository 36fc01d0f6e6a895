import json
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csdia.annotation import (
    CLASS_NAMES,
    AnnotationParseError,
    AnnotationValidationError,
    BBox,
    DiagramAnnotation,
    DiagramObject,
    GlobalAttributes,
    Relation,
    class_index,
    class_name,
    parse_annotation,
    serialize_annotation,
    validate,
)
from csdia.synthgen import example_rng, generate_diagram

MINIMAL = {
    "source": "unit", "class": "array list", "description": "",
    "canvas": [64, 48],
    "objects": [{"id": 1, "kind": "semantic-shape", "label": "cell",
                 "description": "", "bbox": [1, 2, 10, 12]}],
    "relations": [],
}


def doc(**over):
    d = json.loads(json.dumps(MINIMAL))
    d.update(over)
    return json.dumps(d).encode()


def test_minimal_document():
    a = parse_annotation(doc())
    assert len(a.objects) == 1 and len(a.relations) == 0
    assert a.objects[0].bbox == BBox(left=1, right=10, lower=2, upper=12)


def test_unknown_fields_ignored():
    d = json.loads(doc())
    d["extra"] = {"anything": 1}
    d["objects"][0]["confidence"] = 0.5
    assert parse_annotation(json.dumps(d)) == parse_annotation(doc())


def test_dangling_head():
    objs = MINIMAL["objects"] + [{"id": 2, "kind": "semantic-shape", "label": "cell",
                                  "description": "", "bbox": [20, 2, 30, 12]}]
    rels = [{"id": 1, "symbol": "arrow", "head": 7, "tail": 2}]
    with pytest.raises(AnnotationValidationError, match="dangling head_id 7"):
        parse_annotation(doc(objects=objs, relations=rels))


def test_syntax_error_has_position():
    with pytest.raises(AnnotationParseError) as ei:
        parse_annotation(b'{\n  "source": "x",\n  "class": oops\n}')
    assert ei.value.line == 3
    assert ei.value.column > 1


@pytest.mark.parametrize("bad", [
    {"canvas": [8, 48]},
    {"class": "hash table"},
    {"objects": [{"id": 1, "kind": "blob", "label": "x", "description": "", "bbox": [1, 2, 10, 12]}]},
    {"objects": [{"id": 1, "kind": "semantic-shape", "label": "", "description": "", "bbox": [1, 2, 10, 12]}]},
    {"objects": [{"id": 1, "kind": "semantic-shape", "label": "x", "description": "", "bbox": [1, 2, 10, 99]}]},
    {"objects": [{"id": 1, "kind": "semantic-shape", "label": "x", "description": "", "bbox": [1, 2, 10.5, 12]}]},
    {"canvas": "64x48"},
])
def test_schema_violations(bad):
    with pytest.raises(AnnotationValidationError):
        parse_annotation(doc(**bad))


def test_validate_valid_is_empty():
    assert validate(parse_annotation(doc())) == []


def test_validate_bbox_ordering():
    a = parse_annotation(doc())
    o = replace(a.objects[0], bbox=BBox(left=10, right=5, lower=2, upper=12))
    v = validate(replace(a, objects=(o,)))
    assert len(v) == 1 and "BBox ordering" in v[0]


def test_validate_unknown_class_names_category_set():
    a = parse_annotation(doc())
    v = validate(replace(a, global_=replace(a.global_, class_label="hash table")))
    assert len(v) == 1
    assert "12 categories" in v[0] and "network topology" in v[0]


def test_validate_relation_rules():
    a = parse_annotation(doc())
    bad = replace(a, relations=(Relation(1, "line", 1, 1), Relation(1, "curve", 1, 3)))
    v = validate(bad)
    assert any("head_id equals tail_id" in x for x in v)
    assert any("duplicate relation id" in x for x in v)
    assert any("symbol" in x for x in v)
    assert any("dangling tail_id 3" in x for x in v)


def test_directed_follows_symbol():
    assert Relation(1, "arrow", 1, 2).directed
    assert not Relation(1, "line", 1, 2).directed


def test_class_index_table_order():
    assert class_index("array list") == 0
    assert class_index("network topology") == 11
    assert [class_index(c) for c in CLASS_NAMES] == list(range(12))
    assert all(class_index(class_name(i)) == i for i in range(12))


def test_class_index_unknown_lists_legal_values():
    with pytest.raises(ValueError, match="binary tree"):
        class_index("hash table")


def _ann(objects, relations=()):
    return DiagramAnnotation(GlobalAttributes("s", "binary tree", "d"), 100, 100,
                             tuple(objects), tuple(relations))


def test_serialize_sorts_ids_and_is_canonical():
    o1 = DiagramObject(1, "semantic-shape", "node", BBox(0, 10, 0, 10))
    o2 = DiagramObject(2, "semantic-shape", "node", BBox(20, 30, 0, 10))
    r = Relation(1, "line", 1, 2)
    a = _ann([o2, o1], [r])
    b = _ann([o1, o2], [r])
    assert serialize_annotation(a) == serialize_annotation(b)
    ids = [o["id"] for o in json.loads(serialize_annotation(a))["objects"]]
    assert ids == [1, 2]


def test_serialize_refuses_invalid():
    with pytest.raises(AnnotationValidationError):
        serialize_annotation(_ann([DiagramObject(1, "semantic-shape", "", BBox(0, 10, 0, 10))]))


def test_round_trip_generated(examples_by_class):
    for exs in examples_by_class.values():
        for e in exs:
            text = serialize_annotation(e.annotation)
            again = parse_annotation(text)
            assert again == e.annotation
            assert serialize_annotation(again) == text


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(CLASS_NAMES), st.integers(0, 2**63 - 1))
def test_generated_annotations_validate_and_round_trip(c, seed):
    a = generate_diagram(c, example_rng(seed, c, 0)).annotation
    assert validate(a) == []
    assert parse_annotation(serialize_annotation(a)) == a


@settings(max_examples=100)
@given(st.text(max_size=40))
def test_parse_never_crashes_unexpectedly(s):
    try:
        parse_annotation(s)
    except (AnnotationParseError, AnnotationValidationError):
        pass
