import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import HERE, read
from evolvekit.errors import EvolveError
from evolvekit.generators import random_metamodel, random_model
from evolvekit.model import (
    ModelBuilder, check_conformance, load_metamodel, load_model, metamodel_to_data,
    model_to_data, save_metamodel, save_model,
)


def mm_doc(classes, assocs=(), name="T"):
    return json.dumps({"name": name, "version": "1", "classes": classes, "associations": list(assocs)})


def model_doc(objects, links=(), roots=None, mm="T"):
    if roots is None:
        kids = {k for o in objects for ids in o.get("children", {}).values() for k in ids}
        roots = [o["id"] for o in objects if o["id"] not in kids]
    return json.dumps({"metamodel": mm, "metamodelVersion": "1", "roots": roots,
                       "objects": objects, "links": list(links)})


def codes(report):
    return [v.code for v in report.violations]


class TestLoadMetamodel:
    def test_minimal(self):
        mm = load_metamodel(mm_doc([{"name": "A"}]))
        assert list(mm.classes) == ["A"] and not mm.associations

    def test_port_metamodel(self):
        mm = load_metamodel(read("ports", "ports.mm.json"))
        assert len(mm.classes) == 4 and len(mm.associations) == 1
        edges = {(c.name, c.superclass) for c in mm.classes.values() if c.superclass}
        assert edges == {("InPort", "Port"), ("OutPort", "Port")}
        assert mm.is_subtype("InPort", "Port") and not mm.is_subtype("Port", "InPort")

    def test_inheritance_cycle(self):
        with pytest.raises(EvolveError) as e:
            load_metamodel(mm_doc([{"name": "A", "super": "B"}, {"name": "B", "super": "A"}]))
        assert e.value.code == "METAMODEL_ILLFORMED"

    @pytest.mark.parametrize("classes,assocs", [
        ([{"name": "A"}, {"name": "A"}], []),
        ([{"name": "A", "super": "Nope"}], []),
        ([{"name": "A", "containments": [{"role": "r", "child": "Nope"}]}], []),
        ([{"name": "A", "containments": [{"role": "r", "child": "A", "min": 3, "max": 1}]}], []),
        ([{"name": "A", "containments": [{"role": "r", "child": "A"}, {"role": "r", "child": "A"}]}], []),
        ([{"name": "A", "attributes": [{"name": "x", "type": "int"}]},
          {"name": "B", "super": "A", "attributes": [{"name": "x", "type": "int"}]}], []),
        ([{"name": "A", "attributes": [{"name": "x", "type": "blob"}]}], []),
        ([{"name": "A"}], [{"name": "L", "src": "A", "dst": "Nope"}]),
        ([{"name": "A"}], [{"name": "L", "src": "A", "dst": "A", "srcRole": "x", "dstRole": "x"}]),
    ])
    def test_illformed(self, classes, assocs):
        with pytest.raises(EvolveError) as e:
            load_metamodel(mm_doc(classes, assocs))
        assert e.value.code == "METAMODEL_ILLFORMED"

    @pytest.mark.parametrize("doc", ["{", "[]", '{"name": 3}', '{"name": "x", "version": "1", "classes": [{}]}'])
    def test_parse_error(self, doc):
        with pytest.raises(EvolveError) as e:
            load_metamodel(doc)
        assert e.value.code == "PARSE_ERROR"

    def test_parse_error_carries_position(self):
        with pytest.raises(EvolveError) as e:
            load_metamodel('{\n  "name": "x",\n  oops\n}')
        assert e.value.line == 3


class TestLoadModel:
    def test_empty(self):
        m = load_model(model_doc([]))
        assert len(m.objects) == 0 and len(m.links) == 0

    def test_port_model(self):
        m = load_model(read("ports", "network.model.json"))
        assert len(m.objects) >= 9 and len(m.links) == 3
        assert set(m.roots) == {"C1", "C2", "Component1", "Component2"}
        assert m.parent("p3") == "Component1"

    @pytest.mark.parametrize("objects,links,roots", [
        ([{"id": "a", "class": "A"}], [{"id": "l", "assoc": "L", "src": "a", "dst": "ghost"}], None),
        ([{"id": "a", "class": "A"}, {"id": "a", "class": "A"}], [], None),
        ([{"id": "a", "class": "A", "children": {"r": ["b"]}}, {"id": "b", "class": "A", "children": {"r": ["a"]}}],
         [], []),
        ([{"id": "a", "class": "A", "children": {"r": ["c"]}}, {"id": "b", "class": "A", "children": {"r": ["c"]}},
          {"id": "c", "class": "A"}], [], ["a", "b"]),
        ([{"id": "a", "class": "A", "children": {"r": ["ghost"]}}], [], ["a"]),
        ([{"id": "a", "class": "A"}], [], ["a", "ghost"]),
    ])
    def test_illformed(self, objects, links, roots):
        with pytest.raises(EvolveError) as e:
            load_model(model_doc(objects, links, roots))
        assert e.value.code == "MODEL_ILLFORMED"

    def test_attribute_must_be_literal(self):
        with pytest.raises(EvolveError) as e:
            load_model(model_doc([{"id": "a", "class": "A", "attrs": {"x": [1]}}]))
        assert e.value.code == "PARSE_ERROR"


MINI = mm_doc([
    {"name": "Box", "attributes": [{"name": "label", "type": "string", "required": True},
                                   {"name": "size", "type": "int"},
                                   {"name": "ratio", "type": "float"},
                                   {"name": "mode", "type": "enum", "values": ["a", "b"]}],
     "containments": [{"role": "items", "child": "Item", "min": 1, "max": 2}]},
    {"name": "Item", "abstract": True},
    {"name": "Leaf", "super": "Item"},
    {"name": "Other"},
], [{"name": "Ref", "src": "Box", "dst": "Leaf", "srcRole": "owner", "dstRole": "target",
     "srcMult": [0, "many"], "dstMult": [0, 1]}])


class TestConformance:
    def test_empty_model_conforms(self):
        assert check_conformance(load_model(model_doc([])), load_metamodel(MINI)).violations == ()

    def test_valid(self):
        m = load_model(model_doc([
            {"id": "b", "class": "Box", "attrs": {"label": "x", "size": 2, "ratio": 1, "mode": "a"},
             "children": {"items": ["i"]}},
            {"id": "i", "class": "Leaf"}], [{"id": "r", "assoc": "Ref", "src": "b", "dst": "i"}]))
        assert check_conformance(m, load_metamodel(MINI)).conformant

    @pytest.mark.parametrize("objects,links,expected", [
        ([{"id": "z", "class": "Ghost"}], [], ["UNKNOWN_CLASS"]),
        ([{"id": "b", "class": "Box", "attrs": {"label": "x"}, "children": {"items": ["i"]}},
          {"id": "i", "class": "Item"}], [], ["ABSTRACT_INSTANTIATION"]),
        ([{"id": "b", "class": "Box", "children": {"items": ["i"]}}, {"id": "i", "class": "Leaf"}], [],
         ["MISSING_REQUIRED_ATTR"]),
        ([{"id": "b", "class": "Box", "attrs": {"label": 3}, "children": {"items": ["i"]}},
          {"id": "i", "class": "Leaf"}], [], ["ATTR_TYPE_MISMATCH"]),
        ([{"id": "b", "class": "Box", "attrs": {"label": "x", "mode": "c"}, "children": {"items": ["i"]}},
          {"id": "i", "class": "Leaf"}], [], ["ATTR_TYPE_MISMATCH"]),
        ([{"id": "b", "class": "Box", "attrs": {"label": "x", "size": True}, "children": {"items": ["i"]}},
          {"id": "i", "class": "Leaf"}], [], ["ATTR_TYPE_MISMATCH"]),
        ([{"id": "b", "class": "Box", "attrs": {"label": "x", "color": "red"}, "children": {"items": ["i"]}},
          {"id": "i", "class": "Leaf"}], [], ["UNKNOWN_ATTR"]),
        ([{"id": "b", "class": "Box", "attrs": {"label": "x"}, "children": {"items": ["i"], "junk": ["o"]}},
          {"id": "i", "class": "Leaf"}, {"id": "o", "class": "Other"}], [], ["BAD_CONTAINMENT_ROLE"]),
        ([{"id": "b", "class": "Box", "attrs": {"label": "x"}, "children": {"items": ["o"]}},
          {"id": "o", "class": "Other"}], [], ["BAD_CONTAINMENT_ROLE"]),
        ([{"id": "b", "class": "Box", "attrs": {"label": "x"}}], [], ["CONTAINMENT_MULT"]),
        ([{"id": "b", "class": "Box", "attrs": {"label": "x"}, "children": {"items": ["i", "j", "k"]}},
          {"id": "i", "class": "Leaf"}, {"id": "j", "class": "Leaf"}, {"id": "k", "class": "Leaf"}], [],
         ["CONTAINMENT_MULT"]),
        ([{"id": "o", "class": "Other"}], [{"id": "l", "assoc": "Nope", "src": "o", "dst": "o"}],
         ["UNKNOWN_ASSOC"]),
        ([{"id": "o", "class": "Other"}, {"id": "b", "class": "Box", "attrs": {"label": "x"},
                                          "children": {"items": ["i"]}}, {"id": "i", "class": "Leaf"}],
         [{"id": "l", "assoc": "Ref", "src": "b", "dst": "o"}], ["LINK_END_TYPE"]),
        ([{"id": "b", "class": "Box", "attrs": {"label": "x"}, "children": {"items": ["i", "j"]}},
          {"id": "i", "class": "Leaf"}, {"id": "j", "class": "Leaf"}],
         [{"id": "l1", "assoc": "Ref", "src": "b", "dst": "i"}, {"id": "l2", "assoc": "Ref", "src": "b", "dst": "j"}],
         ["LINK_MULT"]),
    ])
    def test_each_code(self, objects, links, expected):
        report = check_conformance(load_model(model_doc(objects, links)), load_metamodel(MINI))
        assert codes(report) == expected

    def test_port_model_against_versions(self):
        m = load_model(read("ports", "network.model.json"))
        assert check_conformance(m, load_metamodel(read("ports", "ports.mm.json"))).conformant
        ports = sorted(o.id for o in m.objects.values() if o.class_name == "Port")
        removed = check_conformance(m, load_metamodel(read("ports", "ports_removed.mm.json")))
        assert [(v.code, v.element) for v in removed.violations] == [("UNKNOWN_CLASS", p) for p in ports]
        split = check_conformance(m, load_metamodel(read("ports", "ports_split.mm.json")))
        abstract = sorted(v.element for v in split.violations if v.code == "ABSTRACT_INSTANTIATION")
        assert abstract == ports

    def test_unknown_class_monotone_under_deletion(self):
        mm = load_metamodel(read("ports", "ports_removed.mm.json"))
        m = load_model(read("ports", "network.model.json"))
        before = {v.element for v in check_conformance(m, mm).violations if v.code == "UNKNOWN_CLASS"}
        b = ModelBuilder.from_model(m)
        b.remove("p12")
        after = {v.element for v in check_conformance(b.build(), mm).violations if v.code == "UNKNOWN_CLASS"}
        assert after == before - {"p12"}

    def test_violations_sorted(self):
        m = load_model(model_doc([{"id": i, "class": "Ghost"} for i in "cab"]))
        report = check_conformance(m, load_metamodel(MINI))
        assert [v.element for v in report.violations] == ["a", "b", "c"]
        assert report.render().endswith("not conformant (3 violations)\n")


class TestCanonical:
    def test_golden_one_object(self):
        doc = {"metamodel": "Mini", "metamodelVersion": "1", "roots": ["a"], "links": [],
               "objects": [{"id": "a", "class": "A", "attrs": {"size": 3, "name": "first"}}]}
        golden = (HERE / "golden" / "one_object.model.json").read_bytes()
        assert save_model(load_model(json.dumps(doc))) == golden

    def test_permutation_invariance(self):
        data = json.loads(read("ports", "network.model.json"))
        rng = random.Random(5)
        for _ in range(5):
            rng.shuffle(data["objects"])
            rng.shuffle(data["links"])
            rng.shuffle(data["roots"])
            assert save_model(load_model(json.dumps(data))) == read("ports", "network.model.json")

    def test_corpus_files_are_canonical(self, corpus):
        for path in sorted(corpus.rglob("*.mm.json")):
            assert save_metamodel(load_metamodel(path.read_bytes())) == path.read_bytes(), path
        for path in sorted(corpus.rglob("*.model.json")):
            assert save_model(load_model(path.read_bytes())) == path.read_bytes(), path

    def test_many_marker(self):
        mm = load_metamodel(mm_doc([{"name": "A", "containments": [{"role": "r", "child": "A"}]}]))
        assert metamodel_to_data(mm)["classes"][0]["containments"][0]["max"] == "many"

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000))
    def test_round_trip(self, seed):
        rng = random.Random(seed)
        mm = random_metamodel(rng)
        m = random_model(rng, mm, 40)
        once = save_model(m)
        assert save_model(load_model(once)) == once
        assert load_model(once) == m
        assert model_to_data(load_model(once)) == json.loads(once)
        assert save_metamodel(load_metamodel(save_metamodel(mm))) == save_metamodel(mm)
