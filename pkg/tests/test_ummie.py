import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import read
from evolvekit.errors import EvolveError
from evolvekit.generators import random_delta, random_metamodel, random_rulegraph
from evolvekit.mcl import identity_spec, parse_mcl
from evolvekit.model import load_metamodel
from evolvekit.ummie import (
    NULL_REF, AttrOp, PatternNode, Rule, RuleGraph, load_rulegraph, migrate_rules, save_rulegraph,
)


@pytest.fixture(scope="module")
def mms():
    return (load_metamodel(read("ports", "ports.mm.json")), load_metamodel(read("ports", "ports_split.mm.json")),
            load_metamodel(read("rules", "code.mm.json")))


@pytest.fixture(scope="module")
def rules():
    return load_rulegraph(read("rules", "ports_to_code.rules.json"))


def node_classes(rg):
    return {(r.name, n.id): n.class_ref for r in rg.rules for n in r.nodes}


def expected_warnings(rg, plan):
    """Brute-force scan of every source node against the ground-truth delta plan."""
    out = []
    for rule in rg.rules:
        for n in rule.nodes:
            if n.side != "source":
                continue
            if n.class_ref in plan.deleted:
                out.append(("W_NULL_REF", rule.name, n.id))
            elif n.class_ref in plan.split:
                out.append(("W_AMBIGUOUS_MAPPING", rule.name, n.id))
    out += [("W_ADDITION_UNHANDLED", "*", None)] * len(plan.added)
    return sorted(out, key=lambda w: (w[1], w[2] or "", w[0]))


def expected_class(cls, plan):
    if cls in plan.deleted:
        return NULL_REF
    return plan.renamed.get(cls, cls)


class TestCorpus:
    def test_split_is_ambiguous(self, mms, rules):
        src, evolved, dst = mms
        spec = parse_mcl(read("ports", "split.mcl").decode(), src, evolved)
        out, report = migrate_rules(rules, spec, src, evolved, dst)
        ports = sorted((r.name, n.id) for r in rules.rules for n in r.nodes if n.class_ref == "Port")
        assert sorted((w.rule, w.node) for w in report.entries) == ports
        assert {w.code for w in report.entries} == {"W_AMBIGUOUS_MAPPING"}
        assert node_classes(out) == node_classes(rules)

    def test_delete(self, mms, rules):
        src, _, dst = mms
        spec = parse_mcl('delta "d" from PortMM 1 to PortMM 2\nmap Port => null', src, src)
        out, report = migrate_rules(rules, spec, src, src, dst)
        nulls = [k for k, c in node_classes(out).items() if c == NULL_REF]
        assert sorted((w.rule, w.node) for w in report.entries if w.code == "W_NULL_REF") == sorted(nulls)
        assert len(nulls) == sum(c == "Port" for c in node_classes(rules).values())
        assert b'"!null"' in save_rulegraph(out)

    def test_rename_is_silent(self, rules):
        src = load_metamodel(read("ports", "ports.mm.json"))
        data = json.loads(read("ports", "ports.mm.json"))
        for c in data["classes"]:
            if c["name"] == "Component":
                c["name"] = "Block"
        data["version"] = "9"
        from evolvekit.model import metamodel_from_data
        evolved = metamodel_from_data(data)
        spec = parse_mcl('delta "d" from PortMM 1 to PortMM 9\nmap Component => Block', src, evolved)
        out, report = migrate_rules(rules, spec, src, evolved, load_metamodel(read("rules", "code.mm.json")))
        assert report.entries == ()
        assert "Component" not in node_classes(out).values() and "Block" in node_classes(out).values()

    def test_addition(self, rules):
        src = load_metamodel(read("threads", "threads_v1.mm.json"))
        dst = load_metamodel(read("threads", "threads_v2.mm.json"))
        spec = parse_mcl(read("threads", "thread.mcl").decode(), src, dst)
        rg = RuleGraph("t", (Rule("R", (PatternNode("c", "source", "Component"),)),))
        _, report = migrate_rules(rg, spec, src, dst, dst)
        assert [w.code for w in report.entries] == ["W_ADDITION_UNHANDLED"]

    def test_destination_only_untouched(self, mms):
        src, evolved, dst = mms
        rg = RuleGraph("d", (Rule("R", (PatternNode("m", "destination", "Module", "create"),)),))
        spec = parse_mcl(read("ports", "split.mcl").decode(), src, evolved)
        out, report = migrate_rules(rg, spec, src, evolved, dst)
        assert out == rg and report.entries == ()

    def test_attribute_rename_rewrites_ops(self):
        from evolvekit.model import metamodel_from_data
        src = metamodel_from_data({"name": "M", "version": "1", "classes": [
            {"name": "A", "attributes": [{"name": "x", "type": "int"}, {"name": "y", "type": "int"}]}]})
        dst = metamodel_from_data({"name": "M", "version": "2", "classes": [
            {"name": "A", "attributes": [{"name": "x2", "type": "int"}]}]})
        spec = parse_mcl('delta "d" from M 1 to M 2\nmap A => A with { x2 := src.x }', src, dst)
        rg = RuleGraph("g", (Rule("R", (PatternNode("a", "source", "A"),),
                                  attr_ops=(AttrOp("a", "x", "a.x + ax.x"), AttrOp("a", "y", "a.y"))),))
        out, report = migrate_rules(rg, spec, src, dst, dst)
        ops = {(o.attr, o.expr) for o in out.rules[0].attr_ops}
        assert ops == {("x2", "a.x2 + ax.x"), ("y", "a.y")}
        assert [(w.code, w.node) for w in report.entries] == [("W_ATTR_REF_BROKEN", "a")]

    @pytest.mark.parametrize("doc", [
        '{"rules": [{"name": "R", "nodes": [{"id": "a", "side": "left", "class": "Port"}]}]}',
        '{"rules": [{"name": "R", "nodes": [{"id": "a", "side": "source", "class": "Nope"}]}]}',
        '{"rules": [{"name": "R", "nodes": [{"id": "a", "side": "source", "class": "Port"}],'
        ' "edges": [{"src": "a", "dst": "b"}]}]}',
        '{"rules": [{"name": "R", "nodes": [{"id": "a", "side": "source", "class": "Port"},'
        ' {"id": "a", "side": "source", "class": "Port"}]}]}',
        '{"rules": [{"nodes": []}]}',
        '{"name": "x"}',
    ])
    def test_illformed(self, mms, doc):
        src, _, dst = mms
        with pytest.raises(EvolveError) as e:
            migrate_rules(load_rulegraph(doc), identity_spec(src), src, src, dst)
        assert e.value.code == "RULEGRAPH_ILLFORMED"

    def test_round_trip(self, rules):
        assert save_rulegraph(load_rulegraph(save_rulegraph(rules))) == save_rulegraph(rules)
        assert save_rulegraph(rules) == read("rules", "ports_to_code.rules.json")


def random_case(seed):
    rng = random.Random(seed)
    mm = random_metamodel(rng)
    dest = random_metamodel(rng, name="Dest")
    sc = random_delta(rng, mm, rng.randint(1, 5))
    return random_rulegraph(rng, mm, dest, 5), sc, dest


class TestProperties:
    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 100_000))
    def test_brute_force_scan(self, seed):
        rg, sc, dest = random_case(seed)
        out, report = migrate_rules(rg, sc.spec, sc.mm_src, sc.mm_dst, dest)
        got = [(w.code, w.rule, w.node) for w in report.entries if w.code != "W_ATTR_REF_BROKEN"]
        assert got == expected_warnings(rg, sc.plan)
        before, after = node_classes(rg), node_classes(out)
        for rule in rg.rules:
            for n in rule.nodes:
                key = (rule.name, n.id)
                want = n.class_ref if n.side == "destination" else expected_class(n.class_ref, sc.plan)
                assert after[key] == want, key
        assert set(before) == set(after)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 100_000))
    def test_attribute_refs_follow_renames(self, seed):
        rg, sc, dest = random_case(seed)
        out, report = migrate_rules(rg, sc.spec, sc.mm_src, sc.mm_dst, dest)
        assert report.count("W_ATTR_REF_BROKEN") == 0
        for rule_in, rule_out in zip(sorted(rg.rules, key=lambda r: r.name), sorted(out.rules, key=lambda r: r.name)):
            cls = {n.id: n.class_ref for n in rule_in.nodes}
            for op_in, op_out in zip(rule_in.attr_ops, rule_out.attr_ops):
                renames = sc.plan.attr_renamed.get(cls[op_in.node], {})
                assert op_out.attr == renames.get(op_in.attr, op_in.attr)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 100_000))
    def test_idempotent_under_identity(self, seed):
        rg, sc, dest = random_case(seed)
        out, _ = migrate_rules(rg, sc.spec, sc.mm_src, sc.mm_dst, dest)
        again, report = migrate_rules(out, identity_spec(sc.mm_dst), sc.mm_dst, sc.mm_dst, dest)
        assert again == out and report.entries == ()

    def test_report_is_deterministic(self):
        rg, sc, dest = random_case(7)
        a = migrate_rules(rg, sc.spec, sc.mm_src, sc.mm_dst, dest)[1]
        b = migrate_rules(rg, sc.spec, sc.mm_src, sc.mm_dst, dest)[1]
        assert a.render() == b.render() and a.render("json") == b.render("json")
