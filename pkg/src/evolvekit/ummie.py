"""Migrate transformation-rule graphs along a metamodel delta.

Rule nodes reference either the source metamodel (``side == "source"``) or
the destination metamodel of the transformation.  Only source-side nodes can
be affected by a delta; everything the tool cannot decide on its own is
reported as a warning instead of being guessed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace

from .errors import EvolveError
from .expr import AttrRef
from .mcl import MapRule, MigrationSpec
from .model import Metamodel, dumps_canonical

NULL_REF = "!null"
SIDES = ("source", "destination")
ACTIONS = ("match", "create", "delete")


@dataclass(frozen=True)
class PatternNode:
    id: str
    side: str
    class_ref: str
    action: str = "match"


@dataclass(frozen=True)
class PatternEdge:
    src: str
    dst: str
    label: str = ""


@dataclass(frozen=True)
class AttrOp:
    node: str
    attr: str
    expr: str


@dataclass(frozen=True)
class Rule:
    name: str
    nodes: tuple[PatternNode, ...] = ()
    edges: tuple[PatternEdge, ...] = ()
    attr_ops: tuple[AttrOp, ...] = ()


@dataclass(frozen=True)
class RuleGraph:
    name: str
    rules: tuple[Rule, ...] = ()


@dataclass(frozen=True)
class RuleWarning:
    code: str  # W_NULL_REF | W_AMBIGUOUS_MAPPING | W_ADDITION_UNHANDLED | W_ATTR_REF_BROKEN
    rule: str
    node: str | None
    message: str


@dataclass(frozen=True)
class WarningReport:
    entries: tuple[RuleWarning, ...] = ()

    def count(self, code: str) -> int:
        return sum(e.code == code for e in self.entries)

    def to_data(self) -> dict:
        return {"warnings": [{"code": w.code, "rule": w.rule, "node": w.node, "message": w.message}
                             for w in self.entries]}

    def render(self, format: str = "text") -> str:
        if format == "json":
            return json.dumps(self.to_data(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        lines = [f"{w.code} {w.rule}{'/' + w.node if w.node else ''}: {w.message}" for w in self.entries]
        lines.append(f"{len(self.entries)} warnings")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

def _bad(msg: str) -> EvolveError:
    return EvolveError("RULEGRAPH_ILLFORMED", msg)


def rulegraph_from_data(data) -> RuleGraph:
    if not isinstance(data, dict) or not isinstance(data.get("rules"), list):
        raise _bad("expected an object with a 'rules' list")
    rules = []
    try:
        for r in data["rules"]:
            nodes = tuple(PatternNode(n["id"], n["side"], n["class"], n.get("action", "match"))
                          for n in r.get("nodes", []))
            edges = tuple(PatternEdge(e["src"], e["dst"], e.get("label", "")) for e in r.get("edges", []))
            ops = tuple(AttrOp(o["node"], o["attr"], o.get("expr", "")) for o in r.get("attrOps", []))
            rules.append(Rule(r["name"], nodes, edges, ops))
    except (KeyError, TypeError, AttributeError) as exc:
        raise _bad(f"malformed rule entry: {exc}") from None
    return RuleGraph(str(data.get("name", "")), tuple(rules))


def load_rulegraph(document: bytes | str) -> RuleGraph:
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise EvolveError("PARSE_ERROR", exc.msg, line=exc.lineno, column=exc.colno) from None
    return rulegraph_from_data(data)


def rulegraph_to_data(rg: RuleGraph) -> dict:
    return {"name": rg.name, "rules": [{
        "name": r.name,
        "nodes": [{"id": n.id, "side": n.side, "class": n.class_ref, "action": n.action}
                  for n in sorted(r.nodes, key=lambda n: n.id)],
        "edges": [{"src": e.src, "dst": e.dst, "label": e.label}
                  for e in sorted(r.edges, key=lambda e: (e.src, e.dst, e.label))],
        "attrOps": [{"node": o.node, "attr": o.attr, "expr": o.expr}
                    for o in sorted(r.attr_ops, key=lambda o: (o.node, o.attr, o.expr))],
    } for r in sorted(rg.rules, key=lambda r: r.name)]}


def save_rulegraph(rg: RuleGraph) -> bytes:
    return dumps_canonical(rulegraph_to_data(rg)).encode("utf-8")


def check_rulegraph(rg: RuleGraph, mm_src: Metamodel, mm_dst: Metamodel,
                    skip: set[tuple[str, str]] = frozenset()) -> None:
    """Raise RULEGRAPH_ILLFORMED unless every rule is well-formed against (mm_src, mm_dst)."""
    names = set()
    for rule in rg.rules:
        if rule.name in names:
            raise _bad(f"duplicate rule {rule.name}")
        names.add(rule.name)
        ids = [n.id for n in rule.nodes]
        if len(set(ids)) != len(ids):
            raise _bad(f"rule {rule.name}: duplicate node id")
        for n in rule.nodes:
            if n.side not in SIDES:
                raise _bad(f"rule {rule.name}/{n.id}: bad side {n.side!r}")
            if n.action not in ACTIONS:
                raise _bad(f"rule {rule.name}/{n.id}: bad action {n.action!r}")
            mm = mm_src if n.side == "source" else mm_dst
            if n.class_ref != NULL_REF and (rule.name, n.id) not in skip and n.class_ref not in mm.classes:
                raise _bad(f"rule {rule.name}/{n.id}: class {n.class_ref} not in {mm.name}")
        for e in rule.edges:
            if e.src not in ids or e.dst not in ids:
                raise _bad(f"rule {rule.name}: edge {e.src}->{e.dst} references a missing node")
        for o in rule.attr_ops:
            if o.node not in ids:
                raise _bad(f"rule {rule.name}: attrOp on missing node {o.node}")


# ---------------------------------------------------------------------------
# migration
# ---------------------------------------------------------------------------

def classify(cls: str, spec: MigrationSpec, mm_evolved: Metamodel) -> tuple[str, MapRule | None]:
    """How ``spec`` treats source class ``cls``: untouched, deleted, mapped or ambiguous."""
    rules = spec.map_rules(cls)
    if not rules:
        if spec.identity_for_unmapped and cls in mm_evolved.classes:
            return "untouched", None
        return "deleted", None
    if all(r.is_delete for r in rules):
        return "deleted", None
    if len(rules) == 1 and (rules[0].unconditional or rules[0].otherwise):
        return "mapped", rules[0]
    return "ambiguous", None


def attribute_renames(rule: MapRule) -> dict[str, str]:
    """Old name -> new name for every command that copies one source attribute verbatim."""
    out = {}
    for cmd in rule.commands:
        if len(cmd.operands) == 1 and isinstance(cmd.operands[0], AttrRef) and cmd.operands[0].var == "src":
            out.setdefault(cmd.operands[0].attr, cmd.target)
    return out


def migrate_rules(rg: RuleGraph, spec: MigrationSpec, mm_src: Metamodel, mm_evolved: Metamodel,
                  mm_dst: Metamodel) -> tuple[RuleGraph, WarningReport]:
    check_rulegraph(rg, mm_src, mm_dst)
    warnings: list[RuleWarning] = []
    new_rules = []
    ambiguous: set[tuple[str, str]] = set()
    for rule in rg.rules:
        nodes = []
        renames: dict[str, dict[str, str]] = {}  # node id -> attribute renames
        retyped: dict[str, str] = {}
        for n in sorted(rule.nodes, key=lambda n: n.id):
            if n.side != "source" or n.class_ref == NULL_REF:
                nodes.append(n)
                continue
            kind, map_rule = classify(n.class_ref, spec, mm_evolved)
            if kind == "deleted":
                nodes.append(replace(n, class_ref=NULL_REF))
                warnings.append(RuleWarning("W_NULL_REF", rule.name, n.id,
                                         f"class {n.class_ref} was deleted; resolve the null reference manually"))
            elif kind == "ambiguous":
                nodes.append(n)
                ambiguous.add((rule.name, n.id))
                warnings.append(RuleWarning("W_AMBIGUOUS_MAPPING", rule.name, n.id,
                                         f"class {n.class_ref} has {len(spec.map_rules(n.class_ref))} "
                                         f"mappings; map this node manually"))
            elif kind == "mapped":
                nodes.append(replace(n, class_ref=map_rule.dst_class))
                renames[n.id] = attribute_renames(map_rule)
                retyped[n.id] = map_rule.dst_class
            else:
                nodes.append(n)
        ops = []
        for op in rule.attr_ops:
            expr = op.expr
            for nid, ren in renames.items():
                for old, new in ren.items():
                    if old != new:
                        expr = re.sub(rf"(?<![\w.]){re.escape(nid)}\.{re.escape(old)}\b", f"{nid}.{new}", expr)
            attr = renames.get(op.node, {}).get(op.attr, op.attr)
            if op.node in retyped and attr not in mm_evolved.all_attributes(retyped[op.node]):
                warnings.append(RuleWarning("W_ATTR_REF_BROKEN", rule.name, op.node,
                                         f"{retyped[op.node]} has no attribute {attr}"))
            ops.append(AttrOp(op.node, attr, expr))
        new_rules.append(Rule(rule.name, tuple(nodes), rule.edges, tuple(ops)))
    for add in spec.add_rules:
        warnings.append(RuleWarning("W_ADDITION_UNHANDLED", "*", None,
                                 f"line {add.line}: {add.label()} must be handled by hand"))
    out = RuleGraph(rg.name, tuple(new_rules))
    check_rulegraph(out, mm_evolved, mm_dst, skip=ambiguous)
    warnings.sort(key=lambda w: (w.rule, w.node or "", w.code, w.message))
    return out, WarningReport(tuple(warnings))
