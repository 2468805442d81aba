"""Seeded random generators for metamodels, models, deltas, rule graphs,
component networks and hierarchical statecharts.

Everything here is driven by a ``random.Random`` so a seed fully determines
the output.  The generators are used by the test suite and by the scripts in
``scripts/``; they favour small, structurally varied inputs over realism.
"""

from __future__ import annotations

import copy
import random
from dataclasses import dataclass, field

from .builtin import components_mm, statechart_mm
from .mcl import MigrationSpec, parse_mcl
from .model import Metamodel, Model, ModelBuilder, metamodel_from_data, metamodel_to_data
from .ummie import AttrOp, PatternEdge, PatternNode, Rule, RuleGraph

ATTR_TYPES = ("string", "int", "bool", "enum")
ENUM_VALUES = ["hi", "lo", "mid"]
WORDS = ["alpha", "beta", "gamma", "delta", "kappa", "omega", "sigma", "theta", "zeta", "rho"]


@dataclass
class MetamodelConfig:
    min_classes: int = 3
    max_classes: int = 7
    max_attrs: int = 3
    p_super: float = 0.3
    p_abstract: float = 0.4
    p_required: float = 0.5
    extra_containments: int = 3
    max_assocs: int = 3


def random_value(rng: random.Random, type_: str, values=ENUM_VALUES):
    if type_ == "string":
        return rng.choice(WORDS) + ("" if rng.random() < 0.5 else str(rng.randrange(100)))
    if type_ == "int":
        return rng.randrange(-5, 20)
    if type_ == "bool":
        return rng.random() < 0.5
    if type_ == "float":
        return rng.randrange(-50, 50) / 4
    return rng.choice(sorted(values))


def random_metamodel(rng: random.Random, cfg: MetamodelConfig | None = None, name: str = "RandMM") -> Metamodel:
    """A metamodel with a concrete ``Root`` class able to contain every other class."""
    cfg = cfg or MetamodelConfig()
    n = rng.randint(cfg.min_classes, cfg.max_classes)
    names = [f"K{i}" for i in range(1, n + 1)]
    classes = {"Root": {"name": "Root", "abstract": False, "super": None,
                        "attributes": [{"name": "title", "type": "string", "required": True, "default": None}],
                        "containments": []}}
    for i, cname in enumerate(names):
        sup = rng.choice(names[:i]) if i and rng.random() < cfg.p_super else None
        attrs = []
        for k in range(rng.randint(0, cfg.max_attrs)):
            t = rng.choice(ATTR_TYPES)
            req = rng.random() < cfg.p_required
            a = {"name": f"{cname.lower()}_{k}", "type": t, "required": req,
                 "default": random_value(rng, t) if rng.random() < 0.3 else None}
            if t == "enum":
                a["values"] = list(ENUM_VALUES)
            attrs.append(a)
        classes[cname] = {"name": cname, "abstract": False, "super": sup, "attributes": attrs, "containments": []}
    for cname in names:
        if any(c["super"] == cname for c in classes.values()) and rng.random() < cfg.p_abstract:
            classes[cname]["abstract"] = True
    for cname in names:
        classes["Root"]["containments"].append({"role": f"r_{cname.lower()}", "child": cname, "min": 0, "max": "many"})
    for j in range(rng.randint(0, cfg.extra_containments)):
        i = rng.randrange(n)
        if i + 1 >= n:
            continue
        parent, child = names[i], rng.choice(names[i + 1:])
        classes[parent]["containments"].append({"role": f"c{j}_{child.lower()}", "child": child, "min": 0,
                                                "max": rng.choice(["many", "many", 1, 2])})
    assocs = []
    for j in range(rng.randint(0, cfg.max_assocs)):
        assocs.append({"name": f"A{j}", "src": rng.choice(names), "dst": rng.choice(names),
                       "srcRole": f"a{j}src", "dstRole": f"a{j}dst",
                       "srcMult": [0, "many"], "dstMult": [0, rng.choice(["many", "many", 1, 2])]})
    return metamodel_from_data({"name": name, "version": "1", "classes": list(classes.values()),
                                "associations": assocs})


def _concrete(mm: Metamodel, cls: str) -> list[str]:
    return [c for c in mm.subtypes(cls) if not mm.classes[c].abstract]


def _attrs(rng: random.Random, mm: Metamodel, cls: str, p_optional: float = 0.5) -> dict:
    out = {}
    for name, a in sorted(mm.all_attributes(cls).items()):
        if a.required or rng.random() < p_optional:
            out[name] = random_value(rng, a.type, a.values)
    return out


def random_model(rng: random.Random, mm: Metamodel, max_objects: int = 50, root_class: str = "Root",
                 id_prefix: str = "o", link_density: float = 1.0) -> Model:
    """A conformant model of ``mm`` with at most ``max_objects`` objects under one root."""
    target = rng.randint(1, max_objects)
    b = ModelBuilder(mm.name, mm.version)
    b.add(f"{id_prefix}0", root_class, _attrs(rng, mm, root_class))
    counter = 1
    frontier = [f"{id_prefix}0"]
    while frontier and counter < target:
        pid = frontier.pop(rng.randrange(len(frontier)))
        pcls = b.objects[pid]["class"]
        for role, k in sorted(mm.all_containments(pcls).items()):
            kinds = _concrete(mm, k.child)
            if not kinds:
                continue
            cap = k.max if k.max is not None else 4
            for _ in range(rng.randint(0, cap)):
                if counter >= target:
                    break
                cls = rng.choice(kinds)
                oid = f"{id_prefix}{counter}"
                counter += 1
                b.add(oid, cls, _attrs(rng, mm, cls), pid, role)
                frontier.append(oid)
    objs = sorted(b.objects)
    for name, assoc in sorted(mm.associations.items()):
        srcs = [o for o in objs if mm.is_subtype(b.objects[o]["class"], assoc.src)]
        dsts = [o for o in objs if mm.is_subtype(b.objects[o]["class"], assoc.dst)]
        if not srcs or not dsts:
            continue
        out_deg: dict[str, int] = {}
        in_deg: dict[str, int] = {}
        seen = set()
        for j in range(int(rng.randint(0, len(srcs) + 2) * link_density)):
            s, d = rng.choice(srcs), rng.choice(dsts)
            if (s, d) in seen:
                continue
            if assoc.dst_mult[1] is not None and out_deg.get(s, 0) >= assoc.dst_mult[1]:
                continue
            if assoc.src_mult[1] is not None and in_deg.get(d, 0) >= assoc.src_mult[1]:
                continue
            seen.add((s, d))
            out_deg[s] = out_deg.get(s, 0) + 1
            in_deg[d] = in_deg.get(d, 0) + 1
            b.link(f"{name.lower()}_{j}", name, s, d)
    return b.build()


# ---------------------------------------------------------------------------
# deltas
# ---------------------------------------------------------------------------

@dataclass
class DeltaPlan:
    """Ground truth for a generated delta, independent of the MCL text."""
    renamed: dict[str, str] = field(default_factory=dict)
    deleted: set[str] = field(default_factory=set)
    split: dict[str, tuple[str, str]] = field(default_factory=dict)
    attr_renamed: dict[str, dict[str, str]] = field(default_factory=dict)  # class -> old -> new
    reparented: set[str] = field(default_factory=set)
    added: list[tuple[str, str]] = field(default_factory=list)  # (new class, container)
    assoc_renamed: dict[str, str] = field(default_factory=dict)


@dataclass
class Scenario:
    mm_src: Metamodel
    mm_dst: Metamodel
    delta: str
    spec: MigrationSpec
    plan: DeltaPlan


def _leafish(mm: Metamodel) -> list[str]:
    """Non-root classes with no subclasses."""
    return sorted(c for c in mm.classes if c != "Root" and mm.subtypes(c) == [c])


def random_delta(rng: random.Random, mm: Metamodel, n_ops: int | None = None) -> Scenario:
    """Evolve ``mm`` by a few random operations and write the matching MCL delta."""
    data = copy.deepcopy(metamodel_to_data(mm))
    data["version"] = str(int(mm.version) + 1) if mm.version.isdigit() else mm.version + "'"
    classes = {c["name"]: c for c in data["classes"]}
    assocs = {a["name"]: a for a in data["associations"]}
    plan = DeltaPlan()
    rules: list[str] = []
    touched: set[str] = set()
    n_ops = rng.randint(1, 4) if n_ops is None else n_ops
    ops = ["rename", "delete", "split", "attr_rename", "add_attr", "add_class", "assoc_rename", "reparent"]

    def free(cands):
        return [c for c in cands if c not in touched]

    for _ in range(n_ops):
        op = rng.choice(ops)
        if op == "rename":
            cands = free(c for c in mm.classes if c != "Root")
            if not cands:
                continue
            old = rng.choice(sorted(cands))
            new = f"{old}R"
            touched |= {old, new}
            c = classes.pop(old)
            c["name"] = new
            classes[new] = c
            for other in classes.values():
                if other["super"] == old:
                    other["super"] = new
                for k in other["containments"]:
                    if k["child"] == old:
                        k["child"] = new
            for a in assocs.values():
                a["src"] = new if a["src"] == old else a["src"]
                a["dst"] = new if a["dst"] == old else a["dst"]
            plan.renamed[old] = new
            rules.append(f"map {old} => {new}")
        elif op == "delete":
            cands = [c for c in free(_leafish(mm))
                     if not any(c in (a["src"], a["dst"]) and n in touched for n, a in assocs.items())]
            if not cands:
                continue
            old = rng.choice(cands)
            touched.add(old)
            del classes[old]
            for other in classes.values():
                other["containments"] = [k for k in other["containments"] if k["child"] != old]
            for name in [n for n, a in assocs.items() if old in (a["src"], a["dst"])]:
                del assocs[name]
                touched.add(name)
            plan.deleted.add(old)
            rules.append(f"map {old} => null")
        elif op == "split":
            cands = free(c for c in _leafish(mm) if not mm.classes[c].abstract)
            if not cands:
                continue
            old = rng.choice(cands)
            a_cls, b_cls = f"{old}A", f"{old}B"
            touched |= {old, a_cls, b_cls}
            classes[old]["abstract"] = True
            for new in (a_cls, b_cls):
                classes[new] = {"name": new, "abstract": False, "super": old, "attributes": [], "containments": []}
            plan.split[old] = (a_cls, b_cls)
            ints = [n for n, a in mm.all_attributes(old).items() if a.type == "int"]
            links = [(n, a) for n, a in mm.associations.items() if a.src == old]
            if ints and rng.random() < 0.6:
                cond = f"self.{ints[0]} > {rng.randrange(0, 10)}"
            elif links:
                n, a = links[0]
                cond = f"size(self.linked({n}, {a.src_role})) > 0"
            else:
                cond = "true" if rng.random() < 0.5 else "false"
            rules.append(f"map {old} => {a_cls} when {cond}")
            rules.append(f"map {old} => {b_cls} otherwise")
        elif op == "attr_rename":
            cands = []
            for c in free(_leafish(mm)):
                for a in mm.classes[c].attributes:
                    if a.required or a.default is not None:
                        cands.append((c, a.name))
            if not cands:
                continue
            cls, old = rng.choice(cands)
            new = f"{old}_n"
            touched.add(cls)
            for a in classes[cls]["attributes"]:
                if a["name"] == old:
                    a["name"] = new
            plan.attr_renamed[cls] = {old: new}
            rules.append(f"map {cls} => {cls} with {{ {new} := src.{old} }}")
        elif op == "add_attr":
            cands = free(c for c in mm.classes)
            if not cands:
                continue
            cls = rng.choice(sorted(cands))
            touched.add(cls)
            if rng.random() < 0.5:
                classes[cls]["attributes"].append({"name": f"{cls.lower()}_new", "type": "int", "required": True,
                                                   "default": 7})
            else:
                classes[cls]["attributes"].append({"name": f"{cls.lower()}_new", "type": "string",
                                                   "required": False, "default": None})
        elif op == "add_class":
            container = rng.choice(sorted(classes))
            if container in plan.split or container in plan.deleted:
                continue
            new = f"New{len(plan.added)}"
            classes[new] = {"name": new, "abstract": False, "super": None,
                            "attributes": [{"name": "label", "type": "string", "required": True, "default": None}],
                            "containments": []}
            classes[container]["containments"].append({"role": f"x_{new.lower()}", "child": new,
                                                       "min": rng.choice([0, 1]), "max": "many"})
            src_attr = "title" if container == "Root" else None
            value = f"parent.{src_attr} + \"_x\"" if src_attr else f"\"{new.lower()}\""
            plan.added.append((new, container))
            touched |= {new, container}
            rules.append(f"add {new} in {container} with {{ label := {value} }}")
        elif op == "assoc_rename":
            cands = free(assocs)
            if not cands:
                continue
            old = rng.choice(sorted(cands))
            new = f"{old}R"
            touched |= {old, new}
            a = assocs.pop(old)
            a["name"] = new
            assocs[new] = a
            plan.assoc_renamed[old] = new
            rules.append(f"map assoc {old} => {new}")
        elif op == "reparent":
            cands = []
            for p in sorted(classes):
                if p == "Root" or p not in mm.classes:
                    continue
                for k in classes[p]["containments"]:
                    child = k["child"]
                    if child in mm.classes and child not in touched and mm.subtypes(child) == [child]:
                        cands.append((p, k["role"], child))
            if not cands:
                continue
            p, role, child = rng.choice(cands)
            touched.add(child)
            classes[p]["containments"] = [k for k in classes[p]["containments"] if k["role"] != role]
            plan.reparented.add(child)
            rules.append(f"map {child} => {child} reparent Root")
    data["classes"] = list(classes.values())
    data["associations"] = list(assocs.values())
    mm_dst = metamodel_from_data(data)
    text = f'delta "rand" from {mm.name} {mm.version} to {mm_dst.name} {mm_dst.version}\n' + \
        "".join(r + "\n" for r in rules)
    return Scenario(mm, mm_dst, text, parse_mcl(text, mm, mm_dst), plan)


def identity_delta_text(mm: Metamodel) -> str:
    return f'delta "identity" from {mm.name} {mm.version} to {mm.name} {mm.version}\n'


# ---------------------------------------------------------------------------
# rule graphs
# ---------------------------------------------------------------------------

def random_rulegraph(rng: random.Random, mm_src: Metamodel, mm_dest: Metamodel, n_rules: int = 4) -> RuleGraph:
    """Rules with source-side nodes over ``mm_src`` and destination-side nodes over ``mm_dest``."""
    src_classes = sorted(mm_src.classes)
    dst_classes = sorted(mm_dest.classes)
    rules = []
    for r in range(rng.randint(1, n_rules)):
        nodes, ops = [], []
        for i in range(rng.randint(1, 3)):
            cls = rng.choice(src_classes)
            nid = f"s{i}"
            nodes.append(PatternNode(nid, "source", cls, "match"))
            attrs = sorted(mm_src.all_attributes(cls))
            if attrs and rng.random() < 0.7:
                ops.append(AttrOp(nid, rng.choice(attrs), f"{nid}.{rng.choice(attrs)}"))
        for i in range(rng.randint(0, 2)):
            nodes.append(PatternNode(f"d{i}", "destination", rng.choice(dst_classes), "create"))
        ids = [n.id for n in nodes]
        edges = tuple(PatternEdge(rng.choice(ids), rng.choice(ids), "e") for _ in range(rng.randint(0, 2)))
        rules.append(Rule(f"R{r}", tuple(nodes), edges, tuple(ops)))
    return RuleGraph("rand", tuple(rules))


# ---------------------------------------------------------------------------
# component networks
# ---------------------------------------------------------------------------

def random_component_model(rng: random.Random, max_components: int = 10, max_channels: int = 20) -> Model:
    """A component hierarchy under a single root ``top`` obeying the locality rule.

    Leaf components own in/out ports.  Composite components own boundary
    ports that only relay: an ``in`` boundary port receives from outside and
    feeds inside, an ``out`` one the reverse.
    """
    mm = components_mm()
    b = ModelBuilder(mm.name, mm.version)
    b.add("top", "Component", {"name": "top"})
    comps = ["top"]
    for i in range(1, rng.randint(2, max_components)):
        parent = rng.choice(comps)
        cid = f"k{i}"
        b.add(cid, "Component", {"name": cid}, parent, "sub")
        comps.append(cid)
    parent_of = {c: b.objects[c]["parent"] for c in comps}
    composite = {p for p in parent_of.values() if p is not None}
    ports: dict[str, list[str]] = {}
    for c in comps[1:]:
        ports[c] = []
        for j in range(rng.randint(1, 3) if c not in composite else rng.randint(0, 2)):
            pid = f"{c}.p{j}"
            b.add(pid, "Port", {"direction": rng.choice(["in", "out"])}, c, "ports")
            ports[c].append(pid)
    direction = {p: b.objects[p]["attrs"]["direction"] for ps in ports.values() for p in ps}
    owner = {p: c for c, ps in ports.items() for p in ps}
    candidates = []
    for p in sorted(owner):
        for q in sorted(owner):
            a, c = owner[p], owner[q]
            if a == c:
                continue
            if parent_of[a] == parent_of[c] and direction[p] == "out" and direction[q] == "in":
                candidates.append((p, q))
            elif parent_of[c] == a and direction[p] == "in" and direction[q] == "in":
                candidates.append((p, q))
            elif parent_of[a] == c and direction[p] == "out" and direction[q] == "out":
                candidates.append((p, q))
    rng.shuffle(candidates)
    for j, (p, q) in enumerate(sorted(candidates[:rng.randint(0, max_channels)])):
        b.link(f"ch{j}", "Channel", p, q)
    return b.build()


# ---------------------------------------------------------------------------
# statecharts
# ---------------------------------------------------------------------------

def random_statechart(rng: random.Random, max_states: int = 15, events: tuple[str, ...] = ("a", "b"),
                      p_transition: float = 0.35) -> Model:
    """A deterministic hierarchical machine: at most one transition per (state, event)."""
    mm = statechart_mm()
    b = ModelBuilder(mm.name, mm.version)
    b.add("m", "Machine", {"name": "m"})
    n = rng.randint(2, max_states)
    parents: dict[str, str | None] = {}
    states = []
    for i in range(n):
        sid = f"s{i}"
        parent = rng.choice([None] + states) if states and rng.random() < 0.7 else None
        parents[sid] = parent
        states.append(sid)
        b.add(sid, "State", {"name": sid, "initial": False}, parent or "m", "sub" if parent else "states")
    groups: dict[str | None, list[str]] = {}
    for s in states:
        groups.setdefault(parents[s], []).append(s)
    for members in groups.values():
        b.objects[rng.choice(members)]["attrs"]["initial"] = True
    t = 0
    for s in states:
        for e in events:
            if rng.random() < p_transition:
                tid = f"t{t}"
                t += 1
                b.add(tid, "Transition", {"event": e}, "m", "transitions")
                b.link(f"{tid}.src", "TransitionSource", tid, s)
                b.link(f"{tid}.dst", "TransitionTarget", tid, rng.choice(states))
    return b.build()
