"""Metamodels, models, the JSON interchange format and conformance checking.

Metamodels and models are treated as immutable values.  Loading normalizes
ordering (objects and links by id, sibling lists by id, classes and features
by name) so that structural equality coincides with equality of the
canonical serialization.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Iterator

from .errors import EvolveError, parse_error

MANY = None  # unbounded upper multiplicity
PRIMITIVES = ("string", "int", "float", "bool", "enum")


# ---------------------------------------------------------------------------
# metamodel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Attribute:
    name: str
    type: str
    required: bool = False
    default: Any = None
    values: tuple[str, ...] = ()  # enum literals

    def accepts(self, value: Any) -> bool:
        return literal_matches(self.type, self.values, value)


@dataclass(frozen=True)
class Containment:
    role: str
    child: str
    min: int = 0
    max: int | None = MANY


@dataclass(frozen=True)
class MClass:
    name: str
    abstract: bool = False
    superclass: str | None = None
    attributes: tuple[Attribute, ...] = ()
    containments: tuple[Containment, ...] = ()


@dataclass(frozen=True)
class MAssociation:
    name: str
    src: str
    dst: str
    src_role: str = "src"
    dst_role: str = "dst"
    src_mult: tuple[int, int | None] = (0, MANY)
    dst_mult: tuple[int, int | None] = (0, MANY)

    def end_class(self, role: str) -> str:
        return self.src if role == self.src_role else self.dst

    def other_role(self, role: str) -> str:
        return self.dst_role if role == self.src_role else self.src_role


@dataclass(frozen=True)
class Metamodel:
    name: str
    version: str
    classes: dict[str, MClass]
    associations: dict[str, MAssociation] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "classes", dict(sorted(self.classes.items())))
        object.__setattr__(self, "associations", dict(sorted(self.associations.items())))

    def ancestors(self, name: str) -> list[str]:
        """``name`` followed by its superclass chain (nearest first)."""
        chain = []
        while name is not None and name in self.classes and name not in chain:
            chain.append(name)
            name = self.classes[name].superclass
        return chain

    def is_subtype(self, sub: str, sup: str) -> bool:
        return sup in self.ancestors(sub)

    def subtypes(self, name: str) -> list[str]:
        return sorted(c for c in self.classes if self.is_subtype(c, name))

    def all_attributes(self, name: str) -> dict[str, Attribute]:
        out: dict[str, Attribute] = {}
        for cls in reversed(self.ancestors(name)):
            for attr in self.classes[cls].attributes:
                out[attr.name] = attr
        return out

    def all_containments(self, name: str) -> dict[str, Containment]:
        out: dict[str, Containment] = {}
        for cls in reversed(self.ancestors(name)):
            for cont in self.classes[cls].containments:
                out[cont.role] = cont
        return out

    def roles_accepting(self, parent_class: str, child_class: str) -> list[str]:
        return sorted(r for r, c in self.all_containments(parent_class).items()
                      if self.is_subtype(child_class, c.child))


def literal_matches(type_: str, values: Iterable[str], value: Any) -> bool:
    if type_ == "string":
        return isinstance(value, str)
    if type_ == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if type_ == "float":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if type_ == "bool":
        return isinstance(value, bool)
    if type_ == "enum":
        return isinstance(value, str) and value in tuple(values)
    return False


def check_metamodel(mm: Metamodel) -> None:
    """Raise METAMODEL_ILLFORMED on the first violated metamodel invariant."""

    def bad(msg: str) -> EvolveError:
        return EvolveError("METAMODEL_ILLFORMED", msg)

    for cls in mm.classes.values():
        if cls.superclass is not None and cls.superclass not in mm.classes:
            raise bad(f"class {cls.name}: unknown superclass {cls.superclass}")
    for name in mm.classes:
        seen = {name}
        cur = mm.classes[name].superclass
        while cur is not None:
            if cur in seen:
                raise bad(f"class {name}: inheritance cycle through {cur}")
            seen.add(cur)
            cur = mm.classes[cur].superclass
    for name, cls in mm.classes.items():
        names = [a.name for c in mm.ancestors(name) for a in mm.classes[c].attributes]
        dup = _first_duplicate(names)
        if dup:
            raise bad(f"class {name}: duplicate attribute {dup}")
        for attr in cls.attributes:
            if attr.type not in PRIMITIVES:
                raise bad(f"{name}.{attr.name}: unknown type {attr.type}")
            if attr.type == "enum" and not attr.values:
                raise bad(f"{name}.{attr.name}: enum without values")
            if attr.default is not None and not attr.accepts(attr.default):
                raise bad(f"{name}.{attr.name}: default {attr.default!r} does not match type {attr.type}")
        roles = [c.role for a in mm.ancestors(name) for c in mm.classes[a].containments]
        dup = _first_duplicate(roles)
        if dup:
            raise bad(f"class {name}: duplicate containment role {dup}")
        for cont in cls.containments:
            if cont.child not in mm.classes:
                raise bad(f"{name}.{cont.role}: unknown child class {cont.child}")
            if cont.max is not None and cont.min > cont.max:
                raise bad(f"{name}.{cont.role}: min > max")
    for assoc in mm.associations.values():
        for end in (assoc.src, assoc.dst):
            if end not in mm.classes:
                raise bad(f"association {assoc.name}: unknown class {end}")
        if assoc.src_role == assoc.dst_role:
            raise bad(f"association {assoc.name}: role names must differ")
        for lo, hi in (assoc.src_mult, assoc.dst_mult):
            if hi is not None and lo > hi:
                raise bad(f"association {assoc.name}: min > max")


def _first_duplicate(items: Iterable[str]) -> str | None:
    seen = set()
    for item in items:
        if item in seen:
            return item
        seen.add(item)
    return None


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MObject:
    id: str
    class_name: str
    attributes: dict[str, Any] = field(default_factory=dict)
    children: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "attributes", dict(sorted(self.attributes.items())))
        kids = {role: tuple(sorted(ids)) for role, ids in sorted(self.children.items()) if ids}
        object.__setattr__(self, "children", kids)

    def child_ids(self) -> Iterator[str]:
        for ids in self.children.values():
            yield from ids


@dataclass(frozen=True)
class MLink:
    id: str
    association: str
    src: str
    dst: str


@dataclass(frozen=True)
class Model:
    metamodel_name: str
    metamodel_version: str
    objects: dict[str, MObject] = field(default_factory=dict)
    links: dict[str, MLink] = field(default_factory=dict)
    roots: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "objects", dict(sorted(self.objects.items())))
        object.__setattr__(self, "links", dict(sorted(self.links.items())))
        object.__setattr__(self, "roots", tuple(sorted(self.roots)))

    @cached_property
    def parent_of(self) -> dict[str, tuple[str, str]]:
        """child id -> (parent id, role)."""
        out = {}
        for obj in self.objects.values():
            for role, ids in obj.children.items():
                for cid in ids:
                    out.setdefault(cid, (obj.id, role))
        return out

    def parent(self, oid: str) -> str | None:
        entry = self.parent_of.get(oid)
        return entry[0] if entry else None

    def preorder(self) -> list[str]:
        """Containment pre-order; roots and siblings visited by id."""
        order: list[str] = []
        stack = list(reversed(self.roots))
        while stack:
            oid = stack.pop()
            order.append(oid)
            obj = self.objects[oid]
            stack.extend(reversed(sorted(obj.child_ids())))
        return order

    def subtree(self, oid: str) -> list[str]:
        out, stack = [], [oid]
        while stack:
            cur = stack.pop()
            out.append(cur)
            stack.extend(self.objects[cur].child_ids())
        return sorted(out)

    def links_of(self, oid: str) -> list[MLink]:
        return [l for l in self.links.values() if oid in (l.src, l.dst)]

    def thaw(self) -> "ModelBuilder":
        return ModelBuilder.from_model(self)


def check_model_structure(model: Model) -> None:
    """Referential integrity only: ids, link endpoints, containment forest."""

    def bad(msg: str) -> EvolveError:
        return EvolveError("MODEL_ILLFORMED", msg)

    parents: dict[str, str] = {}
    for obj in model.objects.values():
        for role, ids in obj.children.items():
            if len(set(ids)) != len(ids):
                raise bad(f"object {obj.id}: duplicate child in role {role}")
            for cid in ids:
                if cid not in model.objects:
                    raise bad(f"object {obj.id}: unknown child {cid}")
                if cid in parents:
                    raise bad(f"object {cid}: more than one parent ({parents[cid]}, {obj.id})")
                parents[cid] = obj.id
    for rid in model.roots:
        if rid not in model.objects:
            raise bad(f"unknown root {rid}")
        if rid in parents:
            raise bad(f"root {rid} has parent {parents[rid]}")
    for oid in model.objects:
        if oid not in parents and oid not in model.roots:
            raise bad(f"object {oid} has no parent and is not a root")
    reached = set(model.preorder()) if len(set(model.roots)) == len(model.roots) else set()
    unreached = sorted(set(model.objects) - reached)
    if unreached:
        raise bad(f"containment cycle through {unreached[0]}")
    for link in model.links.values():
        for end in (link.src, link.dst):
            if end not in model.objects:
                raise bad(f"link {link.id}: dangling endpoint {end}")


class ModelBuilder:
    """Mutable scratch space for constructing a new :class:`Model`."""

    def __init__(self, metamodel_name: str, metamodel_version: str):
        self.metamodel_name = metamodel_name
        self.metamodel_version = metamodel_version
        self.objects: dict[str, dict] = {}  # id -> {"class", "attrs", "parent", "role"}
        self.links: dict[str, MLink] = {}

    @classmethod
    def from_model(cls, model: Model) -> "ModelBuilder":
        b = cls(model.metamodel_name, model.metamodel_version)
        for oid in model.preorder():
            obj = model.objects[oid]
            parent = model.parent_of.get(oid)
            b.add(oid, obj.class_name, copy.deepcopy(obj.attributes),
                  parent[0] if parent else None, parent[1] if parent else None)
        b.links = dict(model.links)
        return b

    def add(self, oid: str, class_name: str, attrs: dict | None = None,
            parent: str | None = None, role: str | None = None) -> None:
        if oid in self.objects:
            raise EvolveError("MODEL_ILLFORMED", f"duplicate object id {oid}")
        self.objects[oid] = {"class": class_name, "attrs": dict(attrs or {}),
                             "parent": parent, "role": role}

    def move(self, oid: str, parent: str | None, role: str | None) -> None:
        self.objects[oid]["parent"] = parent
        self.objects[oid]["role"] = role

    def children(self, oid: str) -> list[str]:
        return sorted(k for k, v in self.objects.items() if v["parent"] == oid)

    def remove(self, oid: str) -> None:
        """Remove ``oid`` with its subtree and every incident link."""
        doomed = {oid}
        changed = True
        while changed:
            changed = False
            for k, v in self.objects.items():
                if v["parent"] in doomed and k not in doomed:
                    doomed.add(k)
                    changed = True
        for k in doomed:
            del self.objects[k]
        self.links = {i: l for i, l in self.links.items()
                      if l.src not in doomed and l.dst not in doomed}

    def link(self, lid: str, association: str, src: str, dst: str) -> None:
        if lid in self.links:
            raise EvolveError("MODEL_ILLFORMED", f"duplicate link id {lid}")
        self.links[lid] = MLink(lid, association, src, dst)

    def fresh_id(self, stem: str, used: Iterable[str] = ()) -> str:
        taken = set(self.objects) | set(self.links) | set(used)
        if stem not in taken:
            return stem
        n = 1
        while f"{stem}~{n}" in taken:
            n += 1
        return f"{stem}~{n}"

    def build(self) -> Model:
        children: dict[str, dict[str, list[str]]] = {k: {} for k in self.objects}
        roots = []
        for oid, v in self.objects.items():
            if v["parent"] is None:
                roots.append(oid)
            else:
                if v["parent"] not in children:
                    raise EvolveError("MODEL_ILLFORMED", f"object {oid}: unknown parent {v['parent']}")
                children[v["parent"]].setdefault(v["role"], []).append(oid)
        objects = {oid: MObject(oid, v["class"], v["attrs"],
                                {r: tuple(ids) for r, ids in children[oid].items()})
                   for oid, v in self.objects.items()}
        model = Model(self.metamodel_name, self.metamodel_version, objects, dict(self.links), tuple(roots))
        check_model_structure(model)
        return model


# ---------------------------------------------------------------------------
# interchange format
# ---------------------------------------------------------------------------

def _decode(document: bytes | str) -> Any:
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise parse_error(f"not UTF-8: {exc}") from None
    try:
        return json.loads(document)
    except json.JSONDecodeError as exc:
        raise parse_error(exc.msg, exc.lineno, exc.colno) from None


def _get(obj: Any, key: str, kind: type | tuple, where: str, default: Any = ...) -> Any:
    if not isinstance(obj, dict):
        raise parse_error(f"{where}: expected an object")
    if key not in obj:
        if default is ...:
            raise parse_error(f"{where}: missing field '{key}'")
        return default
    value = obj[key]
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise parse_error(f"{where}.{key}: unexpected {type(value).__name__}")
    return value


def _upper(value: Any, where: str) -> int | None:
    if value == "many" or value is None:
        return MANY
    if isinstance(value, int) and not isinstance(value, bool) and value >= 0:
        return value
    raise parse_error(f"{where}: bad upper bound {value!r}")


def _mult(value: Any, where: str) -> tuple[int, int | None]:
    if value is None:
        return (0, MANY)
    if not isinstance(value, list) or len(value) != 2 or not isinstance(value[0], int) \
            or isinstance(value[0], bool) or value[0] < 0:
        raise parse_error(f"{where}: multiplicity must be [min, max|\"many\"]")
    return (value[0], _upper(value[1], where))


def metamodel_from_data(data: Any) -> Metamodel:
    name = _get(data, "name", str, "metamodel")
    version = _get(data, "version", str, "metamodel")
    classes: dict[str, MClass] = {}
    for i, c in enumerate(_get(data, "classes", list, "metamodel")):
        where = f"classes[{i}]"
        cname = _get(c, "name", str, where)
        attrs = []
        for j, a in enumerate(_get(c, "attributes", list, where, [])):
            aw = f"{where}.attributes[{j}]"
            values = _get(a, "values", list, aw, [])
            if not all(isinstance(v, str) for v in values):
                raise parse_error(f"{aw}.values: enum literals must be strings")
            attrs.append(Attribute(_get(a, "name", str, aw), _get(a, "type", str, aw),
                                   _get(a, "required", bool, aw, False), a.get("default"),
                                   tuple(sorted(values))))
        conts = []
        for j, k in enumerate(_get(c, "containments", list, where, [])):
            kw = f"{where}.containments[{j}]"
            lo = _get(k, "min", int, kw, 0)
            if lo < 0:
                raise parse_error(f"{kw}.min: negative")
            conts.append(Containment(_get(k, "role", str, kw), _get(k, "child", str, kw),
                                     lo, _upper(k.get("max", "many"), kw + ".max")))
        if cname in classes:
            raise EvolveError("METAMODEL_ILLFORMED", f"duplicate class {cname}")
        classes[cname] = MClass(cname, _get(c, "abstract", bool, where, False),
                                _get(c, "super", (str, type(None)), where, None),
                                tuple(sorted(attrs, key=lambda a: a.name)),
                                tuple(sorted(conts, key=lambda k: k.role)))
    assocs: dict[str, MAssociation] = {}
    for i, a in enumerate(_get(data, "associations", list, "metamodel", [])):
        where = f"associations[{i}]"
        aname = _get(a, "name", str, where)
        if aname in assocs:
            raise EvolveError("METAMODEL_ILLFORMED", f"duplicate association {aname}")
        assocs[aname] = MAssociation(aname, _get(a, "src", str, where), _get(a, "dst", str, where),
                                     _get(a, "srcRole", str, where, "src"),
                                     _get(a, "dstRole", str, where, "dst"),
                                     _mult(a.get("srcMult"), where + ".srcMult"),
                                     _mult(a.get("dstMult"), where + ".dstMult"))
    mm = Metamodel(name, version, classes, assocs)
    check_metamodel(mm)
    return mm


def model_from_data(data: Any) -> Model:
    mm_name = _get(data, "metamodel", str, "model")
    mm_version = _get(data, "metamodelVersion", str, "model")
    objects: dict[str, MObject] = {}
    for i, o in enumerate(_get(data, "objects", list, "model", [])):
        where = f"objects[{i}]"
        oid = _get(o, "id", str, where)
        attrs = _get(o, "attrs", dict, where, {})
        for k, v in attrs.items():
            if not isinstance(v, (str, int, float, bool)) or v is None:
                raise parse_error(f"{where}.attrs.{k}: not a literal")
        kids = _get(o, "children", dict, where, {})
        for role, ids in kids.items():
            if not isinstance(ids, list) or not all(isinstance(x, str) for x in ids):
                raise parse_error(f"{where}.children.{role}: expected a list of ids")
        if oid in objects:
            raise EvolveError("MODEL_ILLFORMED", f"duplicate object id {oid}")
        objects[oid] = MObject(oid, _get(o, "class", str, where), dict(attrs),
                               {r: tuple(ids) for r, ids in kids.items()})
    links: dict[str, MLink] = {}
    for i, l in enumerate(_get(data, "links", list, "model", [])):
        where = f"links[{i}]"
        lid = _get(l, "id", str, where)
        if lid in links:
            raise EvolveError("MODEL_ILLFORMED", f"duplicate link id {lid}")
        links[lid] = MLink(lid, _get(l, "assoc", str, where), _get(l, "src", str, where),
                           _get(l, "dst", str, where))
    roots = _get(data, "roots", list, "model", [])
    if not all(isinstance(r, str) for r in roots):
        raise parse_error("model.roots: expected a list of ids")
    if len(set(roots)) != len(roots):
        raise EvolveError("MODEL_ILLFORMED", "duplicate root id")
    model = Model(mm_name, mm_version, objects, links, tuple(roots))
    check_model_structure(model)
    return model


def load_metamodel(document: bytes | str) -> Metamodel:
    return metamodel_from_data(_decode(document))


def load_model(document: bytes | str) -> Model:
    return model_from_data(_decode(document))


def _mult_out(m: tuple[int, int | None]) -> list:
    return [m[0], "many" if m[1] is None else m[1]]


def metamodel_to_data(mm: Metamodel) -> dict:
    classes = []
    for cls in mm.classes.values():
        attrs = []
        for a in cls.attributes:
            entry = {"name": a.name, "type": a.type, "required": a.required, "default": a.default}
            if a.type == "enum":
                entry["values"] = list(a.values)
            attrs.append(entry)
        classes.append({
            "name": cls.name, "abstract": cls.abstract, "super": cls.superclass,
            "attributes": attrs,
            "containments": [{"role": k.role, "child": k.child, "min": k.min,
                              "max": "many" if k.max is None else k.max} for k in cls.containments],
        })
    assocs = [{"name": a.name, "src": a.src, "dst": a.dst, "srcRole": a.src_role,
               "dstRole": a.dst_role, "srcMult": _mult_out(a.src_mult),
               "dstMult": _mult_out(a.dst_mult)} for a in mm.associations.values()]
    return {"name": mm.name, "version": mm.version, "classes": classes, "associations": assocs}


def model_to_data(model: Model) -> dict:
    return {
        "metamodel": model.metamodel_name,
        "metamodelVersion": model.metamodel_version,
        "roots": list(model.roots),
        "objects": [{"id": o.id, "class": o.class_name, "attrs": dict(o.attributes),
                     "children": {r: list(ids) for r, ids in o.children.items()}}
                    for o in model.objects.values()],
        "links": [{"id": l.id, "assoc": l.association, "src": l.src, "dst": l.dst}
                  for l in model.links.values()],
    }


def dumps_canonical(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def save_model(model: Model) -> bytes:
    return dumps_canonical(model_to_data(model)).encode("utf-8")


def save_metamodel(mm: Metamodel) -> bytes:
    return dumps_canonical(metamodel_to_data(mm)).encode("utf-8")


# ---------------------------------------------------------------------------
# conformance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    code: str
    element: str
    message: str


@dataclass(frozen=True)
class ConformanceReport:
    violations: tuple[Violation, ...] = ()

    @property
    def conformant(self) -> bool:
        return not self.violations

    def to_data(self) -> dict:
        return {"conformant": self.conformant,
                "violations": [{"code": v.code, "element": v.element, "message": v.message}
                               for v in self.violations]}

    def render(self) -> str:
        lines = [f"{v.code} {v.element}: {v.message}" for v in self.violations]
        lines.append("conformant" if self.conformant
                     else f"not conformant ({len(self.violations)} violations)")
        return "\n".join(lines) + "\n"


def _in_bounds(n: int, lo: int, hi: int | None) -> bool:
    return n >= lo and (hi is None or n <= hi)


def _fmt_bounds(lo: int, hi: int | None) -> str:
    return f"[{lo}..{'*' if hi is None else hi}]"


def check_conformance(model: Model, mm: Metamodel) -> ConformanceReport:
    """Check typing and multiplicities of ``model`` against ``mm``.

    An object of unknown class is reported once (UNKNOWN_CLASS) and skipped by
    the type checks of its parent and incident links.
    """
    out: list[Violation] = []
    known = {oid for oid, o in model.objects.items() if o.class_name in mm.classes}

    for obj in model.objects.values():
        if obj.id not in known:
            out.append(Violation("UNKNOWN_CLASS", obj.id, f"class {obj.class_name} not in {mm.name}"))
            continue
        cls = mm.classes[obj.class_name]
        if cls.abstract:
            out.append(Violation("ABSTRACT_INSTANTIATION", obj.id, f"class {cls.name} is abstract"))
        attrs = mm.all_attributes(cls.name)
        for name, value in obj.attributes.items():
            if name not in attrs:
                out.append(Violation("UNKNOWN_ATTR", obj.id, f"{cls.name} has no attribute {name}"))
            elif not attrs[name].accepts(value):
                out.append(Violation("ATTR_TYPE_MISMATCH", obj.id,
                                     f"{name}={value!r} does not match type {attrs[name].type}"))
        for name, attr in attrs.items():
            if attr.required and name not in obj.attributes:
                out.append(Violation("MISSING_REQUIRED_ATTR", obj.id, f"missing {name}"))
        conts = mm.all_containments(cls.name)
        for role, ids in obj.children.items():
            if role not in conts:
                out.append(Violation("BAD_CONTAINMENT_ROLE", obj.id, f"{cls.name} has no role {role}"))
                continue
            for cid in ids:
                if cid in known and not mm.is_subtype(model.objects[cid].class_name, conts[role].child):
                    out.append(Violation("BAD_CONTAINMENT_ROLE", obj.id,
                                         f"child {cid} in {role} is not of class {conts[role].child}"))
        for role, cont in conts.items():
            n = len(obj.children.get(role, ()))
            if not _in_bounds(n, cont.min, cont.max):
                out.append(Violation("CONTAINMENT_MULT", obj.id,
                                     f"{role} has {n} children, expected {_fmt_bounds(cont.min, cont.max)}"))

    src_count: dict[tuple[str, str], int] = {}
    dst_count: dict[tuple[str, str], int] = {}
    for link in model.links.values():
        assoc = mm.associations.get(link.association)
        if assoc is None:
            out.append(Violation("UNKNOWN_ASSOC", link.id, f"association {link.association} not in {mm.name}"))
            continue
        ok = True
        for end, want in ((link.src, assoc.src), (link.dst, assoc.dst)):
            if end in known and not mm.is_subtype(model.objects[end].class_name, want):
                out.append(Violation("LINK_END_TYPE", link.id, f"endpoint {end} is not of class {want}"))
                ok = False
        if ok:
            src_count[(assoc.name, link.src)] = src_count.get((assoc.name, link.src), 0) + 1
            dst_count[(assoc.name, link.dst)] = dst_count.get((assoc.name, link.dst), 0) + 1

    for assoc in mm.associations.values():
        lo, hi = assoc.dst_mult
        if (lo, hi) != (0, None):
            for oid in sorted(known):
                if mm.is_subtype(model.objects[oid].class_name, assoc.src):
                    n = src_count.get((assoc.name, oid), 0)
                    if not _in_bounds(n, lo, hi):
                        out.append(Violation("LINK_MULT", oid, f"{assoc.name}.{assoc.dst_role} has {n} "
                                             f"targets, expected {_fmt_bounds(lo, hi)}"))
        lo, hi = assoc.src_mult
        if (lo, hi) != (0, None):
            for oid in sorted(known):
                if mm.is_subtype(model.objects[oid].class_name, assoc.dst):
                    n = dst_count.get((assoc.name, oid), 0)
                    if not _in_bounds(n, lo, hi):
                        out.append(Violation("LINK_MULT", oid, f"{assoc.name}.{assoc.src_role} has {n} "
                                             f"sources, expected {_fmt_bounds(lo, hi)}"))

    return ConformanceReport(tuple(sorted(out, key=lambda v: (v.element, v.code, v.message))))
