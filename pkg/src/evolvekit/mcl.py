"""The model change language: migration deltas between metamodel versions.

A delta is an ordered list of rules::

    delta "PortSplit" from PortMM 1 to PortMM 2
    map Port => OutPort when size(self.linked(BufferedConnection, src)) > 0
    map Port => InPort otherwise
    map LegacyThing => null
    map Class => Class reparent ParentParent
    map assoc Wire => Connection
    add Thread in Component with { name := parent.name + "_t0" }

Migration runs three passes over the source model: object mapping in
containment pre-order, link mapping, then additions.  The result must
conform to the evolved metamodel or the migration fails.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Union

from .errors import EvolveError
from .expr import (DYNAMIC, AttrRef, Evaluator, Expr, ExprParser, Literal, TokenStream,
                   term_type, tokenize, typecheck)
from .model import ConformanceReport, Metamodel, Model, ModelBuilder, check_conformance


@dataclass(frozen=True)
class Command:
    target: str
    operands: tuple[Union[AttrRef, Literal], ...]

    def text(self) -> str:
        parts = [f"{o.var}.{o.attr}" if isinstance(o, AttrRef) else json.dumps(o.value)
                 for o in self.operands]
        return f"{self.target} := {' + '.join(parts)}"


@dataclass(frozen=True)
class MapRule:
    src_class: str
    dst_class: str | None  # None: the null class
    condition: Expr | None = None
    otherwise: bool = False
    reparent: str | None = None
    commands: tuple[Command, ...] = ()
    line: int = field(default=0, compare=False)

    @property
    def is_delete(self) -> bool:
        return self.dst_class is None

    @property
    def unconditional(self) -> bool:
        return self.condition is None

    def label(self) -> str:
        return f"map {self.src_class} => {self.dst_class or 'null'}" + (
            " otherwise" if self.otherwise else " when ..." if self.condition is not None else "") + (
            f" reparent {self.reparent}" if self.reparent else "")


@dataclass(frozen=True)
class AssocRule:
    src_assoc: str
    dst_assoc: str
    line: int = field(default=0, compare=False)

    def label(self) -> str:
        return f"map assoc {self.src_assoc} => {self.dst_assoc}"


@dataclass(frozen=True)
class AddRule:
    new_class: str
    container_class: str
    condition: Expr | None = None
    commands: tuple[Command, ...] = ()
    line: int = field(default=0, compare=False)

    def label(self) -> str:
        return f"add {self.new_class} in {self.container_class}"


Rule = Union[MapRule, AssocRule, AddRule]


@dataclass(frozen=True)
class MigrationSpec:
    name: str
    src: tuple[str, str]  # (metamodel name, version)
    dst: tuple[str, str]
    rules: tuple[Rule, ...] = ()
    identity_for_unmapped: bool = True

    def map_rules(self, cls: str) -> list[MapRule]:
        """Rules for ``cls`` in evaluation order: file order, ``otherwise`` last."""
        rules = [r for r in self.rules if isinstance(r, MapRule) and r.src_class == cls]
        return [r for r in rules if not r.otherwise] + [r for r in rules if r.otherwise]

    @property
    def add_rules(self) -> list[AddRule]:
        return [r for r in self.rules if isinstance(r, AddRule)]

    @property
    def assoc_renames(self) -> dict[str, str]:
        return {r.src_assoc: r.dst_assoc for r in self.rules if isinstance(r, AssocRule)}

    @property
    def ruled_classes(self) -> set[str]:
        return {r.src_class for r in self.rules if isinstance(r, MapRule)}


def identity_spec(mm_src: Metamodel, mm_dst: Metamodel | None = None) -> MigrationSpec:
    mm_dst = mm_dst or mm_src
    return MigrationSpec("identity", (mm_src.name, mm_src.version), (mm_dst.name, mm_dst.version))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _version(ts: TokenStream) -> str:
    tok = ts.tok
    if tok.kind in ("ident", "int", "float"):
        ts.i += 1
        return tok.text
    if tok.kind == "string":
        ts.i += 1
        return tok.value
    raise ts.error("expected version")


def _commands(ts: TokenStream) -> tuple[Command, ...]:
    if not ts.accept("with"):
        return ()
    ts.expect("{")
    out = []
    while not ts.accept("}"):
        target = ts.ident("attribute name").text
        ts.expect(":=")
        operands = [_operand(ts)]
        while ts.accept("+"):
            operands.append(_operand(ts))
        out.append(Command(target, tuple(operands)))
        ts.accept(",")
    return tuple(out)


def _operand(ts: TokenStream) -> Union[AttrRef, Literal]:
    tok = ts.tok
    pos = (tok.line, tok.col)
    if tok.kind in ("int", "float", "string"):
        ts.i += 1
        return Literal(tok.value, pos)
    if ts.at("true") or ts.at("false"):
        ts.i += 1
        return Literal(tok.text == "true", pos)
    if tok.text not in ("src", "parent") or tok.kind != "ident":
        raise ts.error("expected src.<attr>, parent.<attr> or a literal")
    ts.i += 1
    ts.expect(".")
    return AttrRef(tok.text, ts.ident("attribute name").text, pos)


def parse_mcl(text: str, mm_src: Metamodel | None = None,
              mm_dst: Metamodel | None = None) -> MigrationSpec:
    """Parse a delta; with both metamodels given, also type-check it."""
    ts = TokenStream(tokenize(text))
    ts.expect("delta")
    if ts.tok.kind != "string":
        raise ts.error("expected delta name string")
    name = ts.tok.value
    ts.i += 1
    ts.expect("from")
    src = (ts.ident("metamodel name").text, _version(ts))
    ts.expect("to")
    dst = (ts.ident("metamodel name").text, _version(ts))
    identity = True
    if ts.accept("policy"):
        word = ts.ident("policy")
        if word.text not in ("identity", "noidentity"):
            raise ts.error("expected 'identity' or 'noidentity'", word)
        identity = word.text == "identity"
    exprs = ExprParser(ts)
    rules: list[Rule] = []
    while ts.tok.kind != "eof":
        start = ts.tok
        if ts.accept("map"):
            if ts.accept("assoc"):
                a = ts.ident("association name").text
                ts.expect("=>")
                rules.append(AssocRule(a, ts.ident("association name").text, start.line))
                continue
            src_cls = ts.ident("class name").text
            ts.expect("=>")
            dst_tok = ts.ident("class name or null")
            dst_cls = None if dst_tok.text == "null" else dst_tok.text
            condition, otherwise = None, False
            if ts.accept("when"):
                condition = exprs.expr()
            elif ts.accept("otherwise"):
                otherwise = True
            reparent = ts.ident("class name").text if ts.accept("reparent") else None
            rules.append(MapRule(src_cls, dst_cls, condition, otherwise, reparent,
                                 _commands(ts), start.line))
        elif ts.accept("add"):
            new_cls = ts.ident("class name").text
            ts.expect("in")
            container = ts.ident("class name").text
            condition = exprs.expr() if ts.accept("when") else None
            rules.append(AddRule(new_cls, container, condition, _commands(ts), start.line))
        else:
            raise ts.error("expected 'map' or 'add'")
    spec = MigrationSpec(name, src, dst, tuple(rules), identity)
    if mm_src is not None and mm_dst is not None:
        typecheck_spec(spec, mm_src, mm_dst)
    return spec


def _terr(msg: str, line: int) -> EvolveError:
    return EvolveError("TYPE_ERROR", msg, line=line or None)


def _check_commands(cmds, target_cls: str, env: dict[str, str], mm_of: dict[str, Metamodel],
                    mm_dst: Metamodel, line: int) -> None:
    attrs = mm_dst.all_attributes(target_cls)
    for cmd in cmds:
        if cmd.target not in attrs:
            raise _terr(f"{target_cls} has no attribute {cmd.target}", line)
        kinds = []
        for op in cmd.operands:
            if isinstance(op, AttrRef) and op.var not in env:
                raise _terr(f"'{op.var}' is not available in this rule", line)
            mm = mm_of.get(op.var, mm_dst) if isinstance(op, AttrRef) else mm_dst
            kinds.append(term_type(op, env, mm))
        want = attrs[cmd.target].type
        if DYNAMIC in kinds:
            continue
        if len(kinds) == 1:
            got = kinds[0]
        elif "string" in kinds or "enum" in kinds:
            got = "string"
        elif all(k in ("int", "float") for k in kinds):
            got = "float" if "float" in kinds else "int"
        else:
            raise _terr(f"cannot add {' + '.join(kinds)}", line)
        ok = got == want or (want == "float" and got == "int") or \
            (want == "enum" and got in ("string", "enum")) or (want == "string" and got == "enum")
        if not ok:
            raise _terr(f"{target_cls}.{cmd.target} is {want}, command yields {got}", line)


def typecheck_spec(spec: MigrationSpec, mm_src: Metamodel, mm_dst: Metamodel) -> None:
    if spec.src[0] != mm_src.name or spec.dst[0] != mm_dst.name:
        raise _terr(f"delta is {spec.src[0]} -> {spec.dst[0]}, metamodels are {mm_src.name} -> {mm_dst.name}", 1)
    for rule in spec.rules:
        if isinstance(rule, MapRule):
            if rule.src_class not in mm_src.classes:
                raise _terr(f"unknown source class {rule.src_class}", rule.line)
            if rule.dst_class is not None and rule.dst_class not in mm_dst.classes:
                raise _terr(f"unknown target class {rule.dst_class}", rule.line)
            if rule.reparent is not None and rule.reparent not in mm_src.classes:
                raise _terr(f"unknown reparent class {rule.reparent}", rule.line)
            if rule.condition is not None:
                typecheck(rule.condition, {"self": rule.src_class}, mm_src)
            if rule.commands:
                if rule.dst_class is None:
                    raise _terr("commands on a null mapping", rule.line)
                _check_commands(rule.commands, rule.dst_class, {"src": rule.src_class, "parent": DYNAMIC},
                                {"src": mm_src, "parent": mm_src}, mm_dst, rule.line)
        elif isinstance(rule, AssocRule):
            if rule.src_assoc not in mm_src.associations:
                raise _terr(f"unknown source association {rule.src_assoc}", rule.line)
            if rule.dst_assoc not in mm_dst.associations:
                raise _terr(f"unknown target association {rule.dst_assoc}", rule.line)
        else:
            for cls in (rule.new_class, rule.container_class):
                if cls not in mm_dst.classes:
                    raise _terr(f"unknown class {cls}", rule.line)
            if rule.condition is not None:
                typecheck(rule.condition, {"parent": rule.container_class}, mm_dst)
            _check_commands(rule.commands, rule.new_class, {"parent": rule.container_class},
                            {"parent": mm_dst}, mm_dst, rule.line)


# ---------------------------------------------------------------------------
# lint
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LintEntry:
    severity: str  # error | warning
    code: str
    subject: str
    message: str


@dataclass(frozen=True)
class LintReport:
    entries: tuple[LintEntry, ...] = ()

    @property
    def errors(self) -> list[LintEntry]:
        return [e for e in self.entries if e.severity == "error"]

    @property
    def warnings(self) -> list[LintEntry]:
        return [e for e in self.entries if e.severity == "warning"]


def lint_delta(spec: MigrationSpec, mm_src: Metamodel, mm_dst: Metamodel) -> LintReport:
    out: list[LintEntry] = []
    ruled = spec.ruled_classes
    for cls in mm_src.classes:
        if cls not in ruled and not (spec.identity_for_unmapped and cls in mm_dst.classes):
            out.append(LintEntry("warning", "UNMAPPED_CLASS", cls,
                                 f"{cls} has no rule and no counterpart in {mm_dst.name}"))
    for cls in sorted(ruled):
        rules = spec.map_rules(cls)
        plain = [r for r in rules if r.unconditional and not r.otherwise]
        others = [r for r in rules if r.otherwise]
        conds = [r.condition for r in rules if r.condition is not None]
        if len(plain) > 1 or len(others) > 1 or (plain and len(rules) > 1) \
                or len(conds) != len(set(conds)):
            out.append(LintEntry("warning", "OVERLAPPING_CONDITIONS", cls,
                                 f"{len(rules)} rules for {cls} can apply to the same object"))
    for rule in spec.rules:
        if isinstance(rule, MapRule):
            for cls in filter(None, (rule.src_class, rule.reparent)):
                if cls not in mm_src.classes:
                    out.append(LintEntry("error", "UNKNOWN_CLASS", cls, f"line {rule.line}: {cls} not in {mm_src.name}"))
            if rule.dst_class is not None and rule.dst_class not in mm_dst.classes:
                out.append(LintEntry("error", "UNKNOWN_CLASS", rule.dst_class,
                                     f"line {rule.line}: {rule.dst_class} not in {mm_dst.name}"))
            target = rule.dst_class
        elif isinstance(rule, AddRule):
            for cls in (rule.new_class, rule.container_class):
                if cls not in mm_dst.classes:
                    out.append(LintEntry("error", "UNKNOWN_CLASS", cls, f"line {rule.line}: {cls} not in {mm_dst.name}"))
            target = rule.new_class
        else:
            if rule.src_assoc not in mm_src.associations or rule.dst_assoc not in mm_dst.associations:
                out.append(LintEntry("error", "UNKNOWN_ASSOC", rule.src_assoc, f"line {rule.line}: {rule.label()}"))
            continue
        if target in mm_dst.classes:
            attrs = mm_dst.all_attributes(target)
            for cmd in rule.commands:
                if cmd.target not in attrs:
                    out.append(LintEntry("error", "UNKNOWN_ATTR", f"{target}.{cmd.target}",
                                         f"line {rule.line}: {target} has no attribute {cmd.target}"))
    return LintReport(tuple(out))


# ---------------------------------------------------------------------------
# migration
# ---------------------------------------------------------------------------

@dataclass
class MigrationReport:
    mapped: dict[str, int] = field(default_factory=dict)  # rule label -> object count
    identity: int = 0
    dropped: list[tuple[str, str]] = field(default_factory=list)
    dropped_links: list[tuple[str, str]] = field(default_factory=list)
    added: list[str] = field(default_factory=list)
    warnings: list[tuple[str, str, str]] = field(default_factory=list)  # (code, subject, message)

    @property
    def accounted(self) -> int:
        return sum(self.mapped.values()) + self.identity + len(self.dropped)

    def to_data(self) -> dict:
        return {
            "mapped": dict(sorted(self.mapped.items())), "identity": self.identity,
            "dropped": [{"id": i, "reason": r} for i, r in self.dropped],
            "droppedLinks": [{"id": i, "reason": r} for i, r in self.dropped_links],
            "added": list(self.added),
            "warnings": [{"code": c, "subject": s, "message": m} for c, s, m in self.warnings],
        }

    def render(self, format: str = "text") -> str:
        if format == "json":
            return json.dumps(self.to_data(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        lines = [f"mapped {n:>4}  {label}" for label, n in sorted(self.mapped.items())]
        lines.append(f"identity {self.identity}")
        lines += [f"dropped {i}: {r}" for i, r in self.dropped]
        lines += [f"dropped link {i}: {r}" for i, r in self.dropped_links]
        lines += [f"added {i}" for i in self.added]
        lines += [f"warning {c} {s}: {m}" for c, s, m in self.warnings]
        return "\n".join(lines) + "\n"


def _incomplete(message: str, objects: list[str], report: ConformanceReport | None = None) -> EvolveError:
    return EvolveError("MIGRATION_INCOMPLETE", message,
                       details={"objects": sorted(objects), "conformance": report})


def _run_commands(cmds, env_objs: dict[str, dict[str, Any]], fault: list[str], oid: str) -> dict[str, Any]:
    out = {}
    for cmd in cmds:
        values = []
        for op in cmd.operands:
            if isinstance(op, Literal):
                values.append(op.value)
            else:
                attrs = env_objs.get(op.var)
                if attrs is None or op.attr not in attrs:
                    fault.append(f"{oid}: {op.var}.{op.attr} is unset")
                    values = None
                    break
                values.append(attrs[op.attr])
        if values is None:
            continue
        if any(isinstance(v, str) for v in values):
            value = "".join(v if isinstance(v, str) else json.dumps(v) for v in values)
        elif len(values) == 1:
            value = values[0]
        else:
            value = sum(values)
        out[cmd.target] = value
    return out


def _with_defaults(obj_attrs: dict, cls: str, mm: Metamodel, oid: str,
                   report: MigrationReport, fault: list[str]) -> None:
    for name, attr in mm.all_attributes(cls).items():
        if attr.required and name not in obj_attrs:
            if attr.default is not None:
                obj_attrs[name] = attr.default
                report.warnings.append(("DEFAULT_FILLED", oid, f"{name} := {json.dumps(attr.default)}"))
            else:
                fault.append(f"{oid}: required attribute {cls}.{name} has no value")


def _attrs_with_defaults(obj, mm: Metamodel) -> dict[str, Any]:
    out = {n: a.default for n, a in mm.all_attributes(obj.class_name).items() if a.default is not None} \
        if obj.class_name in mm.classes else {}
    out.update(obj.attributes)
    return out


def migrate_model(model: Model, spec: MigrationSpec, mm_src: Metamodel,
                  mm_dst: Metamodel) -> tuple[Model, MigrationReport]:
    src_report = check_conformance(model, mm_src)
    if model.metamodel_name != mm_src.name or not src_report.conformant:
        raise _incomplete("source model does not conform to the source metamodel",
                          sorted({v.element for v in src_report.violations}), src_report)
    report = MigrationReport()
    fault: list[str] = []
    ev = Evaluator(model, mm_src)
    b = ModelBuilder(mm_dst.name, mm_dst.version)
    labels = {id(r): f"{i:02d} {r.label()}" for i, r in enumerate(spec.rules)}

    # P1: objects
    for oid in model.preorder():
        obj = model.objects[oid]
        entry = model.parent_of.get(oid)
        rules = spec.map_rules(obj.class_name)
        rule = next((r for r in rules if r.otherwise or r.condition is None
                     or ev.holds(r.condition, {"self": oid})), None)
        identity = rule is None
        if identity:
            if not (spec.identity_for_unmapped and obj.class_name in mm_dst.classes):
                if rules:
                    fault.append(f"{oid}: no rule for {obj.class_name} applies")
                    continue
                report.dropped.append((oid, f"UNMAPPED_CLASS {obj.class_name}"))
                report.warnings.append(("UNMAPPED_CLASS", oid, f"no rule or counterpart for {obj.class_name}"))
                continue
            dst_cls = obj.class_name
        else:
            dst_cls = rule.dst_class
        if rule is not None and rule.reparent:
            anc = entry[0] if entry else None
            while anc is not None and not mm_src.is_subtype(model.objects[anc].class_name, rule.reparent):
                anc = model.parent(anc)
            if anc is None or anc not in b.objects:
                fault.append(f"{oid}: no migrated ancestor of class {rule.reparent}")
                continue
            parent_img, role = anc, None
        elif entry is not None and entry[0] not in b.objects:
            report.dropped.append((oid, f"ancestor {entry[0]} dropped"))
            continue
        else:
            parent_img, role = (entry if entry else (None, None))
        if dst_cls is None:
            report.dropped.append((oid, "mapped to null"))
            continue
        if parent_img is not None and role is None:
            pcls = b.objects[parent_img]["class"]
            roles = mm_dst.roles_accepting(pcls, dst_cls)
            orig = entry[1] if entry else None
            role = orig if orig in roles else (roles[0] if roles else None)
            if role is None:
                fault.append(f"{oid}: {pcls} has no containment role for {dst_cls}")
                continue
        attrs: dict[str, Any] = {}
        if rule is not None and rule.commands:
            scope = {"src": _attrs_with_defaults(obj, mm_src)}
            if entry is not None:
                scope["parent"] = _attrs_with_defaults(model.objects[entry[0]], mm_src)
            attrs.update(_run_commands(rule.commands, scope, fault, oid))
        declared = mm_dst.all_attributes(dst_cls)
        for name, value in obj.attributes.items():
            if name in attrs:
                continue
            if name in declared:
                attrs[name] = value
            else:
                report.warnings.append(("ATTR_DROPPED", oid, f"{obj.class_name}.{name} has no counterpart in {dst_cls}"))
        _with_defaults(attrs, dst_cls, mm_dst, oid, report, fault)
        b.add(oid, dst_cls, attrs, parent_img, role)
        if identity:
            report.identity += 1
        else:
            report.mapped[labels[id(rule)]] = report.mapped.get(labels[id(rule)], 0) + 1
    if fault:
        raise _incomplete("; ".join(fault), [f.split(":")[0] for f in fault])

    # P2: links
    renames = spec.assoc_renames
    for lid, link in model.links.items():
        name = renames.get(link.association, link.association)
        assoc = mm_dst.associations.get(name)
        if link.src not in b.objects or link.dst not in b.objects:
            report.dropped_links.append((lid, "endpoint dropped"))
        elif assoc is None:
            report.dropped_links.append((lid, f"association {name} not in {mm_dst.name}"))
        elif not (mm_dst.is_subtype(b.objects[link.src]["class"], assoc.src)
                  and mm_dst.is_subtype(b.objects[link.dst]["class"], assoc.dst)):
            report.dropped_links.append((lid, f"endpoint classes do not fit {name}"))
        else:
            b.link(lid, name, link.src, link.dst)

    # P3: additions
    for rule in spec.add_rules:
        current = b.build()
        ev_dst = Evaluator(current, mm_dst)
        for pid in current.preorder():
            pcls = current.objects[pid].class_name
            if not mm_dst.is_subtype(pcls, rule.container_class):
                continue
            if rule.condition is not None and not ev_dst.holds(rule.condition, {"parent": pid}):
                continue
            roles = mm_dst.roles_accepting(pcls, rule.new_class)
            if not roles:
                fault.append(f"{pid}: {pcls} has no containment role for {rule.new_class}")
                continue
            n = 0
            while f"{pid}/{rule.new_class}/{n}" in b.objects:
                n += 1
            nid = f"{pid}/{rule.new_class}/{n}"
            attrs = _run_commands(rule.commands, {"parent": _attrs_with_defaults(current.objects[pid], mm_dst)},
                                  fault, nid)
            _with_defaults(attrs, rule.new_class, mm_dst, nid, report, fault)
            b.add(nid, rule.new_class, attrs, pid, roles[0])
            report.added.append(nid)
    if fault:
        raise _incomplete("; ".join(fault), [f.split(":")[0] for f in fault])

    out = b.build()
    final = check_conformance(out, mm_dst)
    if not final.conformant:
        raise _incomplete("migrated model does not conform to the evolved metamodel",
                          sorted({v.element for v in final.violations}), final)
    report.warnings.sort()
    return out, report
