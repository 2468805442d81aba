"""Predicate-logic expressions over models: lexer, parser, typing, evaluation.

The same expression language serves constraint files and the conditions of
migration rules.  Collections are class extents ``all(C)``, containment
navigations ``v.role`` and link navigations ``v.linked(Assoc, role)``, where
``role`` names the end that ``v`` plays; the collection holds the objects at
the opposite end.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Iterator, Union

from .errors import EvolveError
from .model import Metamodel, Model

KEYWORDS = {"forall", "exists", "in", "and", "or", "not", "implies", "true", "false",
            "size", "all"}
COMPARATORS = ("=", "!=", "<", "<=", ">", ">=")

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>(?:\#|//)[^\n]*)
  | (?P<float>-?\d+\.\d+)
  | (?P<int>-?\d+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|=>|!=|<=|>=|[=<>().,:{}+])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, int, float, string, op, eof
    text: str
    line: int
    col: int

    @property
    def value(self) -> Any:
        if self.kind == "int":
            return int(self.text)
        if self.kind == "float":
            return float(self.text)
        if self.kind == "string":
            return json.loads(self.text)
        return self.text


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise EvolveError("PARSE_ERROR", f"unexpected character {text[pos]!r}",
                              line=line, column=pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

Pos = tuple  # (line, column)


@dataclass(frozen=True)
class Extent:
    cls: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class RoleNav:
    var: str
    role: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class LinkNav:
    var: str
    assoc: str
    role: str
    pos: Pos = field(default=(0, 0), compare=False)


Collection = Union[Extent, RoleNav, LinkNav]


@dataclass(frozen=True)
class AttrRef:
    var: str
    attr: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class VarRef:
    var: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Literal:
    value: Any
    pos: Pos = field(default=(0, 0), compare=False)


Term = Union[AttrRef, VarRef, Literal]


@dataclass(frozen=True)
class Quant:
    kind: str  # forall | exists
    var: str
    coll: Collection
    body: "Expr"
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # and | or | implies
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class Compare:
    op: str
    left: Term
    right: Term
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class SizeCmp:
    coll: Collection
    op: str
    value: int
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class BoolConst:
    value: bool


Expr = Union[Quant, BinOp, Not, Compare, SizeCmp, BoolConst]


def universal_prefix(expr: Expr) -> tuple[list[tuple[str, Collection]], Expr]:
    """Split ``forall x1 in c1 . ... forall xn in cn . body`` into its prefix and body."""
    prefix = []
    while isinstance(expr, Quant) and expr.kind == "forall":
        prefix.append((expr.var, expr.coll))
        expr = expr.body
    return prefix, expr


def show(expr: Any) -> str:
    """Render an expression back to concrete syntax."""
    if isinstance(expr, Extent):
        return f"all({expr.cls})"
    if isinstance(expr, RoleNav):
        return f"{expr.var}.{expr.role}"
    if isinstance(expr, LinkNav):
        return f"{expr.var}.linked({expr.assoc}, {expr.role})"
    if isinstance(expr, AttrRef):
        return f"{expr.var}.{expr.attr}"
    if isinstance(expr, VarRef):
        return expr.var
    if isinstance(expr, Literal):
        v = expr.value
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
        return repr(v)
    if isinstance(expr, Quant):
        return f"{expr.kind} {expr.var} in {show(expr.coll)} . {show(expr.body)}"
    if isinstance(expr, BinOp):
        return f"({show(expr.left)}) {expr.op} ({show(expr.right)})"
    if isinstance(expr, Not):
        return f"not ({show(expr.operand)})"
    if isinstance(expr, Compare):
        return f"{show(expr.left)} {expr.op} {show(expr.right)}"
    if isinstance(expr, SizeCmp):
        return f"size({show(expr.coll)}) {expr.op} {expr.value}"
    if isinstance(expr, BoolConst):
        return "true" if expr.value else "false"
    raise TypeError(expr)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

class TokenStream:
    """Cursor over tokens; the recursive-descent parsers build on this."""

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, text: str, kind: str | None = None) -> bool:
        t = self.tok
        return t.text == text and t.kind in ((kind,) if kind else ("ident", "op"))

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def error(self, msg: str, tok: Token | None = None) -> EvolveError:
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return EvolveError("PARSE_ERROR", f"{msg}, found {found}", line=tok.line, column=tok.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        tok = self.tok
        self.i += 1
        return tok

    def ident(self, what: str = "identifier", allow_keyword: bool = False) -> Token:
        tok = self.tok
        if tok.kind != "ident" or (tok.text in KEYWORDS and not allow_keyword):
            raise self.error(f"expected {what}")
        self.i += 1
        return tok

    def integer(self) -> int:
        tok = self.tok
        if tok.kind != "int":
            raise self.error("expected integer")
        self.i += 1
        return tok.value


class ExprParser:
    """Parse an expression from a shared :class:`TokenStream`."""

    def __init__(self, ts: TokenStream):
        self.ts = ts

    def expr(self) -> Expr:
        left = self.disjunction()
        if self.ts.accept("implies"):
            return BinOp("implies", left, self.expr())
        return left

    def disjunction(self) -> Expr:
        left = self.conjunction()
        while self.ts.accept("or"):
            left = BinOp("or", left, self.conjunction())
        return left

    def conjunction(self) -> Expr:
        left = self.unary()
        while self.ts.accept("and"):
            left = BinOp("and", left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.ts.accept("not"):
            return Not(self.unary())
        return self.primary()

    def primary(self) -> Expr:
        ts = self.ts
        tok = ts.tok
        if ts.at("forall") or ts.at("exists"):
            ts.i += 1
            var = ts.ident("variable").text
            ts.expect("in")
            coll = self.collection()
            ts.expect(".")
            return Quant(tok.text, var, coll, self.expr(), (tok.line, tok.col))
        if ts.accept("("):
            inner = self.expr()
            ts.expect(")")
            return inner
        if ts.at("size"):
            ts.i += 1
            ts.expect("(")
            coll = self.collection()
            ts.expect(")")
            op = self.comparator()
            return SizeCmp(coll, op, ts.integer(), (tok.line, tok.col))
        if (ts.at("true") or ts.at("false")) and ts.peek().text not in COMPARATORS:
            ts.i += 1
            return BoolConst(tok.text == "true")
        left = self.term()
        op = self.comparator()
        return Compare(op, left, self.term(), (tok.line, tok.col))

    def comparator(self) -> str:
        tok = self.ts.tok
        if tok.kind == "op" and tok.text in COMPARATORS:
            self.ts.i += 1
            return tok.text
        raise self.ts.error("expected comparison operator")

    def collection(self) -> Collection:
        ts = self.ts
        tok = ts.tok
        if ts.at("all"):
            ts.i += 1
            ts.expect("(")
            cls = ts.ident("class name").text
            ts.expect(")")
            return Extent(cls, (tok.line, tok.col))
        var = ts.ident("collection").text
        ts.expect(".")
        nav = ts.ident("role name")
        if nav.text == "linked" and ts.at("("):
            ts.i += 1
            assoc = ts.ident("association name").text
            ts.expect(",")
            role = ts.ident("role name").text
            ts.expect(")")
            return LinkNav(var, assoc, role, (tok.line, tok.col))
        return RoleNav(var, nav.text, (tok.line, tok.col))

    def term(self) -> Term:
        ts = self.ts
        tok = ts.tok
        pos = (tok.line, tok.col)
        if tok.kind in ("int", "float", "string"):
            ts.i += 1
            return Literal(tok.value, pos)
        if ts.at("true") or ts.at("false"):
            ts.i += 1
            return Literal(tok.text == "true", pos)
        var = ts.ident("term").text
        if ts.at(".") and ts.peek().kind == "ident" and ts.peek().text not in KEYWORDS:
            ts.i += 1
            return AttrRef(var, ts.ident("attribute name").text, pos)
        return VarRef(var, pos)


def parse_expr(text: str) -> Expr:
    ts = TokenStream(tokenize(text))
    expr = ExprParser(ts).expr()
    if ts.tok.kind != "eof":
        raise ts.error("unexpected trailing input")
    return expr


# ---------------------------------------------------------------------------
# typing
# ---------------------------------------------------------------------------

DYNAMIC = "?"  # variable whose class is only known at evaluation time


def _type_error(msg: str, pos: Pos) -> EvolveError:
    return EvolveError("TYPE_ERROR", msg, line=pos[0] or None, column=pos[1] or None)


def collection_class(coll: Collection, env: dict[str, str], mm: Metamodel) -> str:
    if isinstance(coll, Extent):
        if coll.cls not in mm.classes:
            raise _type_error(f"unknown class {coll.cls}", coll.pos)
        return coll.cls
    if coll.var not in env:
        raise _type_error(f"unbound variable {coll.var}", coll.pos)
    owner = env[coll.var]
    if isinstance(coll, RoleNav):
        if owner == DYNAMIC:
            return DYNAMIC
        conts = mm.all_containments(owner)
        if coll.role not in conts:
            raise _type_error(f"{owner} has no containment role {coll.role}", coll.pos)
        return conts[coll.role].child
    assoc = mm.associations.get(coll.assoc)
    if assoc is None:
        raise _type_error(f"unknown association {coll.assoc}", coll.pos)
    if coll.role not in (assoc.src_role, assoc.dst_role):
        raise _type_error(f"association {assoc.name} has no role {coll.role}", coll.pos)
    end = assoc.end_class(coll.role)
    if owner != DYNAMIC and not (mm.is_subtype(owner, end) or mm.is_subtype(end, owner)):
        raise _type_error(f"{owner} cannot play {coll.role} in {assoc.name}", coll.pos)
    return assoc.end_class(assoc.other_role(coll.role))


def term_type(term: Term, env: dict[str, str], mm: Metamodel) -> str:
    """One of string/int/float/bool/enum, ``object``, or DYNAMIC."""
    if isinstance(term, Literal):
        v = term.value
        return "bool" if isinstance(v, bool) else "int" if isinstance(v, int) \
            else "float" if isinstance(v, float) else "string"
    if term.var not in env:
        raise _type_error(f"unbound variable {term.var}", term.pos)
    if isinstance(term, VarRef):
        return "object"
    owner = env[term.var]
    if owner == DYNAMIC:
        return DYNAMIC
    attrs = mm.all_attributes(owner)
    if term.attr not in attrs:
        raise _type_error(f"{owner} has no attribute {term.attr}", term.pos)
    return attrs[term.attr].type


def _family(t: str) -> str:
    return {"int": "num", "float": "num", "enum": "string"}.get(t, t)


def typecheck(expr: Expr, env: dict[str, str], mm: Metamodel) -> None:
    if isinstance(expr, Quant):
        if expr.var in KEYWORDS:
            raise _type_error(f"reserved word {expr.var} used as variable", expr.pos)
        cls = collection_class(expr.coll, env, mm)
        typecheck(expr.body, {**env, expr.var: cls}, mm)
    elif isinstance(expr, BinOp):
        typecheck(expr.left, env, mm)
        typecheck(expr.right, env, mm)
    elif isinstance(expr, Not):
        typecheck(expr.operand, env, mm)
    elif isinstance(expr, SizeCmp):
        collection_class(expr.coll, env, mm)
    elif isinstance(expr, Compare):
        lt, rt = _family(term_type(expr.left, env, mm)), _family(term_type(expr.right, env, mm))
        if DYNAMIC in (lt, rt):
            return
        if lt != rt:
            raise _type_error(f"cannot compare {lt} with {rt}", expr.pos)
        if expr.op not in ("=", "!=") and lt in ("object", "bool"):
            raise _type_error(f"operator {expr.op} not defined on {lt}", expr.pos)
        for attr_term, lit in ((expr.left, expr.right), (expr.right, expr.left)):
            if isinstance(attr_term, AttrRef) and isinstance(lit, Literal):
                a = mm.all_attributes(env[attr_term.var]).get(attr_term.attr)
                if a is not None and a.type == "enum" and lit.value not in a.values:
                    raise _type_error(f"{lit.value!r} is not a value of {attr_term.attr}", lit.pos)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

class Evaluator:
    """Evaluate expressions over one model.

    Objects whose class is unknown to the metamodel never appear in any
    collection.
    """

    def __init__(self, model: Model, mm: Metamodel):
        self.model = model
        self.mm = mm
        self._extents: dict[str, list[str]] = {}
        self._known = {oid for oid, o in model.objects.items() if o.class_name in mm.classes}
        self._links: dict[tuple[str, str, str], list[str]] = {}
        for link in model.links.values():
            assoc = mm.associations.get(link.association)
            if assoc is None:
                continue
            self._links.setdefault((link.association, assoc.src_role, link.src), []).append(link.dst)
            self._links.setdefault((link.association, assoc.dst_role, link.dst), []).append(link.src)

    @property
    def excluded(self) -> list[str]:
        return sorted(set(self.model.objects) - self._known)

    def extent(self, cls: str) -> list[str]:
        if cls not in self._extents:
            self._extents[cls] = [oid for oid in sorted(self._known)
                                  if self.mm.is_subtype(self.model.objects[oid].class_name, cls)]
        return self._extents[cls]

    def collection(self, coll: Collection, env: dict[str, str]) -> list[str]:
        if isinstance(coll, Extent):
            return self.extent(coll.cls)
        owner = env[coll.var]
        if isinstance(coll, RoleNav):
            obj = self.model.objects[owner]
            return [c for c in obj.children.get(coll.role, ()) if c in self._known]
        ends = self._links.get((coll.assoc, coll.role, owner), [])
        return sorted({e for e in ends if e in self._known})

    def term(self, term: Term, env: dict[str, str]) -> Any:
        if isinstance(term, Literal):
            return term.value
        if isinstance(term, VarRef):
            return ("object", env[term.var])
        obj = self.model.objects[env[term.var]]
        if term.attr in obj.attributes:
            return obj.attributes[term.attr]
        attr = self.mm.all_attributes(obj.class_name).get(term.attr) if obj.class_name in self.mm.classes else None
        return attr.default if attr else None

    def holds(self, expr: Expr, env: dict[str, str]) -> bool:
        if isinstance(expr, BoolConst):
            return expr.value
        if isinstance(expr, Quant):
            items = self.collection(expr.coll, env)
            if expr.kind == "forall":
                return all(self.holds(expr.body, {**env, expr.var: x}) for x in items)
            return any(self.holds(expr.body, {**env, expr.var: x}) for x in items)
        if isinstance(expr, BinOp):
            if expr.op == "and":
                return self.holds(expr.left, env) and self.holds(expr.right, env)
            if expr.op == "or":
                return self.holds(expr.left, env) or self.holds(expr.right, env)
            return (not self.holds(expr.left, env)) or self.holds(expr.right, env)
        if isinstance(expr, Not):
            return not self.holds(expr.operand, env)
        if isinstance(expr, SizeCmp):
            return compare(expr.op, len(self.collection(expr.coll, env)), expr.value)
        if isinstance(expr, Compare):
            return compare(expr.op, self.term(expr.left, env), self.term(expr.right, env))
        raise TypeError(expr)

    def counterexamples(self, expr: Expr) -> tuple[bool, list[dict[str, str]]]:
        """Validity plus every falsifying binding of the outermost universal prefix."""
        prefix, body = universal_prefix(expr)
        if not prefix:
            return self.holds(expr, {}), []
        found: list[dict[str, str]] = []
        for env in self._assignments(prefix, {}):
            if not self.holds(body, env):
                found.append(env)
        return not found, found

    def _assignments(self, prefix, env) -> Iterator[dict[str, str]]:
        if not prefix:
            yield dict(env)
            return
        (var, coll), rest = prefix[0], prefix[1:]
        for x in self.collection(coll, env):
            env[var] = x
            yield from self._assignments(rest, env)
        env.pop(var, None)


def compare(op: str, a: Any, b: Any) -> bool:
    """Total comparison: unset values only equal each other; mixed kinds never order."""
    if op == "=":
        return _eq(a, b)
    if op == "!=":
        return not _eq(a, b)
    if a is None or b is None or isinstance(a, (bool, tuple)) or isinstance(b, (bool, tuple)):
        return False
    if isinstance(a, str) != isinstance(b, str):
        return False
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _eq(a: Any, b: Any) -> bool:
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b
