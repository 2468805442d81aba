"""Well-formedness constraint suites: parsing, evaluation and reporting."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import EvolveError
from .expr import Evaluator, Expr, ExprParser, TokenStream, tokenize, typecheck, universal_prefix
from .model import Metamodel, Model


@dataclass(frozen=True)
class ConstraintDef:
    name: str
    description: str
    phase: str
    body: Expr
    line: int = field(default=0, compare=False)

    @property
    def variables(self) -> list[str]:
        return [var for var, _ in universal_prefix(self.body)[0]]


@dataclass(frozen=True)
class EvalResult:
    constraint: str
    description: str
    phase: str
    valid: bool
    counterexamples: tuple[tuple[tuple[str, str], ...], ...] = ()  # each: ((var, id), ...)


@dataclass(frozen=True)
class SuiteReport:
    results: tuple[EvalResult, ...]
    phase: str | None = None
    warnings: tuple[str, ...] = ()

    @property
    def valid(self) -> bool:
        return all(r.valid for r in self.results)


def parse_constraints(text: str, mm: Metamodel | None = None) -> tuple[str, list[ConstraintDef]]:
    """Parse a constraint file; return its metamodel header name and the constraints.

    With ``mm`` given, the header must name it and every body is type-checked.
    """
    ts = TokenStream(tokenize(text))
    ts.expect("metamodel")
    header = ts.ident("metamodel name")
    if mm is not None and header.text != mm.name:
        raise EvolveError("TYPE_ERROR", f"constraints target metamodel {header.text}, got {mm.name}",
                          line=header.line, column=header.col)
    parser = ExprParser(ts)
    out: list[ConstraintDef] = []
    seen: set[str] = set()
    while ts.tok.kind != "eof":
        start = ts.expect("constraint")
        name = ts.ident("constraint name")
        if name.text in seen:
            raise EvolveError("TYPE_ERROR", f"duplicate constraint {name.text}",
                              line=name.line, column=name.col)
        seen.add(name.text)
        if ts.tok.kind != "string":
            raise ts.error("expected description string")
        description = ts.tok.value
        ts.i += 1
        ts.expect("phase")
        phase = ts.ident("phase name").text
        ts.expect(":")
        body = parser.expr()
        if mm is not None:
            typecheck(body, {}, mm)
        out.append(ConstraintDef(name.text, description, phase, body, start.line))
    return header.text, out


def evaluate_constraint(c: ConstraintDef, model: Model, mm: Metamodel,
                        evaluator: Evaluator | None = None) -> EvalResult:
    ev = evaluator or Evaluator(model, mm)
    valid, found = ev.counterexamples(c.body)
    names = c.variables
    cex = tuple(tuple((v, env[v]) for v in names) for env in found)
    return EvalResult(c.name, c.description, c.phase, valid, cex)


def evaluate_suite(suite: list[ConstraintDef], model: Model, mm: Metamodel,
                   phase: str | None = None) -> SuiteReport:
    ev = Evaluator(model, mm)
    results = tuple(evaluate_constraint(c, model, mm, ev) for c in suite
                    if phase is None or c.phase == phase)
    warnings = tuple(f"object {oid} of unknown class {model.objects[oid].class_name} excluded"
                     for oid in ev.excluded)
    return SuiteReport(results, phase, warnings)


def report_to_data(report: SuiteReport) -> dict:
    return {
        "valid": report.valid,
        "phase": report.phase,
        "warnings": list(report.warnings),
        "constraints": [{
            "name": r.constraint, "description": r.description, "phase": r.phase,
            "valid": r.valid,
            "counterexamples": [dict(b) for b in r.counterexamples],
        } for r in report.results],
    }


def render_report(report: SuiteReport, format: str = "text") -> str:
    if format == "json":
        return json.dumps(report_to_data(report), indent=2, ensure_ascii=False) + "\n"
    lines = [f"warning: {w}" for w in report.warnings]
    for r in report.results:
        status = "ok" if r.valid else f"VIOLATED ({len(r.counterexamples)} counterexamples)"
        lines.append(f"[{r.phase}] {r.constraint}: {status}")
        if not r.valid:
            lines.append(f"  {r.description}")
            lines.extend("    " + " ".join(f"{v}={oid}" for v, oid in b) for b in r.counterexamples)
    bad = sum(not r.valid for r in report.results)
    lines.append("ALL CONSTRAINTS SATISFIED" if not bad else f"{bad} CONSTRAINT(S) VIOLATED")
    return "\n".join(lines) + "\n"
