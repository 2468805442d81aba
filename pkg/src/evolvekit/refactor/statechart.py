"""Hierarchical statecharts: flattening and a reference simulator.

Semantics: the active configuration is one leaf state.  On an event, the
innermost state on the path from the active leaf to the top that has an
outgoing transition on that event fires it; entering a composite state
descends through initial children to a leaf.  Unhandled events are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..builtin import flat_statechart_mm, statechart_mm
from ..errors import EvolveError
from ..model import Metamodel, Model, ModelBuilder, check_conformance

SOURCE, TARGET = "TransitionSource", "TransitionTarget"


@dataclass(frozen=True)
class Transition:
    id: str
    event: str
    source: str
    target: str
    source_link: str
    target_link: str


class Chart:
    """Read-only structural view of a statechart model."""

    def __init__(self, model: Model, mm: Metamodel | None = None):
        if mm is None:
            flat = flat_statechart_mm()
            mm = flat if model.metamodel_name == flat.name else statechart_mm()
        report = check_conformance(model, mm)
        if not report.conformant:
            v = report.violations[0]
            raise EvolveError("ILLFORMED_STATECHART", f"{v.code} {v.element}: {v.message}", details=report)
        machines = [r for r in model.roots if model.objects[r].class_name == "Machine"]
        if len(machines) != 1 or len(model.roots) != 1:
            raise EvolveError("ILLFORMED_STATECHART", "expected exactly one Machine root")
        self.model = model
        self.machine = machines[0]
        self.states = sorted(o.id for o in model.objects.values() if o.class_name == "State")
        self.parent = {s: (None if model.parent(s) == self.machine else model.parent(s)) for s in self.states}
        self.children = {s: list(model.objects[s].children.get("sub", ())) for s in self.states}
        self.top = list(model.objects[self.machine].children.get("states", ()))
        ends: dict[str, dict[str, tuple[str, str]]] = {}
        for link in model.links.values():
            ends.setdefault(link.src, {})[link.association] = (link.dst, link.id)
        self.transitions = []
        for o in model.objects.values():
            if o.class_name == "Transition":
                (src, sl), (dst, tl) = ends[o.id][SOURCE], ends[o.id][TARGET]
                self.transitions.append(Transition(o.id, o.attributes["event"], src, dst, sl, tl))
        self.outgoing: dict[tuple[str, str], list[Transition]] = {}
        for t in self.transitions:
            self.outgoing.setdefault((t.source, t.event), []).append(t)
        for group in [self.top] + [c for c in self.children.values() if c]:
            n = sum(bool(model.objects[s].attributes.get("initial", False)) for s in group)
            if n != 1:
                owner = self.parent[group[0]] or self.machine
                raise EvolveError("ILLFORMED_STATECHART", f"{owner}: {n} initial substates, expected 1")

    @property
    def events(self) -> list[str]:
        return sorted({t.event for t in self.transitions})

    @property
    def leaves(self) -> list[str]:
        return [s for s in self.states if not self.children[s]]

    def initial_leaf(self, state: str) -> str:
        while self.children[state]:
            state = next(c for c in self.children[state]
                         if self.model.objects[c].attributes.get("initial", False))
        return state

    @property
    def initial(self) -> str:
        top = next(s for s in self.top if self.model.objects[s].attributes.get("initial", False))
        return self.initial_leaf(top)

    def enabled(self, leaf: str, event: str) -> list[Transition]:
        """Transitions at the innermost level that handles ``event`` from ``leaf``."""
        state = leaf
        while state is not None:
            found = self.outgoing.get((state, event))
            if found:
                return found
            state = self.parent[state]
        return []


def simulate(model: Model, events: list[str], mm: Metamodel | None = None) -> list[str]:
    """Active leaf after each event; ``[initial]`` for an empty event list."""
    chart = Chart(model, mm)
    current = chart.initial
    if not events:
        return [current]
    trace = []
    for event in events:
        enabled = chart.enabled(current, event)
        if len(enabled) > 1:
            raise EvolveError("NONDETERMINISTIC",
                              f"{len(enabled)} transitions on {event!r} enabled in {current}")
        if enabled:
            current = chart.initial_leaf(enabled[0].target)
        trace.append(current)
    return trace


def flatten_statechart(model: Model) -> Model:
    chart = Chart(model)
    b = ModelBuilder(flat_statechart_mm().name, flat_statechart_mm().version)
    machine = model.objects[chart.machine]
    b.add(machine.id, "Machine", dict(machine.attributes))
    start = chart.initial
    for leaf in chart.leaves:
        attrs = dict(model.objects[leaf].attributes)
        if leaf == start:
            attrs["initial"] = True
        elif attrs.get("initial"):
            attrs["initial"] = False
        b.add(leaf, "State", attrs, machine.id, "states")
    for leaf in chart.leaves:
        for event in chart.events:
            for t in chart.enabled(leaf, event):
                own = t.source == leaf
                tid = t.id if own else f"{t.id}@{leaf}"
                b.add(tid, "Transition", dict(model.objects[t.id].attributes), machine.id, "transitions")
                b.link(t.source_link if own else f"{tid}/source", SOURCE, tid, leaf)
                b.link(t.target_link if own else f"{tid}/target", TARGET, tid, chart.initial_leaf(t.target))
    out = b.build()
    report = check_conformance(out, flat_statechart_mm())
    if not report.conformant:  # pragma: no cover - construction guarantees conformance
        raise EvolveError("ILLFORMED_STATECHART", "flattening produced a non-conformant machine", details=report)
    return out
