"""Acceptance criteria, one test each, at their pinned tolerances.

Every test prints a single ``[PASS]`` / ``[FAIL]`` line (visible even under
output capture) before asserting.
"""

import json
import os
import random
import subprocess
import sys
import time

import pytest

from conftest import read
from evolvekit.builtin import components_mm
from evolvekit.constraints import evaluate_suite, parse_constraints
from evolvekit.diffmerge import MatchConfig, diff_models, match_models, merge3
from evolvekit.generators import (
    identity_delta_text, random_component_model, random_delta, random_metamodel, random_model, random_rulegraph,
    random_statechart,
)
from evolvekit.mcl import migrate_model, parse_mcl
from evolvekit.model import ModelBuilder, check_conformance, save_model
from evolvekit.refactor.components import flattened_connectivity, pull_up, push_down
from evolvekit.refactor.statechart import flatten_statechart, simulate
from evolvekit.ummie import migrate_rules
from oracles import (
    NET_MM, NET_SUITE, all_words, apply_script, net_suite_oracle, random_net_model, reference_trace,
    refinement_colours, scramble,
)
from test_cli import every_command, conflict_triple
from test_diffmerge import colours, disjoint_triple
from test_mcl import SCENARIOS, scenario
from test_refactor import nested, sibling_pairs
from test_ummie import expected_class, expected_warnings, node_classes


@pytest.fixture
def report(pytestconfig):
    capman = pytestconfig.pluginmanager.getplugin("capturemanager")

    def emit(name, ok, detail):
        with capman.global_and_fixture_disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)
        return ok
    return emit


def test_1_migration_conformance(report):
    t0 = time.perf_counter()
    bad, ok, failed = [], 0, 0
    for name in SCENARIOS:
        spec, src, dst, model = scenario(name)
        out, _ = migrate_model(model, spec, src, dst)
        ok += 1
        if not check_conformance(out, dst).conformant:
            bad.append(name)
    for seed in range(200):
        rng = random.Random(seed)
        mm = random_metamodel(rng)
        model = random_model(rng, mm, 200)
        sc = random_delta(rng, mm)
        try:
            out, _ = migrate_model(model, sc.spec, sc.mm_src, sc.mm_dst)
        except Exception:
            failed += 1
            continue
        ok += 1
        if not check_conformance(out, sc.mm_dst).conformant:
            bad.append(seed)
    elapsed = time.perf_counter() - t0
    passed = not bad and elapsed < 5.0
    report("1 migration output conforms", passed,
           f"{ok} successful migrations ({len(SCENARIOS)} corpus + {ok - len(SCENARIOS)} random, {failed} refused), "
           f"{len(bad)} non-conformant, {elapsed:.2f}s (limit 5s)")
    assert passed, bad


def test_2_identity_law(report):
    bad = []
    for seed in range(100):
        rng = random.Random(seed)
        mm = random_metamodel(rng)
        model = random_model(rng, mm, 100)
        spec = parse_mcl(identity_delta_text(mm), mm, mm)
        if save_model(migrate_model(model, spec, mm, mm)[0]) != save_model(model):
            bad.append(seed)
    report("2 identity delta is byte-identical", not bad, f"{100 - len(bad)}/100 models")
    assert not bad


def test_3_counterexample_oracle(report):
    _, suite = parse_constraints(NET_SUITE, NET_MM)
    assert len(suite) == 5
    bad = []
    for seed in range(100):
        m = random_net_model(random.Random(seed), max_objects=30)
        assert len(m.objects) <= 30
        got = {r.constraint: sorted(tuple(oid for _, oid in b) for b in r.counterexamples)
               for r in evaluate_suite(suite, m, NET_MM).results}
        if got != net_suite_oracle(m):
            bad.append(seed)
    report("3 counterexamples equal exhaustive enumeration", not bad, f"{100 - len(bad)}/100 models, 5 constraints")
    assert not bad


def test_4_rule_migration_warnings(report):
    bad, warnings = [], 0
    for seed in range(50):
        rng = random.Random(seed)
        mm = random_metamodel(rng)
        dest = random_metamodel(rng, name="Dest")
        sc = random_delta(rng, mm, rng.randint(1, 5))
        rg = random_rulegraph(rng, mm, dest, 5)
        out, rep = migrate_rules(rg, sc.spec, sc.mm_src, sc.mm_dst, dest)
        got = [(w.code, w.rule, w.node) for w in rep.entries]
        want = expected_warnings(rg, sc.plan)
        after = node_classes(out)
        classes_ok = all(after[(r.name, n.id)] == (n.class_ref if n.side == "destination"
                                                   else expected_class(n.class_ref, sc.plan))
                         for r in rg.rules for n in r.nodes)
        warnings += len(got)
        if got != want or not classes_ok:
            bad.append(seed)
    report("4 rule-graph warnings match brute-force scan", not bad,
           f"{50 - len(bad)}/50 pairs, {warnings} warnings checked")
    assert not bad


def _single_edit(rng, model, mm):
    cands = sorted((oid, a) for oid, o in model.objects.items() for a, v in o.attributes.items())
    oid, attr = rng.choice(cands)
    old = model.objects[oid].attributes[attr]
    if isinstance(old, bool):
        new = not old
    elif isinstance(old, (int, float)):
        new = old + 1
    else:
        decl = mm.all_attributes(model.objects[oid].class_name)[attr]
        new = next((v for v in decl.values if v != old), None) if decl.type == "enum" else old + "_e"
    b = ModelBuilder.from_model(model)
    b.objects[oid]["attrs"][attr] = new
    return b.build(), (oid, attr)


def test_5_diff_soundness(report):
    self_bad = edit_bad = 0
    for seed in range(100):
        rng = random.Random(seed)
        mm = random_metamodel(rng)
        m = random_model(rng, mm, 50)
        if not diff_models(m, m, match_models(m, m)).empty:
            self_bad += 1
        edited, (oid, attr) = _single_edit(rng, m, mm)
        r = diff_models(m, edited, match_models(m, edited, MatchConfig(id_hint=True)))
        others = r.added or r.removed or r.moved or r.link_added or r.link_removed
        if len(r.changed) != 1 or r.changed[0][0] != oid or r.changed[0][2] != attr or others:
            edit_bad += 1
    raw = up_to_colour = total = 0
    for seed in range(100):
        rng = random.Random(seed)
        mm = random_metamodel(rng)
        m = random_model(rng, mm, 50)
        other, ren = scramble(rng, m)
        inverse = {v: k for k, v in ren.items()}
        colour = refinement_colours(m)
        fwd = match_models(m, other).forward
        for oid in m.objects:
            total += 1
            got = fwd.get(oid)
            raw += got == ren[oid]
            up_to_colour += got is not None and colour[inverse[got]] == colour[oid]
    # objects sharing a refinement colour are interchangeable, so recovery counts
    # a match as correct when it lands anywhere in the right colour class
    recovery = up_to_colour / total
    passed = self_bad == 0 and edit_bad == 0 and recovery >= 0.95
    report("5 diff soundness", passed,
           f"self-diff non-empty {self_bad}/100, single edit wrong {edit_bad}/100, "
           f"scrambled recovery {recovery:.3f} up to indistinguishability (raw id recovery {raw / total:.3f}), "
           f"target 0.95")
    assert passed


def test_6_merge_safety(report):
    disjoint_bad = 0
    for seed in range(100):
        base, lops, rops = disjoint_triple(seed)
        result = merge3(base, apply_script(base, lops), apply_script(base, rops))
        if result.conflicts or colours(result.merged) != colours(apply_script(base, lops + rops)):
            disjoint_bad += 1
    divergent_bad = tried = seed = 0
    while tried < 100:
        base, lops, rops = disjoint_triple(10_000 + seed)
        seed += 1
        target = next((op for op in lops if op[0] == "set" and not isinstance(op[3], bool)), None)
        if target is None:
            continue
        tried += 1
        _, oid, name, lv = target
        bv = base.objects[oid].attributes.get(name)
        if isinstance(lv, str):
            rv = lv + "x" if lv + "x" != bv else lv + "y"
        else:
            rv = max(lv, bv if isinstance(bv, int) and not isinstance(bv, bool) else lv) + 1
        rops = [op for op in rops if op[1] != oid] + [("set", oid, name, rv)]
        result = merge3(base, apply_script(base, lops), apply_script(base, rops))
        hits = [c for c in result.conflicts if c.kind == "attr-attr" and c.base_id == oid]
        kept = result.merged.objects[oid].attributes.get(name) == bv
        recorded = hits and json.dumps(lv) in hits[0].detail and json.dumps(rv) in hits[0].detail
        if not (kept and recorded):
            divergent_bad += 1
    passed = disjoint_bad == 0 and divergent_bad == 0
    report("6 merge safety", passed,
           f"disjoint triples clean and fully applied {100 - disjoint_bad}/100, "
           f"divergent triples conflicted without loss {100 - divergent_bad}/100")
    assert passed


def test_7_refactoring_preserves_behaviour(report):
    t0 = time.perf_counter()
    comp_bad = ops = 0
    for seed in range(100):
        m = random_component_model(random.Random(seed), max_components=10, max_channels=20)
        before = flattened_connectivity(m)
        outs = [push_down(m, a, b) for a, b in sibling_pairs(m)] + [pull_up(m, c) for c in nested(m)]
        ops += len(outs)
        comp_bad += any(flattened_connectivity(o) != before or not check_conformance(o, components_mm()).conformant
                        for o in outs)
    t_comp = time.perf_counter() - t0
    t0 = time.perf_counter()
    chart_bad = 0
    words = all_words()
    assert len(words) == 62
    for seed in range(50):
        m = random_statechart(random.Random(seed), max_states=15)
        flat = flatten_statechart(m)
        chart_bad += any(simulate(m, w) != simulate(flat, w) or simulate(m, w) != reference_trace(m, w)
                         for w in words)
    t_chart = time.perf_counter() - t0
    passed = comp_bad == 0 and chart_bad == 0 and t_comp < 10 and t_chart < 10
    report("7 refactoring preserves behaviour", passed,
           f"connectivity kept on {100 - comp_bad}/100 models ({ops} refactorings, {t_comp:.2f}s), "
           f"traces equal on {50 - chart_bad}/50 charts x 62 words ({t_chart:.2f}s), limit 10s each")
    assert passed


def test_8_cli_determinism(report, tmp_path):
    def snapshot(d, hashseed):
        d.mkdir()
        conflict_triple(d)
        env = dict(os.environ, PYTHONHASHSEED=str(hashseed))
        env.pop("EVOLVEKIT_FORMAT", None)
        outs = []
        for fmt in ("text", "json"):
            for argv in every_command(d):
                p = subprocess.run([sys.executable, "-m", "evolvekit.cli", *argv, "--format", fmt],
                                   capture_output=True, env=env)
                outs.append((p.returncode, p.stdout.replace(str(d).encode(), b"<d>"),
                             p.stderr.replace(str(d).encode(), b"<d>")))
        return outs, {p.name: p.read_bytes() for p in sorted(d.iterdir())}

    a = snapshot(tmp_path / "a", 1)
    b = snapshot(tmp_path / "b", 2)
    n = len(a[0])
    same = sum(x == y for x, y in zip(a[0], b[0]))
    passed = a == b
    report("8 CLI determinism", passed,
           f"{same}/{n} invocations byte-identical across processes, "
           f"{len(a[1])} output files {'identical' if a[1] == b[1] else 'differ'}")
    assert passed
