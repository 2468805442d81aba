"""Similarity matching, structural diff and three-way merge of models.

Matching never trusts object ids.  Candidate pairs are objects of the same
class; their score starts at attribute similarity and is refined by a
fixed-point iteration that mixes in the similarity of parents, children and
link neighbours.  Pairs are then picked greedily by descending score.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import EvolveError
from .model import MLink, Model, ModelBuilder


@dataclass(frozen=True)
class MatchConfig:
    alpha: float = 0.5     # weight of neighbour similarity
    theta: float = 0.6     # minimum score for an accepted pair
    epsilon: float = 1e-3  # convergence bound on the max score change
    max_iter: int = 100
    id_hint: bool = False  # treat equal ids as evidence (tie-breaks and parent-anchored completion)

    def __post_init__(self):
        for name in ("alpha", "theta"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[str, str, float], ...]
    config: MatchConfig = field(default_factory=MatchConfig)
    iterations: int = 0

    @property
    def forward(self) -> dict[str, str]:
        return {l: r for l, r, _ in self.pairs}

    @property
    def backward(self) -> dict[str, str]:
        return {r: l for l, r, _ in self.pairs}


def edit_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def value_sim(a: Any, b: Any) -> float:
    if isinstance(a, str) and isinstance(b, str):
        longest = max(len(a), len(b))
        return 1.0 if longest == 0 else 1.0 - edit_distance(a, b) / longest
    if isinstance(a, bool) or isinstance(b, bool):
        return 1.0 if type(a) is type(b) and a == b else 0.0
    return 1.0 if a == b else 0.0


def attr_sim(a: dict[str, Any], b: dict[str, Any]) -> float:
    """Mean per-attribute similarity over the union of names (1.0 when both are empty)."""
    names = set(a) | set(b)
    if not names:
        return 1.0
    return sum(value_sim(a[n], b[n]) if n in a and n in b else 0.0 for n in names) / len(names)


def _neighbourhoods(model: Model) -> dict[str, tuple[list, list, list]]:
    """oid -> (parents, children, link neighbours), each a list of (tag, oid)."""
    out = {oid: ([], [], []) for oid in model.objects}
    for obj in model.objects.values():
        for role, ids in obj.children.items():
            for cid in ids:
                out[obj.id][1].append((role, cid))
                out[cid][0].append((role, obj.id))
    for link in model.links.values():
        out[link.src][2].append(((link.association, "out"), link.dst))
        out[link.dst][2].append(((link.association, "in"), link.src))
    return out


def _best_pairing(left: list, right: list, scores: dict[tuple[str, str], float]) -> float:
    """Normalized weight of the best one-to-one pairing between two neighbour lists."""
    if len(left) == 1 or len(right) == 1:
        best = max((scores.get((a, b), 0.0) for ta, a in left for tb, b in right if ta == tb), default=0.0)
        return best / max(len(left), len(right))
    w = np.array([[scores.get((a, b), 0.0) if ta == tb else 0.0 for tb, b in right] for ta, a in left])
    rows, cols = linear_sum_assignment(w, maximize=True)
    return float(w[rows, cols].sum()) / max(len(left), len(right))


def match_models(left: Model, right: Model, cfg: MatchConfig | None = None) -> Matching:
    cfg = cfg or MatchConfig()
    if left.metamodel_name != right.metamodel_name:
        raise EvolveError("METAMODEL_MISMATCH",
                          f"{left.metamodel_name} vs {right.metamodel_name}")
    by_class: dict[str, list[str]] = {}
    for r in right.objects.values():
        by_class.setdefault(r.class_name, []).append(r.id)
    candidates = [(l.id, rid) for l in left.objects.values() for rid in by_class.get(l.class_name, ())]
    base = {(l, r): attr_sim(left.objects[l].attributes, right.objects[r].attributes)
            for l, r in candidates}
    ln, rn = _neighbourhoods(left), _neighbourhoods(right)
    scores = dict(base)
    iterations = 0
    for _ in range(cfg.max_iter):
        iterations += 1
        new = {}
        delta = 0.0
        for pair in candidates:
            l, r = pair
            parts = [_best_pairing(a, b, scores) if a and b else 0.0
                     for a, b in zip(ln[l], rn[r]) if a or b]
            if parts:
                s = (1 - cfg.alpha) * base[pair] + cfg.alpha * sum(parts) / len(parts)
            else:
                s = base[pair]
            s = min(1.0, max(0.0, s))
            new[pair] = s
            delta = max(delta, abs(s - scores[pair]))
        scores = new
        if delta < cfg.epsilon:
            break
    used_l, used_r, pairs = set(), set(), []
    if cfg.id_hint:
        pairs = _anchor_by_id(left, right, scores, cfg.theta)
        used_l, used_r = {l for l, _, _ in pairs}, {r for _, r, _ in pairs}
    for (l, r), s in sorted(scores.items(), key=lambda kv: (-kv[1], kv[0])):
        if s < cfg.theta:
            break
        if l not in used_l and r not in used_r:
            used_l.add(l)
            used_r.add(r)
            pairs.append((l, r, s))
    return Matching(tuple(sorted(pairs)), cfg, iterations)


def _anchor_by_id(left: Model, right: Model, scores: dict, theta: float) -> list:
    """Same-id, same-class pairs that either score at least ``theta`` or sit in
    corresponding containment slots.

    Parents are visited before children so an anchored parent can vouch for
    its children.  Models with unrelated ids get no anchors at all.
    """
    fwd: dict[str, str] = {}
    out = []
    for oid in left.preorder():
        if oid not in right.objects or left.objects[oid].class_name != right.objects[oid].class_name:
            continue
        lp, rp = left.parent_of.get(oid), right.parent_of.get(oid)
        same_slot = (lp is None and rp is None) or (
            lp is not None and rp is not None and fwd.get(lp[0]) == rp[0] and lp[1] == rp[1])
        if same_slot or scores[(oid, oid)] >= theta:
            fwd[oid] = oid
            out.append((oid, oid, scores[(oid, oid)]))
    return out


def identity_matching(left: Model, right: Model) -> Matching:
    """Pair objects by id (same class required); handy when ids are known to be stable."""
    pairs = tuple((oid, oid, 1.0) for oid, o in left.objects.items()
                  if oid in right.objects and right.objects[oid].class_name == o.class_name)
    return Matching(pairs)


# ---------------------------------------------------------------------------
# diff
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiffReport:
    added: tuple[str, ...] = ()
    removed: tuple[str, ...] = ()
    changed: tuple[tuple[str, str, str, Any, Any], ...] = ()
    moved: tuple[tuple[str, str, str | None, str | None], ...] = ()
    link_added: tuple[str, ...] = ()
    link_removed: tuple[str, ...] = ()

    @property
    def empty(self) -> bool:
        return not any((self.added, self.removed, self.changed, self.moved,
                        self.link_added, self.link_removed))

    def to_data(self) -> dict:
        return {
            "added": list(self.added), "removed": list(self.removed),
            "changed": [{"left": l, "right": r, "attr": a, "old": o, "new": n}
                        for l, r, a, o, n in self.changed],
            "moved": [{"left": l, "right": r, "oldParent": op, "newParent": np_}
                      for l, r, op, np_ in self.moved],
            "linkAdded": list(self.link_added), "linkRemoved": list(self.link_removed),
        }

    def render(self, format: str = "text") -> str:
        if format == "json":
            return json.dumps(self.to_data(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        lines = [f"+ {i}" for i in self.added] + [f"- {i}" for i in self.removed]
        lines += [f"~ {l}->{r} {a}: {json.dumps(o)} -> {json.dumps(n)}" for l, r, a, o, n in self.changed]
        lines += [f"> {l}->{r} parent {op} -> {np_}" for l, r, op, np_ in self.moved]
        lines += [f"+link {i}" for i in self.link_added] + [f"-link {i}" for i in self.link_removed]
        lines.append("no differences" if self.empty else f"{len(lines)} differences")
        return "\n".join(lines) + "\n"


def _link_key(link: MLink, rename: dict[str, str] | None = None) -> tuple:
    if rename is None:
        return (link.association, link.src, link.dst)
    return (link.association, rename.get(link.src), rename.get(link.dst))


def _unmatched_links(links: list[MLink], keys: Counter, rename: dict[str, str] | None) -> list[str]:
    keys = Counter(keys)
    out = []
    for link in sorted(links, key=lambda l: l.id):
        k = _link_key(link, rename)
        if None not in k and keys[k] > 0:
            keys[k] -= 1
        else:
            out.append(link.id)
    return out


def diff_models(left: Model, right: Model, matching: Matching) -> DiffReport:
    fwd, back = matching.forward, matching.backward
    removed = tuple(sorted(set(left.objects) - set(fwd)))
    added = tuple(sorted(set(right.objects) - set(back)))
    changed, moved = [], []
    for l, r, _ in matching.pairs:
        la, ra = left.objects[l].attributes, right.objects[r].attributes
        for name in sorted(set(la) | set(ra)):
            if la.get(name) != ra.get(name) or type(la.get(name)) is not type(ra.get(name)):
                changed.append((l, r, name, la.get(name), ra.get(name)))
        lp, rp = left.parent(l), right.parent(r)
        if (fwd.get(lp) if lp is not None else None) != rp or (lp is None) != (rp is None):
            moved.append((l, r, lp, rp))
    link_removed = _unmatched_links(list(left.links.values()),
                                    Counter(_link_key(k) for k in right.links.values()), fwd)
    link_added = _unmatched_links(list(right.links.values()),
                                  Counter(_link_key(k, fwd) for k in left.links.values()), None)
    return DiffReport(added, removed, tuple(changed), tuple(moved),
                      tuple(link_added), tuple(link_removed))


# ---------------------------------------------------------------------------
# three-way merge
# ---------------------------------------------------------------------------

_UNSET = object()  # attribute removed on one side


@dataclass(frozen=True)
class Conflict:
    kind: str  # attr-attr | delete-change | move-move
    base_id: str
    detail: str


@dataclass(frozen=True)
class MergeResult:
    merged: Model
    conflicts: tuple[Conflict, ...] = ()

    def to_data(self) -> dict:
        return {"conflicts": [{"kind": c.kind, "baseId": c.base_id, "detail": c.detail}
                              for c in self.conflicts]}

    def render(self, format: str = "text") -> str:
        if format == "json":
            return json.dumps(self.to_data(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        lines = [f"CONFLICT {c.kind} {c.base_id}: {c.detail}" for c in self.conflicts]
        lines.append("merged cleanly" if not self.conflicts else f"{len(self.conflicts)} conflicts")
        return "\n".join(lines) + "\n"


class _Side:
    """Base-relative change set of one derived model."""

    def __init__(self, name: str, base: Model, side: Model, matching: Matching):
        self.name = name
        self.model = side
        self.fwd, self.back = matching.forward, matching.backward
        self.deleted = set(base.objects) - set(self.fwd)
        self.attrs: dict[str, dict[str, Any]] = {}
        self.moves: dict[str, tuple] = {}
        for b, s in self.fwd.items():
            ba, sa = base.objects[b].attributes, side.objects[s].attributes
            delta = {n: sa.get(n, _UNSET) for n in set(ba) | set(sa)
                     if ba.get(n, _UNSET) != sa.get(n, _UNSET)
                     or type(ba.get(n)) is not type(sa.get(n))}
            if delta:
                self.attrs[b] = delta
            here = self.place(s)
            if here != _base_place(base, b):
                self.moves[b] = here
        self.added = sorted(set(side.objects) - set(self.back))
        base_keys = Counter(_link_key(l) for l in base.links.values())
        self.links_added = []
        for lid in _unmatched_links(list(side.links.values()), base_keys, self.back):
            link = side.links[lid]
            self.links_added.append((lid, link.association, self.ref(link.src), self.ref(link.dst)))
        side_keys = Counter(_link_key(l) for l in side.links.values())
        self.links_removed = set()
        for lid in _unmatched_links(list(base.links.values()), side_keys, self.fwd):
            link = base.links[lid]
            if link.src in self.fwd and link.dst in self.fwd:
                self.links_removed.add(lid)

    def ref(self, sid: str) -> tuple:
        return ("base", self.back[sid]) if sid in self.back else ("new", self.name, sid)

    def place(self, sid: str) -> tuple | None:
        entry = self.model.parent_of.get(sid)
        return None if entry is None else (self.ref(entry[0]), entry[1])

    def touched(self) -> dict[str, str]:
        """base id -> reason, for every base object this side changes or builds upon."""
        out: dict[str, str] = {}
        for b in self.attrs:
            out.setdefault(b, "attributes changed")
        for b, place in self.moves.items():
            out.setdefault(b, "moved")
            if place and place[0][0] == "base":
                out.setdefault(place[0][1], f"receives moved {b}")
        for sid in self.added:
            place = self.place(sid)
            if place and place[0][0] == "base":
                out.setdefault(place[0][1], f"receives new child {sid}")
        for lid, _, src, dst in self.links_added:
            for end in (src, dst):
                if end[0] == "base":
                    out.setdefault(end[1], f"new link {lid}")
        return out


def _base_place(base: Model, oid: str) -> tuple | None:
    entry = base.parent_of.get(oid)
    return None if entry is None else (("base", entry[0]), entry[1])


def merge3(base: Model, left: Model, right: Model, cfg: MatchConfig | None = None) -> MergeResult:
    cfg = replace(cfg or MatchConfig(), id_hint=True)
    for other in (left, right):
        if other.metamodel_name != base.metamodel_name:
            raise EvolveError("METAMODEL_MISMATCH", f"{base.metamodel_name} vs {other.metamodel_name}")
    sides = [_Side("left", base, left, match_models(base, left, cfg)),
             _Side("right", base, right, match_models(base, right, cfg))]
    conflicts: list[Conflict] = []
    frozen: set[str] = set()  # base objects kept verbatim because of a delete-change conflict

    deleted = set()
    for x in sorted(base.objects):
        by = [s for s in sides if x in s.deleted]
        if not by:
            continue
        if len(by) == 2:
            deleted.add(x)
            continue
        other = sides[1] if by[0] is sides[0] else sides[0]
        reason = other.touched().get(x)
        if reason:
            conflicts.append(Conflict("delete-change", x, f"deleted on {by[0].name}, {reason} on {other.name}"))
            frozen.add(x)
        else:
            deleted.add(x)

    # attributes
    attrs = {x: dict(base.objects[x].attributes) for x in base.objects}
    for x in sorted(set(base.objects) - deleted - frozen):
        l, r = sides[0].attrs.get(x, {}), sides[1].attrs.get(x, {})
        for name in sorted(set(l) | set(r)):
            lv, rv = l.get(name, None), r.get(name, None)
            if name in l and name in r and not _same(lv, rv):
                conflicts.append(Conflict("attr-attr", x, f"{name}: left {_show(lv)}, right {_show(rv)}, "
                                          f"base {_show(attrs[x].get(name, _UNSET))} kept"))
                continue
            value = lv if name in l else rv
            if value is _UNSET:
                attrs[x].pop(name, None)
            else:
                attrs[x][name] = value

    # placement of base objects
    place: dict[str, tuple | None] = {x: _base_place(base, x) for x in base.objects}
    moved_by: dict[str, str] = {}
    for x in sorted(set(base.objects) - deleted - frozen):
        l, r = sides[0].moves.get(x, _UNSET), sides[1].moves.get(x, _UNSET)
        if l is not _UNSET and r is not _UNSET and l != r:
            conflicts.append(Conflict("move-move", x, f"left to {_place_str(l)}, right to {_place_str(r)}"))
        elif l is not _UNSET or r is not _UNSET:
            place[x] = l if l is not _UNSET else r
            moved_by[x] = "left" if l is not _UNSET else "right"

    # additions
    new_ids: dict[tuple[str, str], str] = {}
    taken = set(base.objects)
    for s in sides:
        for sid in s.added:
            mid = sid if sid not in taken else _fresh(sid, taken)
            taken.add(mid)
            new_ids[(s.name, sid)] = mid

    def resolve(ref: tuple) -> str:
        return ref[1] if ref[0] == "base" else new_ids[(ref[1], ref[2])]

    kept = set(base.objects) - deleted
    # keep ancestors of surviving objects and break cycles introduced by moves
    while True:
        parent = {x: (resolve(place[x][0]) if place[x] else None) for x in kept}
        for s in sides:
            for sid in s.added:
                p = s.place(sid)
                parent[new_ids[(s.name, sid)]] = resolve(p[0]) if p else None
        orphan = sorted(p for p in parent.values() if p is not None and p not in parent)
        if orphan:
            x = orphan[0]
            deleted.discard(x)
            kept.add(x)
            conflicts.append(Conflict("delete-change", x, "deleted, but still contains retained elements"))
            continue
        cyc = _cycle(parent)
        if not cyc:
            break
        x = next(c for c in sorted(cyc) if c in moved_by)
        conflicts.append(Conflict("move-move", x, f"move by {moved_by.pop(x)} creates a containment cycle"))
        place[x] = _base_place(base, x)

    b = ModelBuilder(base.metamodel_name, base.metamodel_version)
    pending = [(x, base.objects[x].class_name, attrs[x], place[x]) for x in kept]
    for s in sides:
        for sid in s.added:
            obj = s.model.objects[sid]
            pending.append((new_ids[(s.name, sid)], obj.class_name, dict(obj.attributes), s.place(sid)))
    for oid, cls, a, p in pending:
        b.add(oid, cls, a)
        if p:
            b.move(oid, resolve(p[0]), p[1])

    removed = set().union(*(s.links_removed for s in sides))
    for lid, link in base.links.items():
        if lid not in removed and link.src in kept and link.dst in kept:
            b.link(lid, link.association, link.src, link.dst)
    added_left: Counter = Counter()
    for s in sides:
        for lid, assoc, src, dst in s.links_added:
            key = (assoc, resolve(src), resolve(dst))
            if s is sides[0]:
                added_left[key] += 1
            elif added_left[key] > 0:
                added_left[key] -= 1
                continue  # same link added on both sides
            b.link(b.fresh_id(lid), assoc, key[1], key[2])

    conflicts.sort(key=lambda c: (c.base_id, c.kind, c.detail))
    return MergeResult(b.build(), tuple(conflicts))


def _same(a: Any, b: Any) -> bool:
    return a is b or (a is not _UNSET and b is not _UNSET and a == b and type(a) is type(b))


def _show(v: Any) -> str:
    return "<unset>" if v is _UNSET else json.dumps(v)


def _place_str(p: tuple | None) -> str:
    return "<root>" if p is None else f"{p[0][-1]}.{p[1]}"


def _fresh(stem: str, taken: set[str]) -> str:
    n = 1
    while f"{stem}~{n}" in taken:
        n += 1
    return f"{stem}~{n}"


def _cycle(parent: dict[str, str | None]) -> set[str]:
    for start in sorted(parent):
        seen = []
        cur = start
        while cur is not None and cur not in seen:
            seen.append(cur)
            cur = parent.get(cur)
        if cur is not None:
            return set(seen[seen.index(cur):])
    return set()
