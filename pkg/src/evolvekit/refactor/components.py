"""Push-down and pull-up of components, plus the leaf-to-leaf connectivity oracle.

Channels are unidirectional links ``from -> to`` between ports.  A channel
may only join ports of sibling components, or a component and one of its
direct subcomponents.  Ports of composite components are boundary ports:
they only relay traffic between the inside and the outside.
"""

from __future__ import annotations

from collections import deque

from ..builtin import components_mm
from ..errors import EvolveError
from ..model import Model, ModelBuilder

CHANNEL = "Channel"


class _Net:
    """Mutable view of a component model used while rewriting it."""

    def __init__(self, model: Model):
        self.b = ModelBuilder.from_model(model)

    def is_component(self, oid: str) -> bool:
        return oid in self.b.objects and self.b.objects[oid]["class"] == "Component"

    def parent(self, oid: str) -> str | None:
        return self.b.objects[oid]["parent"]

    def owner(self, port: str) -> str:
        return self.b.objects[port]["parent"]

    def ports(self, comp: str) -> list[str]:
        return sorted(k for k, v in self.b.objects.items() if v["parent"] == comp and v["role"] == "ports")

    def subs(self, comp: str) -> list[str]:
        return sorted(k for k, v in self.b.objects.items() if v["parent"] == comp and v["role"] == "sub")

    def channels(self):
        return sorted((l for l in self.b.links.values() if l.association == CHANNEL), key=lambda l: l.id)

    def connect(self, stem: str, src: str, dst: str) -> str:
        lid = self.b.fresh_id(stem)
        self.b.link(lid, CHANNEL, src, dst)
        return lid

    def disconnect(self, lid: str) -> None:
        del self.b.links[lid]

    def new_port(self, comp: str, direction: str) -> str:
        n = 0
        while f"{comp}/bp/{n}" in self.b.objects:
            n += 1
        pid = f"{comp}/bp/{n}"
        self.b.add(pid, "Port", {"direction": direction}, comp, "ports")
        return pid

    def drop_port(self, pid: str) -> None:
        self.b.remove(pid)


def _check_component(net: _Net, oid: str) -> None:
    if not net.is_component(oid):
        raise EvolveError("ID_UNKNOWN", f"no component {oid}")


def _split(net: _Net, link, container: str, inside_port: str) -> None:
    """Route ``link`` through a new boundary port of ``container``; ``inside_port`` is its inner end."""
    net.disconnect(link.id)
    outward = link.src == inside_port
    bp = net.new_port(container, "out" if outward else "in")
    net.connect(f"{link.id}~1", link.src, bp)
    net.connect(f"{link.id}~2", bp, link.dst)


def push_down(model: Model, component: str, container: str) -> Model:
    """Make ``component`` a subcomponent of its sibling ``container``."""
    net = _Net(model)
    _check_component(net, component)
    _check_component(net, container)
    if component == container or net.parent(component) != net.parent(container):
        raise EvolveError("NOT_SIBLINGS", f"{component} and {container} are not siblings")
    if not net.subs(container) and net.ports(container):
        raise EvolveError("LEAF_CONTAINER", f"{container} is a leaf with ports of its own")
    inner = set(net.subs(container))
    own = set(net.ports(component))
    container_ports = set(net.ports(container))
    for link in net.channels():
        if link.src in own:
            mine, other = link.src, link.dst
        elif link.dst in own:
            mine, other = link.dst, link.src
        else:
            continue
        if net.owner(other) == component or net.parent(net.owner(other)) == component:
            continue  # internal to the moved component
        if other in container_ports:
            # bypass the container port: connect straight to the inner ends it relays to/from
            if link.src == mine:
                ends = [l.dst for l in net.channels() if l.src == other and net.owner(l.dst) in inner]
            else:
                ends = [l.src for l in net.channels() if l.dst == other and net.owner(l.src) in inner]
            if not ends:
                continue  # relays nothing; as a child-to-parent channel it is already local
            net.disconnect(link.id)
            for end in ends:
                net.connect(f"{link.id}@{other}/{end}", *((mine, end) if link.src == mine else (end, mine)))
        else:
            _split(net, link, container, mine)
    net.b.move(component, container, "sub")
    return net.b.build()


def _merged_id(a: str, b: str) -> str:
    if a.endswith("~1") and b.endswith("~2") and a[:-2] == b[:-2]:
        return a[:-2]
    return f"{a}+{b}"


def _bypass(lid: str, end: str, boundary: set[str]) -> tuple[str, str] | None:
    """Decode a push-down shortcut id ``<channel>@<container port>/<end>``."""
    if not lid.endswith("/" + end):
        return None
    head = lid[:-len(end) - 1]
    hits = [bp for bp in boundary if head.endswith("@" + bp)]
    if not hits:
        return None
    bp = max(hits, key=len)
    return head[:-len(bp) - 1], bp


def _reroute(net: _Net, container: str, boundary: set[str], mine: str, outward: bool, links: list) -> None:
    """Cross the container boundary for channels between ``mine`` and ports staying inside.

    Shortcuts that push-down made around a container port are folded back
    into one channel through that port when the port still relays to
    exactly the same ends.  Everything else is split through new boundary
    ports.
    """
    groups: dict[tuple[str, str], list] = {}
    rest = []
    for link in links:
        key = _bypass(link.id, link.dst if outward else link.src, boundary)
        (groups.setdefault(key, []) if key else rest).append(link)
    for (stem, bp), group in sorted(groups.items()):
        relays = [l for l in net.channels() if (l.src if outward else l.dst) == bp]
        ends = {l.dst if outward else l.src for l in relays}
        if bp not in net.b.objects or stem in net.b.links \
                or ends != {l.dst if outward else l.src for l in group}:
            rest.extend(group)
            continue
        for link in group:
            net.disconnect(link.id)
        net.b.link(stem, CHANNEL, *((mine, bp) if outward else (bp, mine)))
    for link in sorted(rest, key=lambda l: l.id):
        _split(net, link, container, link.dst if outward else link.src)


def pull_up(model: Model, component: str) -> Model:
    """Move ``component`` out of its container, one level up."""
    net = _Net(model)
    _check_component(net, component)
    container = net.parent(component)
    if container is None or net.parent(container) is None:
        raise EvolveError("AT_ROOT", f"{component} is not inside a non-root container")
    outer = net.parent(container)
    siblings = set(net.subs(container)) - {component}
    own = set(net.ports(component))
    boundary = set(net.ports(container))
    touched = set()
    direct: dict[tuple[str, bool], list] = {}  # (own port, outward) -> channels to staying siblings
    for link in net.channels():
        if link.src in own:
            mine, other = link.src, link.dst
        elif link.dst in own:
            mine, other = link.dst, link.src
        else:
            continue
        if other in boundary:
            if link.src == mine:  # component -> boundary -> outside
                far = [l for l in net.channels() if l.src == other and net.owner(l.dst) not in siblings]
            else:  # outside -> boundary -> component
                far = [l for l in net.channels() if l.dst == other and net.owner(l.src) not in siblings]
            if not far:
                continue  # nothing to merge with; sibling-to-container channels are local
            touched.add(other)
            net.disconnect(link.id)
            for l in far:
                if link.src == mine:
                    net.connect(_merged_id(link.id, l.id), mine, l.dst)
                else:
                    net.connect(_merged_id(l.id, link.id), l.src, mine)
        elif net.owner(other) in siblings:
            direct.setdefault((mine, link.src == mine), []).append(link)
    for (mine, outward), links in sorted(direct.items()):
        _reroute(net, container, boundary, mine, outward, links)
    for bp in sorted(touched):
        relays = [l for l in net.channels() if bp in (l.src, l.dst)
                  and net.owner(l.dst if l.src == bp else l.src) in siblings]
        if not relays:
            net.drop_port(bp)
    net.b.move(component, outer, "sub")
    if not siblings:
        # the container is now a leaf; its remaining ports relayed into it and lead nowhere
        for bp in net.ports(container):
            net.drop_port(bp)
    return net.b.build()


def locality_violations(model: Model) -> list[str]:
    """Channel ids whose ends are not on sibling or parent/child components."""
    out = []
    for link in model.links.values():
        if link.association != CHANNEL:
            continue
        a, b = model.parent(link.src), model.parent(link.dst)
        if a is None or b is None:
            out.append(link.id)
            continue
        pa, pb = model.parent(a), model.parent(b)
        if not (a != b and (pa == pb or pa == b or pb == a)):
            out.append(link.id)
    return sorted(out)


def flattened_connectivity(model: Model) -> frozenset[tuple[str, str]]:
    """Pairs (p, q) of leaf-component ports where q is reachable from p.

    Paths may pass through any number of boundary ports but never through
    another leaf port.
    """
    leaf_ports = set()
    for obj in model.objects.values():
        if obj.class_name == "Component" and not obj.children.get("sub"):
            leaf_ports.update(obj.children.get("ports", ()))
    succ: dict[str, list[str]] = {}
    for link in model.links.values():
        if link.association == CHANNEL:
            succ.setdefault(link.src, []).append(link.dst)
    pairs = set()
    for p in sorted(leaf_ports):
        seen = set()
        queue = deque(succ.get(p, ()))
        while queue:
            q = queue.popleft()
            if q in seen:
                continue
            seen.add(q)
            if q in leaf_ports:
                pairs.add((p, q))
            else:
                queue.extend(succ.get(q, ()))
    return frozenset(pairs)


def component_mm():
    return components_mm()
