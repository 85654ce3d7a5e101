"""Single-world intervention graphs for missing-data DAGs.

Only the ``R = 1`` template is ever built: a missingness indicator splits
into its random half (keeping incoming edges) and a fixed node ``r=1``
(taking the outgoing edges).  Counterfactuals are kept as separate
confounder-like nodes ``U≡L(1)`` feeding both the indicator and the
relabelled proxy, unless the counterfactual's only child is its proxy, in
which case the two merge into one node.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .graph import MDag, VertexKind, find_cycle, UnknownVertexError


class SwigError(ValueError):
    pass


@dataclass(frozen=True)
class SwigNode:
    name: str
    label: str
    fixed: bool
    origin: tuple[str, ...]
    value: str | None = None
    kind: str = "observed"
    proxy: str | None = None


@dataclass(frozen=True)
class Swig:
    nodes: tuple[SwigNode, ...]
    edges: frozenset
    split: frozenset = field(default_factory=frozenset)
    treatments: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        by_name = {n.name: n for n in self.nodes}
        object.__setattr__(self, "_by_name", by_name)
        pa = {n: set() for n in by_name}
        ch = {n: set() for n in by_name}
        for a, b in self.edges:
            pa[b].add(a)
            ch[a].add(b)
        object.__setattr__(self, "_pa", pa)
        object.__setattr__(self, "_ch", ch)

    def __contains__(self, v):
        return v in self._by_name

    def node(self, name: str) -> SwigNode:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownVertexError(name) from None

    @property
    def vertices(self) -> list[str]:
        return sorted(self._by_name)

    @property
    def fixed_nodes(self) -> list[str]:
        return sorted(n.name for n in self.nodes if n.fixed)

    @property
    def random_nodes(self) -> list[str]:
        return sorted(n.name for n in self.nodes if not n.fixed)

    def parents(self, v):
        self.node(v)
        return sorted(self._pa[v])

    def children(self, v):
        self.node(v)
        return sorted(self._ch[v])

    def ancestors(self, vs):
        if isinstance(vs, str):
            vs = [vs]
        stack, seen = list(vs), set(vs)
        while stack:
            for p in self._pa[stack.pop()]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def descendants(self, vs):
        if isinstance(vs, str):
            vs = [vs]
        stack, seen = list(vs), set(vs)
        while stack:
            for c in self._ch[stack.pop()]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen

    def labels(self) -> dict[str, str]:
        return {n.name: n.label for n in self.nodes}

    def label_edges(self) -> list[tuple[str, str]]:
        lab = self.labels()
        return sorted((lab[a], lab[b]) for a, b in self.edges)

    def to_dot(self, title: str = "swig") -> str:
        lines = [f'digraph "{title}" {{']
        for n in sorted(self.nodes, key=lambda n: n.name):
            shape = "box" if n.fixed else "ellipse"
            lines.append(f'  "{n.name}" [label="{n.label}", shape={shape}];')
        for a, b in sorted(self.edges):
            lines.append(f'  "{a}" -> "{b}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _fixed_name(indicator: str) -> str:
    return f"{indicator.lower()}=1"


def build_swig(graph: MDag, split: Iterable[str] | None = None) -> Swig:
    """Split the given indicators into random and fixed (``r=1``) halves.

    ``split=None`` splits every indicator.  The graph does not need to pass
    :func:`~mdagid.graph.validate`; naive constructions are accepted so that
    :func:`detect_stitch_cycle` can lint them.
    """
    split = set(graph.indicators if split is None else split)
    for r in sorted(split):
        if r not in graph:
            raise UnknownVertexError(r)
        if graph.kind(r) is not VertexKind.INDICATOR:
            raise SwigError(f"cannot split {r}: it is a {graph.kind(r).value} vertex, not an indicator")

    relabelled = {}     # proxy -> counterfactual label it takes under r=1
    merged = {}         # counterfactual -> proxy node it collapses into
    for r in sorted(split):
        p = graph.pair_of(r)
        if p is None:
            continue
        cf = p.counterfactual
        relabelled[p.proxy] = cf if cf != p.proxy else f"{p.proxy}(1)"
        if (cf != p.proxy and cf in graph
                and graph.children(cf) == [p.proxy]):
            merged[cf] = p.proxy

    def name_of(v):
        return merged.get(v, v)

    nodes = []
    for v in graph.vertices:
        if v in merged:
            continue
        origin = (v,) + tuple(c for c, px in merged.items() if px == v)
        if v in relabelled:
            label = relabelled[v]
        elif graph.kind(v) is VertexKind.COUNTERFACTUAL and graph.proxy_of(v) in relabelled:
            label = f"U≡{v}"
        else:
            label = v
        proxy = graph.proxy_of(v) if graph.kind(v) is VertexKind.COUNTERFACTUAL else None
        nodes.append(SwigNode(v, label, False, origin, None, graph.kind(v).value, proxy))
    for r in sorted(split):
        nodes.append(SwigNode(_fixed_name(r), f"{r.lower()}=1", True, (r,), "1",
                              VertexKind.INDICATOR.value))

    edges = set()
    for a, b in graph.edges:
        if a in merged and merged[a] == b:
            continue
        tail = _fixed_name(a) if a in split else name_of(a)
        edges.add((tail, name_of(b)))
    return Swig(tuple(nodes), frozenset(edges), frozenset(split))


_SUPER = re.compile(r"^(.*)\(([^()]*)\)$")


def _compose(label: str, value: str) -> str:
    m = _SUPER.match(label)
    if m:
        return f"{m.group(1)}({m.group(2)},{value})"
    return f"{label}({value})"


def split_treatment(swig: Swig, treatment: str, value: str) -> Swig:
    """Ordinary SWIG node-splitting on a treatment after indicators are fixed.

    The fixed node takes every outgoing edge except the one into the
    treatment's own proxy, which keeps measuring the natural value.
    Labels of all random descendants of the fixed node gain ``value`` as a
    further superscript, e.g. ``Y(1)`` becomes ``Y(1,a)``.
    """
    node = swig.node(treatment)
    if node.fixed:
        raise SwigError(f"{treatment} is a fixed node")
    if node.kind == VertexKind.INDICATOR.value:
        raise SwigError(f"{treatment} is an indicator; use build_swig to split it")
    own_proxy = {node.proxy} if node.proxy in swig else set()

    fixed = SwigNode(f"{treatment}={value}", value, True, node.origin, value, node.kind)
    edges = set()
    for a, b in swig.edges:
        if a == treatment and b not in own_proxy:
            edges.add((fixed.name, b))
        else:
            edges.add((a, b))

    tmp = Swig(swig.nodes + (fixed,), frozenset(edges), swig.split, swig.treatments)
    downstream = tmp.descendants(fixed.name) - {fixed.name}
    nodes = []
    for n in swig.nodes:
        if n.name in downstream and not n.fixed:
            n = SwigNode(n.name, _compose(n.label, value), n.fixed, n.origin,
                         n.value, n.kind, n.proxy)
        nodes.append(n)
    nodes.append(fixed)
    return Swig(tuple(nodes), frozenset(edges), swig.split,
                swig.treatments + ((treatment, value),))


def detect_stitch_cycle(swig: Swig) -> list[str] | None:
    """Collapse every (random, fixed) pair and look for a directed cycle.

    Each node maps back to its first origin vertex; fixed nodes map to the
    vertex they were split from.  Returns the cycle as a list of origin
    names ``[v0, ..., v0]`` or None.
    """
    owner = {n.name: n.origin[0] for n in swig.nodes}
    ch: dict[str, set] = {o: set() for o in owner.values()}
    for a, b in swig.edges:
        oa, ob = owner[a], owner[b]
        if oa != ob:
            ch[oa].add(ob)
    cycle = find_cycle(sorted(ch), lambda v: sorted(ch[v]))
    if cycle is None:
        return None
    # report the cycle starting from a split vertex when there is one
    split_origins = {n.origin[0] for n in swig.nodes if n.fixed}
    ring = cycle[:-1]
    starts = [i for i, v in enumerate(ring) if v in split_origins]
    if starts:
        i = starts[0]
        ring = ring[i:] + ring[:i]
    return ring + [ring[0]]


def has_undefined_counterfactual(swig: Swig) -> bool:
    """True if any node carries an ``R = 0`` template label such as ``L(0)``."""
    return any(re.search(r"\(0[,)]", n.label) or n.label.endswith("=0")
               for n in swig.nodes)
