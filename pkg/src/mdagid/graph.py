"""Missing-data DAGs: structure, validation and graph queries."""

from __future__ import annotations

import enum
import json
from pathlib import Path
from dataclasses import dataclass
from typing import Iterable, Mapping


class VertexKind(str, enum.Enum):
    COUNTERFACTUAL = "counterfactual"
    INDICATOR = "indicator"
    PROXY = "proxy"
    UNOBSERVED = "unobserved"
    OBSERVED = "observed"


class UnknownVertexError(KeyError):
    pass


class GraphFormatError(ValueError):
    """Raised when graph JSON cannot be turned into an :class:`MDag`."""


@dataclass(frozen=True)
class Pair:
    proxy: str
    counterfactual: str
    indicator: str


@dataclass(frozen=True)
class Violation:
    rule: str
    items: tuple
    message: str

    def __str__(self):
        return f"{self.rule}: {self.message}"


class MDag:
    """An annotated directed graph over counterfactual, indicator, proxy,
    unobserved and fully observed vertices.

    Construction never fails on structural problems (cycles, bad pairings);
    those are reported by :func:`validate`.  Instances are immutable.
    """

    def __init__(self, vertices: Mapping[str, VertexKind | str],
                 edges: Iterable[tuple[str, str]] = (),
                 pairs: Iterable[Pair] = (),
                 cardinality: Mapping[str, int] | None = None,
                 name: str = ""):
        self._kind = {v: VertexKind(k) for v, k in vertices.items()}
        self._edges = frozenset((a, b) for a, b in edges)
        for a, b in self._edges:
            for v in (a, b):
                if v not in self._kind:
                    raise UnknownVertexError(v)
        self._pairs = tuple(sorted(pairs, key=lambda p: p.proxy))
        cardinality = dict(cardinality or {})
        card = {}
        for v, k in self._kind.items():
            if k is VertexKind.INDICATOR:
                card[v] = 2
            else:
                card[v] = int(cardinality.get(v, 2))
        # proxy cardinality mirrors its partner; the missing state is extra
        for p in self._pairs:
            if p.counterfactual in card and p.proxy in card:
                card[p.proxy] = card[p.counterfactual]
        self._card = card
        self.name = name
        self._pa = {v: set() for v in self._kind}
        self._ch = {v: set() for v in self._kind}
        for a, b in self._edges:
            self._pa[b].add(a)
            self._ch[a].add(b)

    @classmethod
    def dag(cls, vertices: Iterable[str], edges: Iterable[tuple[str, str]] = (),
            cardinality: Mapping[str, int] | None = None) -> "MDag":
        """Plain causal DAG: every vertex fully observed."""
        return cls({v: VertexKind.OBSERVED for v in vertices}, edges,
                   cardinality=cardinality)

    # -- basic accessors ---------------------------------------------------

    @property
    def vertices(self) -> list[str]:
        return sorted(self._kind)

    @property
    def edges(self) -> list[tuple[str, str]]:
        return sorted(self._edges)

    @property
    def pairs(self) -> tuple[Pair, ...]:
        return self._pairs

    def __contains__(self, v):
        return v in self._kind

    def __eq__(self, other):
        return (isinstance(other, MDag) and self._kind == other._kind
                and self._edges == other._edges and self._pairs == other._pairs
                and self._card == other._card)

    def __hash__(self):
        return hash((frozenset(self._kind.items()), self._edges, self._pairs))

    def __repr__(self):
        return f"MDag({self.name or '?'}, {len(self._kind)} vertices, {len(self._edges)} edges)"

    def _check(self, v):
        if v not in self._kind:
            raise UnknownVertexError(v)

    def kind(self, v: str) -> VertexKind:
        self._check(v)
        return self._kind[v]

    def cardinality(self, v: str) -> int:
        """Number of non-missing states of ``v``."""
        self._check(v)
        return self._card[v]

    def of_kind(self, kind: VertexKind) -> list[str]:
        return sorted(v for v, k in self._kind.items() if k is kind)

    @property
    def counterfactuals(self):
        return self.of_kind(VertexKind.COUNTERFACTUAL)

    @property
    def indicators(self):
        return self.of_kind(VertexKind.INDICATOR)

    @property
    def proxies(self):
        return self.of_kind(VertexKind.PROXY)

    @property
    def observed(self):
        return self.of_kind(VertexKind.OBSERVED)

    @property
    def unobserved(self):
        return self.of_kind(VertexKind.UNOBSERVED)

    def parents(self, v: str) -> list[str]:
        self._check(v)
        return sorted(self._pa[v])

    def children(self, v: str) -> list[str]:
        self._check(v)
        return sorted(self._ch[v])

    def has_edge(self, a: str, b: str) -> bool:
        return (a, b) in self._edges

    def ancestors(self, vs: Iterable[str] | str) -> set[str]:
        """Ancestors of ``vs``, including ``vs`` themselves."""
        return self._closure(vs, self._pa)

    def descendants(self, vs: Iterable[str] | str) -> set[str]:
        """Descendants of ``vs``, including ``vs`` themselves."""
        return self._closure(vs, self._ch)

    def _closure(self, vs, step):
        if isinstance(vs, str):
            vs = [vs]
        stack = list(vs)
        for v in stack:
            self._check(v)
        seen = set(stack)
        while stack:
            for w in step[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen

    # -- pairing lookups ---------------------------------------------------

    def pair_of(self, v: str) -> Pair | None:
        """The pair containing ``v`` in any role, or None."""
        for p in self._pairs:
            if v in (p.proxy, p.counterfactual, p.indicator):
                return p
        return None

    def indicator_of(self, v: str) -> str | None:
        p = self.pair_of(v)
        return p.indicator if p else None

    def proxy_of(self, v: str) -> str | None:
        p = self.pair_of(v)
        return p.proxy if p else None

    def counterfactual_of(self, v: str) -> str | None:
        p = self.pair_of(v)
        return p.counterfactual if p else None

    # -- ordering ----------------------------------------------------------

    def find_cycle(self) -> list[str] | None:
        """A directed cycle as ``[v0, v1, ..., v0]`` or None.

        The search visits vertices in name order so the reported cycle is
        reproducible.
        """
        return find_cycle(self.vertices, lambda v: sorted(self._ch[v]))

    def topological_order(self) -> list[str]:
        """Kahn's algorithm, ties broken by vertex name."""
        import heapq
        indeg = {v: len(self._pa[v]) for v in self._kind}
        heap = [v for v, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            v = heapq.heappop(heap)
            order.append(v)
            for c in self._ch[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(heap, c)
        if len(order) != len(self._kind):
            raise ValueError(f"graph has a cycle: {self.find_cycle()}")
        return order

    # -- derived graphs ----------------------------------------------------

    def induced(self, keep: Iterable[str]) -> "MDag":
        keep = set(keep)
        return MDag({v: k for v, k in self._kind.items() if v in keep},
                    [(a, b) for a, b in self._edges if a in keep and b in keep],
                    [p for p in self._pairs
                     if {p.proxy, p.counterfactual, p.indicator} <= keep],
                    {v: c for v, c in self._card.items() if v in keep}, self.name)

    def without_edges(self, drop: Iterable[tuple[str, str]]) -> "MDag":
        drop = set(drop)
        return MDag(self._kind, [e for e in self._edges if e not in drop],
                    self._pairs, self._card, self.name)

    def with_cardinality(self, cardinality: Mapping[str, int]) -> "MDag":
        """Copy with some cardinalities replaced (proxies follow their partners)."""
        cards = {**self._card, **dict(cardinality)}
        for p in self._pairs:
            if p.proxy in cards and p.counterfactual in cards and p.proxy != p.counterfactual:
                cards[p.proxy] = cards[p.counterfactual]
        return MDag(dict(self._kind), self._edges, self._pairs, cards, self.name)

    def relabel(self, mapping: Mapping[str, str]) -> "MDag":
        f = lambda v: mapping.get(v, v)  # noqa: E731
        return MDag({f(v): k for v, k in self._kind.items()},
                    [(f(a), f(b)) for a, b in self._edges],
                    [Pair(f(p.proxy), f(p.counterfactual), f(p.indicator))
                     for p in self._pairs],
                    {f(v): c for v, c in self._card.items()}, self.name)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "vertices": [{"name": v, "kind": self._kind[v].value,
                          "cardinality": self._card[v]} for v in self.vertices],
            "edges": [list(e) for e in self.edges],
            "pairs": [{"proxy": p.proxy, "counterfactual": p.counterfactual,
                       "indicator": p.indicator} for p in self._pairs],
        }

    @classmethod
    def from_json(cls, data: dict, name: str = "") -> "MDag":
        if not isinstance(data, dict):
            raise GraphFormatError("graph JSON must be an object")
        try:
            raw_vertices = data["vertices"]
        except KeyError:
            raise GraphFormatError("missing field 'vertices'") from None
        vertices, card = {}, {}
        for i, item in enumerate(raw_vertices):
            where = f"vertices[{i}]"
            if not isinstance(item, dict) or "name" not in item:
                raise GraphFormatError(f"{where}: expected an object with 'name'")
            v = item["name"]
            if v in vertices:
                raise GraphFormatError(f"{where}: duplicate vertex {v!r}")
            try:
                vertices[v] = VertexKind(item.get("kind", "observed"))
            except ValueError:
                raise GraphFormatError(f"{where}.kind: unknown kind {item.get('kind')!r}") from None
            c = item.get("cardinality", 2)
            if not isinstance(c, int) or c < 2:
                raise GraphFormatError(f"{where}.cardinality: expected integer >= 2, got {c!r}")
            card[v] = c
        edges = []
        for i, e in enumerate(data.get("edges", [])):
            if not (isinstance(e, (list, tuple)) and len(e) == 2):
                raise GraphFormatError(f"edges[{i}]: expected [from, to]")
            for v in e:
                if v not in vertices:
                    raise GraphFormatError(f"edges[{i}]: unknown vertex {v!r}")
            edges.append(tuple(e))
        pairs = []
        for i, p in enumerate(data.get("pairs", [])):
            try:
                pair = Pair(p["proxy"], p["counterfactual"], p["indicator"])
            except (KeyError, TypeError):
                raise GraphFormatError(
                    f"pairs[{i}]: expected proxy, counterfactual and indicator") from None
            for v in (pair.proxy, pair.counterfactual, pair.indicator):
                if v not in vertices:
                    raise GraphFormatError(f"pairs[{i}]: unknown vertex {v!r}")
            pairs.append(pair)
        return cls(vertices, edges, pairs, card, name or data.get("name", ""))

    @classmethod
    def load(cls, path) -> "MDag":
        with open(path) as fh:
            text = fh.read()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise GraphFormatError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None
        name = data.get("name") if isinstance(data, dict) else None
        return cls.from_json(data, name=name or Path(path).stem)


def find_cycle(vertices, children) -> list[str] | None:
    """Iterative DFS cycle search over ``children(v)``."""
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {v: WHITE for v in vertices}
    for root in vertices:
        if colour[root] != WHITE:
            continue
        stack = [(root, iter(children(root)))]
        path = [root]
        colour[root] = GREY
        while stack:
            v, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                colour[v] = BLACK
                stack.pop()
                path.pop()
            elif colour[nxt] == GREY:
                return path[path.index(nxt):] + [nxt]
            elif colour[nxt] == WHITE:
                colour[nxt] = GREY
                stack.append((nxt, iter(children(nxt))))
                path.append(nxt)
    return None


def validate(graph: MDag) -> list[Violation]:
    """Check the structural rules of a missing-data DAG.

    Returns an empty list for a valid graph.  Each violation names the rule
    and the offending vertices or edges.
    """
    out = []
    K = VertexKind
    cycle = graph.find_cycle()
    if cycle:
        out.append(Violation("acyclicity", tuple(cycle),
                             "directed cycle " + "->".join(cycle)))

    roles: dict[str, list[int]] = {}
    for i, p in enumerate(graph.pairs):
        expected = ((p.proxy, K.PROXY), (p.counterfactual, K.COUNTERFACTUAL),
                    (p.indicator, K.INDICATOR))
        for v, want in expected:
            roles.setdefault(v, []).append(i)
            if graph.kind(v) is not want:
                out.append(Violation("pair-kind", (p.proxy, v),
                                     f"pair of {p.proxy}: {v} is {graph.kind(v).value}, expected {want.value}"))
    for v, idx in sorted(roles.items()):
        if len(idx) > 1:
            out.append(Violation("pair-unique", (v,),
                                 f"{v} appears in {len(idx)} pairs"))
    for v in graph.vertices:
        k = graph.kind(v)
        if k in (K.PROXY, K.COUNTERFACTUAL, K.INDICATOR) and v not in roles:
            out.append(Violation("pair-missing", (v,), f"{k.value} {v} has no partner pair"))
        if k is K.UNOBSERVED and v in roles:
            out.append(Violation("unobserved-paired", (v,), f"unobserved {v} carries missingness machinery"))

    for p in graph.pairs:
        if p.proxy not in graph or graph.kind(p.proxy) is not K.PROXY:
            continue
        want = {p.counterfactual, p.indicator}
        have = set(graph.parents(p.proxy))
        if have != want:
            out.append(Violation("proxy-parents", (p.proxy,),
                                 f"{p.proxy} has parents {sorted(have)}, expected {sorted(want)}"))
        if p.counterfactual in graph and p.indicator in graph:
            if graph.cardinality(p.proxy) != graph.cardinality(p.counterfactual):
                out.append(Violation("proxy-cardinality", (p.proxy,),
                                     f"{p.proxy} and {p.counterfactual} differ in cardinality"))

    for a, b in graph.edges:
        ka, kb = graph.kind(a), graph.kind(b)
        if kb is K.COUNTERFACTUAL and ka is K.PROXY:
            out.append(Violation("proxy-into-counterfactual", (a, b),
                                 f"edge {a}->{b}: proxies do not cause counterfactuals"))
        elif kb is K.COUNTERFACTUAL and ka is K.INDICATOR:
            out.append(Violation("indicator-into-counterfactual", (a, b),
                                 f"edge {a}->{b}: indicators do not cause counterfactuals"))
    return out


def is_valid(graph: MDag) -> bool:
    return not validate(graph)


def d_separated(graph, A: Iterable[str], B: Iterable[str], Z: Iterable[str] = ()) -> bool:
    """True iff every path between ``A`` and ``B`` is blocked by ``Z``.

    Reachability (Bayes-ball) traversal; works on any object exposing
    ``parents``, ``children`` and ``ancestors``.
    """
    A, B, Z = set(A), set(B), set(Z)
    for v in A | B | Z:
        if v not in graph:
            raise UnknownVertexError(v)
    if A & B or A & Z or B & Z:
        raise ValueError("A, B and Z must be pairwise disjoint")
    if not A or not B:
        return True
    anz = graph.ancestors(Z) if Z else set()
    # states: (vertex, arrived-from-child) -- "up" means travelling against edges
    frontier = [(a, True) for a in sorted(A)]
    seen = set()
    while frontier:
        v, up = frontier.pop()
        if (v, up) in seen:
            continue
        seen.add((v, up))
        if v in B:
            return False
        if up:
            if v in Z:
                continue
            frontier.extend((p, True) for p in graph.parents(v))
            frontier.extend((c, False) for c in graph.children(v))
        else:
            if v not in Z:
                frontier.extend((c, False) for c in graph.children(v))
            if v in anz:
                frontier.extend((p, True) for p in graph.parents(v))
    return True


def to_dot(graph: MDag, title: str | None = None) -> str:
    shapes = {
        VertexKind.COUNTERFACTUAL: 'shape=ellipse',
        VertexKind.INDICATOR: 'shape=ellipse',
        VertexKind.PROXY: 'shape=ellipse, color=gray40',
        VertexKind.UNOBSERVED: 'shape=ellipse, style=dashed',
        VertexKind.OBSERVED: 'shape=ellipse',
    }
    lines = [f'digraph "{title or graph.name or "mdag"}" {{']
    for v in graph.vertices:
        lines.append(f'  "{v}" [{shapes[graph.kind(v)]}];')
    for a, b in graph.edges:
        style = ' [color=gray40]' if graph.kind(b) is VertexKind.PROXY else ''
        lines.append(f'  "{a}" -> "{b}"{style};')
    lines.append("}")
    return "\n".join(lines) + "\n"
