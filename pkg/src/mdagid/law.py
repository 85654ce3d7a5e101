"""Exact discrete full-data laws, their observed and target margins."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping

import numpy as np

from .graph import MDag, VertexKind, validate

MISSING = -1
MISSING_TEXT = "NA"
ENUMERATION_CAP = 10**6


class EnumerationCapError(ValueError):
    pass


class PositivityError(ZeroDivisionError):
    def __init__(self, event, what: str = "event"):
        self.event = dict(event)
        super().__init__(f"zero-probability {what}: {format_config(self.event) or '(empty)'}")


class ConsistencyError(ValueError):
    pass


class LawFormatError(ValueError):
    pass


def format_value(value: int) -> str:
    return MISSING_TEXT if value == MISSING else str(value)


def parse_value(text: str) -> int:
    return MISSING if text == MISSING_TEXT else int(text)


def format_config(config: Mapping[str, int]) -> str:
    """``name=value`` pairs joined by ``;`` in name order."""
    return ";".join(f"{k}={format_value(config[k])}" for k in sorted(config))


def parse_config(text: str) -> dict[str, int]:
    if not text:
        return {}
    out = {}
    for item in text.split(";"):
        name, _, value = item.partition("=")
        if not _:
            raise LawFormatError(f"bad configuration item {item!r}")
        out[name] = parse_value(value)
    return out


class Distribution:
    """A joint probability table over named discrete variables.

    Missing proxy values live in the last slot of the proxy's axis, so a
    configuration value of ``MISSING`` (-1) indexes it directly.
    """

    def __init__(self, variables: Iterable[str], cards: Iterable[int], p: np.ndarray,
                 missing_ok: Iterable[str] = ()):
        self.variables = tuple(variables)
        self.cards = tuple(int(c) for c in cards)
        self.p = np.asarray(p, dtype=float).reshape(self.cards)
        self.p.setflags(write=False)
        self.missing_ok = frozenset(missing_ok)
        self._axis = {v: i for i, v in enumerate(self.variables)}
        self._marginals: dict = {}

    def __repr__(self):
        return f"{type(self).__name__}({', '.join(self.variables)})"

    def _index(self, var, value):
        if value == MISSING and var not in self.missing_ok:
            raise ValueError(f"{var} has no missing state")
        return value

    def total(self) -> float:
        return float(self.p.sum())

    def marginal_array(self, variables: Iterable[str]) -> np.ndarray:
        variables = tuple(variables)
        key = variables
        if key not in self._marginals:
            for v in variables:
                if v not in self._axis:
                    raise KeyError(v)
            keep = [self._axis[v] for v in variables]
            drop = tuple(i for i in range(len(self.variables)) if i not in keep)
            arr = self.p.sum(axis=drop) if drop else self.p
            # reorder remaining axes to the requested order
            remaining = sorted(keep)
            arr = np.transpose(arr, [remaining.index(i) for i in keep]) if keep else arr
            self._marginals[key] = arr
        return self._marginals[key]

    def marginal(self, variables: Iterable[str]) -> "Distribution":
        variables = tuple(variables)
        return Distribution(variables, [self.cards[self._axis[v]] for v in variables],
                            self.marginal_array(variables),
                            self.missing_ok & set(variables))

    def prob(self, config: Mapping[str, int]) -> float:
        """Marginal probability of a partial configuration."""
        variables = tuple(sorted(config))
        arr = self.marginal_array(variables)
        idx = tuple(self._index(v, config[v]) for v in variables)
        return float(arr[idx]) if variables else float(arr)

    def states(self, var: str) -> list[int]:
        c = self.cards[self._axis[var]]
        if var in self.missing_ok:
            return list(range(c - 1)) + [MISSING]
        return list(range(c))

    def items(self) -> Iterator[tuple[dict[str, int], float]]:
        for idx in np.ndindex(*self.cards):
            config = {}
            for v, i, c in zip(self.variables, idx, self.cards):
                config[v] = MISSING if (v in self.missing_ok and i == c - 1) else i
            yield config, float(self.p[idx])

    def to_dict(self) -> dict[str, float]:
        return {format_config(c): p for c, p in self.items()}

    def total_variation(self, other: "Distribution") -> float:
        if set(self.variables) != set(other.variables):
            raise ValueError("distributions over different variables")
        q = other.marginal_array(self.variables)
        return 0.5 * float(np.abs(self.p - q).sum())


class ObservedLaw(Distribution):
    """Law of proxies, indicators and fully observed vertices."""

    def __init__(self, variables, cards, p, pairs: Mapping[str, str]):
        super().__init__(variables, cards, p, missing_ok=pairs.keys())
        # proxy -> indicator
        self.pairs = dict(pairs)

    def marginal(self, variables):
        d = super().marginal(variables)
        return ObservedLaw(d.variables, d.cards, d.p,
                           {k: v for k, v in self.pairs.items() if k in d.variables})

    def consistency_violations(self, atol: float = 0.0) -> list[str]:
        """Configurations breaking missing-data consistency that carry mass."""
        out = []
        for proxy, ind in sorted(self.pairs.items()):
            if ind not in self._axis:
                continue
            arr = self.marginal_array((proxy, ind))
            if arr[:-1, 0].sum() > atol:
                out.append(f"P({proxy} observed, {ind}=0) = {arr[:-1, 0].sum():.3g}")
            if arr[-1, 1] > atol:
                out.append(f"P({proxy}={MISSING_TEXT}, {ind}=1) = {arr[-1, 1]:.3g}")
        return out

    def to_json(self) -> dict:
        return {"observed": {
            "variables": [{"name": v, "cardinality": c - (v in self.pairs),
                           "indicator": self.pairs.get(v)}
                          for v, c in zip(self.variables, self.cards)],
            "probabilities": {k: p for k, p in self.to_dict().items() if p != 0.0},
        }}

    @classmethod
    def from_json(cls, data: dict) -> "ObservedLaw":
        try:
            block = data["observed"]
            variables = [v["name"] for v in block["variables"]]
            pairs = {v["name"]: v["indicator"] for v in block["variables"] if v.get("indicator")}
            cards = [v["cardinality"] + (v["name"] in pairs) for v in block["variables"]]
            probs = block["probabilities"]
        except (KeyError, TypeError) as err:
            raise LawFormatError(f"observed law JSON: missing field {err}") from None
        p = np.zeros(cards)
        for key, value in probs.items():
            cfg = parse_config(key)
            if set(cfg) != set(variables):
                raise LawFormatError(f"observed law JSON: configuration {key!r} does not name every variable")
            p[tuple(cfg[v] for v in variables)] = float(value)
        return cls(variables, cards, p, pairs)


class TargetLaw(Distribution):
    """Law of the counterfactuals (optionally with fully observed vertices)."""


class _Layout:
    """Enumeration of every configuration of the non-proxy vertices.

    Rows of ``states`` are configurations; proxy values are derived from
    missing-data consistency, so proxies never need their own axis here.
    """

    def __init__(self, graph: MDag, cap: int = ENUMERATION_CAP):
        self.graph = graph
        order = graph.topological_order()
        self.base = [v for v in order if graph.kind(v) is not VertexKind.PROXY]
        self.base_cards = [graph.cardinality(v) for v in self.base]
        size = int(np.prod(self.base_cards, dtype=object)) if self.base else 1
        if size > cap:
            raise EnumerationCapError(f"{size} configurations exceed the enumeration cap {cap}")
        self.size = size
        col = {v: i for i, v in enumerate(self.base)}
        self.col = col
        self.states = np.indices(self.base_cards).reshape(len(self.base), -1).T \
            if self.base else np.zeros((1, 0), dtype=int)
        # proxy values: partner state if the indicator is 1, else the missing slot
        self.proxy_values = {}
        for p in graph.pairs:
            if graph.kind(p.proxy) is not VertexKind.PROXY:
                continue
            cf = self.states[:, col[p.counterfactual]]
            r = self.states[:, col[p.indicator]]
            self.proxy_values[p.proxy] = np.where(r == 1, cf, graph.cardinality(p.proxy))

    def value(self, v: str) -> np.ndarray:
        if v in self.proxy_values:
            return self.proxy_values[v]
        return self.states[:, self.col[v]]

    def card(self, v: str) -> int:
        """Axis length of ``v``: proxies carry one extra (missing) slot."""
        c = self.graph.cardinality(v)
        return c + 1 if v in self.proxy_values else c

    @cached_property
    def rows(self) -> dict[str, np.ndarray]:
        """Flat parent-configuration index of each vertex's CPT, per configuration."""
        out = {}
        for v in self.base:
            pa = self.graph.parents(v)
            if not pa:
                out[v] = np.zeros(self.size, dtype=np.int64)
            else:
                out[v] = np.ravel_multi_index([self.value(u) for u in pa],
                                              [self.card(u) for u in pa])
        return out

    def cell_index(self, variables: Iterable[str]) -> tuple[np.ndarray, tuple[int, ...]]:
        variables = list(variables)
        shape = tuple(self.card(v) for v in variables)
        if not variables:
            return np.zeros(self.size, dtype=np.int64), ()
        return np.ravel_multi_index([self.value(v) for v in variables], shape), shape


_LAYOUTS: dict = {}


def layout(graph: MDag) -> _Layout:
    key = id(graph)
    hit = _LAYOUTS.get(key)
    if hit is None or hit.graph is not graph:
        hit = _Layout(graph)
        if len(_LAYOUTS) > 256:
            _LAYOUTS.clear()
        _LAYOUTS[key] = hit
    return hit


@dataclass(frozen=True, eq=False)
class DiscreteLaw:
    """Conditional probability tables Markov to ``graph``.

    ``tables[v]`` has one axis per parent (sorted by name, proxies with the
    missing slot last) followed by the axis of ``v`` itself.
    """

    graph: MDag
    tables: Mapping[str, np.ndarray]

    def __post_init__(self):
        for v, t in self.tables.items():
            t.setflags(write=False)

    def table(self, v: str) -> np.ndarray:
        return self.tables[v]

    def check(self, atol: float = 1e-12) -> None:
        lay = layout(self.graph)
        for v in self.graph.vertices:
            t = self.tables[v]
            want = tuple(lay.card(u) for u in self.graph.parents(v)) + (lay.card(v),)
            if t.shape != want:
                raise ValueError(f"table of {v} has shape {t.shape}, expected {want}")
            if (t < 0).any() or not np.allclose(t.sum(axis=-1), 1.0, atol=atol, rtol=0):
                raise ValueError(f"table of {v} is not a conditional distribution")

    def to_json(self) -> dict:
        """Law JSON; proxy tables are implied by consistency and omitted."""
        lay = layout(self.graph)
        tables = {}
        for v in self.graph.vertices:
            if self.graph.kind(v) is VertexKind.PROXY:
                continue
            pa = self.graph.parents(v)
            t = self.tables[v]
            rows = {}
            for idx in np.ndindex(*t.shape[:-1]):
                cfg = {u: (MISSING if (self.graph.kind(u) is VertexKind.PROXY
                                       and i == lay.card(u) - 1) else i)
                       for u, i in zip(pa, idx)}
                rows[format_config(cfg)] = [float(x) for x in t[idx]]
            tables[v] = rows
        return {"graph": self.graph.to_json(), "tables": tables}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, data: dict, graph: MDag | None = None) -> "DiscreteLaw":
        try:
            graph = graph or MDag.from_json(data["graph"])
            raw = data["tables"]
        except KeyError as err:
            raise LawFormatError(f"law JSON: missing field {err}") from None
        lay = layout(graph)
        tables = {}
        for v in graph.vertices:
            if graph.kind(v) is VertexKind.PROXY:
                continue
            if v not in raw:
                raise LawFormatError(f"law JSON: no table for {v!r}")
            pa = graph.parents(v)
            shape = tuple(lay.card(u) for u in pa) + (lay.card(v),)
            t = np.full(shape, np.nan)
            for key, row in raw[v].items():
                cfg = parse_config(key)
                if set(cfg) != set(pa):
                    raise LawFormatError(f"law JSON: table {v!r} row {key!r} does not match parents {pa}")
                if len(row) != shape[-1]:
                    raise LawFormatError(f"law JSON: table {v!r} row {key!r} has {len(row)} entries, expected {shape[-1]}")
                t[tuple(cfg[u] for u in pa)] = row
            # rows for structurally impossible parent states may be omitted
            if np.isnan(t).any():
                t = np.where(np.isnan(t), 1.0 / shape[-1], t)
            tables[v] = t
        tables.update(_proxy_tables(graph))
        law = cls(graph, tables)
        law.check(atol=1e-9)
        return law


def _proxy_tables(graph: MDag) -> dict[str, np.ndarray]:
    out = {}
    lay = layout(graph)
    for p in graph.pairs:
        if graph.kind(p.proxy) is not VertexKind.PROXY:
            continue
        pa = graph.parents(p.proxy)
        k = graph.cardinality(p.proxy)
        shape = tuple(lay.card(u) for u in pa) + (k + 1,)
        t = np.zeros(shape)
        for idx in np.ndindex(*shape[:-1]):
            cfg = dict(zip(pa, idx))
            if cfg.get(p.indicator) == 1:
                t[idx + (cfg[p.counterfactual],)] = 1.0
            else:
                t[idx + (k,)] = 1.0
        out[p.proxy] = t
    return out


def random_law(graph: MDag, seed: int, positivity_floor: float = 1e-3,
               cardinality: Mapping[str, int] | None = None) -> DiscreteLaw:
    """Draw every non-proxy CPT row uniformly from the simplex.

    Rows come from normalized i.i.d. exponentials generated by a Philox
    (counter-based) stream keyed by ``seed``; each row is then mapped to
    ``floor + (1 - k*floor) * row`` so every entry is at least the floor.
    """
    if cardinality:
        graph = MDag({v: graph.kind(v) for v in graph.vertices}, graph.edges,
                     graph.pairs, {**{v: graph.cardinality(v) for v in graph.vertices},
                                   **cardinality}, graph.name)
    bad = [v for v in validate(graph) if v.rule in ("acyclicity", "pair-kind", "pair-missing")]
    if bad:
        raise ValueError(f"graph is not a valid m-DAG: {bad[0]}")
    lay = layout(graph)
    rng = np.random.Generator(np.random.Philox(key=seed))
    tables = {}
    for v in lay.base:
        pa = graph.parents(v)
        k = graph.cardinality(v)
        if k * positivity_floor >= 1:
            raise ValueError(f"floor {positivity_floor} too large for {k} states")
        shape = tuple(lay.card(u) for u in pa) + (k,)
        draws = rng.standard_exponential(shape)
        rows = draws / draws.sum(axis=-1, keepdims=True)
        tables[v] = positivity_floor + (1 - k * positivity_floor) * rows
    tables.update(_proxy_tables(graph))
    return DiscreteLaw(graph, tables)


def law_from_tables(graph: MDag, tables: Mapping[str, Iterable]) -> DiscreteLaw:
    """Build a law from non-proxy tables given as nested lists or arrays."""
    full = {v: np.array(t, dtype=float) for v, t in tables.items()}
    full.update(_proxy_tables(graph))
    law = DiscreteLaw(graph, full)
    law.check()
    return law


def joint_array(law: DiscreteLaw) -> np.ndarray:
    """Probability of every non-proxy configuration, in layout order."""
    lay = layout(law.graph)
    p = np.ones(lay.size)
    for v in lay.base:
        t = law.tables[v].reshape(-1, law.tables[v].shape[-1])
        p *= t[lay.rows[v], lay.value(v)]
    return p


def joint(law: DiscreteLaw) -> Distribution:
    """Exact product-of-tables expansion over the non-proxy vertices."""
    lay = layout(law.graph)
    return Distribution(lay.base, lay.base_cards, joint_array(law))


def _project(law: DiscreteLaw, variables, cls, **kw):
    lay = layout(law.graph)
    idx, shape = lay.cell_index(variables)
    p = np.bincount(idx, weights=joint_array(law), minlength=int(np.prod(shape, dtype=int)))
    return cls(variables, shape, p, **kw)


def observed_variables(graph: MDag) -> list[str]:
    return sorted(graph.proxies + graph.indicators + graph.observed)


def observed_law(law: DiscreteLaw) -> ObservedLaw:
    """Marginal over proxies, indicators and observed vertices."""
    g = law.graph
    pairs = {p.proxy: p.indicator for p in g.pairs if g.kind(p.proxy) is VertexKind.PROXY}
    return _project(law, observed_variables(g), ObservedLaw, pairs=pairs)


def target_law(law: DiscreteLaw, include_observed: bool = False) -> TargetLaw:
    """Marginal over the counterfactuals (and observed vertices on request)."""
    g = law.graph
    variables = g.counterfactuals + (g.observed if include_observed else [])
    return _project(law, sorted(variables), TargetLaw)


def condition(obs: Distribution, event: Mapping[str, int]) -> Distribution:
    """Renormalize ``obs`` on a partial configuration."""
    mask = np.ones(obs.cards, dtype=bool)
    for v, value in event.items():
        ax = obs.variables.index(v)
        keep = np.zeros(obs.cards[ax], dtype=bool)
        keep[value] = True
        shape = [1] * len(obs.cards)
        shape[ax] = obs.cards[ax]
        mask &= keep.reshape(shape)
    mass = float(obs.p[mask].sum())
    if mass <= 0:
        raise PositivityError(event)
    p = np.where(mask, obs.p, 0.0) / mass
    if isinstance(obs, ObservedLaw):
        return ObservedLaw(obs.variables, obs.cards, p, obs.pairs)
    return type(obs)(obs.variables, obs.cards, p, obs.missing_ok)


def load_law(path) -> DiscreteLaw:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise LawFormatError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None
    return DiscreteLaw.from_json(data)
