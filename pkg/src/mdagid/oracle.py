"""Brute-force verification by direct enumeration.

Everything here is recomputed from the conditional probability tables
with plain Python loops over ``itertools.product``: proxies are filled in
by missing-data consistency, and marginals are accumulated in
dictionaries.  Nothing is borrowed from :mod:`mdagid.law` except the law
container itself (its tables) and the random law generator, so a bug in
the vectorized derivations there cannot hide itself here.
"""

from __future__ import annotations

import itertools
import json
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping
from xml.etree import ElementTree as ET

import numpy as np

from .functional import Functional, evaluate
from .graph import MDag, Pair, VertexKind, d_separated
from .law import (MISSING, DiscreteLaw, ObservedLaw, PositivityError, TargetLaw,
                  format_config, random_law)

K = VertexKind
CI_TOLERANCE = 1e-10


# -- enumeration -----------------------------------------------------------------

def _order(graph: MDag) -> list[str]:
    return graph.topological_order()


def enumerate_joint(law: DiscreteLaw) -> dict[tuple, float]:
    """Probability of every full configuration, proxies included.

    Keys are tuples of values in ``sorted(graph.vertices)`` order; a proxy
    whose indicator is 0 takes the value ``MISSING``.
    """
    g = law.graph
    names = sorted(g.vertices)
    free = [v for v in _order(g) if g.kind(v) is not K.PROXY]
    proxies = [v for v in names if g.kind(v) is K.PROXY]
    parents = {v: g.parents(v) for v in free}
    tables = {v: law.tables[v] for v in free}
    out: dict[tuple, float] = {}
    for combo in itertools.product(*(range(g.cardinality(v)) for v in free)):
        a = dict(zip(free, combo))
        for x in proxies:
            pair = g.pair_of(x)
            a[x] = a[pair.counterfactual] if a[pair.indicator] == 1 else MISSING
        p = 1.0
        for v in free:
            p *= float(tables[v][tuple(a[u] for u in parents[v]) + (a[v],)])
        key = tuple(a[v] for v in names)
        out[key] = out.get(key, 0.0) + p
    return out


def marginalize(joint: Mapping[tuple, float], names: list[str], keep: Iterable[str]) -> dict:
    keep = list(keep)
    pos = [names.index(v) for v in keep]
    out: dict[tuple, float] = {}
    for key, p in joint.items():
        k = tuple(key[i] for i in pos)
        out[k] = out.get(k, 0.0) + p
    return out


def observed_truth(law: DiscreteLaw) -> ObservedLaw:
    """The observed law by summation over counterfactual configurations."""
    g = law.graph
    names = sorted(g.vertices)
    keep = sorted(g.proxies + g.indicators + g.observed)
    pairs = {x: g.indicator_of(x) for x in g.proxies}
    cards = [g.cardinality(v) + (v in pairs) for v in keep]
    p = np.zeros(cards)
    for key, mass in marginalize(enumerate_joint(law), names, keep).items():
        p[key] += mass
    return ObservedLaw(keep, cards, p, pairs)


def target_truth(law: DiscreteLaw, include_observed: bool = False) -> TargetLaw:
    g = law.graph
    names = sorted(g.vertices)
    keep = sorted(g.counterfactuals + (g.observed if include_observed else []))
    p = np.zeros([g.cardinality(v) for v in keep])
    for key, mass in marginalize(enumerate_joint(law), names, keep).items():
        p[key] += mass
    return TargetLaw(keep, p.shape, p)


def ci_holds(law: DiscreteLaw, A: Iterable[str], B: Iterable[str], Z: Iterable[str] = (),
             tol: float = CI_TOLERANCE) -> bool:
    """Exact check of ``P(a,b|z) = P(a|z) P(b|z)`` wherever ``P(z) > 0``.

    Absent configurations count as probability zero.
    """
    A, B, Z = list(A), list(B), list(Z)
    g = law.graph
    names = sorted(g.vertices)
    joint = enumerate_joint(law)
    pabz = marginalize(joint, names, A + B + Z)
    paz = marginalize(joint, names, A + Z)
    pbz = marginalize(joint, names, B + Z)
    pz = marginalize(joint, names, Z)
    na, nb = len(A), len(B)
    a_states = {k[:na] for k in paz}
    b_states = {k[:nb] for k in pbz}
    for z, mz in pz.items():
        if mz <= 0:
            continue
        for a in a_states:
            for b in b_states:
                lhs = pabz.get(a + b + z, 0.0) / mz
                rhs = (paz.get(a + z, 0.0) / mz) * (pbz.get(b + z, 0.0) / mz)
                if abs(lhs - rhs) > tol:
                    return False
    return True


def intervene_truth(law: DiscreteLaw, treatment: str, value: int) -> TargetLaw:
    """Truncated factorization: drop the treatment's table, clamp it to ``value``.

    Returns the interventional law of the other counterfactuals.
    """
    g = law.graph
    if g.kind(treatment) is not K.COUNTERFACTUAL:
        raise ValueError(f"{treatment} is not a counterfactual vertex")
    free = [v for v in _order(g) if g.kind(v) is not K.PROXY]
    outcome = sorted(c for c in g.counterfactuals if c != treatment)
    parents = {v: g.parents(v) for v in free}
    ranges = [range(g.cardinality(v)) if v != treatment else [value] for v in free]
    p = np.zeros([g.cardinality(v) for v in outcome])
    for combo in itertools.product(*ranges):
        a = dict(zip(free, combo))
        for x in g.proxies:
            pair = g.pair_of(x)
            a[x] = a[pair.counterfactual] if a[pair.indicator] == 1 else MISSING
        mass = 1.0
        for v in free:
            if v != treatment:
                mass *= float(law.tables[v][tuple(a[u] for u in parents[v]) + (a[v],)])
        p[tuple(a[v] for v in outcome)] += mass
    return TargetLaw(outcome, p.shape, p)


def total_variation(d1, d2) -> float:
    return 0.5 * float(np.abs(np.asarray(d1.p) - d2.marginal_array(d1.variables)).sum())


def verify_certificate(cert) -> tuple[float, float]:
    """Observed and target TV distances of a certificate's two laws, recomputed."""
    obs = total_variation(observed_truth(cert.law_a), observed_truth(cert.law_b))
    tgt = total_variation(target_truth(cert.law_a), target_truth(cert.law_b))
    return obs, tgt


# -- randomized trials -------------------------------------------------------------

@dataclass(frozen=True)
class TrialConfig:
    graph_id: str
    seeds: tuple = tuple(range(100))
    floor: float = 1e-3
    tolerance: float = 1e-10
    cardinalities: tuple = ()

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not 0 < self.floor < 0.5:
            raise ValueError("floor must lie in (0, 0.5)")
        object.__setattr__(self, "seeds", tuple(self.seeds))
        object.__setattr__(self, "cardinalities", tuple(sorted(dict(self.cardinalities).items())))


@dataclass
class Trial:
    seed: int
    max_error: float
    verdict: str          # "pass" | "fail" | "error"
    message: str = ""
    worst_point: str = ""


@dataclass
class TrialReport:
    graph: str
    functional: str
    tolerance: float
    trials: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def max_error(self) -> float:
        return max((t.max_error for t in self.trials), default=0.0)

    @property
    def failing_seed(self):
        bad = [t for t in self.trials if t.verdict != "pass"]
        return bad[0].seed if bad else None

    @property
    def passed(self) -> bool:
        return bool(self.trials) and self.failing_seed is None

    def to_json(self) -> dict:
        return {
            "graph": self.graph, "functional": self.functional, "tolerance": self.tolerance,
            "max_error": self.max_error, "failing_seed": self.failing_seed,
            "verdict": "pass" if self.passed else "fail", "n_trials": len(self.trials),
            "trials": [{"graph": self.graph, "seed": t.seed, "max_error": t.max_error,
                        "verdict": t.verdict, **({"message": t.message} if t.message else {})}
                       for t in self.trials],
        }

    def summary(self) -> str:
        head = (f"{self.graph}: {len(self.trials)} trials, max error {self.max_error:.3e}, "
                f"{'PASS' if self.passed else 'FAIL'}")
        if not self.passed:
            t = next(t for t in self.trials if t.seed == self.failing_seed)
            head += f" (first failing seed {t.seed}: {t.message or t.worst_point})"
        return head


def threads() -> int:
    try:
        n = int(os.environ.get("MDAG_ID_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def _run(fn, seeds):
    n = threads()
    if n == 1:
        return [fn(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, seeds))   # map keeps seed order


def verify_functional(graph: MDag, functional: Functional, trials: TrialConfig) -> TrialReport:
    """Compare the functional to the true target law on seeded random laws."""
    g = graph.with_cardinality(dict(trials.cardinalities))
    target_vars = [t for t, _ in functional.bindings]

    def one(seed):
        law = random_law(g, seed, trials.floor)
        obs = observed_truth(law)
        truth = target_truth(law, include_observed=any(
            g.kind(v) is K.OBSERVED for v in target_vars)).marginal(target_vars)
        worst, where = 0.0, ""
        try:
            for cfg, p in truth.items():
                err = abs(evaluate(functional, obs, cfg) - p)
                if err > worst:
                    worst, where = err, format_config(cfg)
        except PositivityError as err:
            return Trial(seed, float("inf"), "error", f"positivity: {err}")
        return Trial(seed, worst, "pass" if worst <= trials.tolerance else "fail", "", where)

    t0 = time.perf_counter()
    results = _run(one, trials.seeds)
    return TrialReport(trials.graph_id, functional.ascii(), trials.tolerance, results,
                       time.perf_counter() - t0)


def verify_effect(graph: MDag, report, trials: TrialConfig) -> TrialReport:
    """Compare an identified ``p(outcome(a))`` functional to truncated factorization."""
    t, o = report.details["treatment"], report.details["outcome"]
    ka, ko = graph.cardinality(t), graph.cardinality(o)

    def one(seed):
        law = random_law(graph, seed, trials.floor)
        obs = observed_truth(law)
        worst, where = 0.0, ""
        try:
            for a in range(ka):
                truth = intervene_truth(law, t, a).marginal([o])
                for y in range(ko):
                    err = abs(evaluate(report.functional, obs, {t: a, o: y}) - truth.prob({o: y}))
                    if err > worst:
                        worst, where = err, f"{t}={a};{o}={y}"
        except PositivityError as err:
            return Trial(seed, float("inf"), "error", f"positivity: {err}")
        return Trial(seed, worst, "pass" if worst <= trials.tolerance else "fail", "", where)

    t0 = time.perf_counter()
    results = _run(one, trials.seeds)
    return TrialReport(trials.graph_id, report.functional.ascii(), trials.tolerance, results,
                       time.perf_counter() - t0)


# -- d-separation versus conditional independence ----------------------------------

@dataclass
class DsepCase:
    seed: int
    graph: MDag
    A: list
    B: list
    Z: list
    separated: bool
    independent: bool


def random_dag(rng: random.Random, max_vertices: int = 6, max_card: int = 3,
               density: float = 0.4) -> MDag:
    n = rng.randint(2, max_vertices)
    names = [f"V{i}" for i in range(n)]
    edges = [(names[i], names[j]) for i in range(n) for j in range(i + 1, n)
             if rng.random() < density]
    cards = {v: rng.randint(2, max_card) for v in names}
    return MDag.dag(names, edges, cards)


def random_mdag(rng: random.Random, max_missing: int = 3, max_observed: int = 1,
                density: float = 0.5, self_censoring: bool = False) -> MDag:
    """A valid m-DAG over ``L1..Lk`` (k ≤ max_missing) and fully observed ``X*``.

    Counterfactuals and observed vertices form a random DAG in a random
    order; each indicator draws parents from counterfactuals, observed
    vertices, earlier indicators and the proxies of earlier indicators.
    """
    k = rng.randint(1, max_missing)
    m = rng.randint(0, max_observed)
    cfs = [f"L{i}(1)" for i in range(1, k + 1)]
    xs = [f"X{i}" for i in range(1, m + 1)]
    level = cfs + xs
    rng.shuffle(level)
    kinds = {v: K.COUNTERFACTUAL for v in cfs}
    kinds.update({v: K.OBSERVED for v in xs})
    edges = [(level[i], level[j]) for i in range(len(level)) for j in range(i + 1, len(level))
             if rng.random() < density]
    pairs = []
    inds = [f"R_L{i}" for i in range(1, k + 1)]
    rng.shuffle(inds)
    for pos, r in enumerate(inds):
        i = r[3:]
        proxy, cf = f"L{i}", f"L{i}(1)"
        kinds[r] = K.INDICATOR
        kinds[proxy] = K.PROXY
        pairs.append((proxy, cf, r))
        edges += [(cf, proxy), (r, proxy)]
        pool = [c for c in cfs if c != cf or self_censoring] + xs + inds[:pos] + \
            [f"L{e[3:]}" for e in inds[:pos]]
        edges += [(u, r) for u in pool if rng.random() < density / 2]
    return MDag(kinds, edges, [Pair(*p) for p in pairs])


def random_query(rng: random.Random, vertices: list[str]):
    vs = list(vertices)
    rng.shuffle(vs)
    a = rng.randint(1, len(vs) - 1)
    A, rest = vs[:a], vs[a:]
    b = rng.randint(1, len(rest))
    B, rest = rest[:b], rest[b:]
    Z = [v for v in rest if rng.random() < 0.5]
    return sorted(A), sorted(B), sorted(Z)


def dsep_ci_suite(n: int = 1000, seed: int = 0, floor: float = 1e-3,
                  max_vertices: int = 6, max_card: int = 3):
    """Random (graph, law, query) triples; returns (violations, unfaithful, cases).

    A violation is a d-separation statement whose conditional independence
    fails; the reverse direction (CI without d-separation) is only counted.
    """
    rng = random.Random(seed)
    violations, unfaithful, cases = [], [], []
    for i in range(n):
        g = random_dag(rng, max_vertices, max_card)
        A, B, Z = random_query(rng, g.vertices)
        law = random_law(g, seed * 100003 + i, floor)
        sep = d_separated(g, A, B, Z)
        ind = ci_holds(law, A, B, Z)
        case = DsepCase(i, g, A, B, Z, sep, ind)
        cases.append(case)
        if sep and not ind:
            violations.append(case)
        elif ind and not sep:
            unfaithful.append(case)
    return violations, unfaithful, cases


# -- reports -------------------------------------------------------------------

def write_json_report(reports: list[TrialReport], path) -> None:
    with open(path, "w") as fh:
        json.dump([r.to_json() for r in reports], fh, indent=2, sort_keys=True)
        fh.write("\n")


def junit_xml(reports: list[TrialReport]) -> str:
    suites = ET.Element("testsuites")
    for r in reports:
        fails = sum(t.verdict == "fail" for t in r.trials)
        errors = sum(t.verdict == "error" for t in r.trials)
        suite = ET.SubElement(suites, "testsuite", name=r.graph, tests=str(len(r.trials)),
                              failures=str(fails), errors=str(errors),
                              time=f"{r.elapsed:.3f}")
        for t in r.trials:
            case = ET.SubElement(suite, "testcase", classname=f"oracle.{r.graph}",
                                 name=f"seed_{t.seed}")
            ET.SubElement(case, "properties").append(
                ET.Element("property", name="max_error", value=repr(t.max_error)))
            if t.verdict == "fail":
                ET.SubElement(case, "failure", message=f"max error {t.max_error:.3e} at {t.worst_point}")
            elif t.verdict == "error":
                ET.SubElement(case, "error", message=t.message)
    ET.indent(suites)
    return ET.tostring(suites, encoding="unicode") + "\n"


def write_junit_report(reports: list[TrialReport], path) -> None:
    with open(path, "w") as fh:
        fh.write(junit_xml(reports))


__all__ = ["enumerate_joint", "observed_truth", "target_truth", "ci_holds", "intervene_truth",
           "verify_certificate", "TrialConfig", "Trial", "TrialReport", "verify_functional",
           "verify_effect", "dsep_ci_suite", "random_dag", "random_mdag", "write_json_report",
           "write_junit_report", "junit_xml", "threads", "total_variation"]
