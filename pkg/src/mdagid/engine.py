"""Identification of the target law and of causal effects under missingness.

Strategies are tried in a fixed order, cheapest first:

1. ``mcar``       indicators jointly d-separated from the counterfactuals;
2. ``mar``        the same given a set of fully observed vertices;
3. ``sequential-fixing``  indicators fixed one at a time, each propensity
   read off the kernel left by the previous fixings;
4. ``parallel-fixing``    every propensity read off the observed law at
   once, each by setting the other relevant indicators to 1.

When all four fail the verdict is ``unknown``; it becomes
``not-identified`` only with a certificate (two laws that agree on the
observed law and disagree on the target law).  No completeness is claimed.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

from .functional import (Constant, Expr, Functional, Product, Quotient, Sum, Term,
                         evaluate, product, quotient, summation)
from .graph import MDag, VertexKind, d_separated, validate
from .law import ObservedLaw
from .model import Certificate, certify_non_id, is_testable
from .swig import build_swig

K = VertexKind

IDENTIFIED = "identified"
NOT_IDENTIFIED = "not-identified"
UNKNOWN = "unknown"


class InvalidGraphError(ValueError):
    pass


class IdentificationError(ValueError):
    """A causal-effect stage could not be completed."""


@dataclass
class IdReport:
    verdict: str
    strategy: str
    functional: Functional | None = None
    certificate: Certificate | None = None
    testable: bool | None = None
    npi: bool = False
    propensities: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_json(self, full_certificate: bool = True) -> dict:
        out = {
            "verdict": self.verdict,
            "strategy": self.strategy,
            "target": self.functional.target if self.functional else None,
            "functional_ascii": self.functional.ascii() if self.functional else None,
            "functional_latex": self.functional.latex() if self.functional else None,
            "testable": self.testable,
            "npi": self.npi,
        }
        if self.propensities:
            out["propensities"] = {k: str(v) for k, v in sorted(self.propensities.items())}
        if self.certificate is not None:
            out["certificate"] = (self.certificate.to_json() if full_certificate else
                                  {"observed_tv": self.certificate.observed_tv,
                                   "target_tv": self.certificate.target_tv})
        if self.details:
            out["details"] = self.details
        if self.notes:
            out["notes"] = list(self.notes)
        return out

    def dumps(self, **kw) -> str:
        return json.dumps(self.to_json(**kw), indent=2, sort_keys=True)


def _require_valid(graph: MDag):
    problems = validate(graph)
    if problems:
        raise InvalidGraphError("; ".join(str(p) for p in problems))


def screen_self_censoring(graph: MDag) -> list[str]:
    """Indicators with an edge from their own counterfactual."""
    return [p.indicator for p in graph.pairs
            if graph.has_edge(p.counterfactual, p.indicator)]


def _target_functional(graph: MDag, expr: Expr) -> Functional:
    cfs = graph.counterfactuals
    return Functional(expr, {c: graph.proxy_of(c) for c in cfs},
                      f"p({', '.join(cfs)})")


def _all_observed_term(graph: MDag, fixed: dict) -> Term:
    """Joint term over every observed-law variable, indicators in ``fixed`` pinned."""
    variables = [v for v in graph.proxies + graph.observed + graph.indicators
                 if v not in fixed]
    return Term(tuple(variables), fixed)


def marginalize(expr: Expr, variables, graph: MDag) -> Expr:
    """Sum ``variables`` out of a kernel of the form ``joint-term / propensities``.

    Variables that the denominator does not mention are folded into the
    joint term; the rest are summed explicitly, together with their
    indicators when both are being summed out.
    """
    variables = set(variables) & expr.free_variables()
    if not variables:
        return expr
    if isinstance(expr, Term) and not expr.given and not expr.given_fixed:
        return Term(tuple(v for v in expr.event if v not in variables), expr.event_fixed)
    if isinstance(expr, Quotient) and isinstance(expr.num, Term) and not expr.num.given \
            and not expr.num.given_fixed:
        inner = set(variables) & expr.den.free_variables()
        for v in list(inner):
            r = graph.indicator_of(v) if graph.kind(v) is K.PROXY else None
            if r is not None and r in variables:
                inner.add(r)
        outer = variables - inner
        num = Term(tuple(v for v in expr.num.event if v not in outer), expr.num.event_fixed)
        return summation(tuple(sorted(inner)), quotient(num, expr.den))
    return summation(tuple(sorted(variables)), expr)


def substitute(expr: Expr, values: dict) -> Expr:
    """Pin free variables to constants inside every term."""
    if not values:
        return expr
    if isinstance(expr, Term):
        ev = {v: values[v] for v in expr.event if v in values}
        gv = {v: values[v] for v in expr.given if v in values}
        return Term(tuple(v for v in expr.event if v not in ev), {**dict(expr.event_fixed), **ev},
                    tuple(v for v in expr.given if v not in gv), {**dict(expr.given_fixed), **gv})
    if isinstance(expr, Product):
        return product(*(substitute(f, values) for f in expr.factors))
    if isinstance(expr, Quotient):
        return quotient(substitute(expr.num, values), substitute(expr.den, values))
    if isinstance(expr, Sum):
        inner = {k: v for k, v in values.items() if k not in expr.variables}
        return summation(expr.variables, substitute(expr.body, inner))
    return expr


# -- strategy 1 & 2: ignorability -------------------------------------------

def _mcar(graph: MDag):
    R, L1 = graph.indicators, graph.counterfactuals
    if not d_separated(graph, R, L1, ()):
        return None
    expr = Term(tuple(graph.proxy_of(c) for c in L1), (), (), {r: 1 for r in R})
    return expr, {}


def _mar_sets(graph: MDag):
    obs = graph.observed
    for size in range(1, len(obs) + 1):
        for Z in itertools.combinations(obs, size):
            yield list(Z)


def _mar(graph: MDag):
    R, L1 = graph.indicators, graph.counterfactuals
    for Z in _mar_sets(graph):
        if d_separated(graph, R, L1, Z):
            proxies = tuple(graph.proxy_of(c) for c in L1)
            expr = summation(Z, product(Term(tuple(Z)),
                                        Term(proxies, (), tuple(Z), {r: 1 for r in R})))
            return expr, {"adjustment": Z}
    return None


def _mar_joint(graph: MDag):
    """``p(l(1), x)`` for every observed ``x`` when R is ignorable given all of them."""
    R, L1, X = graph.indicators, graph.counterfactuals, graph.observed
    if not d_separated(graph, R, L1, X):
        return None
    ones = {r: 1 for r in R}
    return quotient(_all_observed_term(graph, ones), Term((), ones, tuple(X)))


# -- strategies 3 & 4: fixing -------------------------------------------------

def _fixing_obstacle(graph: MDag) -> str | None:
    """Why the propensity-product form of the target law does not apply."""
    for r in graph.indicators:
        for u in graph.parents(r):
            if graph.kind(u) is K.UNOBSERVED:
                return f"{r} has unobserved parent {u}"
    downstream = graph.descendants(graph.indicators)
    for v in graph.observed + graph.unobserved:
        if v in downstream:
            return f"{v} is downstream of a missingness indicator"
    return None


def _sequential(graph: MDag):
    """Fix indicators one at a time, smallest name first among those fixable.

    After fixing the set F the kernel is ``p(v, R_F=1) / prod_F pi``, a law
    over the observed vertices, all proxies and the unfixed indicators,
    where proxies of F stand for their counterfactuals.  An indicator is
    fixable when all its parents are available in that kernel.
    """
    fixed: list[str] = []
    pis: dict[str, Expr] = {}
    order_log = []
    remaining = list(graph.indicators)
    while remaining:
        ones = {r: 1 for r in fixed}
        kernel = substitute(quotient(_all_observed_term(graph, ones),
                                     product(*(pis[r] for r in fixed))), ones)
        available = set(graph.observed) | set(graph.proxies) | (set(remaining))
        progress = False
        for r in remaining:
            cond = set()
            ok = True
            for u in graph.parents(r):
                kind = graph.kind(u)
                if kind is K.INDICATOR:
                    if u not in fixed:
                        cond.add(u)
                elif kind is K.COUNTERFACTUAL:
                    if graph.indicator_of(u) in fixed:
                        cond.add(graph.proxy_of(u))
                    else:
                        ok = False
                elif kind in (K.PROXY, K.OBSERVED):
                    cond.add(u)
                else:
                    ok = False
            if not ok:
                continue
            rest = available - cond - {r}
            num = marginalize(substitute(kernel, {r: 1}), rest, graph)
            den = marginalize(kernel, rest | {r}, graph)
            pis[r] = quotient(num, den)
            fixed.append(r)
            remaining.remove(r)
            order_log.append(r)
            progress = True
            break
        if not progress:
            return None
    ones = {r: 1 for r in fixed}
    pis = {r: substitute(pi, ones) for r, pi in pis.items()}
    joint = quotient(_all_observed_term(graph, ones), product(*(pis[r] for r in fixed)))
    return joint, pis, {"order": order_log}


def _parallel_propensity(graph: MDag, r: str):
    """``p(r=1 | pa(r))`` at all-ones indicators, as one observed-law term.

    Parents that are counterfactuals or proxies are read through their
    proxies with their own indicators set to 1; further indicators may be
    set to 1 as long as the d-separation check shows they are irrelevant.
    """
    pa = set(graph.parents(r))
    own = graph.counterfactual_of(r)
    variables, ones, cover = set(), set(), set(pa)
    for u in pa:
        kind = graph.kind(u)
        if kind is K.UNOBSERVED or u == own:
            return None
        if kind is K.INDICATOR:
            ones.add(u)
        elif kind is K.COUNTERFACTUAL:
            variables.add(graph.proxy_of(u))
            ones.add(graph.indicator_of(u))
        elif kind is K.PROXY:
            if graph.indicator_of(u) == r:
                return None
            variables.add(u)
            ones.add(graph.indicator_of(u))
            cover.add(graph.counterfactual_of(u))
        else:
            variables.add(u)
    if r in ones:
        return None
    others = [x for x in graph.indicators if x != r and x not in ones]
    for size in range(len(others) + 1):
        for extra in itertools.combinations(others, size):
            S = ones | set(extra)
            extra_cond = (cover | S) - pa
            if not extra_cond or d_separated(graph, {r}, extra_cond, pa):
                return Term((), {r: 1}, tuple(sorted(variables)), {s: 1 for s in S})
    return None


def _parallel(graph: MDag):
    pis = {}
    for r in graph.indicators:
        term = _parallel_propensity(graph, r)
        if term is None:
            return None
        pis[r] = term
    ones = {r: 1 for r in graph.indicators}
    joint = quotient(_all_observed_term(graph, ones), product(*pis.values()))
    return joint, pis, {}


def identify_joint(graph: MDag):
    """Identify ``p(l(1), x)`` over counterfactuals and observed vertices.

    Returns ``(expr, strategy, propensities, details)`` or None.
    """
    mar = _mar_joint(graph)
    if mar is not None:
        return mar, "mar", {}, {}
    if _fixing_obstacle(graph):
        return None
    for name, fn in (("sequential-fixing", _sequential), ("parallel-fixing", _parallel)):
        hit = fn(graph)
        if hit is not None:
            joint, pis, details = hit
            return joint, name, pis, details
    return None


def identify_target_law(graph: MDag, certify: bool = True, budget: int = 20,
                        seed: int = 0) -> IdReport:
    """Decide whether ``p(l(1))`` is identified and build its functional."""
    _require_valid(graph)
    testable = is_testable(graph) if graph.counterfactuals else False

    def done(verdict, strategy, expr=None, pis=None, details=None, notes=()):
        fn = _target_functional(graph, expr) if expr is not None else None
        return IdReport(verdict, strategy, fn, None, testable,
                        npi=(verdict == IDENTIFIED and not testable),
                        propensities=pis or {}, details=details or {}, notes=list(notes))

    censored = screen_self_censoring(graph)
    if censored:
        report = done(UNKNOWN, "self-censoring-screen",
                      notes=[f"self-censoring at {', '.join(censored)}"])
        return _escalate(graph, report, budget, seed) if certify else report

    if not graph.indicators:
        return done(IDENTIFIED, "no-missingness", Constant(1.0))

    hit = _mcar(graph)
    if hit is not None:
        return done(IDENTIFIED, "mcar", hit[0], details=hit[1])
    hit = _mar(graph)
    if hit is not None:
        return done(IDENTIFIED, "mar", hit[0], details=hit[1])

    obstacle = _fixing_obstacle(graph)
    if obstacle is None:
        for name, fn in (("sequential-fixing", _sequential), ("parallel-fixing", _parallel)):
            hit = fn(graph)
            if hit is not None:
                joint, pis, details = hit
                expr = marginalize(joint, graph.observed, graph)
                return done(IDENTIFIED, name, expr, pis, details)
        notes = ["no strategy applies"]
    else:
        notes = [f"fixing strategies skipped: {obstacle}"]
    report = done(UNKNOWN, "none", notes=notes)
    return _escalate(graph, report, budget, seed) if certify else report


def _escalate(graph, report: IdReport, budget, seed) -> IdReport:
    censored = [graph.counterfactual_of(r) for r in screen_self_censoring(graph)]
    cert = certify_non_id(graph, budget=budget, seed=seed, enlarge=censored)
    if cert is not None:
        report.verdict = NOT_IDENTIFIED
        report.certificate = cert
        report.npi = False
        report.notes.append("certificate: " + cert.summary())
    else:
        report.notes.append(f"no certificate within {budget} trials")
    return report


# -- SWIG-style sequential argument ------------------------------------------

@dataclass
class Residual:
    term: str
    vertex: str
    reason: str


@dataclass
class Transcript:
    marginal: str
    steps: list
    residuals: list
    success: bool
    adjustment: list
    functional: Functional | None = None

    def render(self) -> str:
        lines = list(self.steps)
        for r in self.residuals:
            lines.append(f"  unresolved: {r.vertex} in {r.term}: {r.reason}")
        lines.append("identified" if self.success else "not identified by this argument")
        return "\n".join(lines)


def sequential_swig_attempt(graph: MDag, marginal: str) -> Transcript:
    """Derive ``p(marginal)`` the way one derives the adjustment formula.

    The SWIG with every indicator split supplies a conditional-ignorability
    statement ``marginal ⫫ R | Z``; consistency then swaps the
    counterfactual for its proxy.  Any term that still mentions a
    counterfactual or unobserved vertex outside an ``R = 1`` substitution
    for that vertex is flagged, and the argument fails.
    """
    if marginal not in graph:
        raise KeyError(marginal)
    kind = graph.kind(marginal)
    if kind is not K.COUNTERFACTUAL:
        expr = Term((marginal,))
        return Transcript(marginal, [f"p({marginal}) = {expr}"], [], True, [],
                          Functional(expr, {}, f"p({marginal})"))

    r = graph.indicator_of(marginal)
    proxy = graph.proxy_of(marginal)
    swig = build_swig(graph)
    # the random node standing for the marginal under r=1 is the relabelled proxy
    target_node = proxy
    fixed = set(swig.fixed_nodes)
    nondesc = [v for v in swig.random_nodes
               if v not in swig.descendants(r) and v not in (target_node, r, marginal)]

    def ignorable(Z):
        cond = set(Z) | fixed
        return d_separated(swig, {target_node}, {r}, cond)

    Z = set()
    for u in graph.parents(r):
        Z.add(u)
        if graph.kind(u) is K.COUNTERFACTUAL:
            Z.add(graph.indicator_of(u))
    Z &= set(swig.random_nodes)
    if not ignorable(Z):
        Z = None
        for size in range(len(nondesc) + 1):
            for cand in itertools.combinations(sorted(nondesc), size):
                if ignorable(cand):
                    Z = set(cand)
                    break
            if Z is not None:
                break
    if Z is None:
        return Transcript(marginal, [f"no set Z in the SWIG gives {marginal} ⫫ {r} | Z"],
                          [Residual(f"p({marginal})", marginal, "no ignorability statement")],
                          False, [])

    zs = sorted(Z)
    zl = ", ".join(zs)
    head = f"sum_{{{zl}}} " if zs else ""
    pz = [f"p({zl})"] if zs else []
    given = ", ".join(zs + [f"{r}=1"])

    def line(*terms):
        return "  = " + head + " ".join(pz + list(terms))

    ignorability = f"{marginal} ⫫ {r}" + (f" | {zl}" if zs else "") + " in the SWIG"
    steps = [
        f"p({marginal}) = {head}p({', '.join(zs + [marginal])})",
        line(f"p({marginal}" + (f" | {zl})" if zs else ")")),
        line(f"p({marginal} | {given})") + f"    [{ignorability}]",
        line(f"p({proxy} | {given})") + "    [consistency]",
    ]
    final_terms = pz + [f"p({proxy} | {given})"]
    residuals = []
    for v in zs:
        k = graph.kind(v)
        if k in (K.COUNTERFACTUAL, K.UNOBSERVED) or (k is K.PROXY):
            own = graph.indicator_of(v) if k is not K.UNOBSERVED else None
            if k is K.UNOBSERVED:
                reason = f"{v} is never observed"
            elif own in Z:
                reason = f"{v} is observed only when {own}=1, but {own} is summed over"
            else:
                reason = f"{v} is observed only when {own}=1, which the formula cannot set"
            for t in final_terms:
                residuals.append(Residual(t, v, reason))
    if residuals:
        return Transcript(marginal, steps, residuals, False, zs)
    expr = summation(zs, product(Term(tuple(zs)),
                                 Term((proxy,), (), tuple(zs), {r: 1})))
    return Transcript(marginal, steps, [], True, zs,
                      Functional(expr, {marginal: proxy}, f"p({marginal})"))


# -- causal effects ------------------------------------------------------------

def identify_causal_effect(graph: MDag, treatment: str, outcome: str) -> IdReport:
    """``p(outcome(a))`` with missing treatment and outcome.

    Stage 1 identifies the joint law of counterfactuals and observed
    vertices; stage 2 applies the g-formula over the treatment with an
    adjustment set of fully observed vertices found by the back-door check
    on the counterfactual-level graph.
    """
    _require_valid(graph)
    for v in (treatment, outcome):
        if graph.kind(v) is not K.COUNTERFACTUAL:
            raise IdentificationError(f"{v} must be a counterfactual vertex")
    downstream = graph.descendants(graph.indicators)
    tangled = [v for v in graph.observed + graph.unobserved if v in downstream]
    if tangled:
        raise IdentificationError(f"{tangled[0]} is downstream of a missingness indicator")
    hit = identify_joint(graph)
    if hit is None:
        raise IdentificationError("stage 1 failed: the missingness propensities are not identified")
    joint, strategy, pis, details = hit

    full = graph.counterfactuals + graph.observed + graph.unobserved
    H = graph.induced(full)
    H_cut = H.without_edges([(treatment, c) for c in H.children(treatment)])
    desc = H.descendants(treatment)
    candidates = [x for x in graph.observed if x not in desc]
    Z = None
    for size in range(len(candidates) + 1):
        for cand in itertools.combinations(candidates, size):
            if d_separated(H_cut, {treatment}, {outcome}, cand):
                Z = list(cand)
                break
        if Z is not None:
            break
    if Z is None:
        raise IdentificationError("stage 2 failed: no adjustment set among observed vertices")

    a, y = graph.proxy_of(treatment), graph.proxy_of(outcome)
    T = set(graph.proxies) | set(graph.observed)
    q_z = marginalize(joint, T - set(Z), graph)
    q_yaz = marginalize(joint, T - set(Z) - {a, y}, graph)
    q_az = marginalize(joint, T - set(Z) - {a}, graph)
    expr = summation(Z, product(q_z, quotient(q_yaz, q_az)))
    fn = Functional(expr, {treatment: a, outcome: y},
                    f"p({outcome} under {treatment}=a)")
    return IdReport(IDENTIFIED, f"{strategy}+g-formula", fn, None, None, False, pis,
                    details={**details, "adjustment": Z, "stage1": strategy,
                             "treatment": treatment, "outcome": outcome})


def interventional_distribution(report: IdReport, obs: ObservedLaw, graph: MDag,
                                value: int) -> list[float]:
    """``p(outcome(a) = y)`` for each outcome state ``y``."""
    d = report.details
    t, o = d["treatment"], d["outcome"]
    return [evaluate(report.functional, obs, {t: value, o: y})
            for y in range(graph.cardinality(o))]


def average_causal_effect(report: IdReport, obs: ObservedLaw, graph: MDag,
                          values=(1, 0)) -> float:
    """``E[Y(a1)] - E[Y(a0)]`` with outcome states scored by their index."""
    a1, a0 = values
    p1 = interventional_distribution(report, obs, graph, a1)
    p0 = interventional_distribution(report, obs, graph, a0)
    return sum(y * (u - w) for y, (u, w) in enumerate(zip(p1, p0)))


def marginal_functional(report: IdReport, marginal: str) -> Functional:
    """Functional for one counterfactual's margin, by summing out the others."""
    fn = report.functional
    names = dict(fn.bindings)
    if marginal not in names:
        raise KeyError(marginal)
    others = [v for t, v in fn.bindings if t != marginal]
    return Functional(summation(others, fn.expr), {marginal: names[marginal]}, f"p({marginal})")
