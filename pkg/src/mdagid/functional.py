"""Symbolic functionals of the observed law and their exact evaluation.

A functional is a small expression tree whose leaves are probability
terms ``p(event | given)`` of the observed law.  Variables in terms are
observed-law names (proxies, indicators, fully observed vertices); a term
may also pin some of them to constants, as in ``p(L1 | R_L1=1)``.
Constructors sort their arguments, so structurally equal trees print
identically.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Mapping

from .law import MISSING, Distribution, PositivityError, format_config


class Expr:
    def free_variables(self) -> frozenset:
        raise NotImplementedError

    def __str__(self):
        return self.ascii()

    def __repr__(self):
        return f"<{type(self).__name__} {self.ascii()}>"


def _pairs(d) -> tuple:
    return tuple(sorted(dict(d).items()))


@dataclass(frozen=True, repr=False)
class Term(Expr):
    event: tuple = ()
    event_fixed: tuple = ()
    given: tuple = ()
    given_fixed: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "event", tuple(sorted(self.event)))
        object.__setattr__(self, "given", tuple(sorted(self.given)))
        object.__setattr__(self, "event_fixed", _pairs(self.event_fixed))
        object.__setattr__(self, "given_fixed", _pairs(self.given_fixed))

    def free_variables(self):
        return frozenset(self.event) | frozenset(self.given)

    def ascii(self):
        left = list(self.event) + [f"{k}={v}" for k, v in self.event_fixed]
        right = list(self.given) + [f"{k}={v}" for k, v in self.given_fixed]
        inner = ", ".join(left)
        if right:
            inner += " | " + ", ".join(right)
        return f"p({inner})"

    def latex(self):
        left = [latex_name(v) for v in self.event] + \
               [f"{latex_name(k)}={v}" for k, v in self.event_fixed]
        right = [latex_name(v) for v in self.given] + \
                [f"{latex_name(k)}={v}" for k, v in self.given_fixed]
        inner = ", ".join(left)
        if right:
            inner += r" \mid " + ", ".join(right)
        return f"p({inner})"


@dataclass(frozen=True, repr=False)
class Constant(Expr):
    value: float

    def free_variables(self):
        return frozenset()

    def ascii(self):
        return f"{self.value:g}"

    latex = ascii


@dataclass(frozen=True, repr=False)
class Product(Expr):
    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(sorted(self.factors, key=str)))

    def free_variables(self):
        return frozenset().union(*(f.free_variables() for f in self.factors))

    def ascii(self):
        return " * ".join(_wrap(f) for f in self.factors)

    def latex(self):
        return r" \cdot ".join(_wrap_latex(f) for f in self.factors)


@dataclass(frozen=True, repr=False)
class Quotient(Expr):
    num: Expr
    den: Expr

    def free_variables(self):
        return self.num.free_variables() | self.den.free_variables()

    def ascii(self):
        return f"{_wrap(self.num)} / {_wrap(self.den, strict=True)}"

    def latex(self):
        return rf"\frac{{{self.num.latex()}}}{{{self.den.latex()}}}"


@dataclass(frozen=True, repr=False)
class Sum(Expr):
    variables: tuple
    body: Expr

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(sorted(self.variables)))

    def free_variables(self):
        return self.body.free_variables() - frozenset(self.variables)

    def ascii(self):
        return f"sum_{{{', '.join(self.variables)}}} [{self.body.ascii()}]"

    def latex(self):
        names = ", ".join(latex_name(v) for v in self.variables)
        return rf"\sum_{{{names}}} \left[{self.body.latex()}\right]"


def _wrap(e: Expr, strict: bool = False) -> str:
    if isinstance(e, Quotient) or (strict and isinstance(e, Product)):
        return f"[{e.ascii()}]"
    return e.ascii()


def _wrap_latex(e: Expr) -> str:
    if isinstance(e, Sum):
        return rf"\left({e.latex()}\right)"
    return e.latex()


_SUB = re.compile(r"^([A-Za-z]+)(\d+)$")


def latex_name(name: str) -> str:
    m = re.match(r"^(.*)\((.*)\)$", name)
    if m:
        return f"{latex_name(m.group(1))}^{{({m.group(2)})}}"
    if "_" in name:
        base, rest = name.split("_", 1)
        return f"{base}_{{{rest}}}"
    m = _SUB.match(name)
    if m:
        return f"{m.group(1)}_{{{m.group(2)}}}"
    return name


def product(*factors: Expr) -> Expr:
    """Flattened product; unit constants vanish."""
    flat = []
    for f in factors:
        if isinstance(f, Product):
            flat.extend(f.factors)
        elif isinstance(f, Constant) and f.value == 1:
            continue
        else:
            flat.append(f)
    if not flat:
        return Constant(1.0)
    if len(flat) == 1:
        return flat[0]
    return Product(tuple(flat))


def quotient(num: Expr, den: Expr) -> Expr:
    if isinstance(den, Constant) and den.value == 1:
        return num
    return Quotient(num, den)


def summation(variables, body: Expr) -> Expr:
    variables = tuple(v for v in variables if v in body.free_variables())
    if not variables:
        return body
    if isinstance(body, Sum):
        return Sum(variables + body.variables, body.body)
    return Sum(variables, body)


@dataclass(frozen=True)
class Functional:
    """An expression plus the map from target variables to its free variables.

    ``bindings`` maps each target name (a counterfactual such as ``L1(1)``)
    to the observed-law variable that stands for it in ``expr``.
    """

    expr: Expr
    bindings: tuple = field(default=())
    target: str = ""

    def __post_init__(self):
        object.__setattr__(self, "bindings", _pairs(self.bindings))

    def ascii(self):
        return self.expr.ascii()

    def latex(self):
        return self.expr.latex()

    def __str__(self):
        return f"{self.target} = {self.expr.ascii()}" if self.target else self.expr.ascii()

    def environment(self, point: Mapping[str, int]) -> dict[str, int]:
        names = dict(self.bindings)
        env = {}
        for k, v in point.items():
            env[names.get(k, k)] = v
        missing = self.expr.free_variables() - set(env)
        if missing:
            raise ValueError(f"point leaves {sorted(missing)} unbound")
        return env


def evaluate(functional: Functional | Expr, obs: Distribution,
             point: Mapping[str, int] | None = None) -> float:
    """Evaluate exactly against an observed law.

    Sums range over each variable's states; a proxy takes the missing
    state exactly when its indicator is 0, and when the indicator is not
    bound the missing state is skipped.
    Raises :class:`PositivityError` naming the term whose conditioning
    event has probability zero.
    """
    point = point or {}
    if isinstance(functional, Functional):
        env = functional.environment(point)
        expr = functional.expr
    else:
        env, expr = dict(point), functional
    indicator = getattr(obs, "pairs", {})
    return _eval(expr, obs, env, indicator)


def _eval(e: Expr, obs, env, indicator) -> float:
    if isinstance(e, Term):
        try:
            event = {v: env[v] for v in e.event}
            given = {v: env[v] for v in e.given}
        except KeyError as err:
            raise ValueError(f"unbound variable {err} in {e.ascii()}") from None
        event.update(e.event_fixed)
        given.update(e.given_fixed)
        if not _consistent({**given, **event}, indicator):
            return 0.0
        joint = obs.prob({**given, **event})
        if not e.given and not e.given_fixed:
            return joint
        den = obs.prob(given)
        if den <= 0:
            raise PositivityError(given, f"conditioning event in {e.ascii()}")
        return joint / den
    if isinstance(e, Constant):
        return e.value
    if isinstance(e, Product):
        out = 1.0
        for f in e.factors:
            out *= _eval(f, obs, env, indicator)
            if out == 0.0:
                break
        return out
    if isinstance(e, Quotient):
        den = _eval(e.den, obs, env, indicator)
        if den <= 0:
            raise PositivityError({k: env[k] for k in sorted(e.den.free_variables())},
                                  f"denominator {e.den.ascii()}")
        return _eval(e.num, obs, env, indicator) / den
    if isinstance(e, Sum):
        total = 0.0
        # outer bindings constrain the summed variables only through the body
        free = e.body.free_variables()
        scope = {k: v for k, v in env.items() if k in free}
        for assignment in support(e.variables, obs, scope, indicator):
            total += _eval(e.body, obs, {**env, **assignment}, indicator)
        return total
    raise TypeError(type(e))


def _consistent(config, indicator) -> bool:
    for proxy, r in indicator.items():
        if proxy in config and r in config:
            if (config[proxy] == MISSING) != (config[r] == 0):
                return False
    return True


def support(variables, obs, env, indicator):
    """Structurally possible joint assignments of ``variables`` given ``env``."""
    states = [obs.states(v) for v in variables]
    for combo in itertools.product(*states):
        a = dict(zip(variables, combo))
        ok = True
        for v, value in a.items():
            r = indicator.get(v)
            if r is None:
                continue
            rv = a.get(r, env.get(r))
            if rv is None:
                ok = value != MISSING
            else:
                ok = (value == MISSING) == (rv == 0)
            if not ok:
                break
        if ok and _consistent({**env, **a}, indicator):
            yield a


__all__ = ["Expr", "Term", "Constant", "Product", "Quotient", "Sum", "Functional",
           "product", "quotient", "summation", "evaluate", "support", "latex_name",
           "format_config"]
