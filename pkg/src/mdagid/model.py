"""The parametric map from CPT entries to observed and target laws.

Used for three things that all need the same derivative: the dimension
count behind the ``testable`` flag, the search for non-identification
certificates along the observationally-flat directions of the model, and
least-squares fitting for the membership residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.optimize import least_squares

from .graph import MDag
from .law import (ConsistencyError, DiscreteLaw, ObservedLaw, _proxy_tables,
                  layout, observed_variables, random_law)


class ParametricModel:
    """Softmax-parametrized CPTs of every non-proxy vertex of ``graph``."""

    def __init__(self, graph: MDag):
        self.graph = graph
        lay = self.layout = layout(graph)
        self.blocks = []  # (vertex, offset, n_rows, k)
        idx = []
        offset = 0
        for v in lay.base:
            k = graph.cardinality(v)
            n_rows = int(np.prod([lay.card(u) for u in graph.parents(v)], dtype=int))
            self.blocks.append((v, offset, n_rows, k))
            idx.append(offset + lay.rows[v] * k + lay.value(v))
            offset += n_rows * k
        self.n_params = offset
        self.entry_index = np.stack(idx) if idx else np.zeros((0, lay.size), dtype=int)

        self.observed_vars = observed_variables(graph)
        cells, self.observed_shape = lay.cell_index(self.observed_vars)
        self.observed_cells, self.observed_code = np.unique(cells, return_inverse=True)
        tcells, self.target_shape = lay.cell_index(graph.counterfactuals)
        self.target_cells, self.target_code = np.unique(tcells, return_inverse=True)

    # -- parameter plumbing ------------------------------------------------

    def theta(self, z: np.ndarray) -> np.ndarray:
        out = np.empty_like(z)
        for _, off, n, k in self.blocks:
            block = z[off:off + n * k].reshape(n, k)
            block = np.exp(block - block.max(axis=1, keepdims=True))
            out[off:off + n * k] = (block / block.sum(axis=1, keepdims=True)).ravel()
        return out

    def logits_of(self, law: DiscreteLaw) -> np.ndarray:
        z = np.empty(self.n_params)
        for v, off, n, k in self.blocks:
            z[off:off + n * k] = np.log(law.tables[v]).ravel()
        return z

    def law(self, z: np.ndarray) -> DiscreteLaw:
        th = self.theta(z)
        lay = self.layout
        tables = {}
        for v, off, n, k in self.blocks:
            shape = tuple(lay.card(u) for u in self.graph.parents(v)) + (k,)
            tables[v] = th[off:off + n * k].reshape(shape).copy()
        tables.update(_proxy_tables(self.graph))
        return DiscreteLaw(self.graph, tables)

    # -- forward maps ------------------------------------------------------

    def joint(self, z):
        th = self.theta(z)
        return np.prod(th[self.entry_index], axis=0) if len(self.entry_index) else np.ones(1)

    def observed(self, z) -> np.ndarray:
        return np.bincount(self.observed_code, self.joint(z), len(self.observed_cells))

    def target(self, z) -> np.ndarray:
        return np.bincount(self.target_code, self.joint(z), len(self.target_cells))

    def observed_vector(self, obs: ObservedLaw) -> np.ndarray:
        """``obs`` restricted to the cells this model can reach, in model order."""
        arr = obs.marginal_array(self.observed_vars).ravel()
        return arr[self.observed_cells]

    def _jacobian(self, z, code, n_cells):
        th = self.theta(z)
        p = self.joint(z)
        jt = np.zeros((n_cells, self.n_params))
        for row in self.entry_index:
            np.add.at(jt, (code, row), p / th[row])
        jz = np.empty_like(jt)
        for _, off, n, k in self.blocks:
            for r in range(n):
                sl = slice(off + r * k, off + (r + 1) * k)
                w = jt[:, sl]
                t = th[sl]
                jz[:, sl] = t * (w - (w @ t)[:, None])
        return jz

    def observed_jacobian(self, z):
        return self._jacobian(z, self.observed_code, len(self.observed_cells))

    def target_jacobian(self, z):
        return self._jacobian(z, self.target_code, len(self.target_cells))

    def random_logits(self, seed: int, floor: float = 1e-2) -> np.ndarray:
        return self.logits_of(random_law(self.graph, seed, floor))


def model_dimension(graph: MDag, seeds=(101, 202)) -> tuple[int, int]:
    """Generic rank of the observed-law map and the saturated dimension."""
    m = ParametricModel(graph)
    rank = max(np.linalg.matrix_rank(m.observed_jacobian(m.random_logits(s))) for s in seeds)
    return int(rank), len(m.observed_cells) - 1


def is_testable(graph: MDag) -> bool:
    """True when the model's observed laws form a lower-dimensional set,
    i.e. the graph imposes equality constraints on the observed law."""
    rank, saturated = model_dimension(graph)
    return rank < saturated


@dataclass
class Certificate:
    law_a: DiscreteLaw
    law_b: DiscreteLaw
    observed_tv: float
    target_tv: float
    trial: int

    def to_json(self) -> dict:
        return {"observed_tv": self.observed_tv, "target_tv": self.target_tv,
                "trial": self.trial, "law_a": self.law_a.to_json(),
                "law_b": self.law_b.to_json()}

    def summary(self) -> str:
        return (f"two laws with observed-law TV {self.observed_tv:.2e} "
                f"and target-law TV {self.target_tv:.4f} (trial {self.trial})")


def _project(m: ParametricModel, z, goal, iters=60):
    """Newton steps back onto {z : observed(z) = goal} (minimum-norm updates)."""
    for _ in range(iters):
        r = m.observed(z) - goal
        if np.abs(r).max() < 1e-15:
            break
        dz = np.linalg.lstsq(m.observed_jacobian(z), -r, rcond=None)[0]
        z = z + dz
    return z


def certify_non_id(graph: MDag, budget: int = 20, seed: int = 0,
                   observed_tol: float = 1e-9, target_gap: float = 1e-3,
                   enlarge: Iterable[str] = (), max_cardinality: int = 6) -> Certificate | None:
    """Look for two laws with equal observed laws but different target laws.

    Each trial starts from a fresh random law, moves along the direction of
    the observed-law Jacobian's null space that changes the target law the
    most, and projects back onto the observed-law level set.

    If the graph's own state spaces admit no certificate, the counterfactuals
    in ``enlarge`` get more states, one at a time up to ``max_cardinality``:
    with binary variables some models are identified by counting alone,
    though not nonparametrically.  The certificate's laws carry the state
    spaces that were used.  Returns None if the budget runs out, which
    proves nothing.
    """
    if not graph.counterfactuals:
        return None
    cert = _certify(graph, budget, seed, observed_tol, target_gap)
    enlarge = sorted(enlarge)
    k = 2
    while cert is None and enlarge and k < max_cardinality:
        k += 1
        bigger = graph.with_cardinality({v: max(k, graph.cardinality(v)) for v in enlarge})
        cert = _certify(bigger, budget, seed, observed_tol, target_gap)
    return cert


def _certify(graph, budget, seed, observed_tol, target_gap):
    m = ParametricModel(graph)
    for trial in range(budget):
        z1 = m.random_logits(seed + trial, floor=0.05)
        goal = m.observed(z1)
        t1 = m.target(z1)
        J = m.observed_jacobian(z1)
        _, s, vt = np.linalg.svd(J)
        rank = int((s > 1e-9 * s.max()).sum()) if len(s) else 0
        null = vt[rank:]
        if not len(null):
            continue
        T = m.target_jacobian(z1) @ null.T
        u, ts, wt = np.linalg.svd(T)
        if ts[0] < 1e-8:
            continue
        d = null.T @ wt[0]
        for step in (1.0, 0.5, 2.0, 0.25, 4.0):
            z2 = _project(m, z1 + step * d, goal)
            obs_tv = 0.5 * np.abs(m.observed(z2) - goal).sum()
            tgt_tv = 0.5 * np.abs(m.target(z2) - t1).sum()
            if np.isfinite(obs_tv) and obs_tv <= observed_tol and tgt_tv >= target_gap:
                return Certificate(m.law(z1), m.law(z2), float(obs_tv), float(tgt_tv), trial)
    return None


@dataclass
class Membership:
    residual: float
    tolerance: float
    law: DiscreteLaw
    starts: int
    upper_bound: bool = True

    @property
    def consistent(self) -> bool:
        return self.residual <= self.tolerance

    def to_json(self) -> dict:
        return {"residual": self.residual, "tolerance": self.tolerance,
                "consistent": self.consistent, "upper_bound": self.upper_bound,
                "starts": self.starts}


def check_membership(graph: MDag, obs: ObservedLaw, tolerance: float = 1e-6,
                     starts: int = 6, seed: int = 0) -> Membership:
    """Total-variation distance from ``obs`` to the model's observed laws.

    Multi-start least squares over the softmax CPT parameters.  The
    residual is attained by an explicit member law, so it is an upper bound
    on the true distance.
    """
    problems = obs.consistency_violations(atol=1e-12)
    if problems:
        raise ConsistencyError("observed law breaks missing-data consistency: " + "; ".join(problems))
    m = ParametricModel(graph)
    want = set(m.observed_vars)
    if set(obs.variables) != want:
        raise ValueError(f"observed law is over {sorted(obs.variables)}, model expects {sorted(want)}")
    full = obs.marginal_array(m.observed_vars).ravel()
    off_support = float(full.sum() - full[m.observed_cells].sum())
    y = full[m.observed_cells]
    best = None
    for i in range(starts):
        z0 = m.random_logits(seed + i, floor=0.05)
        fit = least_squares(lambda z: m.observed(z) - y, z0, jac=m.observed_jacobian,
                            method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=500)
        tv = 0.5 * (np.abs(m.observed(fit.x) - y).sum() + abs(off_support))
        if best is None or tv < best[0]:
            best = (tv, fit.x)
        if best[0] <= tolerance * 1e-3:
            break
    return Membership(float(best[0]), tolerance, m.law(best[1]), i + 1)


def constraint_direction(graph: MDag, z: np.ndarray) -> np.ndarray:
    """A unit direction in observed-cell space orthogonal to the model's
    tangent space and to the all-ones vector.

    Moving a member's observed law along it violates an equality
    constraint of the model to first order.
    """
    m = ParametricModel(graph)
    J = m.observed_jacobian(z)
    basis = np.column_stack([np.ones(len(m.observed_cells)), J])
    u, s, _ = np.linalg.svd(basis, full_matrices=True)
    rank = int((s > 1e-9 * s.max()).sum())
    if rank >= len(m.observed_cells):
        raise ValueError("model is saturated: no equality constraints")
    d = u[:, rank]
    return d / np.abs(d).sum()


def plant_violation(law: DiscreteLaw, scale: float = 0.5) -> ObservedLaw:
    """The observed law of ``law`` pushed off the model along
    :func:`constraint_direction`, by ``scale`` times the largest step that
    keeps every cell non-negative.  Consistency is preserved because only
    reachable cells move."""
    graph = law.graph
    m = ParametricModel(graph)
    d = constraint_direction(graph, m.logits_of(law))
    y = m.observed(m.logits_of(law))
    neg = d < 0
    step = scale * float(np.min(y[neg] / -d[neg])) if neg.any() else scale
    full = np.zeros(int(np.prod(m.observed_shape, dtype=int)))
    full[m.observed_cells] = y + step * d
    pairs = {x: graph.indicator_of(x) for x in graph.proxies}
    return ObservedLaw(m.observed_vars, m.observed_shape, full.reshape(m.observed_shape), pairs)


__all__ = ["ParametricModel", "Certificate", "Membership", "certify_non_id",
           "check_membership", "plant_violation", "is_testable", "model_dimension", "constraint_direction"]
