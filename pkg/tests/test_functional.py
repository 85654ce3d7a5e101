import pytest

from mdagid.functional import (Constant, Functional, Product, Quotient, Sum, Term, evaluate,
                               latex_name, product, quotient, summation)
from mdagid.law import MISSING, PositivityError, law_from_tables, observed_law, random_law
from mdagid.engine import identify_target_law


def test_constant():
    assert evaluate(Constant(1.0), None) == 1.0


def test_canonical_quotient_on_mcar(graphs):
    law = law_from_tables(graphs["fig1b"], {"L(1)": [0.6, 0.4], "R_L": [0.3, 0.7]})
    obs = observed_law(law)
    # p(l, R=1) / p(R=1 | l(1)), the propensity being p(R=1) under MCAR
    f = Functional(quotient(Term(("L",), {"R_L": 1}), Term((), {"R_L": 1})),
                   {"L(1)": "L"}, "p(L(1))")
    assert evaluate(f, obs, {"L(1)": 1}) == pytest.approx(0.4, abs=1e-12)


def test_structurally_equal_trees_print_identically():
    a = Term(("L2", "L1"), {"R_L2": 1, "R_L1": 1})
    b = Term(("L1", "L2"), {"R_L1": 1, "R_L2": 1})
    assert a == b and str(a) == str(b) == "p(L1, L2, R_L1=1, R_L2=1)"
    p1 = product(Term(("X",)), Term(("L",), (), ("X",)))
    p2 = product(Term(("L",), (), ("X",)), Term(("X",)))
    assert str(p1) == str(p2)
    assert str(summation(["X", "L"], p1)) == str(summation(["L", "X"], p2))


def test_builders_simplify():
    t = Term(("A",))
    assert product(t) is t
    assert product(Constant(1.0), t) is t
    assert quotient(t, Constant(1.0)) is t
    assert summation(["B"], t) is t
    assert isinstance(product(t, Term(("B",))), Product)


def test_latex():
    assert latex_name("L1(1)") == "L_{1}^{(1)}"
    assert latex_name("R_L1") == "R_{L1}"
    t = Quotient(Term(("L1",), {"R_L1": 1}), Term((), {"R_L1": 1}, ("L2",)))
    assert t.latex().startswith(r"\frac{p(L_{1}, R_{L1}=1)}")


def test_positivity_error_names_term(graphs):
    # a law with P(R=1) = 0 makes p(L | R=1) undefined
    law = law_from_tables(graphs["fig1b"], {"L(1)": [0.6, 0.4], "R_L": [1.0, 0.0]})
    f = Functional(Term(("L",), (), (), {"R_L": 1}), {"L(1)": "L"})
    with pytest.raises(PositivityError, match=r"p\(L \| R_L=1\)"):
        evaluate(f, observed_law(law), {"L(1)": 0})


def test_unbound_variable(graphs):
    with pytest.raises(ValueError, match="unbound"):
        evaluate(Functional(Term(("L",)), {}), observed_law(random_law(graphs["fig1b"], 0)), {})


def test_sum_skips_missing_state_without_indicator(graphs):
    obs = observed_law(random_law(graphs["fig1b"], 0))
    # sum over observed values of L only: equals P(R=1)
    assert evaluate(Sum(("L",), Term(("L",))), obs) == pytest.approx(obs.prob({"R_L": 1}))
    # summing L together with its indicator covers the missing state too
    assert evaluate(Sum(("L", "R_L"), Term(("L", "R_L"))), obs) == pytest.approx(1.0)


def test_inconsistent_term_is_zero(graphs):
    obs = observed_law(random_law(graphs["fig1b"], 0))
    assert evaluate(Term(("L", "R_L")), obs, {"L": MISSING, "R_L": 1}) == 0.0


def test_outputs_nonnegative_and_stable_under_perturbation(graphs):
    """A tv-perturbation of size eps moves the output by O(eps / floor)."""
    import numpy as np
    from mdagid.law import ObservedLaw
    g = graphs["fig3a"]
    f = identify_target_law(g, certify=False).functional
    eps, floor = 1e-8, 1e-3
    rng = np.random.default_rng(0)
    for seed in range(20):
        obs = observed_law(random_law(g, seed, floor))
        noise = rng.standard_normal(obs.p.shape) * (obs.p > 0)
        noise -= (obs.p > 0) * noise.sum() / (obs.p > 0).sum()
        noise *= 2 * eps / np.abs(noise).sum()
        bumped = ObservedLaw(obs.variables, obs.cards, obs.p + noise, obs.pairs)
        for l1 in (0, 1):
            for l2 in (0, 1):
                pt = {"L1(1)": l1, "L2(1)": l2}
                a, b = evaluate(f, obs, pt), evaluate(f, bumped, pt)
                assert a >= 0
                assert abs(a - b) <= 10 * eps / floor ** 2
