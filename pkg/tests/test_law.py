import numpy as np
import pytest

from mdagid.graph import MDag, Pair
from mdagid.law import (MISSING, ConsistencyError, DiscreteLaw, EnumerationCapError,
                        ObservedLaw, PositivityError, condition, joint, law_from_tables,
                        observed_law, random_law, target_law)
from mdagid import oracle


@pytest.fixture
def mcar(graphs):
    # P(R=1) = 0.7, P(L(1)=1) = 0.4
    return law_from_tables(graphs["fig1b"], {"L(1)": [0.6, 0.4], "R_L": [0.3, 0.7]})


def test_mcar_observed_law(mcar):
    obs = observed_law(mcar)
    assert obs.prob({"L": 1, "R_L": 1}) == pytest.approx(0.28, abs=1e-12)
    assert obs.prob({"L": MISSING, "R_L": 0}) == pytest.approx(0.3, abs=1e-12)
    assert obs.prob({"L": 0, "R_L": 1}) == pytest.approx(0.42, abs=1e-12)
    assert obs.prob({"L": MISSING, "R_L": 1}) == 0.0
    assert obs.consistency_violations() == []


def test_mcar_target_and_condition(mcar):
    assert target_law(mcar).prob({"L(1)": 1}) == pytest.approx(0.4, abs=1e-12)
    c = condition(observed_law(mcar), {"R_L": 1})
    assert c.prob({"L": 1}) == pytest.approx(0.4, abs=1e-12)


def test_condition_on_full_configuration_is_point_mass(mcar):
    c = condition(observed_law(mcar), {"R_L": 1, "L": 0})
    assert c.prob({"R_L": 1, "L": 0}) == pytest.approx(1.0)


def test_condition_on_impossible_event(mcar):
    with pytest.raises(PositivityError, match="R_L"):
        condition(observed_law(mcar), {"L": MISSING, "R_L": 1})


def test_single_vertex_and_coins():
    g = MDag.dag(["A"])
    law = law_from_tables(g, {"A": [0.6, 0.4]})
    assert joint(law).prob({"A": 1}) == pytest.approx(0.4)
    g2 = MDag.dag(["A", "B"])
    law2 = law_from_tables(g2, {"A": [0.5, 0.5], "B": [0.5, 0.5]})
    assert np.allclose(joint(law2).p, 0.25)


def test_uniform_fig3a_joint(graphs):
    g = graphs["fig3a"]
    tables = {v: np.full(t.shape, 0.5) for v, t in random_law(g, 0).tables.items()
              if g.kind(v).value != "proxy"}
    law = law_from_tables(g, tables)
    assert np.allclose(joint(law).p, 2.0 ** -4)


def test_copy_law_has_diagonal_target(graphs):
    g = graphs["fig3a"]
    base = random_law(g, 3)
    tables = {v: base.tables[v] for v in ["R_L1", "R_L2"]}
    tables["L1(1)"] = [0.3, 0.7]
    tables["L2(1)"] = [[1.0, 0.0], [0.0, 1.0]]
    t = target_law(law_from_tables(g, tables))
    assert t.prob({"L1(1)": 0, "L2(1)": 1}) == 0 and t.prob({"L1(1)": 1, "L2(1)": 0}) == 0


def test_random_law_is_deterministic_and_floored(graphs):
    g = graphs["fig4a"]
    a, b = random_law(g, 11, 0.05), random_law(g, 11, 0.05)
    for v in g.vertices:
        assert np.array_equal(a.tables[v], b.tables[v])
        if g.kind(v).value != "proxy":
            assert a.tables[v].min() >= 0.05 - 1e-15


def test_different_seeds_give_different_laws(graphs):
    g = graphs["fig3a"]
    for s in range(100):
        a, b = random_law(g, s), random_law(g, s + 1000)
        assert max(np.abs(a.tables[v] - b.tables[v]).max() for v in g.vertices) > 1e-6


def test_normalization_and_consistency(graphs):
    for name in ["fig1d", "fig3a", "fig4a", "perm2"]:
        law = random_law(graphs[name], 5)
        obs = observed_law(law)
        assert abs(obs.total() - 1) < 1e-10 and abs(target_law(law).total() - 1) < 1e-10
        assert obs.consistency_violations() == []
        for proxy, r in obs.pairs.items():
            assert obs.prob({proxy: MISSING, r: 1}) == 0.0


def test_counterfactual_equals_proxy_when_observed(graphs):
    law = random_law(graphs["fig3a"], 9)
    j = oracle.enumerate_joint(law)
    names = sorted(graphs["fig3a"].vertices)
    for key, p in j.items():
        a = dict(zip(names, key))
        for k in ("1", "2"):
            if a[f"R_L{k}"] == 1:
                assert a[f"L{k}"] == a[f"L{k}(1)"]


def test_agrees_with_resummation(graphs):
    for name in ["fig3a", "fig4a", "perm2", "fig1d"]:
        law = random_law(graphs[name], 42)
        assert observed_law(law).total_variation(oracle.observed_truth(law)) < 1e-14
        assert target_law(law).total_variation(oracle.target_truth(law)) < 1e-14


def test_law_json_round_trip(graphs):
    law = random_law(graphs["perm2"], 2)
    back = DiscreteLaw.from_json(law.to_json())
    for v in graphs["perm2"].vertices:
        assert np.allclose(back.tables[v], law.tables[v], atol=0, rtol=1e-15)
    obs = observed_law(law)
    back_obs = ObservedLaw.from_json(obs.to_json())
    assert obs.total_variation(back_obs) == 0.0


def test_config_strings_are_sorted(graphs):
    text = random_law(graphs["perm2"], 0).dumps()
    assert '"L2=NA;R_L2=0"' in text and '"L2=1;R_L2=1"' in text


def test_enumeration_cap():
    names = [f"V{i}" for i in range(21)]
    with pytest.raises(EnumerationCapError):
        random_law(MDag.dag(names), 0)


def test_cardinality_override(graphs):
    law = random_law(graphs["fig3a"], 0, cardinality={"L1(1)": 3})
    assert law.graph.cardinality("L1") == 3
    assert observed_law(law).states("L1") == [0, 1, 2, MISSING]


def test_consistency_error_type():
    assert issubclass(ConsistencyError, ValueError)


def test_permutation_equivariance(graphs):
    g = graphs["fig3a"]
    swap = {"L1(1)": "L2(1)", "L2(1)": "L1(1)", "R_L1": "R_L2", "R_L2": "R_L1",
            "L1": "L2", "L2": "L1"}
    h = g.relabel(swap)
    law = random_law(g, 4)
    moved = DiscreteLaw(h, {swap[v]: law.tables[v] for v in g.vertices})
    o1, o2 = observed_law(law), observed_law(moved)
    for cfg, p in o1.items():
        assert o2.prob({swap[k]: v for k, v in cfg.items()}) == pytest.approx(p, abs=1e-15)
    t1, t2 = target_law(law), target_law(moved)
    for cfg, p in t1.items():
        assert t2.prob({swap[k]: v for k, v in cfg.items()}) == pytest.approx(p, abs=1e-15)
