import json
import xml.etree.ElementTree as ET

import pytest

from mdagid import oracle
from mdagid.engine import identify_target_law
from mdagid.functional import Functional, Term
from mdagid.graph import MDag
from mdagid.law import law_from_tables, random_law

# a deliberately wrong functional for the block-parallel model, and the seed
# and error it fails with (recorded as a regression fixture)
WRONG_SEED, WRONG_ERROR = 0, 0.04199583380242211


def test_ci_trivial_cases():
    g = MDag.dag(["X", "Y"])
    law = law_from_tables(g, {"X": [0.3, 0.7], "Y": [0.6, 0.4]})
    assert oracle.ci_holds(law, ["X"], ["Y"])
    g2 = MDag.dag(["X", "Y"], [("X", "Y")])
    law2 = law_from_tables(g2, {"X": [0.3, 0.7], "Y": [[0.9, 0.1], [0.2, 0.8]]})
    assert not oracle.ci_holds(law2, ["X"], ["Y"])


def test_block_parallel_independence(graphs):
    for seed in range(20):
        law = random_law(graphs["fig3a"], seed)
        assert oracle.ci_holds(law, ["R_L1"], ["L1(1)", "R_L2"], ["L2(1)"])
        assert not oracle.ci_holds(law, ["R_L1"], ["L1(1)"], [])


def test_mcar_functional_verifies(graphs):
    r = identify_target_law(graphs["fig1b"])
    rep = oracle.verify_functional(graphs["fig1b"], r.functional, oracle.TrialConfig("fig1b"))
    assert rep.passed and rep.max_error <= 1e-10 and len(rep.trials) == 100


def test_wrong_functional_regression(graphs):
    wrong = Functional(Term(("L1", "L2"), (), (), {"R_L1": 1, "R_L2": 1}),
                       {"L1(1)": "L1", "L2(1)": "L2"})
    rep = oracle.verify_functional(graphs["fig3a"], wrong,
                                   oracle.TrialConfig("fig3a", [WRONG_SEED], tolerance=1e-3))
    assert rep.failing_seed == WRONG_SEED
    assert rep.max_error == pytest.approx(WRONG_ERROR, rel=1e-9)
    assert "FAIL" in rep.summary()


def test_positivity_violation_surfaces_seed(graphs):
    # a huge tolerance does not hide a division by zero: make R_L never 1
    g = graphs["fig1b"]
    f = Functional(Term(("L",), (), (), {"R_L": 1}), {"L(1)": "L"})
    law = law_from_tables(g, {"L(1)": [0.5, 0.5], "R_L": [1.0, 0.0]})
    from mdagid.functional import evaluate
    from mdagid.law import PositivityError
    with pytest.raises(PositivityError):
        evaluate(f, oracle.observed_truth(law), {"L(1)": 0})


def test_trial_config_invariants():
    with pytest.raises(ValueError):
        oracle.TrialConfig("g", tolerance=0)
    with pytest.raises(ValueError):
        oracle.TrialConfig("g", floor=0.5)


def test_threads_do_not_change_results(graphs, monkeypatch):
    r = identify_target_law(graphs["fig3a"])
    cfg = oracle.TrialConfig("fig3a", range(12))
    monkeypatch.setenv("MDAG_ID_THREADS", "1")
    a = oracle.verify_functional(graphs["fig3a"], r.functional, cfg).to_json()
    monkeypatch.setenv("MDAG_ID_THREADS", "4")
    assert oracle.threads() == 4
    b = oracle.verify_functional(graphs["fig3a"], r.functional, cfg).to_json()
    assert a == b


def test_reports(graphs, tmp_path):
    r = identify_target_law(graphs["fig1d"])
    rep = oracle.verify_functional(graphs["fig1d"], r.functional, oracle.TrialConfig("fig1d", range(3)))
    oracle.write_json_report([rep], tmp_path / "t.json")
    oracle.write_junit_report([rep], tmp_path / "t.xml")
    data = json.loads((tmp_path / "t.json").read_text())
    assert {"graph", "seed", "max_error", "verdict"} <= set(data[0]["trials"][0])
    root = ET.parse(tmp_path / "t.xml").getroot()
    assert root.find("testsuite").get("tests") == "3"


def test_intervention_on_non_counterfactual_rejected(graphs):
    with pytest.raises(ValueError):
        oracle.intervene_truth(random_law(graphs["fig4a"], 0), "X", 1)


def test_random_mdags_are_valid():
    import random
    from mdagid.graph import validate
    rng = random.Random(0)
    for _ in range(200):
        assert validate(oracle.random_mdag(rng, self_censoring=True)) == []
