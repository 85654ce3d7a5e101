import io
import json

import pytest

from mdagid.cli import run
from mdagid.examples import bundle_examples, example_path
from mdagid.law import random_law
from mdagid.examples import load_example


def call(*argv):
    out = io.StringIO()
    code = run(list(argv), out)
    return code, out.getvalue()


def test_bundled_examples():
    names = bundle_examples()
    for n in ["fig1b", "fig1d", "fig2a-naive", "fig2c", "fig2d", "fig3a", "fig4a"]:
        assert f"{n}.json" in names


@pytest.mark.parametrize("name", ["fig1b", "fig1d", "fig2c", "fig2d", "fig3a", "fig4a", "perm2"])
def test_validate_ok(name):
    assert call("validate", f"{name}.json")[0] == 0


def test_validate_naive_rejected():
    code, out = call("validate", "fig2a-naive.json")
    assert code == 2 and "acyclicity" in out


def test_id_block_parallel():
    code, out = call("id", "fig3a.json")
    assert code == 0
    payload = json.loads(out[: out.rindex("}") + 1])
    assert payload["strategy"] == "parallel-fixing"
    assert "p(L1(1), L2(1)) = p(L1, L2, R_L1=1, R_L2=1)" in out


def test_id_self_censoring():
    code, out = call("id", "fig2d.json")
    assert code == 2 and "not identified: two laws" in out
    payload = json.loads(out[: out.rindex("}") + 1])
    assert payload["certificate"]["oracle_observed_tv"] <= 1e-9
    assert payload["certificate"]["oracle_target_tv"] >= 1e-3


def test_id_marginal_transcript():
    code, out = call("id", "fig3a.json", "--marginal", "L2")
    assert code == 0 and "unresolved: L1(1)" in out


def test_swig_lint():
    code, out = call("swig", "fig2a-naive.json")
    assert code == 2 and "lint: stitch-back cycle: R_L→L→R_L" in out
    code, out = call("swig", "fig2c.json")
    assert code == 0 and "lint: none" in out and "U≡L(1)" in out
    code, out = call("swig", "fig4a.json", "--treatment", "A=a")
    assert code == 0 and "Y(1,a)" in out and "shape=box" in out


def test_effect():
    code, out = call("effect", "fig4a.json", "--treatment", "A", "--outcome", "Y")
    assert code == 0 and "parallel-fixing+g-formula" in out


def test_oracle_command(tmp_path):
    code, out = call("oracle", "fig3a.json", "--trials", "5", "--seed", "3", "--floor", "0.001",
                     "--out", str(tmp_path))
    assert code == 0 and "PASS" in out
    for f in ["trials.json", "junit.xml", "trials.csv", "errors.png"]:
        assert (tmp_path / f).exists()
    code, out = call("oracle", "fig4a.json", "--trials", "5", "--treatment", "A", "--outcome", "Y")
    assert code == 0


def test_member(tmp_path):
    law = random_law(load_example("fig3a"), 1)
    p = tmp_path / "law.json"
    p.write_text(law.dumps())
    code, out = call("member", "fig3a.json", str(p))
    assert code == 0 and "consistent with the model" in out


def test_render():
    code, out = call("render", "fig1b.json")
    assert code == 0 and out.startswith("digraph")
    code, out = call("render", "fig3a.json", "--format", "latex")
    assert code == 0 and r"\frac" in out


def test_input_errors(tmp_path, capsys):
    assert call("id", "missing.json")[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"vertices": [\n')
    assert call("validate", str(bad))[0] == 1
    assert "line" in capsys.readouterr().err
    assert call("frobnicate")[0] == 1
    assert call("id", "fig2a-naive.json")[0] == 1


def test_unknown_verdict_exit_code(tmp_path):
    from mdagid.graph import MDag, Pair
    g = MDag({"L1(1)": "counterfactual", "L2(1)": "counterfactual", "R_L1": "indicator",
              "R_L2": "indicator", "L1": "proxy", "L2": "proxy"},
             [("L1(1)", "L1"), ("R_L1", "L1"), ("L2(1)", "L2"), ("R_L2", "L2"),
              ("L2(1)", "R_L1"), ("R_L2", "R_L1"), ("L1(1)", "R_L2")],
             [Pair("L1", "L1(1)", "R_L1"), Pair("L2", "L2(1)", "R_L2")])
    p = tmp_path / "colluder.json"
    p.write_text(json.dumps(g.to_json()))
    assert call("id", str(p), "--budget", "2")[0] == 3


def test_output_is_byte_identical():
    assert call("id", "fig2d.json") == call("id", "fig2d.json")
    assert call("oracle", "perm2.json", "--trials", "3") == call("oracle", "perm2.json", "--trials", "3")
