import pytest

from mdagid.graph import UnknownVertexError
from mdagid.swig import (SwigError, build_swig, detect_stitch_cycle,
                         has_undefined_counterfactual, split_treatment)


def test_fig1b_template(graphs):
    s = build_swig(graphs["fig1b"])
    assert s.fixed_nodes == ["r_l=1"]
    assert sorted(s.labels().values()) == ["L(1)", "R_L", "r_l=1"]
    assert s.label_edges() == [("r_l=1", "L(1)")]
    assert detect_stitch_cycle(s) is None


def test_fig1d_template(graphs):
    s = build_swig(graphs["fig1d"])
    assert s.fixed_nodes == ["r_l=1"]
    assert sorted(s.label_edges()) == [("X", "L(1)"), ("X", "R_L"), ("r_l=1", "L(1)")]
    assert not has_undefined_counterfactual(s)


def test_self_censoring_swig_keeps_counterfactual_apart(graphs):
    s = build_swig(graphs["fig2d"])
    assert s.label_edges() == [("U≡L(1)", "L(1)"), ("U≡L(1)", "R_L"), ("r_l=1", "L(1)")]
    assert detect_stitch_cycle(s) is None


def test_naive_self_censoring_stitches_into_a_cycle(graphs):
    s = build_swig(graphs["fig2a-naive"])
    assert detect_stitch_cycle(s) == ["R_L", "L", "R_L"]


def test_empty_split_is_identity(graphs):
    g = graphs["fig3a"]
    s = build_swig(g, split=[])
    assert s.fixed_nodes == []
    assert set(s.edges) == set(g.edges)


def test_fixed_nodes_have_no_parents(graphs):
    for g in graphs.values():
        s = build_swig(g)
        for f in s.fixed_nodes:
            assert s.parents(f) == []
        assert not has_undefined_counterfactual(s)


def test_split_errors(graphs):
    with pytest.raises(SwigError):
        build_swig(graphs["fig1b"], ["L(1)"])
    with pytest.raises(UnknownVertexError):
        build_swig(graphs["fig1b"], ["R_Q"])
    s = build_swig(graphs["fig4a"])
    with pytest.raises(SwigError):
        split_treatment(s, "R_A", "a")


def test_treatment_split_on_fig4(graphs):
    s = split_treatment(build_swig(graphs["fig4a"]), "A(1)", "a")
    labels = s.labels()
    assert labels["A(1)=a"] == "a"
    assert labels["Y(1)"] == "U≡Y(1,a)" and labels["Y"] == "Y(1,a)"
    # the treatment's own proxy still measures the natural value
    assert ("A(1)", "A") in s.edges
    assert ("A(1)=a", "Y(1)") in s.edges and ("A(1)=a", "R_Y") in s.edges
    assert "A(1)=a" in s.fixed_nodes and s.parents("A(1)=a") == []
    assert detect_stitch_cycle(s) is None


def test_treatment_split_without_descendants_only_relabels():
    from mdagid.graph import MDag
    g = MDag.dag(["X", "Y"], [("X", "Y")])
    s = split_treatment(build_swig(g), "Y", "y")
    assert set(s.edges) == {("X", "Y")}
    assert s.labels()["Y=y"] == "y"


def test_dot_boxes_fixed_nodes(graphs):
    dot = build_swig(graphs["fig1b"]).to_dot()
    assert '"r_l=1" [label="r_l=1", shape=box]' in dot
