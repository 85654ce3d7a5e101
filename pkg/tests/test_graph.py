import json

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from mdagid.graph import (GraphFormatError, MDag, Pair, UnknownVertexError, VertexKind,
                          d_separated, to_dot, validate)


def rules(g):
    return sorted({v.rule for v in validate(g)})


def single(extra_edges=(), kinds=None):
    kinds = kinds or {"L(1)": "counterfactual", "R_L": "indicator", "L": "proxy"}
    edges = [("L(1)", "L"), ("R_L", "L"), *extra_edges]
    return MDag(kinds, edges, [Pair("L", "L(1)", "R_L")])


def test_bundled_figures_validate(graphs):
    for name, g in graphs.items():
        if name == "fig2a-naive":
            assert "acyclicity" in rules(g)
        else:
            assert validate(g) == [], name


def test_fig1b_is_two_edge_mcar_graph(graphs):
    g = graphs["fig1b"]
    assert sorted(g.edges) == [("L(1)", "L"), ("R_L", "L")]


def test_fig3a_cross_propensity_edges(graphs):
    g = graphs["fig3a"]
    for e in [("L1(1)", "R_L2"), ("L2(1)", "R_L1"), ("L1(1)", "L2(1)")]:
        assert g.has_edge(*e)


def test_fig4a_vertices(graphs):
    assert set(graphs["fig4a"].vertices) == {"X", "A(1)", "Y(1)", "R_A", "R_Y", "A", "Y"}
    assert graphs["fig4a"].kind("X") is VertexKind.OBSERVED


def test_proxy_into_counterfactual_is_rejected():
    assert "proxy-into-counterfactual" in rules(single([("L", "L(1)")]))


def test_indicator_into_counterfactual_is_rejected():
    g = MDag({"L(1)": "counterfactual", "R_L": "indicator", "L": "proxy",
              "M(1)": "counterfactual", "R_M": "indicator", "M": "proxy"},
             [("L(1)", "L"), ("R_L", "L"), ("M(1)", "M"), ("R_M", "M"), ("R_L", "M(1)")],
             [Pair("L", "L(1)", "R_L"), Pair("M", "M(1)", "R_M")])
    assert "indicator-into-counterfactual" in rules(g)


def test_cycle_between_indicator_and_proxy():
    g = single([("L", "R_L")])
    assert "acyclicity" in rules(g)
    assert any("R_L" in v.items and "L" in v.items for v in validate(g) if v.rule == "acyclicity")


def test_proxy_parent_set_is_exact():
    g = single([("R_L", "L(1)")])
    g2 = MDag({"L(1)": "counterfactual", "R_L": "indicator", "L": "proxy", "X": "observed"},
              [("L(1)", "L"), ("R_L", "L"), ("X", "L")], [Pair("L", "L(1)", "R_L")])
    assert "proxy-parents" in rules(g2)
    assert "indicator-into-counterfactual" in rules(g)


def test_unpaired_proxy_and_paired_unobserved():
    g = MDag({"L": "proxy", "U": "unobserved"}, [])
    assert "pair-missing" in rules(g)


def test_d_separation_examples(graphs):
    g3 = graphs["fig3a"]
    assert d_separated(g3, {"R_L1"}, {"L1(1)", "R_L2"}, {"L2(1)"})
    assert d_separated(graphs["fig1b"], {"R_L"}, {"L(1)"}, set())
    assert not d_separated(graphs["fig2d"], {"R_L"}, {"L(1)"}, set())
    # conditioning on the collider L opens the path
    assert not d_separated(graphs["fig1b"], {"R_L"}, {"L(1)"}, {"L"})


def test_d_separation_errors(graphs):
    with pytest.raises(UnknownVertexError):
        d_separated(graphs["fig1b"], {"nope"}, {"L(1)"}, set())
    with pytest.raises(ValueError):
        d_separated(graphs["fig1b"], {"R_L"}, {"R_L"}, set())


def test_topological_order_is_lexicographic_on_ties():
    g = MDag.dag(["c", "b", "a", "d"], [("c", "d")])
    assert g.topological_order() == ["a", "b", "c", "d"]


def test_json_round_trip(graphs):
    for g in graphs.values():
        h = MDag.from_json(json.loads(json.dumps(g.to_json())))
        assert h.vertices == g.vertices and h.edges == g.edges and h.pairs == g.pairs


def test_malformed_json_reports_line_and_field(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"vertices": [\n  {"name": "A", "kind": "observed"},\n}')
    with pytest.raises(GraphFormatError, match="line 3"):
        MDag.load(p)
    p.write_text('{"vertices": [{"name": "A", "kind": "sideways"}], "edges": []}')
    with pytest.raises(GraphFormatError, match=r"vertices\[0\]"):
        MDag.load(p)


def test_dot_mentions_every_edge(graphs):
    dot = to_dot(graphs["fig3a"])
    for a, b in graphs["fig3a"].edges:
        assert f'"{a}" -> "{b}"' in dot


@st.composite
def dag_query(draw):
    n = draw(st.integers(2, 7))
    names = [f"V{i}" for i in range(n)]
    edges = [(names[i], names[j]) for i in range(n) for j in range(i + 1, n)
             if draw(st.booleans())]
    perm = draw(st.permutations(names))
    k = draw(st.integers(1, n - 1))
    A, rest = perm[:k], perm[k:]
    b = draw(st.integers(1, len(rest)))
    B, rest = rest[:b], rest[b:]
    Z = [v for v in rest if draw(st.booleans())]
    return names, edges, A, B, Z


def _nx_dsep(G, A, B, Z):
    fn = getattr(nx, "is_d_separator", None) or nx.d_separated
    return fn(G, set(A), set(B), set(Z))


@settings(max_examples=300, deadline=None)
@given(dag_query())
def test_d_separation_agrees_with_networkx(case):
    names, edges, A, B, Z = case
    G = nx.DiGraph()
    G.add_nodes_from(names)
    G.add_edges_from(edges)
    assert d_separated(MDag.dag(names, edges), A, B, Z) == _nx_dsep(G, A, B, Z)
