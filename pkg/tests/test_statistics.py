
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FULL_TERMS, random_attrs, random_graph
from oracles import recount
from stergm.graph import AttributeTable, Decision, SmallGraph, dyad_index, n_dyads
from stergm.statistics import (
    AbsDiff,
    Edges,
    ModelSpec,
    NodeMatch,
    TermError,
    Triangles,
    change_statistic,
    eval_masks,
    eval_vector,
    is_dyadic_independent,
)


def test_triangles_on_k4():
    assert Triangles().evaluate(SmallGraph.complete(4), AttributeTable.uniform(4)) == 4


def test_nodematch_path():
    attrs = AttributeTable(("C", "C", "D"), (0, 0, 0))
    path = SmallGraph.from_edges(3, [(0, 1), (1, 2)])
    assert NodeMatch("decision", "C").evaluate(path, attrs) == 1


def test_absdiff_single_edge():
    attrs = AttributeTable(("N", "N"), (500, 700))
    assert AbsDiff("wealth", 0.001).evaluate(SmallGraph.complete(2), attrs) == pytest.approx(0.2, abs=1e-15)


def test_vectors():
    k4, a = SmallGraph.complete(4), AttributeTable.uniform(4)
    assert eval_vector([], k4, a).shape == (0,)
    assert list(eval_vector([Edges(), Triangles()], k4, a)) == [6, 4]


def test_change_examples():
    a = AttributeTable.uniform(4)
    d = dyad_index(0, 1, 4)
    g = SmallGraph.complete(4).without_dyad(d.k)
    assert change_statistic(Triangles(), g, d, a) == 2
    for mask in range(64):
        assert change_statistic(Edges(), SmallGraph(4, mask), d, a) == 1


def test_dyadic_independence_flags():
    assert is_dyadic_independent(Edges())
    assert not is_dyadic_independent(Triangles())
    assert is_dyadic_independent(AbsDiff("wealth"))
    assert is_dyadic_independent(NodeMatch("decision", "D"))
    assert not ModelSpec((Edges(),), (Triangles(),)).is_dyadic_independent()


@pytest.mark.parametrize("n", [3, 4, 5, 6, 8, 11])
def test_against_recount(rng, n):
    for _ in range(25):
        g, attrs = random_graph(rng, n, rng.random()), random_attrs(rng, n)
        got = eval_vector(FULL_TERMS, g, attrs)
        want = [recount(t, g, attrs) for t in FULL_TERMS]
        np.testing.assert_allclose(got, want, rtol=1e-14, atol=0)


def test_eval_masks_matches_single(rng):
    n = 5
    attrs = random_attrs(rng, n)
    masks = rng.integers(0, 1 << n_dyads(n), size=50).astype(np.uint64)
    mat = eval_masks(FULL_TERMS, masks, n, attrs)
    for row, m in zip(mat, masks):
        np.testing.assert_array_equal(row, eval_vector(FULL_TERMS, SmallGraph(n, int(m)), attrs))


@settings(max_examples=200, deadline=None)
@given(st.integers(3, 7), st.data())
def test_change_equals_two_evaluations(n, data):
    mask = data.draw(st.integers(0, (1 << n_dyads(n)) - 1))
    k = data.draw(st.integers(0, n_dyads(n) - 1))
    dec = data.draw(st.lists(st.sampled_from("CDN"), min_size=n, max_size=n))
    wealth = data.draw(st.lists(st.integers(0, 3000), min_size=n, max_size=n))
    attrs = AttributeTable(dec, wealth)
    y = SmallGraph(n, mask)
    on, off = y.with_dyad(k), y.without_dyad(k)
    from stergm.graph import dyad_pairs
    d = dyad_index(*dyad_pairs(n)[k], n)
    for term in FULL_TERMS:
        diff = term.evaluate(on, attrs) - term.evaluate(off, attrs)
        # AbsDiff is scale * integer, so the two routes agree up to one rounding
        assert change_statistic(term, y, d, attrs) == pytest.approx(diff, rel=1e-12, abs=1e-12)


def test_term_validation():
    with pytest.raises(TermError):
        NodeMatch("wealth", "C")
    with pytest.raises(TermError):
        AbsDiff("decision")
    with pytest.raises(TermError):
        AbsDiff("wealth", 0.0)
    with pytest.raises(TermError):
        Edges().evaluate(SmallGraph.empty(3), AttributeTable.uniform(4))


def test_param_names():
    spec = ModelSpec((Edges(),), (Edges(), NodeMatch("decision", Decision.COOPERATE)))
    assert spec.param_names() == ["formation:edges", "persistence:edges", "persistence:nodematch(decision,C)"]
    assert spec.n_params == 3
