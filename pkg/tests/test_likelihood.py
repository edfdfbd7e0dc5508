import math

import numpy as np
import pytest

from conftest import COVARIATE_TERMS, FULL_TERMS, random_attrs, random_graph, random_panel, uniform_panel
from oracles import all_graphs, brute_moments, brute_transition_logprob
from stergm.graph import AttributeTable, Game, Panel, SmallGraph, Snapshot, TransitionView
from stergm.likelihood import (
    CompiledPanel,
    DyadicDependenceError,
    ThetaVector,
    dyadic_fastpath_loglik,
    formation_loglik,
    formation_normalizer,
    numerical_information,
    panel_loglik,
    persistence_loglik,
    persistence_normalizer,
    stat_bounds,
    tergm_combined_loglik,
    transition_loglik,
)
from stergm.statistics import Edges, ModelSpec, Triangles


def random_theta(rng, spec, scale=1.0):
    return ThetaVector(rng.normal(0, scale, spec.n_formation), rng.normal(0, scale, spec.n_persistence))


class TestNormalizers:
    def test_uniform_formation(self):
        prev = SmallGraph.from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])
        got = formation_normalizer(np.zeros(5), prev, AttributeTable.uniform(6), FULL_TERMS)
        assert got == pytest.approx(10 * math.log(2), abs=1e-12)

    def test_singleton_formation(self, rng):
        k6, attrs = SmallGraph.complete(6), random_attrs(rng, 6)
        theta = rng.normal(size=5)
        want = sum(c * t.evaluate(k6, attrs) for c, t in zip(theta, FULL_TERMS))
        assert formation_normalizer(theta, k6, attrs, FULL_TERMS) == pytest.approx(want, abs=1e-12)

    def test_edges_only_formation(self):
        got = formation_normalizer([1.0], SmallGraph.empty(3), AttributeTable.uniform(3), [Edges()])
        assert got == pytest.approx(3 * math.log(1 + math.e), abs=1e-14)

    def test_persistence(self):
        prev = SmallGraph.from_edges(5, [(0, 1), (2, 3), (1, 4)])
        a = AttributeTable.uniform(5)
        assert persistence_normalizer(np.zeros(5), prev, a, FULL_TERMS) == pytest.approx(3 * math.log(2))
        assert persistence_normalizer([0.7], SmallGraph.empty(5), a, [Edges()]) == 0.0
        two = SmallGraph.from_edges(4, [(0, 1), (2, 3)])
        got = persistence_normalizer([1.0], two, AttributeTable.uniform(4), [Edges()])
        assert got == pytest.approx(2 * math.log(1 + math.e), abs=1e-14)


class TestTransition:
    def test_uniform(self, rng, full_spec):
        for _ in range(10):
            tv = TransitionView(random_graph(rng, 6), random_graph(rng, 6), random_attrs(rng, 6))
            assert transition_loglik(ThetaVector.zeros(full_spec), tv, full_spec) == pytest.approx(
                -15 * math.log(2), abs=1e-12)

    def test_singleton_sides(self, rng):
        k5, e = SmallGraph.complete(5), SmallGraph.empty(5)
        attrs = random_attrs(rng, 5)
        theta = rng.normal(size=5)
        assert formation_loglik(theta, TransitionView(k5, k5, attrs), FULL_TERMS) == pytest.approx(0, abs=1e-12)
        assert persistence_loglik(theta, TransitionView(e, e, attrs), FULL_TERMS) == pytest.approx(0, abs=1e-12)
        # the free side of an otherwise singleton transition is uniform
        spec = ModelSpec(FULL_TERMS, ())
        got = transition_loglik(ThetaVector(theta, []), TransitionView(k5, k5, attrs), spec)
        assert got == pytest.approx(-10 * math.log(2), abs=1e-12)

    def test_against_product_enumeration(self, rng, full_spec):
        for _ in range(40):
            prev, curr, attrs = random_graph(rng, 4), random_graph(rng, 4), random_attrs(rng, 4)
            theta = random_theta(rng, full_spec)
            tv = TransitionView(prev, curr, attrs)
            want = brute_transition_logprob(theta, prev, curr, attrs, full_spec)
            assert transition_loglik(theta, tv, full_spec) == pytest.approx(want, abs=1e-12)

    def test_probabilities_sum_to_one(self, rng, full_spec):
        prev, attrs = random_graph(rng, 4), random_attrs(rng, 4)
        theta = random_theta(rng, full_spec)
        total = sum(math.exp(transition_loglik(theta, TransitionView(prev, g, attrs), full_spec))
                    for g in all_graphs(4))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_combined_form(self, rng, full_spec):
        for _ in range(40):
            tv = TransitionView(random_graph(rng, 4), random_graph(rng, 4), random_attrs(rng, 4))
            theta = random_theta(rng, full_spec)
            assert tergm_combined_loglik(theta, tv, full_spec) == pytest.approx(
                transition_loglik(theta, tv, full_spec), abs=1e-12)
        tv = TransitionView(SmallGraph.empty(4), SmallGraph.complete(4), AttributeTable.uniform(4))
        assert tergm_combined_loglik(ThetaVector.zeros(full_spec), tv, full_spec) == pytest.approx(-6 * math.log(2))

    def test_fastpath(self, rng):
        spec = ModelSpec(COVARIATE_TERMS, COVARIATE_TERMS)
        for _ in range(20):
            tv = TransitionView(random_graph(rng, 6), random_graph(rng, 6), random_attrs(rng, 6))
            theta = random_theta(rng, spec)
            assert dyadic_fastpath_loglik(theta, tv, spec) == pytest.approx(
                transition_loglik(theta, tv, spec), abs=1e-12)
        assert dyadic_fastpath_loglik(ThetaVector.zeros(spec), tv, spec) == pytest.approx(-15 * math.log(2))

    def test_fastpath_rejects_triangles(self, full_spec):
        tv = TransitionView(SmallGraph.empty(3), SmallGraph.empty(3), AttributeTable.uniform(3))
        with pytest.raises(DyadicDependenceError):
            dyadic_fastpath_loglik(ThetaVector.zeros(full_spec), tv, full_spec)

    def test_theta_length_checked(self, full_spec):
        tv = TransitionView(SmallGraph.empty(3), SmallGraph.empty(3), AttributeTable.uniform(3))
        with pytest.raises(ValueError):
            transition_loglik(ThetaVector([0.0], [0.0]), tv, full_spec)
        with pytest.raises(ValueError):
            ThetaVector([math.inf], [])


class TestPanel:
    def test_uniform_panel(self, full_spec):
        panel = uniform_panel(3, 4)
        rep = panel_loglik(ThetaVector.zeros(full_spec), panel, full_spec)
        assert rep.loglik == pytest.approx(-15 * math.log(2) * 12, abs=1e-9)
        assert -2 * panel_loglik(ThetaVector.zeros(ModelSpec()), uniform_panel(20, 7), ModelSpec()).loglik == \
            pytest.approx(2911.22, abs=0.005)

    def test_sum_of_transitions(self, rng, full_spec):
        panel = random_panel(rng, 3, 3, 5)
        theta = random_theta(rng, full_spec, 0.5)
        rep = panel_loglik(theta, panel, full_spec)
        per = [transition_loglik(theta, tv, full_spec) for _, _, tv in panel.transitions()]
        np.testing.assert_allclose(rep.transition_loglik, per, atol=1e-11)
        assert rep.loglik == pytest.approx(sum(per), abs=1e-10)

    def test_gradient_finite_difference(self, rng, full_spec):
        panel = random_panel(rng, 2, 3, 5)
        cp = CompiledPanel.build(panel, full_spec)
        x = random_theta(rng, full_spec, 0.5).flat
        g = cp.evaluate(x).gradient
        h = 1e-5
        fd = np.array([(cp.loglik(x + h * e) - cp.loglik(x - h * e)) / (2 * h) for e in np.eye(len(x))])
        assert np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(g))) < 1e-6
        _, g2 = cp.loglik_and_gradient(x)
        np.testing.assert_allclose(g2, g, atol=1e-12)

    def test_information_against_numerical_hessian(self, rng, full_spec):
        panel = random_panel(rng, 2, 3, 5)
        x = random_theta(rng, full_spec, 0.5).flat
        cp = CompiledPanel.build(panel, full_spec)
        exact = cp.evaluate(x).fisher_info
        num = numerical_information(cp, None, x)
        mask = np.abs(exact) > 1e-8
        assert np.all(np.abs(num[~mask]) < 1e-6)
        assert np.max(np.abs(num[mask] - exact[mask]) / np.abs(exact[mask])) < 1e-4

    def test_moments_against_enumeration(self, rng):
        attrs = random_attrs(rng, 4)
        prev = random_graph(rng, 4)
        snaps = (Snapshot(0, prev, attrs), Snapshot(1, random_graph(rng, 4), attrs))
        panel = Panel((Game("g", 4, snaps),))
        spec = ModelSpec(FULL_TERMS, FULL_TERMS)
        theta = random_theta(rng, spec)
        rep = panel_loglik(theta, panel, spec)
        sup = [g for g in all_graphs(4) if g.issuperset(prev)]
        sub = [g for g in all_graphs(4) if g.issubset(prev)]
        mf, cf = brute_moments(theta.formation, FULL_TERMS, sup, attrs)
        mp, cpv = brute_moments(theta.persistence, FULL_TERMS, sub, attrs)
        np.testing.assert_allclose(rep.expected_stats[0], mf + mp, atol=1e-10)
        np.testing.assert_allclose(rep.fisher_info[:5, :5], cf, atol=1e-10)
        np.testing.assert_allclose(rep.fisher_info[5:, 5:], cpv, atol=1e-10)
        np.testing.assert_array_equal(rep.fisher_info[:5, 5:], 0)

    def test_threads_do_not_change_result(self, rng, full_spec):
        panel = random_panel(rng, 4, 3, 5)
        x = random_theta(rng, full_spec, 0.3).flat
        a = CompiledPanel.build(panel, full_spec, threads=1).evaluate(x)
        b = CompiledPanel.build(panel, full_spec, threads=4).evaluate(x)
        assert a.loglik == b.loglik
        np.testing.assert_array_equal(a.gradient, b.gradient)


class TestBounds:
    def test_no_dissolution_is_upper(self):
        a = AttributeTable.uniform(4)
        g1 = SmallGraph.from_edges(4, [(0, 1)])
        g2 = SmallGraph.from_edges(4, [(0, 1), (2, 3)])
        panel = Panel((Game("g", 4, (Snapshot(0, g1, a), Snapshot(1, g2, a), Snapshot(2, g2, a))),))
        b = stat_bounds(panel, ModelSpec((Edges(),), (Edges(),)))
        assert b.flags() == ["ok", "at_upper_boundary"]
        assert b.observed[1] == b.maximum[1] == 3

    def test_triangles_bounds(self):
        a = AttributeTable.uniform(3)
        e = SmallGraph.empty(3)
        panel = Panel((Game("g", 3, (Snapshot(0, e, a), Snapshot(1, e, a))),))
        b = stat_bounds(panel, ModelSpec((Edges(), Triangles()), ()))
        assert list(b.minimum) == [0, 0] and list(b.maximum) == [3, 1]
        assert b.flags() == ["at_lower_boundary", "at_lower_boundary"]
