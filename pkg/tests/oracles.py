"""Slow reference implementations used only as test oracles."""

import itertools
import math

from stergm.graph import SmallGraph, n_dyads
from stergm.statistics import AbsDiff, Edges, NodeMatch, Triangles


def recount(term, g, attrs):
    edges = set(g.edges())
    if isinstance(term, Edges):
        return float(len(edges))
    if isinstance(term, Triangles):
        return float(sum(1 for a, b, c in itertools.combinations(range(g.n), 3)
                         if {(a, b), (a, c), (b, c)} <= edges))
    if isinstance(term, NodeMatch):
        return float(sum(1 for i, j in edges
                         if attrs.decision[i] == term.value and attrs.decision[j] == term.value))
    if isinstance(term, AbsDiff):
        return term.scale * sum(abs(attrs.wealth[i] - attrs.wealth[j]) for i, j in edges)
    raise AssertionError(term)


def score(theta, terms, g, attrs):
    return sum(c * recount(t, g, attrs) for c, t in zip(theta, terms))


def all_graphs(n):
    return [SmallGraph(n, m) for m in range(1 << n_dyads(n))]


def brute_transition_logprob(theta, y_prev, y_curr, attrs, spec):
    """log mass of (y+, y-) after normalizing over the full product space."""
    graphs = all_graphs(y_prev.n)
    sup = [g for g in graphs if g.issuperset(y_prev)]
    sub = [g for g in graphs if g.issubset(y_prev)]
    f = [score(theta.formation, spec.formation, g, attrs) for g in sup]
    p = [score(theta.persistence, spec.persistence, g, attrs) for g in sub]
    top = max(f) + max(p)
    z = sum(math.exp(a + b - top) for a in f for b in p)
    obs = (score(theta.formation, spec.formation, y_prev | y_curr, attrs)
           + score(theta.persistence, spec.persistence, y_prev & y_curr, attrs))
    return obs - top - math.log(z)


def brute_moments(theta_side, terms, space, attrs):
    """Exact mean and covariance of the statistic vector over ``space``."""
    rows = [[recount(t, g, attrs) for t in terms] for g in space]
    w = [math.exp(sum(c * v for c, v in zip(theta_side, r))) for r in rows]
    z = sum(w)
    d = len(terms)
    mean = [sum(wi * r[a] for wi, r in zip(w, rows)) / z for a in range(d)]
    cov = [[sum(wi * (r[a] - mean[a]) * (r[b] - mean[b]) for wi, r in zip(w, rows)) / z
            for b in range(d)] for a in range(d)]
    return mean, cov
