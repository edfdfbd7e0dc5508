"""Exact sampling from STERGM transitions and synthetic game panels.

Random numbers come from numpy's PCG64 bit generator.  Game ``g`` of a panel
simulated with seed ``s`` draws from its own stream seeded by
``SeedSequence(entropy=(s, g))``, and only ``Generator.random`` doubles are
consumed, so panels are reproducible across platforms and independent of
how games are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .graph import (
    DEFAULT_STATE_BUDGET,
    AttributeTable,
    Decision,
    Game,
    GraphError,
    Panel,
    SmallGraph,
    Snapshot,
    formation_masks,
    free_dyads,
    n_dyads,
    persistence_masks,
    present_dyads,
    reconstruct_target,
)
from .likelihood import ThetaVector
from .statistics import ModelSpec, Term, eval_masks


def game_rng(seed: int, game: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=(int(seed), int(game)))))


def _dyad_logits(theta, n, attrs, terms) -> np.ndarray:
    eta = np.zeros(n_dyads(n))
    for coef, term in zip(theta, terms):
        eta = eta + coef * term.dyad_weights(n, attrs)
    return eta


def _draw_dyads(theta, dyads, n, attrs, terms, rng, size) -> np.ndarray:
    """Independent logistic draws on ``dyads``; returns ``size`` masks of kept dyads."""
    if len(dyads) == 0:
        return np.zeros(size, dtype=np.uint64)
    p = 1.0 / (1.0 + np.exp(-_dyad_logits(theta, n, attrs, terms)[dyads]))
    hits = rng.random((size, len(dyads))) < p
    weights = np.left_shift(np.uint64(1), dyads.astype(np.uint64))
    return (hits.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)


def _draw_enumerated(theta, masks, n, attrs, terms, rng, size) -> np.ndarray:
    eta = eval_masks(terms, masks, n, attrs) @ theta
    w = np.exp(eta - eta.max())
    cum = np.cumsum(w)
    idx = np.searchsorted(cum, rng.random(size) * cum[-1], side="right")
    return masks[np.minimum(idx, len(masks) - 1)]


def draw_formation(theta_plus, y_prev: SmallGraph, attrs: AttributeTable, terms: Sequence[Term],
                   rng: np.random.Generator, size: int = 1,
                   budget: int = DEFAULT_STATE_BUDGET, method: str = "auto") -> np.ndarray:
    """``size`` independent formation networks as an array of bitmasks.

    ``method`` is ``"dyadic"`` (per-dyad logistic draws, dyadic-independent
    terms only), ``"enumerate"`` (inverse CDF over the whole space) or
    ``"auto"``.
    """
    theta_plus = np.asarray(theta_plus, dtype=np.float64)
    n = y_prev.n
    if _use_dyadic(terms, method):
        return np.uint64(y_prev.mask) | _draw_dyads(theta_plus, free_dyads(y_prev), n, attrs, terms, rng, size)
    return _draw_enumerated(theta_plus, formation_masks(y_prev, budget), n, attrs, terms, rng, size)


def draw_persistence(theta_minus, y_prev: SmallGraph, attrs: AttributeTable, terms: Sequence[Term],
                     rng: np.random.Generator, size: int = 1,
                     budget: int = DEFAULT_STATE_BUDGET, method: str = "auto") -> np.ndarray:
    theta_minus = np.asarray(theta_minus, dtype=np.float64)
    n = y_prev.n
    if _use_dyadic(terms, method):
        return _draw_dyads(theta_minus, present_dyads(y_prev), n, attrs, terms, rng, size)
    return _draw_enumerated(theta_minus, persistence_masks(y_prev, budget), n, attrs, terms, rng, size)


def _use_dyadic(terms, method: str) -> bool:
    if method == "auto":
        return all(t.dyadic_independent for t in terms)
    if method == "dyadic":
        if not all(t.dyadic_independent for t in terms):
            raise ValueError("dyadic sampling requested for a dyadic-dependent term list")
        return True
    if method == "enumerate":
        return False
    raise ValueError(f"unknown sampling method {method!r}")


def sample_formation(theta_plus, y_prev: SmallGraph, attrs: AttributeTable, terms: Sequence[Term],
                     rng: np.random.Generator, budget: int = DEFAULT_STATE_BUDGET) -> SmallGraph:
    """Exact draw of the formation network given ``y_prev``."""
    return SmallGraph(y_prev.n, int(draw_formation(theta_plus, y_prev, attrs, terms, rng, 1, budget)[0]))


def sample_persistence(theta_minus, y_prev: SmallGraph, attrs: AttributeTable, terms: Sequence[Term],
                       rng: np.random.Generator, budget: int = DEFAULT_STATE_BUDGET) -> SmallGraph:
    """Exact draw of the persistence network given ``y_prev``."""
    return SmallGraph(y_prev.n, int(draw_persistence(theta_minus, y_prev, attrs, terms, rng, 1, budget)[0]))


def sample_transition(theta: ThetaVector, y_prev: SmallGraph, attrs: AttributeTable, spec: ModelSpec,
                      rng: np.random.Generator, budget: int = DEFAULT_STATE_BUDGET) -> SmallGraph:
    theta.check(spec)
    y_plus = sample_formation(theta.formation, y_prev, attrs, spec.formation, rng, budget)
    y_minus = sample_persistence(theta.persistence, y_prev, attrs, spec.persistence, rng, budget)
    return reconstruct_target(y_plus, y_minus, y_prev)


def draw_transitions(theta: ThetaVector, y_prev: SmallGraph, attrs: AttributeTable, spec: ModelSpec,
                     rng: np.random.Generator, size: int, budget: int = DEFAULT_STATE_BUDGET,
                     method: str = "auto") -> np.ndarray:
    """``size`` independent next networks as bitmasks."""
    theta.check(spec)
    plus = draw_formation(theta.formation, y_prev, attrs, spec.formation, rng, size, budget, method)
    minus = draw_persistence(theta.persistence, y_prev, attrs, spec.persistence, rng, size, budget, method)
    return minus | (plus & ~np.uint64(y_prev.mask))


# --- panel generation --------------------------------------------------------


@dataclass(frozen=True)
class WealthRule:
    cooperate_cost_per_neighbor: int = 50
    benefit_per_cooperating_neighbor: int = 100
    initial_wealth: int = 500

    def __post_init__(self):
        if min(self.cooperate_cost_per_neighbor, self.benefit_per_cooperating_neighbor, self.initial_wealth) < 0:
            raise ValueError("wealth rule amounts must be nonnegative")

    def apply(self, wealth: Sequence[int], decisions: Sequence[Decision], graph: SmallGraph) -> tuple[int, ...]:
        """One round of payoffs: each cooperator pays every neighbor's benefit cost."""
        out = list(wealth)
        for i, j in graph.edges():
            for giver, taker in ((i, j), (j, i)):
                if decisions[giver] is Decision.COOPERATE:
                    out[giver] -= self.cooperate_cost_per_neighbor
                    out[taker] += self.benefit_per_cooperating_neighbor
        return tuple(out)


class AttributeSource(Protocol):
    def decisions(self, game: int, t: int, n: int, rng: np.random.Generator) -> tuple[Decision, ...]: ...


@dataclass(frozen=True)
class BernoulliDecisions:
    """Each node cooperates independently with probability ``p_cooperate`` every round."""

    p_cooperate: float | tuple[float, ...] = 0.5

    def decisions(self, game, t, n, rng):
        p = np.broadcast_to(np.asarray(self.p_cooperate, dtype=np.float64), (n,))
        u = rng.random(n)
        return tuple(Decision.COOPERATE if ui < pi else Decision.DEFECT for ui, pi in zip(u, p))


@dataclass(frozen=True)
class ConstantDecisions:
    decision: tuple[Decision, ...] | Decision = Decision.COOPERATE

    def decisions(self, game, t, n, rng):
        if isinstance(self.decision, Decision):
            return (self.decision,) * n
        if len(self.decision) != n:
            raise GraphError(f"constant decisions have {len(self.decision)} entries for {n} nodes")
        return tuple(Decision.parse(d) for d in self.decision)


@dataclass(frozen=True)
class ReplayAttributes:
    """Given attribute tables per game and time (including time 0); wealth is replayed too."""

    trajectories: tuple[tuple[AttributeTable, ...], ...]

    def table(self, game: int, t: int, n: int) -> AttributeTable:
        if game >= len(self.trajectories):
            raise GraphError(f"no attribute trajectory for game {game}")
        traj = self.trajectories[game]
        if t >= len(traj):
            raise GraphError(f"attribute trajectory of game {game} has {len(traj)} snapshots, need {t + 1}")
        if traj[t].n != n:
            raise GraphError(f"attribute table for game {game}, t={t} has {traj[t].n} rows, expected {n}")
        return traj[t]

    def decisions(self, game, t, n, rng):
        return self.table(game, t, n).decision

    @classmethod
    def from_panel(cls, panel: Panel) -> ReplayAttributes:
        return cls(tuple(tuple(s.attrs for s in g.snapshots) for g in panel.games))


@dataclass(frozen=True)
class SimConfig:
    theta: ThetaVector
    spec: ModelSpec
    games: int = 1
    n: int = 6
    initial_ties: int = 5
    transitions: int = 7
    seed: int = 0
    attribute_source: AttributeSource = field(default_factory=BernoulliDecisions)
    budget: int = DEFAULT_STATE_BUDGET

    def __post_init__(self):
        if self.games < 1:
            raise ValueError("games must be at least 1")
        if self.transitions < 1:
            raise ValueError("transitions must be at least 1")
        if not 0 <= self.initial_ties <= n_dyads(self.n):
            raise ValueError(f"initial_ties must be in [0, {n_dyads(self.n)}] for n={self.n}")
        self.theta.check(self.spec)
        if isinstance(self.attribute_source, ReplayAttributes):
            if len(self.attribute_source.trajectories) < self.games:
                raise GraphError("replay source has fewer trajectories than games")
            for g, traj in enumerate(self.attribute_source.trajectories[: self.games]):
                if len(traj) != self.transitions + 1:
                    raise GraphError(
                        f"replay trajectory {g} has {len(traj)} snapshots, expected {self.transitions + 1}"
                    )


def random_graph_with_edges(n: int, m: int, rng: np.random.Generator) -> SmallGraph:
    """Uniform graph with exactly ``m`` edges (partial Fisher-Yates over dyads)."""
    order = list(range(n_dyads(n)))
    u = rng.random(m)
    for k in range(m):
        r = k + int(u[k] * (len(order) - k))
        order[k], order[r] = order[r], order[k]
    mask = 0
    for k in order[:m]:
        mask |= 1 << k
    return SmallGraph(n, mask)


def simulate_game(config: SimConfig, wealth_rule: WealthRule, game: int) -> Game:
    rng = game_rng(config.seed, game)
    n = config.n
    src = config.attribute_source
    replay = isinstance(src, ReplayAttributes)
    graph = random_graph_with_edges(n, config.initial_ties, rng)
    attrs = src.table(game, 0, n) if replay else AttributeTable.uniform(n, Decision.NONE, wealth_rule.initial_wealth)
    snaps = [Snapshot(0, graph, attrs)]
    for t in range(1, config.transitions + 1):
        if replay:
            attrs = src.table(game, t, n)
        else:
            decisions = src.decisions(game, t, n, rng)
            attrs = AttributeTable(decisions, wealth_rule.apply(attrs.wealth, decisions, graph))
        graph = sample_transition(config.theta, graph, attrs, config.spec, rng, config.budget)
        snaps.append(Snapshot(t, graph, attrs))
    return Game(f"g{game + 1:03d}", n, tuple(snaps))


def simulate_panel(config: SimConfig, wealth_rule: WealthRule | None = None) -> Panel:
    wealth_rule = wealth_rule or WealthRule()
    return Panel(tuple(simulate_game(config, wealth_rule, g) for g in range(config.games)))
