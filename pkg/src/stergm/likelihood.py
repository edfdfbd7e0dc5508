"""Exact STERGM likelihood by enumeration of formation and persistence spaces.

A panel is compiled once per model: for every transition the statistic
matrix of its whole formation space (supersets of the previous network) and
persistence space (subsets of it) is materialized.  Log-likelihood,
gradient and Fisher information for any parameter vector are then segmented
reductions over those matrices.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import (
    DEFAULT_STATE_BUDGET,
    AttributeTable,
    Panel,
    SmallGraph,
    TransitionView,
    all_masks,
    dyad_index,
    dyad_pairs,
    formation_masks,
    free_dyads,
    persistence_masks,
    present_dyads,
)
from .statistics import AbsDiff, ModelSpec, Term, change_vector, eval_masks, eval_vector


class DyadicDependenceError(ValueError):
    """The dyadic fast path was asked to handle a dependent term."""


@dataclass(frozen=True)
class ThetaVector:
    formation: np.ndarray
    persistence: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.formation, dtype=np.float64).reshape(-1)
        p = np.asarray(self.persistence, dtype=np.float64).reshape(-1)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(p))):
            raise ValueError("theta entries must be finite")
        object.__setattr__(self, "formation", f)
        object.__setattr__(self, "persistence", p)

    @classmethod
    def zeros(cls, spec: ModelSpec) -> ThetaVector:
        return cls(np.zeros(spec.n_formation), np.zeros(spec.n_persistence))

    @classmethod
    def from_flat(cls, spec: ModelSpec, x) -> ThetaVector:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (spec.n_params,):
            raise ValueError(f"expected {spec.n_params} parameters, got shape {x.shape}")
        return cls(x[: spec.n_formation], x[spec.n_formation :])

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.formation, self.persistence])

    def check(self, spec: ModelSpec) -> None:
        if len(self.formation) != spec.n_formation or len(self.persistence) != spec.n_persistence:
            raise ValueError(
                f"theta has {len(self.formation)}+{len(self.persistence)} entries, "
                f"model has {spec.n_formation}+{spec.n_persistence} terms"
            )


def _as_theta(theta, spec: ModelSpec) -> ThetaVector:
    if isinstance(theta, ThetaVector):
        theta.check(spec)
        return theta
    return ThetaVector.from_flat(spec, theta)


def logsumexp(values: np.ndarray) -> float:
    if len(values) == 0:
        return -math.inf
    top = float(np.max(values))
    return top + math.log(float(np.sum(np.exp(values - top))))


# --- single-transition operations --------------------------------------------


def _normalizer(theta_side, masks, n, attrs, terms) -> float:
    theta_side = np.asarray(theta_side, dtype=np.float64)
    if len(theta_side) != len(terms):
        raise ValueError(f"{len(theta_side)} parameters for {len(terms)} terms")
    stats = eval_masks(terms, masks, n, attrs)
    return logsumexp(stats @ theta_side)


def formation_normalizer(theta_plus, y_prev: SmallGraph, attrs: AttributeTable, terms: Sequence[Term],
                         budget: int = DEFAULT_STATE_BUDGET) -> float:
    """Log normalizing constant of the formation model at ``y_prev``."""
    return _normalizer(theta_plus, formation_masks(y_prev, budget), y_prev.n, attrs, terms)


def persistence_normalizer(theta_minus, y_prev: SmallGraph, attrs: AttributeTable, terms: Sequence[Term],
                           budget: int = DEFAULT_STATE_BUDGET) -> float:
    """Log normalizing constant of the persistence model at ``y_prev``."""
    return _normalizer(theta_minus, persistence_masks(y_prev, budget), y_prev.n, attrs, terms)


def formation_loglik(theta_plus, tv: TransitionView, terms: Sequence[Term],
                     budget: int = DEFAULT_STATE_BUDGET) -> float:
    theta_plus = np.asarray(theta_plus, dtype=np.float64)
    obs = eval_vector(terms, tv.y_plus, tv.attrs)
    return float(theta_plus @ obs) - formation_normalizer(theta_plus, tv.y_prev, tv.attrs, terms, budget)


def persistence_loglik(theta_minus, tv: TransitionView, terms: Sequence[Term],
                       budget: int = DEFAULT_STATE_BUDGET) -> float:
    theta_minus = np.asarray(theta_minus, dtype=np.float64)
    obs = eval_vector(terms, tv.y_minus, tv.attrs)
    return float(theta_minus @ obs) - persistence_normalizer(theta_minus, tv.y_prev, tv.attrs, terms, budget)


def transition_loglik(theta, tv: TransitionView, spec: ModelSpec,
                      budget: int = DEFAULT_STATE_BUDGET) -> float:
    """log P(y_curr | y_prev) as the sum of the formation and persistence parts."""
    theta = _as_theta(theta, spec)
    return (formation_loglik(theta.formation, tv, spec.formation, budget)
            + persistence_loglik(theta.persistence, tv, spec.persistence, budget))


def _bernoulli_logmass(eta: float, present: bool) -> float:
    # log sigmoid(eta) or log sigmoid(-eta), overflow safe
    return -float(np.logaddexp(0.0, -eta if present else eta))


def dyadic_fastpath_loglik(theta, tv: TransitionView, spec: ModelSpec) -> float:
    """Transition log-probability as a product of independent dyad logits.

    Valid only when every term's change statistic ignores the rest of the
    graph; raises ``DyadicDependenceError`` otherwise.
    """
    theta = _as_theta(theta, spec)
    for term in spec.formation + spec.persistence:
        if not term.dyadic_independent:
            raise DyadicDependenceError(f"term {term.label!r} is not dyadic independent")
    n = tv.n
    pairs = dyad_pairs(n)
    y_plus, y_minus = tv.y_plus, tv.y_minus
    total = 0.0
    for k in free_dyads(tv.y_prev):
        d = dyad_index(*pairs[k], n)
        eta = float(theta.formation @ change_vector(spec.formation, y_plus, d, tv.attrs))
        total += _bernoulli_logmass(eta, bool(y_plus.mask >> d.k & 1))
    for k in present_dyads(tv.y_prev):
        d = dyad_index(*pairs[k], n)
        eta = float(theta.persistence @ change_vector(spec.persistence, y_minus, d, tv.attrs))
        total += _bernoulli_logmass(eta, bool(y_minus.mask >> d.k & 1))
    return total


def tergm_combined_loglik(theta, tv: TransitionView, spec: ModelSpec,
                          budget: int = DEFAULT_STATE_BUDGET) -> float:
    """Single-model TERGM form: normalizes over every graph on ``n`` nodes."""
    theta = _as_theta(theta, spec)
    n = tv.n
    w = all_masks(n, budget)
    prev = np.uint64(tv.y_prev.mask)
    g_plus = eval_masks(spec.formation, w | prev, n, tv.attrs)
    g_minus = eval_masks(spec.persistence, w & prev, n, tv.attrs)
    eta = g_plus @ theta.formation + g_minus @ theta.persistence
    obs = (float(theta.formation @ eval_vector(spec.formation, tv.y_plus, tv.attrs))
           + float(theta.persistence @ eval_vector(spec.persistence, tv.y_minus, tv.attrs)))
    return obs - logsumexp(eta)


# --- compiled panel ----------------------------------------------------------


@dataclass
class CompiledSide:
    """Stacked sample-space statistics for one side (formation or persistence).

    Each transition's space is stored as its distinct statistic rows together
    with the log of how many graphs share each row.
    """

    stats: np.ndarray  # (rows, d)
    log_count: np.ndarray  # (rows,)
    starts: np.ndarray  # (T,) first row of each transition
    observed: np.ndarray  # (T, d)
    absdiff_cols: np.ndarray  # (d,) bool, columns compared with tolerance

    @property
    def n_terms(self) -> int:
        return self.stats.shape[1]

    @property
    def n_transitions(self) -> int:
        return len(self.starts)

    @property
    def segment(self) -> np.ndarray:
        sizes = np.diff(np.append(self.starts, len(self.stats)))
        return np.repeat(np.arange(len(self.starts)), sizes)

    @staticmethod
    def _collapse(stats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if stats.shape[1] == 0:
            return stats[:1], np.array([math.log(len(stats))])
        rows, counts = np.unique(stats, axis=0, return_counts=True)
        return rows, np.log(counts.astype(np.float64))

    @classmethod
    def build(cls, blocks: list[tuple[np.ndarray, np.ndarray]], terms: Sequence[Term]) -> CompiledSide:
        d = len(terms)
        absdiff = np.array([isinstance(t, AbsDiff) for t in terms], dtype=bool).reshape(d)
        if not blocks:
            return cls(np.zeros((0, d)), np.zeros(0), np.zeros(0, np.int64), np.zeros((0, d)), absdiff)
        collapsed = [cls._collapse(b[0]) for b in blocks]
        sizes = [len(c[0]) for c in collapsed]
        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        stats = np.concatenate([c[0] for c in collapsed]).reshape(sum(sizes), d)
        log_count = np.concatenate([c[1] for c in collapsed])
        observed = np.stack([b[1] for b in blocks]).reshape(len(blocks), d)
        return cls(stats, log_count, starts, observed, absdiff)

    def log_normalizers(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-transition log normalizers and per-row probabilities."""
        eta = self.stats @ theta + self.log_count
        seg = self.segment
        top = np.maximum.reduceat(eta, self.starts)
        w = np.exp(eta - top[seg])
        z = np.add.reduceat(w, self.starts)
        return top + np.log(z), w / z[seg]

    def per_transition_loglik(self, theta: np.ndarray) -> np.ndarray:
        if self.n_transitions == 0:
            return np.zeros(0)
        logc, _ = self.log_normalizers(theta)
        return self.observed @ theta - logc

    def moments(self, theta: np.ndarray, covariance: bool = True):
        """Per-transition log-likelihoods, expectations, and summed covariance."""
        d = self.n_terms
        if self.n_transitions == 0:
            return np.zeros(0), np.zeros((0, d)), np.zeros((d, d))
        logc, p = self.log_normalizers(theta)
        ll = self.observed @ theta - logc
        weighted = self.stats * p[:, None]
        expected = np.add.reduceat(weighted, self.starts, axis=0) if d else np.zeros((self.n_transitions, 0))
        if not covariance:
            return ll, expected, None
        second = weighted.T @ self.stats
        cov = second - expected.T @ expected
        return ll, expected, 0.5 * (cov + cov.T)

    def bounds(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        d = self.n_terms
        if self.n_transitions == 0 or d == 0:
            return np.zeros(d), np.zeros(d), np.zeros(d)
        lo = np.minimum.reduceat(self.stats, self.starts, axis=0)
        hi = np.maximum.reduceat(self.stats, self.starts, axis=0)
        return lo.sum(axis=0), hi.sum(axis=0), self.observed.sum(axis=0)

    def restrict(self, col: int, upper: bool, tol: float) -> CompiledSide:
        """Condition every space on column ``col`` sitting at its extreme, then drop it."""
        seg = self.segment
        x = self.stats[:, col]
        if upper:
            ext = np.maximum.reduceat(x, self.starts)
            keep = x >= ext[seg] - tol
        else:
            ext = np.minimum.reduceat(x, self.starts)
            keep = x <= ext[seg] + tol
        sizes = np.bincount(seg[keep], minlength=self.n_transitions)
        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        return CompiledSide(np.delete(self.stats[keep], col, axis=1), self.log_count[keep], starts,
                            np.delete(self.observed, col, axis=1), np.delete(self.absdiff_cols, col))

    def drop(self, col: int) -> CompiledSide:
        return CompiledSide(np.delete(self.stats, col, axis=1), self.log_count, self.starts,
                            np.delete(self.observed, col, axis=1), np.delete(self.absdiff_cols, col))


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("STERGM_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _compile_transition(tv: TransitionView, spec: ModelSpec, budget: int):
    n = tv.n
    fm = formation_masks(tv.y_prev, budget)
    pm = persistence_masks(tv.y_prev, budget)
    f_obs = eval_masks(spec.formation, np.array([tv.y_plus.mask], dtype=np.uint64), n, tv.attrs)[0]
    p_obs = eval_masks(spec.persistence, np.array([tv.y_minus.mask], dtype=np.uint64), n, tv.attrs)[0]
    return ((eval_masks(spec.formation, fm, n, tv.attrs), f_obs),
            (eval_masks(spec.persistence, pm, n, tv.attrs), p_obs))


@dataclass
class LogLikReport:
    loglik: float
    gradient: np.ndarray
    expected_stats: np.ndarray  # (T, d) per-transition expectations
    fisher_info: np.ndarray
    transition_loglik: np.ndarray  # (T,)


@dataclass
class CompiledPanel:
    formation: CompiledSide
    persistence: CompiledSide

    @classmethod
    def build(cls, panel: Panel, spec: ModelSpec, budget: int = DEFAULT_STATE_BUDGET,
              threads: int | None = None) -> CompiledPanel:
        views = [tv for _, _, tv in panel.transitions()]
        workers = resolve_threads(threads)
        if workers > 1 and len(views) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                blocks = list(pool.map(lambda tv: _compile_transition(tv, spec, budget), views))
        else:
            blocks = [_compile_transition(tv, spec, budget) for tv in views]
        return cls(CompiledSide.build([b[0] for b in blocks], spec.formation),
                   CompiledSide.build([b[1] for b in blocks], spec.persistence))

    @property
    def n_params(self) -> int:
        return self.formation.n_terms + self.persistence.n_terms

    @property
    def n_transitions(self) -> int:
        return self.formation.n_transitions

    def _split(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {x.shape}")
        return x[: self.formation.n_terms], x[self.formation.n_terms :]

    def loglik(self, x) -> float:
        tf, tp = self._split(x)
        per = self.formation.per_transition_loglik(tf) + self.persistence.per_transition_loglik(tp)
        return float(np.sum(per))

    def evaluate(self, x) -> LogLikReport:
        tf, tp = self._split(x)
        ll_f, e_f, cov_f = self.formation.moments(tf)
        ll_p, e_p, cov_p = self.persistence.moments(tp)
        per = ll_f + ll_p
        grad = np.concatenate([(self.formation.observed - e_f).sum(axis=0),
                               (self.persistence.observed - e_p).sum(axis=0)])
        d_f = self.formation.n_terms
        info = np.zeros((self.n_params, self.n_params))
        info[:d_f, :d_f] = cov_f
        info[d_f:, d_f:] = cov_p
        return LogLikReport(float(np.sum(per)), grad, np.hstack([e_f, e_p]), info, per)

    def loglik_and_gradient(self, x) -> tuple[float, np.ndarray]:
        tf, tp = self._split(x)
        ll_f, e_f, _ = self.formation.moments(tf, covariance=False)
        ll_p, e_p, _ = self.persistence.moments(tp, covariance=False)
        grad = np.concatenate([(self.formation.observed - e_f).sum(axis=0),
                               (self.persistence.observed - e_p).sum(axis=0)])
        return float(np.sum(ll_f + ll_p)), grad


def panel_loglik(theta, panel: Panel, spec: ModelSpec, budget: int = DEFAULT_STATE_BUDGET,
                 threads: int | None = None) -> LogLikReport:
    """Joint log-likelihood over all games and transitions, with exact derivatives."""
    theta = _as_theta(theta, spec)
    return CompiledPanel.build(panel, spec, budget, threads).evaluate(theta.flat)


def numerical_information(panel_or_compiled, spec: ModelSpec | None, theta, h: float = 1e-4) -> np.ndarray:
    """Negative Hessian of the log-likelihood by central differences of the gradient."""
    if isinstance(panel_or_compiled, CompiledPanel):
        cp = panel_or_compiled
    else:
        cp = CompiledPanel.build(panel_or_compiled, spec)
    x = theta.flat if isinstance(theta, ThetaVector) else np.asarray(theta, dtype=np.float64)
    d = len(x)
    hess = np.zeros((d, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        hess[:, k] = (cp.evaluate(x + e).gradient - cp.evaluate(x - e).gradient) / (2 * h)
    return -0.5 * (hess + hess.T)


# --- statistic bounds --------------------------------------------------------

ABSDIFF_TOL = 1e-9


@dataclass
class StatBounds:
    names: list[str]
    minimum: np.ndarray
    maximum: np.ndarray
    observed: np.ndarray
    tolerance: np.ndarray  # 0 for count terms

    def flags(self) -> list[str]:
        out = []
        for lo, hi, obs, tol in zip(self.minimum, self.maximum, self.observed, self.tolerance):
            at_lo = obs <= lo + tol
            at_hi = obs >= hi - tol
            if at_lo and at_hi:
                out.append("constant")
            elif at_lo:
                out.append("at_lower_boundary")
            elif at_hi:
                out.append("at_upper_boundary")
            else:
                out.append("ok")
        return out


def compiled_bounds(cp: CompiledPanel, names: list[str]) -> StatBounds:
    lo_f, hi_f, ob_f = cp.formation.bounds()
    lo_p, hi_p, ob_p = cp.persistence.bounds()
    tol = np.where(np.concatenate([cp.formation.absdiff_cols, cp.persistence.absdiff_cols]), ABSDIFF_TOL, 0.0)
    return StatBounds(names, np.concatenate([lo_f, lo_p]), np.concatenate([hi_f, hi_p]),
                      np.concatenate([ob_f, ob_p]), tol)


def stat_bounds(panel: Panel, spec: ModelSpec, budget: int = DEFAULT_STATE_BUDGET) -> StatBounds:
    """Attainable range of each summed statistic over the panel's sample spaces."""
    return compiled_bounds(CompiledPanel.build(panel, spec, budget), spec.param_names())
