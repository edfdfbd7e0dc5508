"""Network statistics used as sufficient statistics for the formation and
persistence models.

Every term can be evaluated on a single graph or, vectorized, on a batch of
dyad bitmasks (the enumerated sample space of one transition).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import (
    CATEGORICAL_ATTRIBUTES,
    NUMERIC_ATTRIBUTES,
    AttributeTable,
    Decision,
    DyadIndex,
    SmallGraph,
    dyad_endpoints,
    mask_bits,
    n_dyads,
    triangle_dyads,
)

DEFAULT_ABSDIFF_SCALE = 0.001


class TermError(ValueError):
    """A term cannot be evaluated against the given attributes."""


def _check_attrs(y: SmallGraph, attrs: AttributeTable) -> None:
    if attrs.n != y.n:
        raise TermError(f"attribute table has {attrs.n} rows for a graph on {y.n} nodes")


class Term:
    """Base class; subclasses are frozen dataclasses."""

    dyadic_independent: bool = True

    def dyad_weights(self, n: int, attrs: AttributeTable) -> np.ndarray:
        """Per-dyad change statistic for dyadic-independent terms."""
        raise NotImplementedError

    def evaluate_bits(self, bits: np.ndarray, n: int, attrs: AttributeTable) -> np.ndarray:
        return (bits @ self.dyad_weights(n, attrs)).astype(np.float64)

    def evaluate(self, y: SmallGraph, attrs: AttributeTable) -> float:
        _check_attrs(y, attrs)
        bits = mask_bits(np.array([y.mask], dtype=np.uint64), y.n)
        return float(self.evaluate_bits(bits, y.n, attrs)[0])

    def change(self, y: SmallGraph, d: DyadIndex, attrs: AttributeTable) -> float:
        _check_attrs(y, attrs)
        return float(self.dyad_weights(y.n, attrs)[d.k])

    def render(self) -> str:
        raise NotImplementedError

    @property
    def label(self) -> str:
        return self.render()


@dataclass(frozen=True)
class Edges(Term):
    def dyad_weights(self, n, attrs):
        return np.ones(n_dyads(n), dtype=np.int64)

    def render(self):
        return "edges"


@dataclass(frozen=True)
class Triangles(Term):
    dyadic_independent = False

    def evaluate_bits(self, bits, n, attrs):
        tri = triangle_dyads(n)
        if len(tri) == 0:
            return np.zeros(len(bits))
        closed = bits[:, tri[:, 0]] & bits[:, tri[:, 1]] & bits[:, tri[:, 2]]
        return closed.sum(axis=1, dtype=np.int64).astype(np.float64)

    def change(self, y, d, attrs):
        _check_attrs(y, attrs)
        common = 0
        for v in range(y.n):
            if v != d.i and v != d.j and y.has_edge(d.i, v) and y.has_edge(d.j, v):
                common += 1
        return float(common)

    def render(self):
        return "triangles"


@dataclass(frozen=True)
class NodeMatch(Term):
    attribute: str
    value: Decision

    def __post_init__(self):
        if self.attribute not in CATEGORICAL_ATTRIBUTES:
            raise TermError(f"nodematch needs a categorical attribute, got {self.attribute!r}")
        object.__setattr__(self, "value", Decision.parse(self.value))

    def dyad_weights(self, n, attrs):
        col = attrs.column(self.attribute)
        if len(col) != n:
            raise TermError(f"attribute {self.attribute!r} has {len(col)} entries for {n} nodes")
        hit = np.array([c == self.value for c in col])
        a, b = dyad_endpoints(n)
        return (hit[a] & hit[b]).astype(np.int64)

    def render(self):
        return f"nodematch({self.attribute},{self.value.value})"


@dataclass(frozen=True)
class AbsDiff(Term):
    attribute: str
    scale: float = field(default=DEFAULT_ABSDIFF_SCALE)

    def __post_init__(self):
        if self.attribute not in NUMERIC_ATTRIBUTES:
            raise TermError(f"absdiff needs a numeric attribute, got {self.attribute!r}")
        if not self.scale > 0 or not np.isfinite(self.scale):
            raise TermError(f"absdiff scale must be a positive finite number, got {self.scale}")
        object.__setattr__(self, "scale", float(self.scale))

    def _raw_weights(self, n, attrs):
        col = np.asarray(attrs.column(self.attribute), dtype=np.int64)
        if len(col) != n:
            raise TermError(f"attribute {self.attribute!r} has {len(col)} entries for {n} nodes")
        a, b = dyad_endpoints(n)
        return np.abs(col[a] - col[b])

    def dyad_weights(self, n, attrs):
        return self.scale * self._raw_weights(n, attrs).astype(np.float64)

    def evaluate_bits(self, bits, n, attrs):
        # integer sum first, one rounding when scaling
        raw = bits.astype(np.int64) @ self._raw_weights(n, attrs)
        return self.scale * raw.astype(np.float64)

    def render(self):
        return f"absdiff({self.attribute},scale={self.scale!r})"


TermSpec = Term


@dataclass(frozen=True)
class ModelSpec:
    formation: tuple[Term, ...] = ()
    persistence: tuple[Term, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "formation", tuple(self.formation))
        object.__setattr__(self, "persistence", tuple(self.persistence))

    @property
    def n_formation(self) -> int:
        return len(self.formation)

    @property
    def n_persistence(self) -> int:
        return len(self.persistence)

    @property
    def n_params(self) -> int:
        return len(self.formation) + len(self.persistence)

    def param_names(self) -> list[str]:
        return [f"formation:{t.label}" for t in self.formation] + [
            f"persistence:{t.label}" for t in self.persistence
        ]

    def is_dyadic_independent(self) -> bool:
        return all(t.dyadic_independent for t in self.formation + self.persistence)


def eval_term(term: Term, y: SmallGraph, attrs: AttributeTable) -> float:
    return term.evaluate(y, attrs)


def eval_vector(terms: Sequence[Term], y: SmallGraph, attrs: AttributeTable) -> np.ndarray:
    return np.array([term.evaluate(y, attrs) for term in terms], dtype=np.float64)


def eval_masks(terms: Sequence[Term], masks: np.ndarray, n: int, attrs: AttributeTable) -> np.ndarray:
    """Statistic matrix of shape (len(masks), len(terms))."""
    out = np.empty((len(masks), len(terms)), dtype=np.float64)
    if len(terms) == 0 or len(masks) == 0:
        return out
    bits = mask_bits(masks, n)
    for c, term in enumerate(terms):
        out[:, c] = term.evaluate_bits(bits, n, attrs)
    return out


def change_statistic(term: Term, y: SmallGraph, d: DyadIndex, attrs: AttributeTable) -> float:
    """Statistic with dyad ``d`` present minus statistic with it absent."""
    return term.change(y, d, attrs)


def change_vector(terms: Sequence[Term], y: SmallGraph, d: DyadIndex, attrs: AttributeTable) -> np.ndarray:
    return np.array([t.change(y, d, attrs) for t in terms], dtype=np.float64)


def is_dyadic_independent(term: Term) -> bool:
    return term.dyadic_independent
