"""Small undirected graphs stored as dyad bitmasks, plus the attribute and
panel containers that carry observed dynamic networks.

Dyads ``{i, j}`` with ``i < j`` are numbered lexicographically, so for
``n = 6`` the pair ``(0, 1)`` is bit 0 and ``(4, 5)`` is bit 14.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

MIN_NODES = 2
MAX_NODES = 11


class GraphError(ValueError):
    """Invalid graph, dyad or panel construction."""


def n_dyads(n: int) -> int:
    return n * (n - 1) // 2


def _check_n(n: int) -> None:
    if not MIN_NODES <= n <= MAX_NODES:
        raise GraphError(f"node count must be in [{MIN_NODES}, {MAX_NODES}], got {n}")


@dataclass(frozen=True)
class DyadIndex:
    i: int
    j: int
    k: int


def dyad_index(i: int, j: int, n: int) -> DyadIndex:
    """Canonical index of the unordered pair ``{i, j}`` among ``n`` nodes."""
    _check_n(n)
    if not (0 <= i < n and 0 <= j < n):
        raise GraphError(f"node out of range for n={n}: ({i}, {j})")
    if i == j:
        raise GraphError(f"self-loop ({i}, {j}) has no dyad index")
    if i > j:
        i, j = j, i
    k = i * (2 * n - i - 1) // 2 + (j - i - 1)
    return DyadIndex(i, j, k)


@lru_cache(maxsize=None)
def dyad_pairs(n: int) -> tuple[tuple[int, int], ...]:
    """All pairs ``(i, j)``, ``i < j``, in canonical index order."""
    _check_n(n)
    return tuple((i, j) for i in range(n) for j in range(i + 1, n))


@lru_cache(maxsize=None)
def dyad_endpoints(n: int) -> tuple[np.ndarray, np.ndarray]:
    pairs = np.array(dyad_pairs(n), dtype=np.int64)
    return pairs[:, 0].copy(), pairs[:, 1].copy()


@lru_cache(maxsize=None)
def triangle_dyads(n: int) -> np.ndarray:
    """(n choose 3, 3) array of dyad indices forming each node triple."""
    rows = []
    for a in range(n):
        for b in range(a + 1, n):
            for c in range(b + 1, n):
                rows.append(
                    (dyad_index(a, b, n).k, dyad_index(a, c, n).k, dyad_index(b, c, n).k)
                )
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


@dataclass(frozen=True)
class SmallGraph:
    """Undirected simple graph on ``n`` nodes; bit ``k`` of ``mask`` is dyad ``k``."""

    n: int
    mask: int = 0

    def __post_init__(self) -> None:
        _check_n(self.n)
        if self.mask < 0 or self.mask >> n_dyads(self.n):
            raise GraphError(f"mask {self.mask:#x} has bits beyond the {n_dyads(self.n)} dyads")

    @classmethod
    def empty(cls, n: int) -> SmallGraph:
        return cls(n, 0)

    @classmethod
    def complete(cls, n: int) -> SmallGraph:
        return cls(n, (1 << n_dyads(n)) - 1)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> SmallGraph:
        mask = 0
        for i, j in edges:
            mask |= 1 << dyad_index(i, j, n).k
        return cls(n, mask)

    @property
    def n_dyads(self) -> int:
        return n_dyads(self.n)

    def edges(self) -> list[tuple[int, int]]:
        pairs = dyad_pairs(self.n)
        return [pairs[k] for k in range(self.n_dyads) if self.mask >> k & 1]

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.mask >> dyad_index(i, j, self.n).k & 1)

    def with_dyad(self, k: int) -> SmallGraph:
        return SmallGraph(self.n, self.mask | (1 << k))

    def without_dyad(self, k: int) -> SmallGraph:
        return SmallGraph(self.n, self.mask & ~(1 << k))

    def neighbors(self, i: int) -> list[int]:
        return [j for j in range(self.n) if j != i and self.has_edge(i, j)]

    def degrees(self) -> list[int]:
        deg = [0] * self.n
        for i, j in self.edges():
            deg[i] += 1
            deg[j] += 1
        return deg

    def __len__(self) -> int:
        return self.mask.bit_count()

    def _check_compatible(self, other: SmallGraph) -> None:
        if not isinstance(other, SmallGraph):
            raise TypeError(f"expected SmallGraph, got {type(other).__name__}")
        if other.n != self.n:
            raise GraphError(f"node counts differ: {self.n} vs {other.n}")

    def __or__(self, other: SmallGraph) -> SmallGraph:
        self._check_compatible(other)
        return SmallGraph(self.n, self.mask | other.mask)

    def __and__(self, other: SmallGraph) -> SmallGraph:
        self._check_compatible(other)
        return SmallGraph(self.n, self.mask & other.mask)

    def __sub__(self, other: SmallGraph) -> SmallGraph:
        self._check_compatible(other)
        return SmallGraph(self.n, self.mask & ~other.mask)

    def issubset(self, other: SmallGraph) -> bool:
        self._check_compatible(other)
        return self.mask & ~other.mask == 0

    def issuperset(self, other: SmallGraph) -> bool:
        return other.issubset(self)


def union(a: SmallGraph, b: SmallGraph) -> SmallGraph:
    return a | b


def intersection(a: SmallGraph, b: SmallGraph) -> SmallGraph:
    return a & b


def difference(a: SmallGraph, b: SmallGraph) -> SmallGraph:
    return a - b


def split_transition(y_prev: SmallGraph, y_curr: SmallGraph) -> tuple[SmallGraph, SmallGraph]:
    """Formation network (union) and persistence network (intersection)."""
    return y_prev | y_curr, y_prev & y_curr


def reconstruct_target(y_plus: SmallGraph, y_minus: SmallGraph, y_prev: SmallGraph) -> SmallGraph:
    """Recover the current network from its formation and persistence parts."""
    if not y_plus.issuperset(y_prev):
        raise GraphError("formation network must contain the previous network")
    if not y_minus.issubset(y_prev):
        raise GraphError("persistence network must be contained in the previous network")
    return y_minus | (y_plus - y_prev)


def reconstruct_target_alt(y_plus: SmallGraph, y_minus: SmallGraph, y_prev: SmallGraph) -> SmallGraph:
    # second closed form of the same identity; kept for cross-checking
    return y_plus - (y_prev - y_minus)


# --- sample spaces -----------------------------------------------------------

DEFAULT_STATE_BUDGET = 1 << 24


class EnumerationBudgetError(RuntimeError):
    """A sample space is larger than the configured enumeration cap."""


def _check_budget(m: int, budget: int) -> None:
    if (1 << m) > budget:
        raise EnumerationBudgetError(
            f"sample space of 2^{m} states exceeds the budget of {budget} states"
        )


def _deposit(free: np.ndarray) -> np.ndarray:
    """Scatter the bits of 0..2^m-1 onto the dyad positions in ``free``."""
    m = len(free)
    counters = np.arange(1 << m, dtype=np.uint64)
    out = np.zeros(1 << m, dtype=np.uint64)
    for b, pos in enumerate(free):
        out |= ((counters >> np.uint64(b)) & np.uint64(1)) << np.uint64(pos)
    return out


def free_dyads(y_prev: SmallGraph) -> np.ndarray:
    return np.array([k for k in range(y_prev.n_dyads) if not y_prev.mask >> k & 1], dtype=np.int64)


def present_dyads(y_prev: SmallGraph) -> np.ndarray:
    return np.array([k for k in range(y_prev.n_dyads) if y_prev.mask >> k & 1], dtype=np.int64)


def formation_masks(y_prev: SmallGraph, budget: int = DEFAULT_STATE_BUDGET) -> np.ndarray:
    """Bitmasks of every superset of ``y_prev``, ascending in the free dyads."""
    free = free_dyads(y_prev)
    _check_budget(len(free), budget)
    return _deposit(free) | np.uint64(y_prev.mask)


def persistence_masks(y_prev: SmallGraph, budget: int = DEFAULT_STATE_BUDGET) -> np.ndarray:
    """Bitmasks of every subset of ``y_prev``, ascending."""
    present = present_dyads(y_prev)
    _check_budget(len(present), budget)
    return _deposit(present)


def all_masks(n: int, budget: int = DEFAULT_STATE_BUDGET) -> np.ndarray:
    d = n_dyads(n)
    _check_budget(d, budget)
    return np.arange(1 << d, dtype=np.uint64)


def enumerate_formation_space(y_prev: SmallGraph, budget: int = DEFAULT_STATE_BUDGET) -> Iterator[SmallGraph]:
    for m in formation_masks(y_prev, budget):
        yield SmallGraph(y_prev.n, int(m))


def enumerate_persistence_space(y_prev: SmallGraph, budget: int = DEFAULT_STATE_BUDGET) -> Iterator[SmallGraph]:
    for m in persistence_masks(y_prev, budget):
        yield SmallGraph(y_prev.n, int(m))


def mask_bits(masks: np.ndarray, n: int) -> np.ndarray:
    """(len(masks), D) 0/1 matrix of dyad states."""
    shifts = np.arange(n_dyads(n), dtype=np.uint64)
    return ((masks[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.int8)


# --- attributes and panels ---------------------------------------------------


class Decision(enum.Enum):
    COOPERATE = "C"
    DEFECT = "D"
    NONE = "N"

    @classmethod
    def parse(cls, value: str | Decision) -> Decision:
        if isinstance(value, Decision):
            return value
        key = str(value).strip()
        for d in cls:
            if key == d.value or key.upper() == d.name:
                return d
        if key.lower() in ("cooperate", "cooperation"):
            return cls.COOPERATE
        if key.lower() in ("defect", "defection"):
            return cls.DEFECT
        raise ValueError(f"unknown decision {value!r}; expected one of C, D, N")


CATEGORICAL_ATTRIBUTES = ("decision",)
NUMERIC_ATTRIBUTES = ("wealth",)


@dataclass(frozen=True)
class AttributeTable:
    decision: tuple[Decision, ...]
    wealth: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "decision", tuple(Decision.parse(d) for d in self.decision))
        object.__setattr__(self, "wealth", tuple(int(w) for w in self.wealth))
        if len(self.decision) != len(self.wealth):
            raise GraphError(
                f"decision and wealth lengths differ: {len(self.decision)} vs {len(self.wealth)}"
            )

    @classmethod
    def uniform(cls, n: int, decision: Decision = Decision.NONE, wealth: int = 500) -> AttributeTable:
        return cls((decision,) * n, (wealth,) * n)

    @property
    def n(self) -> int:
        return len(self.decision)

    def column(self, name: str) -> tuple:
        if name == "decision":
            return self.decision
        if name == "wealth":
            return self.wealth
        raise KeyError(f"unknown attribute {name!r}; available: decision, wealth")


@dataclass(frozen=True)
class Snapshot:
    t: int
    graph: SmallGraph
    attrs: AttributeTable


@dataclass(frozen=True)
class TransitionView:
    """One observed step ``y_prev -> y_curr`` with the attributes at the target time."""

    y_prev: SmallGraph
    y_curr: SmallGraph
    attrs: AttributeTable

    def __post_init__(self) -> None:
        if self.y_prev.n != self.y_curr.n:
            raise GraphError(f"node counts differ: {self.y_prev.n} vs {self.y_curr.n}")
        if self.attrs.n != self.y_prev.n:
            raise GraphError(f"attribute table has {self.attrs.n} rows for {self.y_prev.n} nodes")

    @property
    def n(self) -> int:
        return self.y_prev.n

    @property
    def y_plus(self) -> SmallGraph:
        return self.y_prev | self.y_curr

    @property
    def y_minus(self) -> SmallGraph:
        return self.y_prev & self.y_curr


@dataclass(frozen=True)
class Game:
    game_id: str
    n: int
    snapshots: tuple[Snapshot, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        if len(self.snapshots) < 2:
            raise GraphError(f"game {self.game_id!r} needs at least 2 snapshots")
        last = None
        for snap in self.snapshots:
            if snap.graph.n != self.n or snap.attrs.n != self.n:
                raise GraphError(f"game {self.game_id!r}: snapshot t={snap.t} is not on {self.n} nodes")
            if last is not None and snap.t <= last:
                raise GraphError(f"game {self.game_id!r}: time indices must strictly increase")
            last = snap.t

    def transitions(self) -> list[TransitionView]:
        s = self.snapshots
        return [TransitionView(s[i - 1].graph, s[i].graph, s[i].attrs) for i in range(1, len(s))]


@dataclass(frozen=True)
class Panel:
    games: tuple[Game, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "games", tuple(self.games))

    def transitions(self) -> list[tuple[int, int, TransitionView]]:
        """``(game position, target time, view)`` in game-then-time order."""
        out = []
        for g, game in enumerate(self.games):
            for snap, tv in zip(game.snapshots[1:], game.transitions()):
                out.append((g, snap.t, tv))
        return out

    @property
    def n_transitions(self) -> int:
        return sum(len(g.snapshots) - 1 for g in self.games)

    def slice_by_step(self) -> dict[int, Panel]:
        """Sub-panels holding only the ``k``-th transition of each game (k = 1, 2, ...)."""
        steps: dict[int, list[Game]] = {}
        for game in self.games:
            for k in range(1, len(game.snapshots)):
                pair = (game.snapshots[k - 1], game.snapshots[k])
                steps.setdefault(k, []).append(Game(game.game_id, game.n, pair))
        return {k: Panel(tuple(gs)) for k, gs in sorted(steps.items())}
