"""The choice random walk: preference tables, exact transitions, and simulation.

A controller at vertex ``v`` is offered two neighbours sampled independently
and uniformly with replacement and moves to one of them. An unchanging
strategy is fully described by ``alpha_v(i, j)``, the probability of picking
``i`` when offered ``{i, j}``; the induced step law is

    q[v, i] = 2 * sum_j alpha_v(i, j) / d(v)**2,   alpha_v(i, i) = 1/2.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .graphs import Graph, WeightedMultigraph

__all__ = [
    "RngStream",
    "StrategyError",
    "StrategyTable",
    "TransitionMatrix",
    "Trajectory",
    "Coverage",
    "Strategy",
    "UniformRule",
    "TierRule",
    "OrderingRule",
    "TableRule",
    "PreferUncovered",
    "UntilHit",
    "UntilCover",
    "rank_probability",
    "alpha_from_ordering",
    "mixed_partition_alpha",
    "mixed_partition_p",
    "alpha_for_weighting",
    "transitions_from_alpha",
    "srw_matrix",
    "lazy_matrix",
    "weighted_walk_matrix",
    "step",
    "simulate",
]


class StrategyError(ValueError):
    """An α-table or weighting that cannot define a CRW strategy."""


# ---------------------------------------------------------------------------
# randomness


class RngStream:
    """Reproducible uniform stream keyed by ``(seed, index)``.

    Draws are buffered in blocks; the stream is fully determined by the key,
    so trial ``i`` sees the same numbers regardless of scheduling.
    """

    def __init__(self, seed: int = 0, index: int = 0, block: int = 4096):
        self.seed = int(seed)
        self.index = int(index)
        self.counter = 0
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(self.index,)))
        )
        self._block = block
        self._buf: list[float] = []
        self._pos = 0

    def random(self) -> float:
        pos = self._pos
        if pos == len(self._buf):
            self._buf = self._gen.random(self._block).tolist()
            pos = 0
        self._pos = pos + 1
        self.counter += 1
        return self._buf[pos]

    def randbelow(self, k: int) -> int:
        return int(self.random() * k)

    def numpy(self) -> np.random.Generator:
        """Independent numpy generator derived from the same key, for bulk draws."""
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(self.index, 1)))


# ---------------------------------------------------------------------------
# α-tables


def _neighbour_counts(G) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    out = []
    for s in G.slots():
        c = Counter(s)
        nbrs = tuple(sorted(c))
        out.append((nbrs, tuple(c[u] for u in nbrs)))
    return out


@dataclass(frozen=True)
class StrategyTable:
    """Unchanging CRW strategy.

    ``alpha[v]`` maps each neighbour pair ``(i, j)`` with ``i < j`` to the
    probability of choosing ``i`` over ``j``; the reverse preference is the
    complement, so the pair constraint cannot be violated. ``counts`` gives
    the number of edge slots to each neighbour (all ones on simple graphs).
    """

    neighbours: tuple[tuple[int, ...], ...]
    counts: tuple[tuple[int, ...], ...]
    alpha: tuple[dict[tuple[int, int], float], ...]

    def __post_init__(self):
        for v, table in enumerate(self.alpha):
            nb = set(self.neighbours[v])
            for (i, j), a in table.items():
                if i >= j or i not in nb or j not in nb:
                    raise StrategyError(f"pair {(i, j)} is not an ordered neighbour pair of {v}")
                if not 0.0 <= a <= 1.0:
                    raise StrategyError(f"alpha_{v}{(i, j)} = {a} outside [0, 1]")

    @property
    def n(self) -> int:
        return len(self.neighbours)

    def __call__(self, v: int, i: int, j: int) -> float:
        """Probability of choosing ``i`` at ``v`` when offered ``{i, j}``."""
        if i == j:
            return 0.5
        if i < j:
            return self.alpha[v].get((i, j), 0.5)
        return 1.0 - self.alpha[v].get((j, i), 0.5)

    def matrix(self, v: int) -> np.ndarray:
        nb = self.neighbours[v]
        index = {u: k for k, u in enumerate(nb)}
        A = np.full((len(nb), len(nb)), 0.5)
        for (i, j), a in self.alpha[v].items():
            ii, jj = index[i], index[j]
            A[ii, jj] = a
            A[jj, ii] = 1.0 - a
        return A

    def to_json(self) -> list[dict]:
        return [
            {"vertex": v, "pairs": [{"pair": [i, j], "alpha": a} for (i, j), a in sorted(t.items())]}
            for v, t in enumerate(self.alpha)
        ]

    @classmethod
    def from_json(cls, G, data: list[dict]) -> StrategyTable:
        nc = _neighbour_counts(G)
        alpha: list[dict] = [dict() for _ in range(G.n)]
        for row in data:
            for p in row["pairs"]:
                i, j = p["pair"]
                a = float(p["alpha"])
                if i > j:
                    i, j, a = j, i, 1.0 - a
                alpha[row["vertex"]][(i, j)] = a
        return cls(tuple(x[0] for x in nc), tuple(x[1] for x in nc), tuple(alpha))

    @classmethod
    def uniform(cls, G) -> StrategyTable:
        nc = _neighbour_counts(G)
        return cls(tuple(x[0] for x in nc), tuple(x[1] for x in nc), tuple({} for _ in nc))


def rank_probability(d: int, r: int) -> float:
    """Step probability to the rank-``r`` neighbour under a strict preference order of ``d`` neighbours."""
    if not 1 <= r <= d:
        raise ValueError(f"rank {r} outside 1..{d}")
    return (2 * (d - r) + 1) / d**2


def _tiers(order) -> list[list[int]]:
    return [list(t) if isinstance(t, (list, tuple, set, frozenset)) else [t] for t in order]


def alpha_from_ordering(G, orders: Sequence[Sequence]) -> StrategyTable:
    """Deterministic strategy from a tiered ranking of each neighbourhood.

    ``orders[v]`` lists tiers best first; a tier is a neighbour id or a
    collection of tied neighbours. Earlier tiers always win; ties are 1/2.
    """
    nc = _neighbour_counts(G)
    alpha = []
    for v, (nb, _) in enumerate(nc):
        tiers = _tiers(orders[v])
        tier_of = {}
        for k, tier in enumerate(tiers):
            for u in tier:
                if u in tier_of:
                    raise StrategyError(f"neighbour {u} ranked twice at {v}")
                tier_of[u] = k
        if set(tier_of) != set(nb):
            raise StrategyError(f"order at {v} must rank exactly the neighbours {nb}")
        table = {}
        for a_i, i in enumerate(nb):
            for j in nb[a_i + 1:]:
                if tier_of[i] != tier_of[j]:
                    table[(i, j)] = 1.0 if tier_of[i] < tier_of[j] else 0.0
        alpha.append(table)
    return StrategyTable(tuple(x[0] for x in nc), tuple(x[1] for x in nc), tuple(alpha))


def mixed_partition_p(a: int, b: int) -> float:
    """Probability of taking the A-option on a mixed A/B offer so that B is twice as likely."""
    if a == 0 or b == 0:
        return 0.5
    return b / (2 * (a + 2 * b))


def mixed_partition_alpha(G, heavy: Sequence[Iterable[int]]) -> StrategyTable:
    """Strategy under which every neighbour in ``heavy[v]`` is twice as likely as the rest."""
    nc = _neighbour_counts(G)
    alpha = []
    for v, (nb, _) in enumerate(nc):
        B = set(heavy[v])
        if not B <= set(nb):
            raise StrategyError(f"heavy set at {v} contains non-neighbours")
        a, b = len(nb) - len(B), len(B)
        p = mixed_partition_p(a, b)
        table = {}
        for x_i, i in enumerate(nb):
            for j in nb[x_i + 1:]:
                if (i in B) != (j in B):
                    table[(i, j)] = p if j in B else 1.0 - p
        alpha.append(table)
    return StrategyTable(tuple(x[0] for x in nc), tuple(x[1] for x in nc), tuple(alpha))


def _edge_weight(weights, u: int, v: int) -> float:
    if callable(weights):
        return float(weights(u, v))
    w = weights.get((u, v))
    if w is None:
        w = weights[(v, u)]
    return float(w)


def alpha_for_weighting(G: Graph, weights, tol: float = 1e-9) -> StrategyTable:
    """Emulate the random walk with step law proportional to edge weights.

    Incident weights at each vertex may take at most two values, and then
    only in ratio exactly 2.
    """
    heavy = []
    for v in range(G.n):
        ws = {u: _edge_weight(weights, v, u) for u in G.adj[v]}
        lo, hi = min(ws.values()), max(ws.values())
        if hi - lo <= tol * hi:
            heavy.append(())
            continue
        if abs(hi / lo - 2.0) > tol:
            raise StrategyError(f"incident weights at {v} have ratio {hi / lo}, need 1 or 2")
        bad = [u for u, w in ws.items() if abs(w - lo) > tol * hi and abs(w - hi) > tol * hi]
        if bad:
            raise StrategyError(f"incident weights at {v} take more than two values")
        heavy.append(tuple(u for u, w in ws.items() if abs(w - hi) <= tol * hi))
    return mixed_partition_alpha(G, heavy)


# ---------------------------------------------------------------------------
# transition matrices


@dataclass(frozen=True)
class TransitionMatrix:
    matrix: np.ndarray
    kind: str = "CRW"

    def __post_init__(self):
        P = self.matrix
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(P < -1e-15) or np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("transition matrix is not row-stochastic")
        P.setflags(write=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __getitem__(self, idx):
        return self.matrix[idx]


def transitions_from_alpha(G, table: StrategyTable) -> TransitionMatrix:
    """Exact one-step law of the CRW under an α-table."""
    nc = _neighbour_counts(G)
    if len(nc) != table.n:
        raise StrategyError("strategy table size does not match the graph")
    P = np.zeros((G.n, G.n))
    for v, (nb, counts) in enumerate(nc):
        if nb != table.neighbours[v]:
            raise StrategyError(f"strategy table references non-neighbours of {v}")
        c = np.asarray(counts, dtype=float)
        d = c.sum()
        A = table.matrix(v)
        # ordered slot pairs: same neighbour twice goes there; mixed pairs split by alpha
        q = (c * c + 2.0 * c * ((A * c[None, :]).sum(axis=1) - 0.5 * c)) / d**2
        P[v, list(nb)] = q
    return TransitionMatrix(P, "CRW")


def srw_matrix(G) -> TransitionMatrix:
    P = np.zeros((G.n, G.n))
    for v, s in enumerate(G.slots()):
        for u in s:
            P[v, u] += 1.0 / len(s)
    return TransitionMatrix(P, "SRW")


def lazy_matrix(G) -> TransitionMatrix:
    P = srw_matrix(G).matrix
    return TransitionMatrix(0.5 * (np.eye(G.n) + P), "LazySRW")


def weighted_walk_matrix(W: WeightedMultigraph | np.ndarray) -> TransitionMatrix:
    """Reversible walk stepping proportionally to incident edge weight."""
    M = W.weight_matrix() if isinstance(W, WeightedMultigraph) else np.asarray(W, dtype=float)
    return TransitionMatrix(M / M.sum(axis=1, keepdims=True), "Weighted")


# ---------------------------------------------------------------------------
# decision rules


class Coverage:
    """Visited-set summary handed to decision rules."""

    __slots__ = ("visited", "count", "n")

    def __init__(self, n: int, initial: Iterable[int] = ()):
        self.n = n
        self.visited = bytearray(n)
        self.count = 0
        for v in initial:
            self.add(v)

    def add(self, v: int) -> bool:
        if self.visited[v]:
            return False
        self.visited[v] = 1
        self.count += 1
        return True

    def uncovered(self) -> list[int]:
        return [v for v in range(self.n) if not self.visited[v]]

    @property
    def complete(self) -> bool:
        return self.count == self.n


class Strategy:
    """Controller decision rule.

    ``choose(t, v, a, b, coverage, rng)`` returns ``a`` or ``b``. Stateful
    strategies override :meth:`bind` to hand each trajectory its own chooser.
    When the offered options differ and the rule is indifferent it should
    return ``a``: the ordered pair is i.i.d., so this is exactly α = 1/2.
    """

    name = "strategy"

    def bind(self) -> Callable:
        return self.choose

    def choose(self, t: int, v: int, a: int, b: int, cov: Coverage, rng: RngStream) -> int:
        raise NotImplementedError

    def table(self, G) -> StrategyTable:
        raise TypeError(f"{self.name} is not an unchanging strategy")


class UniformRule(Strategy):
    """Simple random walk emulation."""

    name = "srw"

    def choose(self, t, v, a, b, cov, rng):
        return a

    def table(self, G):
        return StrategyTable.uniform(G)


class TierRule(Strategy):
    """Per-vertex tiered preference: lower tier wins, equal tiers tie."""

    name = "tiers"

    def __init__(self, tiers: Sequence[Sequence], name: str | None = None):
        self.orders = [_tiers(t) for t in tiers]
        self.rank = [{u: k for k, tier in enumerate(t) for u in tier} for t in self.orders]
        if name:
            self.name = name

    def choose(self, t, v, a, b, cov, rng):
        r = self.rank[v]
        return b if r[b] < r[a] else a

    def table(self, G):
        return alpha_from_ordering(G, self.orders)


class OrderingRule(Strategy):
    """Single global vertex ordering used at every vertex (earlier is better)."""

    name = "ordering"

    def __init__(self, ordering: Sequence[int]):
        self.position = [0] * len(ordering)
        for k, v in enumerate(ordering):
            self.position[v] = k

    def choose(self, t, v, a, b, cov, rng):
        pos = self.position
        return a if pos[a] < pos[b] else b

    def table(self, G):
        pos = self.position
        return alpha_from_ordering(G, [sorted(set(s), key=pos.__getitem__) for s in G.slots()])


class TableRule(Strategy):
    """Randomised rule sampling from an arbitrary α-table."""

    name = "alpha"

    def __init__(self, table: StrategyTable):
        self._table = table

    def choose(self, t, v, a, b, cov, rng):
        alpha = self._table(v, a, b)
        if alpha >= 1.0:
            return a
        if alpha <= 0.0:
            return b
        return a if rng.random() < alpha else b

    def table(self, G):
        return self._table


class PreferUncovered(Strategy):
    """Take an unvisited option whenever one is offered."""

    name = "greedy-uncovered"

    def choose(self, t, v, a, b, cov, rng):
        return b if cov.visited[a] and not cov.visited[b] else a


# ---------------------------------------------------------------------------
# stepping and trajectories


class UntilHit:
    def __init__(self, targets: Iterable[int]):
        self.targets = frozenset(targets)

    def __call__(self, t, v, cov) -> bool:
        return v in self.targets


class UntilCover:
    def __call__(self, t, v, cov) -> bool:
        return cov.count == cov.n


@dataclass
class Trajectory:
    start: int
    end: int
    steps: int
    stopped: bool
    vertices: list[int] | None = None
    offers: list[tuple[int, int]] | None = None
    first_visits: list[int] = field(default_factory=list)

    @property
    def truncated(self) -> bool:
        return not self.stopped


def step(G, strategy: Strategy, current: int, rng: RngStream, t: int = 0,
         cov: Coverage | None = None) -> int:
    nb = G.slots()[current]
    d = len(nb)
    a = nb[int(rng.random() * d)]
    b = nb[int(rng.random() * d)]
    if cov is None:
        cov = Coverage(G.n, [current])
    return strategy.choose(t, current, a, b, cov, rng)


def simulate(G, strategy: Strategy, start: int, stop=None, cap: int = 10**7,
             rng: RngStream | None = None, *, record: bool = False, offers: bool = False,
             covered: Iterable[int] = ()) -> Trajectory:
    """Run one CRW trajectory from ``start``.

    Stops at the first time ``stop(t, v, coverage)`` holds (checked before
    each step, so an already-satisfied predicate gives 0 steps) or after
    ``cap`` steps. ``first_visits[k]`` is the time the ``k``-th vertex was
    first visited, counting the start at time 0.
    """
    if cap <= 0:
        raise ValueError("cap must be positive")
    rng = rng or RngStream()
    adj = G.slots()
    cov = Coverage(G.n, covered)
    choose = strategy.bind()
    rand = rng.random
    first_visits = [0] * cov.count
    if cov.add(start):
        first_visits.append(0)
    visited = cov.visited
    path = [start] if record else None
    offered = [] if offers else None

    hit = None
    want_cover = False
    if isinstance(stop, UntilHit):
        hit = bytearray(G.n)
        for s in stop.targets:
            hit[s] = 1
    elif isinstance(stop, UntilCover):
        want_cover = True
    elif stop is not None and not callable(stop):
        raise TypeError("stop must be callable")

    n = G.n
    v = start
    t = 0
    stopped = False
    while True:
        if hit is not None:
            if hit[v]:
                stopped = True
                break
        elif want_cover:
            if cov.count == n:
                stopped = True
                break
        elif stop is not None and stop(t, v, cov):
            stopped = True
            break
        if t >= cap:
            break
        nb = adj[v]
        d = len(nb)
        a = nb[int(rand() * d)]
        b = nb[int(rand() * d)]
        if offered is not None:
            offered.append((a, b))
        v = choose(t, v, a, b, cov, rng)
        t += 1
        if not visited[v]:
            visited[v] = 1
            cov.count += 1
            first_visits.append(t)
        if path is not None:
            path.append(v)
    return Trajectory(start, v, t, stopped, path, offered, first_visits)


def chi_square_pvalue(observed: Sequence[int], probs: Sequence[float]) -> float:
    """Pearson goodness-of-fit p-value for a single multinomial row."""
    from scipy import stats

    observed = np.asarray(observed, dtype=float)
    probs = np.asarray(probs, dtype=float)
    keep = probs > 0
    expected = probs[keep] * observed.sum()
    if observed[~keep].sum() > 0:
        return 0.0
    stat = float(((observed[keep] - expected) ** 2 / expected).sum())
    return float(stats.chi2.sf(stat, max(int(keep.sum()) - 1, 1)))


def edge_table(G, P: TransitionMatrix | np.ndarray) -> dict[tuple[int, int], float]:
    """Arc-labelled transition probabilities ``{(u, v): P[u, v]}`` over the graph's arcs."""
    M = P.matrix if isinstance(P, TransitionMatrix) else P
    return {(u, v): float(M[u, v]) for u in range(G.n) for v in sorted(set(G.slots()[u]))}

