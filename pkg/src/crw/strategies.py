"""Named CRW strategies: static α-tables, weight recipes, and coverage-aware rules."""
from __future__ import annotations

import math

import numpy as np

from .boost import ChoiceLayer
from .exact import spectral
from .graphs import Graph, GraphError, bfs_distances, bfs_parents, lattice_coords
from .walk import (
    PreferUncovered,
    Strategy,
    StrategyTable,
    TableRule,
    TierRule,
    UniformRule,
    alpha_for_weighting,
)

__all__ = [
    "greedy_toward",
    "distance_halving_weights",
    "distance_halving_strategy",
    "transient_weights",
    "tree_sigma_orders",
    "tree_sigma_strategy",
    "tree_edge_weights",
    "torus_product_strategy",
    "TorusRule",
    "TorusCover",
    "spanning_walk",
    "SpanningWalkCover",
    "spanning_walk_cover",
    "AttemptBoostRule",
    "PhasedBoostCover",
    "phased_boost_cover",
    "make_strategy",
    "STRATEGY_NAMES",
]


# ---------------------------------------------------------------------------
# hitting recipes


def greedy_toward(G: Graph, target: int) -> TierRule:
    """Take the BFS parent toward ``target`` whenever it is offered."""
    parent = bfs_parents(G, target)
    tiers = []
    for v in range(G.n):
        if v == target:
            tiers.append([list(G.adj[v])])
        else:
            rest = [u for u in G.adj[v] if u != parent[v]]
            tiers.append([[parent[v]], rest] if rest else [[parent[v]]])
    return TierRule(tiers, name="greedy")


def distance_halving_weights(G: Graph, target: int) -> dict[tuple[int, int], float]:
    """``w(uv) = 2^-min(d(u,x), d(v,x))``."""
    dist = bfs_distances(G, target)
    return {(u, v): 2.0 ** -min(dist[u], dist[v]) for u, v in G.edges()}


def distance_halving_strategy(G: Graph, target: int) -> StrategyTable:
    return alpha_for_weighting(G, distance_halving_weights(G, target))


def transient_weights(G: Graph, root: int) -> dict[tuple[int, int], float]:
    """``w(uv) = 2^min(d(u,r), d(v,r))``; for inspection only."""
    dist = bfs_distances(G, root)
    return {(u, v): 2.0 ** min(dist[u], dist[v]) for u, v in G.edges()}


# ---------------------------------------------------------------------------
# trees


def _require_tree(T: Graph) -> None:
    if not T.is_tree():
        raise GraphError("graph is not a tree")


def tree_sigma_orders(T: Graph, root: int, y: int) -> list[list[list[int]]]:
    """Tiers at each vertex: toward ``y`` first, toward ``root`` last, the rest tied.

    When the same neighbour is both toward ``y`` and toward ``root`` it is preferred.
    """
    _require_tree(T)
    dy = bfs_distances(T, y)
    dr = bfs_distances(T, root)
    orders = []
    for v in range(T.n):
        nb = T.adj[v]
        up = [u for u in nb if dy[u] < dy[v]]
        down = [u for u in nb if dr[u] < dr[v] and u not in up]
        mid = [u for u in nb if u not in up and u not in down]
        orders.append([t for t in (up, mid, down) if t])
    return orders


def tree_sigma_strategy(T: Graph, root: int, x: int, y: int) -> StrategyTable:
    if not T.has_edge(x, y):
        raise GraphError(f"{x}{y} is not an edge")
    return TierRule(tree_sigma_orders(T, root, y)).table(T)


def tree_edge_weights(T: Graph, root: int, x: int, y: int) -> dict[tuple[int, int], float]:
    """Reversible weighting equidistributed with sigma^{xy} up to the first visit to ``y``.

    ``w(xy) = 1``; every edge not on ``x``'s side of ``y`` gets weight 0.
    Keys are ``(min, max)`` vertex pairs.
    """
    if not T.has_edge(x, y):
        raise GraphError(f"{x}{y} is not an edge")
    from .walk import transitions_from_alpha

    P = transitions_from_alpha(T, tree_sigma_strategy(T, root, x, y)).matrix
    w = {tuple(sorted(e)): 0.0 for e in T.edges()}
    w[tuple(sorted((x, y)))] = 1.0
    # walk outward from x inside the component of T - y
    stack = [(x, y)]
    while stack:
        v, toward = stack.pop()
        base = w[tuple(sorted((v, toward)))]
        for u in T.adj[v]:
            if u == toward:
                continue
            w[tuple(sorted((v, u)))] = base * P[v, u] / P[v, toward]
            stack.append((u, v))
    return w


# ---------------------------------------------------------------------------
# lattices


class TorusRule(Strategy):
    """Dimension-priority rule on a torus or grid.

    Moves along the first axis whose coordinate differs from the target come
    first, toward before away, then the next differing axis, and so on.
    Moves along axes that already match are tied last. At the target every
    option is tied.
    """

    name = "torus"

    def __init__(self, G: Graph, target: int | None = None):
        meta = G.meta
        if meta.get("family") not in ("torus", "grid"):
            raise GraphError("torus strategy needs a graph from gen_torus or gen_grid")
        self.k, self.d, self.periodic = meta["k"], meta["d"], meta["periodic"]
        self.coords = [lattice_coords(G, v) for v in range(G.n)]
        self.target = target

    def _dist(self, a: int, b: int) -> int:
        diff = abs(a - b)
        return min(diff, self.k - diff) if self.periodic else diff

    def rank(self, v: int, u: int, target: int) -> int:
        cv, cu, ct = self.coords[v], self.coords[u], self.coords[target]
        j = 0
        while cv[j] == cu[j]:
            j += 1
        if cv[j] == ct[j]:
            return 2 * self.d
        # only a strict decrease counts as toward (odd cycles have a level move at the antipode)
        away = self._dist(cu[j], ct[j]) >= self._dist(cv[j], ct[j])
        return 2 * j + int(away)

    def prefer(self, v: int, a: int, b: int, target: int) -> int:
        if a == b or v == target:
            return a
        return b if self.rank(v, b, target) < self.rank(v, a, target) else a

    def choose(self, t, v, a, b, cov, rng):
        return self.prefer(v, a, b, self.target)

    def table(self, G):
        orders = []
        for v in range(G.n):
            if v == self.target:
                orders.append([list(G.adj[v])])
                continue
            groups: dict[int, list[int]] = {}
            for u in G.adj[v]:
                groups.setdefault(self.rank(v, u, self.target), []).append(u)
            orders.append([groups[r] for r in sorted(groups)])
        return TierRule(orders).table(G)


def torus_product_strategy(G: Graph, target: int) -> TorusRule:
    return TorusRule(G, target)


def boustrophedon(k: int, d: int) -> list[int]:
    """Snake order through the lattice; consecutive entries are adjacent."""
    if d == 1:
        return list(range(k))
    inner = boustrophedon(k, d - 1)
    block = k ** (d - 1)
    out = []
    for i in range(k):
        layer = inner if i % 2 == 0 else inner[::-1]
        out.extend(i * block + v for v in layer)
    return out


class TorusCover(Strategy):
    """Walk a snake-order Hamilton path, steering with :class:`TorusRule` toward each waypoint in turn.

    By default every waypoint is visited in order, so the cost is at most
    ``n`` neighbour-hitting times. With ``skip_covered`` the rule aims at the
    first waypoint not yet visited instead.
    """

    name = "torus-cover"

    def __init__(self, G: Graph, skip_covered: bool = False):
        self.rule = TorusRule(G)
        self.path = boustrophedon(G.meta["k"], G.meta["d"])
        self.skip_covered = skip_covered

    def bind(self):
        path, rule, skip = self.path, self.rule, self.skip_covered
        end = len(path)
        state = [0]

        def choose(t, v, a, b, cov, rng):
            i = state[0]
            if skip:
                visited = cov.visited
                while i < end and visited[path[i]]:
                    i += 1
            else:
                while i < end and v == path[i]:
                    i += 1
            state[0] = i
            if i == end:
                return a
            return rule.prefer(v, a, b, path[i])

        return choose


# ---------------------------------------------------------------------------
# spanning walk


def spanning_walk(G: Graph, start: int) -> list[int]:
    """Closed DFS traversal of a spanning tree from ``start`` (2n - 1 entries)."""
    seen = [False] * G.n
    seen[start] = True
    walk = [start]
    stack = [(start, iter(G.adj[start]))]
    while stack:
        v, it = stack[-1]
        for u in it:
            if not seen[u]:
                seen[u] = True
                walk.append(u)
                stack.append((u, iter(G.adj[u])))
                break
        else:
            stack.pop()
            if stack:
                walk.append(stack[-1][0])
    return walk


class SpanningWalkCover(Strategy):
    """Greedy toward the next uncovered waypoint of a spanning walk."""

    name = "spanning"

    def __init__(self, G: Graph, start: int):
        self.G = G
        self.waypoints = spanning_walk(G, start)
        self._parents: dict[int, list[int]] = {}

    def parents(self, target: int) -> list[int]:
        p = self._parents.get(target)
        if p is None:
            p = self._parents[target] = bfs_parents(self.G, target)
        return p

    def bind(self):
        way = self.waypoints
        state = [0]

        def choose(t, v, a, b, cov, rng):
            i = state[0]
            visited = cov.visited
            while i < len(way) and visited[way[i]]:
                i += 1
            state[0] = i
            if i == len(way):
                return a
            f = self.parents(way[i])[v]
            return b if b == f and a != f else a

        return choose


def spanning_walk_cover(G: Graph, start: int) -> SpanningWalkCover:
    return SpanningWalkCover(G, start)


# ---------------------------------------------------------------------------
# boosted phases


class AttemptBoostRule:
    """Repeated attempts at hitting a set within a fixed horizon.

    Each attempt lasts ``horizon`` steps and follows the max-choice DP for
    the event "hit ``S`` within the remaining time"; ties go to the option
    closer to ``S``, then the smaller id.
    """

    def __init__(self, G: Graph, S, horizon: int, layer: ChoiceLayer | None = None):
        self.horizon = horizon
        n = G.n
        mask = np.zeros(n, dtype=bool)
        mask[list(S)] = True
        layer = layer or ChoiceLayer(G.slots())
        values = np.zeros((horizon, n))
        values[0] = mask
        for r in range(1, horizon):
            layer.apply(values[r - 1], "max", out=values[r])
            values[r, mask] = 1.0
        # values[r] = best probability with r more steps after this one
        self.values = values
        self.dist = bfs_distances(G, sorted(S))

    def prefer(self, s: int, a: int, b: int) -> int:
        """Choice at step ``s`` of the current attempt."""
        vals = self.values[self.horizon - 1 - s % self.horizon]
        va, vb = vals[a], vals[b]
        if va != vb:
            return a if va > vb else b
        ka, kb = (self.dist[a], a), (self.dist[b], b)
        return a if ka <= kb else b


class PhasedBoostCover(Strategy):
    """Simple random walk until few vertices remain, then boosted hitting of the rest.

    Phase 1 ends once at most ``floor(n / ln(n)^C)`` vertices are uncovered.
    Phase 2 repeats horizon-``T`` attempts at the uncovered set,
    ``T = ceil(4 t_rel ln n)``, rebuilding the DP whenever coverage grows.
    """

    name = "phased"

    def __init__(self, G: Graph, t_rel: float | None = None, C: float = 3.0):
        self.G = G
        n = G.n
        if t_rel is None:
            t_rel = spectral(G).t_rel if n > 1 else 1.0
        self.t_rel = t_rel
        self.C = C
        ln = math.log(n) if n > 1 else 1.0
        self.threshold = math.floor(n / ln**C) if n > 2 else 0
        self.horizon = max(1, math.ceil(4 * t_rel * ln))
        self.layer = ChoiceLayer(G.slots())

    def bind(self):
        G, n = self.G, self.G.n
        state = {"count": -1, "rule": None, "s": 0}

        def choose(t, v, a, b, cov, rng):
            if n - cov.count > self.threshold:
                return a
            if cov.count != state["count"]:
                state["count"] = cov.count
                state["rule"] = AttemptBoostRule(G, cov.uncovered(), self.horizon, self.layer)
                state["s"] = 0
            s = state["s"]
            state["s"] = s + 1
            return state["rule"].prefer(s, a, b)

        return choose


def phased_boost_cover(G: Graph, t_rel: float | None = None, C: float = 3.0) -> PhasedBoostCover:
    return PhasedBoostCover(G, t_rel, C)


# ---------------------------------------------------------------------------
# registry

STRATEGY_NAMES = (
    "srw", "greedy-uncovered", "greedy", "distance-halving", "optimal",
    "tree-sigma", "torus", "torus-cover", "spanning", "phased",
)


def make_strategy(name: str, G: Graph, *, target: int | None = None, start: int = 0,
                  root: int = 0, C: float = 3.0) -> Strategy:
    """Build a decision rule by name for the CLI and harness."""

    def need_target() -> int:
        if target is None:
            raise ValueError(f"strategy {name!r} needs a target")
        return target

    if name == "srw":
        return UniformRule()
    if name == "greedy-uncovered":
        return PreferUncovered()
    if name == "greedy":
        return greedy_toward(G, need_target())
    if name == "distance-halving":
        return TableRule(distance_halving_strategy(G, need_target()))
    if name == "optimal":
        from .exact import optimal_hitting

        return optimal_hitting(G, need_target()).rule
    if name == "tree-sigma":
        return TierRule(tree_sigma_orders(G, root, need_target()), name="tree-sigma")
    if name == "torus":
        return torus_product_strategy(G, need_target())
    if name == "torus-cover":
        return TorusCover(G)
    if name == "spanning":
        return spanning_walk_cover(G, start)
    if name == "phased":
        return phased_boost_cover(G, C=C)
    raise ValueError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGY_NAMES)}")
