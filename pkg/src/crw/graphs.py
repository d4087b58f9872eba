"""Graph containers, generators, contraction, BFS and file I/O.

Vertices are dense integer ids ``0..n-1``. Every structure here is treated
as immutable once built.
"""
from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import networkx as nx
import numpy as np

__all__ = [
    "Graph",
    "WeightedMultigraph",
    "GraphError",
    "gen_path",
    "gen_cycle",
    "gen_complete",
    "gen_star",
    "gen_bull",
    "gen_torus",
    "gen_grid",
    "gen_random_tree",
    "gen_random_regular",
    "gen_gnp",
    "gen_random_bounded_degree",
    "contract",
    "bfs_distances",
    "bfs_parents",
    "save_graph",
    "load_graph",
    "graph_to_dict",
    "graph_from_dict",
]

RETRY_BUDGET = 1000


class GraphError(ValueError):
    """Invalid graph parameters or structure."""


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph stored as sorted adjacency tuples.

    ``meta`` carries optional provenance such as the lattice shape of a
    torus; it does not take part in equality.
    """

    n: int
    adj: tuple[tuple[int, ...], ...]
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.n < 1 or len(self.adj) != self.n:
            raise GraphError("adjacency length must equal n >= 1")
        arcs = set()
        for v, nb in enumerate(self.adj):
            if any(a >= b for a, b in zip(nb, nb[1:])):
                raise GraphError(f"neighbours of {v} must be sorted and distinct")
            for u in nb:
                if u == v:
                    raise GraphError(f"self-loop at {v}")
                if not 0 <= u < self.n:
                    raise GraphError(f"neighbour {u} of {v} out of range")
                arcs.add((v, u))
        if any((u, v) not in arcs for v, u in arcs):
            raise GraphError("asymmetric adjacency")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], meta: dict | None = None) -> Graph:
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if u == v:
                raise GraphError(f"self-loop at {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u},{v}) out of range")
            if v in nbrs[u]:
                raise GraphError(f"duplicate edge ({u},{v})")
            nbrs[u].add(v)
            nbrs[v].add(u)
        return cls(n, tuple(tuple(sorted(s)) for s in nbrs), dict(meta or {}))

    @property
    def m(self) -> int:
        return sum(len(nb) for nb in self.adj) // 2

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    @property
    def degrees(self) -> list[int]:
        return [len(nb) for nb in self.adj]

    @property
    def max_degree(self) -> int:
        return max(self.degrees)

    def edges(self) -> Iterator[tuple[int, int]]:
        for u, nb in enumerate(self.adj):
            for v in nb:
                if u < v:
                    yield u, v

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adj[u]

    def slots(self) -> tuple[tuple[int, ...], ...]:
        """Edge half-slots per vertex; for a simple graph this is the adjacency."""
        return self.adj

    def is_connected(self) -> bool:
        return min(bfs_distances(self, 0)) >= 0

    def is_tree(self) -> bool:
        return self.m == self.n - 1 and self.is_connected()

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges())
        return g


@dataclass(frozen=True)
class WeightedMultigraph:
    """Undirected multigraph with positive edge weights; loops allowed.

    ``members`` maps each vertex to the original vertices it stands for when
    the multigraph came out of :func:`contract`.
    """

    n: int
    edges: tuple[tuple[int, int, float, int], ...]
    members: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        for u, v, w, mult in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge ({u},{v}) out of range")
            if not w > 0:
                raise GraphError("edge weights must be strictly positive")
            if mult < 1 or int(mult) != mult:
                raise GraphError("multiplicities must be positive integers")

    @property
    def total_weight(self) -> float:
        return float(sum(w * mult for _, _, w, mult in self.edges))

    @property
    def edge_count(self) -> int:
        return sum(mult for *_, mult in self.edges)

    def slots(self) -> tuple[tuple[int, ...], ...]:
        """Half-slots per vertex, sorted; a loop contributes two slots back to its vertex.

        Only meaningful for unit weights, where a CRW choice is between two
        uniformly random incident edge ends.
        """
        if any(w != 1 for _, _, w, _ in self.edges):
            raise GraphError("choice semantics need unit weights")
        out: list[list[int]] = [[] for _ in range(self.n)]
        for u, v, _, mult in self.edges:
            out[u].extend([v] * mult)
            out[v].extend([u] * mult)
        return tuple(tuple(sorted(s)) for s in out)

    def weight_matrix(self) -> np.ndarray:
        """Symmetric matrix of weight*multiplicity; a loop counts twice on the diagonal."""
        W = np.zeros((self.n, self.n))
        for u, v, w, mult in self.edges:
            W[u, v] += w * mult
            if u != v:
                W[v, u] += w * mult
            else:
                W[u, u] += w * mult
        return W

    @classmethod
    def from_graph(cls, G: Graph, weights: dict[tuple[int, int], float] | None = None) -> WeightedMultigraph:
        edges = []
        for u, v in G.edges():
            w = 1.0 if weights is None else float(weights[(u, v)])
            edges.append((u, v, w, 1))
        return cls(G.n, tuple(edges), tuple((v,) for v in range(G.n)))


# ---------------------------------------------------------------------------
# deterministic families


def _need(cond: bool, msg: str) -> None:
    if not cond:
        raise GraphError(msg)


def gen_path(n: int) -> Graph:
    _need(n >= 2, "path needs n >= 2")
    return Graph.from_edges(n, ((i, i + 1) for i in range(n - 1)), {"family": "path"})


def gen_cycle(n: int) -> Graph:
    _need(n >= 3, "cycle needs n >= 3")
    return Graph.from_edges(n, ((i, (i + 1) % n) for i in range(n)), {"family": "cycle"})


def gen_complete(n: int) -> Graph:
    _need(n >= 2, "complete graph needs n >= 2")
    return Graph.from_edges(n, itertools.combinations(range(n), 2), {"family": "complete"})


def gen_star(n: int) -> Graph:
    """Star with centre 0 and ``n - 1`` leaves."""
    _need(n >= 2, "star needs n >= 2")
    return Graph.from_edges(n, ((0, i) for i in range(1, n)), {"family": "star"})


def gen_bull() -> Graph:
    """Five-vertex bull: pendant 0, triangle 1-2-3, pendant 4 hanging off 3."""
    return Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)], {"family": "bull"})


def _lattice(k: int, d: int, periodic: bool) -> Graph:
    n = k**d
    edges = []
    for idx in range(n):
        coords = np.unravel_index(idx, (k,) * d)
        for axis in range(d):
            c = coords[axis] + 1
            if c == k:
                if not periodic:
                    continue
                c = 0
            nxt = list(coords)
            nxt[axis] = c
            edges.append((idx, int(np.ravel_multi_index(nxt, (k,) * d))))
    family = "torus" if periodic else "grid"
    return Graph.from_edges(n, edges, {"family": family, "k": k, "d": d, "periodic": periodic})


def gen_torus(k: int, d: int) -> Graph:
    """Discrete torus Z_k^d; vertex id is the row-major index of its coordinates."""
    _need(d >= 1, "dimension must be >= 1")
    _need(k >= 3, "torus needs k >= 3 (k = 2 would create parallel edges)")
    return _lattice(k, d, True)


def gen_grid(k: int, d: int) -> Graph:
    _need(d >= 1, "dimension must be >= 1")
    _need(k >= 2, "grid needs k >= 2")
    return _lattice(k, d, False)


def lattice_coords(G: Graph, v: int) -> tuple[int, ...]:
    k, d = G.meta["k"], G.meta["d"]
    return tuple(int(c) for c in np.unravel_index(v, (k,) * d))


# ---------------------------------------------------------------------------
# random families


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def gen_random_tree(n: int, dmax: int, seed: int) -> Graph:
    """Random recursive tree where each new vertex attaches to a uniform vertex of spare degree."""
    _need(n >= 2, "tree needs n >= 2")
    _need(dmax >= 2, "tree needs dmax >= 2")
    rng = _rng(seed)
    deg = [0] * n
    edges = []
    open_ = [0]
    for v in range(1, n):
        i = int(rng.integers(len(open_)))
        u = open_[i]
        edges.append((u, v))
        deg[u] += 1
        deg[v] += 1
        if deg[u] == dmax:
            open_[i] = open_[-1]
            open_.pop()
        open_.append(v)
    # relabel so the generation order does not leak into vertex ids
    perm = rng.permutation(n)
    return Graph.from_edges(n, ((int(perm[u]), int(perm[v])) for u, v in edges),
                            {"family": "tree", "dmax": dmax, "seed": seed})


def _connected_sample(make, seed, what: str) -> Graph:
    seq = np.random.SeedSequence(seed)
    for child in seq.spawn(RETRY_BUDGET):
        g = make(int(child.generate_state(1)[0]))
        if g.is_connected():
            return g
    raise GraphError(f"no connected {what} sample within {RETRY_BUDGET} retries")


def gen_random_regular(n: int, d: int, seed: int) -> Graph:
    _need(n > d >= 1, "random regular graph needs n > d >= 1")
    _need(n * d % 2 == 0, "n*d must be even")

    def make(s: int) -> Graph:
        g = nx.random_regular_graph(d, n, seed=s)
        return Graph.from_edges(n, g.edges(), {"family": "regular", "d": d, "seed": seed})

    return _connected_sample(make, seed, f"{d}-regular graph")


def gen_gnp(n: int, p: float, seed: int) -> Graph:
    _need(n >= 2, "G(n,p) needs n >= 2")
    _need(0 < p <= 1, "p must lie in (0, 1]")

    def make(s: int) -> Graph:
        g = nx.gnp_random_graph(n, p, seed=s)
        return Graph.from_edges(n, g.edges(), {"family": "gnp", "p": p, "seed": seed})

    return _connected_sample(make, seed, "G(n,p)")


def gen_random_bounded_degree(n: int, dmax: int, extra: int, seed: int) -> Graph:
    """Random tree of max degree ``dmax`` plus up to ``extra`` random chords keeping the degree bound."""
    tree = gen_random_tree(n, dmax, seed)
    rng = _rng([seed, 1])
    nbrs = [set(nb) for nb in tree.adj]
    added = 0
    for _ in range(20 * extra + 20):
        if added >= extra:
            break
        u, v = (int(x) for x in rng.integers(n, size=2))
        if u == v or v in nbrs[u] or len(nbrs[u]) >= dmax or len(nbrs[v]) >= dmax:
            continue
        nbrs[u].add(v)
        nbrs[v].add(u)
        added += 1
    edges = [(u, v) for u in range(n) for v in nbrs[u] if u < v]
    return Graph.from_edges(n, edges, {"family": "bounded", "dmax": dmax, "seed": seed})


# ---------------------------------------------------------------------------
# structure


def contract(G: Graph, S: Iterable[int]) -> WeightedMultigraph:
    """Merge ``S`` into one vertex, keeping parallel edges and turning S-internal edges into loops.

    New ids follow the order of each group's smallest original vertex.
    """
    S = sorted(set(S))
    _need(len(S) >= 1, "contracted set must be nonempty")
    _need(len(S) < G.n, "contracted set must be a proper subset")
    _need(all(0 <= s < G.n for s in S), "contracted set out of range")
    rep = S[0]
    groups = [(v,) for v in range(G.n) if v not in S or v == rep]
    groups = [tuple(S) if g == (rep,) else g for g in groups]
    new_id = {}
    for i, g in enumerate(groups):
        for v in g:
            new_id[v] = i
    counts: dict[tuple[int, int], int] = {}
    for u, v in G.edges():
        a, b = sorted((new_id[u], new_id[v]))
        counts[(a, b)] = counts.get((a, b), 0) + 1
    edges = tuple((a, b, 1.0, c) for (a, b), c in sorted(counts.items()))
    return WeightedMultigraph(len(groups), edges, tuple(groups))


def bfs_distances(G, source: int | Sequence[int]) -> list[int]:
    """Hop distances from ``source`` (a vertex or a set of vertices); -1 if unreachable."""
    sources = [source] if isinstance(source, (int, np.integer)) else list(source)
    adj = G.slots()
    dist = [-1] * G.n
    q = deque()
    for s in sources:
        if dist[s] < 0:
            dist[s] = 0
            q.append(s)
    while q:
        u = q.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def bfs_parents(G: Graph, target: int) -> list[int]:
    """For each vertex, its smallest-id neighbour one step closer to ``target``.

    The target maps to its smallest neighbour.
    """
    dist = bfs_distances(G, target)
    parent = []
    for v in range(G.n):
        if v == target:
            parent.append(G.adj[v][0])
        else:
            parent.append(next(u for u in G.adj[v] if dist[u] == dist[v] - 1))
    return parent


# ---------------------------------------------------------------------------
# I/O


def graph_to_dict(G: Graph | WeightedMultigraph) -> dict:
    if isinstance(G, WeightedMultigraph):
        return {
            "n": G.n,
            "edges": [[u, v] for u, v, _, _ in G.edges],
            "weights": [w for _, _, w, _ in G.edges],
            "multiplicities": [m for *_, m in G.edges],
            "members": [list(g) for g in G.members],
        }
    out = {"n": G.n, "edges": [list(e) for e in G.edges()]}
    if G.meta:
        out["meta"] = G.meta
    return out


def graph_from_dict(data: dict) -> Graph | WeightedMultigraph:
    n = int(data["n"])
    edges = [tuple(int(x) for x in e) for e in data["edges"]]
    if "weights" in data or "multiplicities" in data:
        ws = data.get("weights") or [1.0] * len(edges)
        ms = data.get("multiplicities") or [1] * len(edges)
        members = tuple(tuple(int(x) for x in g) for g in data.get("members", ()))
        return WeightedMultigraph(n, tuple((u, v, float(w), int(m)) for (u, v), w, m in zip(edges, ws, ms)), members)
    return Graph.from_edges(n, edges, data.get("meta"))


def save_graph(G: Graph | WeightedMultigraph, path: str | Path) -> None:
    """Write JSON for ``*.json`` paths, the ``n m`` / ``u v`` edge list otherwise."""
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(graph_to_dict(G), indent=1) + "\n")
        return
    if not isinstance(G, Graph):
        raise GraphError("edge-list format holds simple graphs only; use .json")
    lines = [f"{G.n} {G.m}"] + [f"{u} {v}" for u, v in G.edges()]
    path.write_text("\n".join(lines) + "\n")


def load_graph(path: str | Path) -> Graph | WeightedMultigraph:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return graph_from_dict(json.loads(text))
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    n, m = int(rows[0][0]), int(rows[0][1])
    edges = [(int(a), int(b)) for a, b in rows[1:]]
    if len(edges) != m:
        raise GraphError(f"header declares {m} edges, file has {len(edges)}")
    return Graph.from_edges(n, edges)

