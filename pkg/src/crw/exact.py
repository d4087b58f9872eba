"""Exact optimal CRW hitting, return, and cover values, plus spectral helpers.

Optimal hitting uses policy iteration over vertex orderings: an ordering
strategy always prefers the offered neighbour with the smaller optimal
hitting time, so it suffices to search orderings, solving one linear system
per candidate. The cover problem becomes a hitting problem on
``(vertex, covered set)`` states and is solved layer by layer, largest
covered sets first; within a layer it is the same ordering search with the
exit values of larger sets as terminal costs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .boost import ChoiceLayer, _rank_weights
from .graphs import Graph, GraphError, WeightedMultigraph, bfs_distances, contract
from .walk import OrderingRule, StrategyTable, TransitionMatrix, alpha_from_ordering, srw_matrix

__all__ = [
    "HittingSolution",
    "CoverValue",
    "SpectralReport",
    "SolverError",
    "optimal_hitting",
    "value_iteration_hitting",
    "hitting_times",
    "srw_hitting_times",
    "ordering_transitions",
    "stationary",
    "optimal_return",
    "cover_mdp",
    "cover_value_iteration",
    "next_step_oracle",
    "spectral",
    "lazyconv_search",
    "lazyconv_all",
]

COVER_GUARD = 14
EIGEN_BUDGET = 2000
ORDER_TOL = 1e-9


class SolverError(RuntimeError):
    """Internal failure of an exact solver (singular system, no convergence)."""


# ---------------------------------------------------------------------------
# ordering strategies


def _ordering_from_values(h: np.ndarray, tol: float = ORDER_TOL) -> list[int]:
    """Sort by value; values within ``tol`` (relative, floor 1) are ordered by id."""
    idx = sorted(range(len(h)), key=lambda v: (h[v], v))
    out: list[int] = []
    i = 0
    while i < len(idx):
        base = h[idx[i]]
        if np.isinf(base):
            out.extend(sorted(idx[i:]))
            break
        j = i + 1
        while j < len(idx) and h[idx[j]] - base <= tol * max(1.0, abs(base)):
            j += 1
        out.extend(sorted(idx[i:j]))
        i = j
    return out


def _ordering_rows(layer: ChoiceLayer, position: np.ndarray, n: int) -> np.ndarray:
    """Transition rows of the ordering strategy for the layer's active vertices."""
    P = np.zeros((n, n))
    for idx, nbr, w in layer.groups:
        order = np.argsort(position[nbr], axis=1, kind="stable")
        ends = np.take_along_axis(nbr, order, axis=1)
        np.add.at(P, (np.repeat(idx, nbr.shape[1]), ends.ravel()), np.tile(w, len(idx)))
    return P


def ordering_transitions(G, ordering: Sequence[int]) -> TransitionMatrix:
    """Exact step law when every vertex prefers neighbours earlier in ``ordering``."""
    position = np.empty(G.n, dtype=np.intp)
    position[list(ordering)] = np.arange(G.n)
    return TransitionMatrix(_ordering_rows(ChoiceLayer(G.slots()), position, G.n), "CRW")


def _policy_iteration(slots, free: Sequence[int], terminal: dict[int, float],
                      max_iter: int | None = None, keep_trace: bool = False):
    """Minimise expected steps to absorption with terminal costs.

    Returns ``(h, ordering, iterations, residual, trace)``; ``h`` covers every
    vertex appearing in ``free`` or ``terminal`` (others are +inf).
    """
    n = len(slots)
    free = list(free)
    term = sorted(terminal)
    layer = ChoiceLayer(slots, active=free)
    h = np.full(n, np.inf)
    for y in term:
        h[y] = terminal[y]
    # initial proper policy: closer to an exit is better
    dist = bfs_distances(_SlotView(slots), term)
    top = max(terminal.values())
    h0 = h.copy()
    for v in free:
        h0[v] = top + dist[v]
    order = _ordering_from_values(h0)
    fidx = np.asarray(free, dtype=np.intp)
    tidx = np.asarray(term, dtype=np.intp)
    tval = np.asarray([terminal[y] for y in term])
    if max_iter is None:
        max_iter = 10 * n + 100
    trace = []
    prev = None
    for it in range(1, max_iter + 1):
        position = np.empty(n, dtype=np.intp)
        position[order] = np.arange(n)
        P = _ordering_rows(layer, position, n)
        Q = P[np.ix_(fidx, fidx)]
        A = np.eye(len(free)) - Q
        b = 1.0 + P[np.ix_(fidx, tidx)] @ tval
        try:
            hf = np.linalg.solve(A, b)
        except np.linalg.LinAlgError as exc:
            raise SolverError("singular hitting system") from exc
        residual = float(np.max(np.abs(A @ hf - b))) if len(free) else 0.0
        h = h.copy()
        h[fidx] = hf
        if keep_trace:
            trace.append(h.copy())
        new_order = _ordering_from_values(np.where(np.isfinite(h), h, np.inf))
        if new_order == order:
            return h, order, it, residual, trace
        if prev is not None and np.all(hf >= prev - 1e-12 * np.maximum(1.0, prev)):
            # only tie-level reshuffles remain
            return h, order, it, residual, trace
        prev = hf
        order = new_order
    raise SolverError(f"policy iteration did not converge in {max_iter} iterations")


class _SlotView:
    def __init__(self, slots):
        self._slots = slots
        self.n = len(slots)

    def slots(self):
        return self._slots


# ---------------------------------------------------------------------------
# hitting


@dataclass
class HittingSolution:
    """Optimal hitting times toward ``targets`` and the ordering that certifies them."""

    graph: Graph | WeightedMultigraph = field(repr=False)
    targets: frozenset
    h: np.ndarray
    ordering: list[int]
    iterations: int
    residual: float
    trace: list = field(default_factory=list, repr=False)

    @cached_property
    def strategy(self) -> StrategyTable:
        pos = self.position
        return alpha_from_ordering(self.graph, [sorted(set(s), key=pos.__getitem__) for s in self.graph.slots()])

    @property
    def position(self) -> list[int]:
        pos = [0] * len(self.ordering)
        for k, v in enumerate(self.ordering):
            pos[v] = k
        return pos

    @property
    def rule(self) -> OrderingRule:
        return OrderingRule(self.ordering)

    def transitions(self) -> TransitionMatrix:
        return ordering_transitions(self.graph, self.ordering)

    def labels(self) -> dict[tuple[int, int], float]:
        """Arc labels ``(u, v) -> P[u, v]`` of the optimal strategy, target rows included."""
        P = self.transitions().matrix
        return {(u, v): float(P[u, v]) for u in range(self.graph.n) for v in sorted(set(self.graph.slots()[u]))}


def _as_targets(target) -> list[int]:
    if isinstance(target, (int, np.integer)):
        return [int(target)]
    out = sorted(set(int(t) for t in target))
    if not out:
        raise ValueError("target set must be nonempty")
    return out


def optimal_hitting(F: Graph | WeightedMultigraph, target, keep_trace: bool = False) -> HittingSolution:
    """Exact minimum expected CRW hitting time of ``target`` from every vertex.

    A target set on a simple graph is first contracted to one vertex (with
    parallel edges kept), so the choice semantics live in one place.
    """
    targets = _as_targets(target)
    if isinstance(F, Graph) and len(targets) > 1:
        if len(targets) == F.n:
            return HittingSolution(F, frozenset(targets), np.zeros(F.n), list(range(F.n)), 0, 0.0)
        C = contract(F, targets)
        sub = optimal_hitting(C, C.members.index(tuple(targets)), keep_trace)
        h = np.empty(F.n)
        for new, group in enumerate(C.members):
            h[list(group)] = sub.h[new]
        ordering = [v for new in sub.ordering for v in C.members[new]]
        trace = []
        for tr in sub.trace:
            full = np.empty(F.n)
            for new, group in enumerate(C.members):
                full[list(group)] = tr[new]
            trace.append(full)
        return HittingSolution(F, frozenset(targets), h, ordering, sub.iterations, sub.residual, trace)
    slots = F.slots()
    if not all(0 <= t < F.n for t in targets):
        raise ValueError("target out of range")
    if min(bfs_distances(F, targets[0])) < 0:
        raise GraphError("graph must be connected")
    free = [v for v in range(F.n) if v not in targets]
    h, order, it, res, trace = _policy_iteration(slots, free, {t: 0.0 for t in targets}, keep_trace=keep_trace)
    return HittingSolution(F, frozenset(targets), h, order, it, res, trace)


def value_iteration_hitting(F, target, tol: float = 1e-10, max_iter: int = 10**6) -> np.ndarray:
    """Independent oracle: iterate ``h <- 1 + minchoice(h)`` from zero to sup-norm change ``tol``."""
    targets = _as_targets(target)
    layer = ChoiceLayer(F.slots())
    h = np.zeros(F.n)
    for _ in range(max_iter):
        new = 1.0 + layer.apply(h, "min")
        new[targets] = 0.0
        if np.max(np.abs(new - h)) < tol:
            return new
        h = new
    raise SolverError("value iteration hit its iteration cap")


def hitting_times(P: TransitionMatrix | np.ndarray, target) -> np.ndarray:
    """Expected hitting times of ``target`` for a fixed Markov chain."""
    M = P.matrix if isinstance(P, TransitionMatrix) else np.asarray(P)
    targets = _as_targets(target)
    n = M.shape[0]
    free = np.asarray([v for v in range(n) if v not in targets], dtype=np.intp)
    h = np.zeros(n)
    if free.size:
        A = np.eye(free.size) - M[np.ix_(free, free)]
        h[free] = np.linalg.solve(A, np.ones(free.size))
    return h


def srw_hitting_times(G) -> np.ndarray:
    """All-pairs SRW hitting times ``H[x, y]`` from the fundamental matrix."""
    P = srw_matrix(G).matrix
    pi = _srw_pi(G)
    Z = np.linalg.inv(np.eye(G.n) - P + np.outer(np.ones(G.n), pi))
    return (np.diag(Z)[None, :] - Z) / pi[None, :]


def _srw_pi(G) -> np.ndarray:
    deg = np.asarray([len(s) for s in G.slots()], dtype=float)
    return deg / deg.sum()


# ---------------------------------------------------------------------------
# stationary distributions


def _irreducible(M: np.ndarray) -> bool:
    support = M > 0
    for mat in (support, support.T):
        seen = np.zeros(M.shape[0], dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            v = frontier.pop()
            for u in np.flatnonzero(mat[v] & ~seen):
                seen[u] = True
                frontier.append(int(u))
        if not seen.all():
            return False
    return True


def stationary(P: TransitionMatrix | np.ndarray) -> np.ndarray:
    M = P.matrix if isinstance(P, TransitionMatrix) else np.asarray(P)
    if not _irreducible(M):
        raise ValueError("transition matrix is reducible")
    n = M.shape[0]
    A = M.T - np.eye(n)
    A[-1] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    return np.linalg.solve(A, b)


def optimal_return(G, v: int) -> tuple[float, HittingSolution]:
    """Largest achievable stationary mass of ``v``: ``1 / min E_v[return time]``."""
    sol = optimal_hitting(G, v)
    q = sol.transitions().matrix[v]
    ret = 1.0 + float(q @ sol.h)
    return 1.0 / ret, sol


# ---------------------------------------------------------------------------
# cover


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _component(adj_masks: list[int], X: int, start: int) -> int:
    comp = 1 << start
    frontier = comp
    while frontier:
        nxt = 0
        f = frontier
        while f:
            low = f & -f
            nxt |= adj_masks[low.bit_length() - 1]
            f ^= low
        nxt &= X & ~comp
        comp |= nxt
        frontier = nxt
    return comp


@dataclass
class CoverValue:
    """Optimal expected remaining cover time on reachable ``(vertex, covered)`` states.

    ``values[mask][v]`` is defined (finite) for the walker positions reachable
    with covered set ``mask`` and NaN elsewhere.
    """

    graph: Graph = field(repr=False)
    start: int
    initial: int
    values: dict[int, np.ndarray] = field(repr=False)

    @property
    def optimum(self) -> float:
        return self.value(self.start, self.initial)

    def value(self, v: int, covered: int | Iterable[int]) -> float:
        mask = covered if isinstance(covered, int) else _mask(covered)
        mask |= 1 << v
        if mask not in self.values:
            raise KeyError(f"state ({v}, {mask:b}) is not reachable from the initial state")
        val = self.values[mask][v]
        if np.isnan(val):
            raise KeyError(f"state ({v}, {mask:b}) is not reachable from the initial state")
        return float(val)

    def successor_value(self, u: int, covered: int, w: int) -> float:
        return self.value(w, covered | (1 << w))

    def preference(self, u: int, covered: int | Iterable[int]) -> list[int]:
        """Neighbours of ``u`` best first (smaller successor value, ties by id)."""
        mask = covered if isinstance(covered, int) else _mask(covered)
        nb = sorted(set(self.graph.slots()[u]))
        return sorted(nb, key=lambda w: (self.successor_value(u, mask, w), w))


def _mask(vs: Iterable[int]) -> int:
    m = 0
    for v in vs:
        m |= 1 << v
    return m


def cover_mdp(G: Graph, start: int, covered: Iterable[int] = (), guard: int = COVER_GUARD) -> CoverValue:
    """Exact optimal expected cover time from ``start`` with ``covered`` already visited."""
    n = G.n
    if n > guard:
        raise GraphError(f"exact cover MDP is limited to n <= {guard} (got {n})")
    if not G.is_connected():
        raise GraphError("graph must be connected")
    slots = G.slots()
    adj_masks = [_mask(s) for s in slots]
    full = (1 << n) - 1
    c0 = _mask(covered) | (1 << start)
    rest = full & ~c0
    family = []
    sub = rest
    while True:
        X = c0 | sub
        comp = _component(adj_masks, X, start)
        if (X & ~c0) & ~comp == 0:
            family.append((X, comp))
        if sub == 0:
            break
        sub = (sub - 1) & rest
    family.sort(key=lambda xc: -_popcount(xc[0]))
    values: dict[int, np.ndarray] = {}
    for X, comp in family:
        vals = np.full(n, np.nan)
        free = [v for v in range(n) if comp >> v & 1]
        if X == full:
            vals[free] = 0.0
            values[X] = vals
            continue
        exits = {}
        for v in free:
            for y in slots[v]:
                if not X >> y & 1 and y not in exits:
                    exits[y] = values[X | (1 << y)][y]
        h, *_ = _policy_iteration(slots, free, exits)
        vals[free] = h[free]
        values[X] = vals
    return CoverValue(G, start, c0, values)


def cover_value_iteration(G: Graph, tol: float = 1e-12, max_iter: int = 10**6,
                          guard: int = 10) -> np.ndarray:
    """Independent oracle over the full ``n * 2^n`` state space.

    Returns ``V[v, mask]`` (meaningful where ``v`` is in ``mask``).
    """
    n = G.n
    if n > guard:
        raise GraphError(f"full-state value iteration is limited to n <= {guard}")
    full = (1 << n) - 1
    masks = np.arange(1 << n)
    slots = G.slots()
    nxt = [np.stack([masks | (1 << y) for y in slots[v]]) for v in range(n)]
    ws = [_rank_weights(len(slots[v])) for v in range(n)]
    member = np.stack([(masks >> v) & 1 for v in range(n)]).astype(bool)
    V = np.zeros((n, 1 << n))
    for _ in range(max_iter):
        new = np.empty_like(V)
        for v in range(n):
            g = V[np.asarray(slots[v])[:, None], nxt[v]]
            new[v] = 1.0 + ws[v] @ np.sort(g, axis=0)
        new[:, full] = 0.0
        new[~member] = 0.0
        if np.max(np.abs(new - V)) < tol:
            return new
        V = new
    raise SolverError("cover value iteration hit its iteration cap")


def next_step_oracle(G: Graph, u: int, v: int, w: int, covered: Iterable[int],
                     guard: int = COVER_GUARD) -> int:
    """Optimal choice between offered neighbours ``v`` and ``w`` of ``u``; ties go to the smaller id."""
    nb = set(G.slots()[u])
    if v not in nb or w not in nb:
        raise ValueError("offered vertices must be neighbours of u")
    cv = cover_mdp(G, u, covered, guard)
    mask = cv.initial
    fv, fw = cv.successor_value(u, mask, v), cv.successor_value(u, mask, w)
    if fv == fw:
        return min(v, w)
    return v if fv < fw else w


# ---------------------------------------------------------------------------
# spectral


@dataclass(frozen=True)
class SpectralReport:
    lambda2: float
    t_rel: float
    pi: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)


def spectral(G, budget: int = EIGEN_BUDGET) -> SpectralReport:
    """Second eigenvalue and relaxation time of the lazy walk via a symmetric eigensolve."""
    if G.n > budget:
        raise GraphError(f"dense eigensolve is limited to n <= {budget}")
    if isinstance(G, WeightedMultigraph):
        W = G.weight_matrix()
    else:
        W = np.zeros((G.n, G.n))
        for v, nb in enumerate(G.adj):
            W[v, list(nb)] = 1.0
    deg = W.sum(axis=1)
    if np.any(deg == 0) or min(bfs_distances(G, 0)) < 0:
        raise GraphError("graph must be connected")
    s = 1.0 / np.sqrt(deg)
    sym = 0.5 * (np.eye(G.n) + s[:, None] * W * s[None, :])
    eig = np.linalg.eigvalsh(sym)[::-1]
    lam2 = float(eig[1]) if G.n > 1 else 0.0
    return SpectralReport(lam2, 1.0 / (1.0 - lam2), deg / deg.sum(), eig)


def _lazyconv_horizon(n: int, t_rel: float) -> int:
    return math.ceil(4 * t_rel * math.log(n))


def lazyconv_search(G, x: int, S: Iterable[int], report: SpectralReport | None = None) -> tuple[int, float]:
    """First ``t`` in ``1..ceil(4 t_rel ln n)`` with SRW mass on ``S`` at least ``pi(S)/3``."""
    S = _as_targets(S)
    report = report or spectral(G)
    target = report.pi[S].sum() / 3.0
    T = _lazyconv_horizon(G.n, report.t_rel)
    P = srw_matrix(G).matrix
    dist = np.zeros(G.n)
    dist[x] = 1.0
    for t in range(1, T + 1):
        dist = dist @ P
        p = float(dist[S].sum())
        if p >= target:
            return t, p
    raise SolverError(f"no t <= {T} reaches pi(S)/3 from {x}")


def lazyconv_all(G, S: Iterable[int], report: SpectralReport | None = None) -> tuple[np.ndarray, int]:
    """Vectorised :func:`lazyconv_search` for every start; returns (first t per start or -1, horizon)."""
    S = _as_targets(S)
    report = report or spectral(G)
    target = report.pi[S].sum() / 3.0
    T = _lazyconv_horizon(G.n, report.t_rel)
    P = srw_matrix(G).matrix
    first = np.full(G.n, -1)
    M = np.eye(G.n)
    for t in range(1, T + 1):
        M = M @ P
        p = M[:, S].sum(axis=1)
        newly = (first < 0) & (p >= target)
        first[newly] = t
        if np.all(first > 0):
            break
    return first, T
