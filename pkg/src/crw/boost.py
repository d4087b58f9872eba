"""Boosting and suppressing event probabilities with one choice per step.

An optimal controller facing two uniform offspring values takes the larger
one, so a node's success probability is the max-choice average of its
children. The same recursion with ``min`` (suppression) or the plain mean
(simple random walk) gives the comparison values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .walk import Strategy

__all__ = [
    "BoostParams",
    "EventSpec",
    "EventDP",
    "ChoiceLayer",
    "DPCapError",
    "gamma",
    "mc2",
    "mc2_min",
    "power_mean",
    "solve_event",
    "max_boost",
    "min_boost",
    "srw_probability",
    "phi_diagnostic",
    "BoostRule",
]

GENERIC_CAP = 12
MODES = ("max", "min", "mean")


class DPCapError(ValueError):
    """Generic trajectory events are enumerated explicitly and must stay short."""


def gamma(d: int) -> float:
    """Boosting exponent ``log_d(d^2 / (2d - 1))``."""
    if d < 2:
        raise ValueError("gamma needs d >= 2")
    return math.log(d * d / (2 * d - 1)) / math.log(d)


@dataclass(frozen=True)
class BoostParams:
    dmax: int
    gamma: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "gamma", gamma(self.dmax))


def _rank_weights(m: int) -> np.ndarray:
    # weight of the k-th best among m i.i.d.-offered values, k = 1..m
    k = np.arange(1, m + 1)
    return (2 * (m - k) + 1) / m**2


def mc2(values: Sequence[float]) -> float:
    """Normalised max-choice operator ``(1/m^2) sum_i sum_j max(x_i, x_j)``."""
    x = np.sort(np.asarray(values, dtype=float))[::-1]
    if x.size == 0:
        raise ValueError("mc2 of an empty list")
    return float(x @ _rank_weights(x.size))


def mc2_min(values: Sequence[float]) -> float:
    """Normalised min-choice operator ``(1/m^2) sum_i sum_j min(x_i, x_j)``."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise ValueError("mc2_min of an empty list")
    return float(x @ _rank_weights(x.size))


def power_mean(p: float, values: Sequence[float]) -> float:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("power mean of an empty list")
    if p == 0:
        raise ValueError("p = 0 (geometric mean) is not supported")
    if p < 0 and np.any(x == 0):
        return 0.0
    return float(np.mean(x**p) ** (1.0 / p))


class ChoiceLayer:
    """Vectorised one-step choice operator over every vertex of a graph.

    Vertices are grouped by slot count so each group is a dense
    ``(k, d)`` gather; works for multigraph slot lists too.
    """

    def __init__(self, slots: Sequence[Sequence[int]], active: Iterable[int] | None = None):
        verts = range(len(slots)) if active is None else active
        by_deg: dict[int, list[int]] = {}
        for v in verts:
            by_deg.setdefault(len(slots[v]), []).append(v)
        self.n = len(slots)
        self.groups = []
        for d, vs in sorted(by_deg.items()):
            idx = np.asarray(vs, dtype=np.intp)
            nbr = np.asarray([slots[v] for v in vs], dtype=np.intp).reshape(len(vs), d)
            self.groups.append((idx, nbr, _rank_weights(d)))

    def apply(self, values: np.ndarray, mode: str, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.zeros(values.shape[0] if values.ndim == 1 else values.shape)
        for idx, nbr, w in self.groups:
            g = values[nbr]
            if mode == "mean":
                out[idx] = g.mean(axis=1)
                continue
            g = np.sort(g, axis=1)
            if mode == "max":
                g = g[:, ::-1]
            out[idx] = g @ w
        return out


# ---------------------------------------------------------------------------
# events


@dataclass(frozen=True)
class EventSpec:
    """Event on trajectories of a fixed horizon.

    ``hit``: the walk visits ``targets`` at some time ``0..horizon``.
    ``at``: the walk is in ``targets`` at time ``horizon``.
    ``generic``: ``predicate(trajectory)`` holds for the full length-``horizon`` trajectory.
    """

    kind: str
    horizon: int
    targets: frozenset = frozenset()
    predicate: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("hit", "at", "generic"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.kind != "generic" and not self.targets:
            raise ValueError("set events need a nonempty target set")
        if self.kind == "generic" and self.predicate is None:
            raise ValueError("generic events need a predicate")

    @classmethod
    def hit(cls, targets: Iterable[int], horizon: int) -> EventSpec:
        return cls("hit", horizon, frozenset(targets))

    @classmethod
    def at(cls, targets: Iterable[int], horizon: int) -> EventSpec:
        return cls("at", horizon, frozenset(targets))

    @classmethod
    def generic(cls, horizon: int, predicate: Callable[[tuple], bool]) -> EventSpec:
        return cls("generic", horizon, frozenset(), predicate)

    @classmethod
    def parse(cls, text: str) -> EventSpec:
        """``hit:<v,v,...>:<t>`` or ``at:<v,...>:<t>``."""
        kind, targets, t = text.split(":")
        return cls(kind, int(t), frozenset(int(x) for x in targets.split(",")))

    def indicator(self, traj: tuple) -> bool:
        if self.kind == "hit":
            return any(x in self.targets for x in traj)
        if self.kind == "at":
            return traj[-1] in self.targets
        return bool(self.predicate(traj))


@dataclass
class EventDP:
    """Success probabilities for an event under one of the three step laws.

    For set events ``values[r, x]`` is the probability from ``x`` with ``r``
    steps remaining (and, for ``hit``, the target not yet visited). For
    generic events ``tree`` maps each trajectory prefix to its value.
    """

    event: EventSpec
    mode: str
    values: np.ndarray | None = None
    tree: dict | None = None

    def value(self, u: int) -> float:
        if self.values is not None:
            return float(self.values[self.event.horizon, u])
        return self.tree[(u,)]


def solve_event(G, u: int, event: EventSpec, mode: str = "max", cap: int = GENERIC_CAP) -> EventDP:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if event.kind == "generic":
        return EventDP(event, mode, tree=_solve_generic(G, u, event, mode, cap))
    t = event.horizon
    S = np.zeros(G.n, dtype=bool)
    S[list(event.targets)] = True
    layer = ChoiceLayer(G.slots())
    values = np.zeros((t + 1, G.n))
    values[0] = S
    for r in range(1, t + 1):
        layer.apply(values[r - 1], mode, out=values[r])
        if event.kind == "hit":
            values[r, S] = 1.0
    return EventDP(event, mode, values=values)


def _solve_generic(G, u, event, mode, cap) -> dict:
    t = event.horizon
    if t > cap:
        raise DPCapError(f"generic events are enumerated up to horizon {cap}, got {t}")
    op = {"max": mc2, "min": mc2_min, "mean": lambda xs: float(np.mean(xs))}[mode]
    adj = G.slots()
    tree: dict[tuple, float] = {}

    def rec(prefix: tuple) -> float:
        if len(prefix) - 1 == t:
            val = 1.0 if event.predicate(prefix) else 0.0
        else:
            val = op([rec(prefix + (y,)) for y in adj[prefix[-1]]])
        tree[prefix] = val
        return val

    rec((u,))
    return tree


class BoostRule(Strategy):
    """Follow an event DP: prefer the offered child with the larger (or smaller) value.

    Ties go to the smaller vertex id. Past the horizon the rule is indifferent.
    """

    def __init__(self, dp: EventDP):
        self.dp = dp
        self.prefer_max = dp.mode != "min"
        self.name = f"boost-{dp.mode}"

    def _pick(self, va: float, vb: float, a: int, b: int) -> int:
        if va == vb:
            return min(a, b)
        if (va > vb) == self.prefer_max:
            return a
        return b

    def choose(self, t, v, a, b, cov, rng):
        r = self.dp.event.horizon - t
        if r <= 0:
            return a
        vals = self.dp.values[r - 1]
        return self._pick(vals[a], vals[b], a, b)

    def bind(self):
        if self.dp.tree is None:
            return self.choose
        path: list[int] = []
        tree = self.dp.tree
        horizon = self.dp.event.horizon

        def choose(t, v, a, b, cov, rng):
            if t == 0:
                path.clear()
            path.append(v)
            if t >= horizon:
                return a
            prefix = tuple(path)
            return self._pick(tree[prefix + (a,)], tree[prefix + (b,)], a, b)

        return choose


def max_boost(G, u: int, event: EventSpec, cap: int = GENERIC_CAP) -> tuple[float, BoostRule]:
    dp = solve_event(G, u, event, "max", cap)
    return dp.value(u), BoostRule(dp)


def min_boost(G, u: int, event: EventSpec, cap: int = GENERIC_CAP) -> tuple[float, BoostRule]:
    dp = solve_event(G, u, event, "min", cap)
    return dp.value(u), BoostRule(dp)


def srw_probability(G, u: int, event: EventSpec, cap: int = GENERIC_CAP) -> float:
    return solve_event(G, u, event, "mean", cap).value(u)


def phi_diagnostic(G, u: int, event: EventSpec, mode: str = "max", cap: int = GENERIC_CAP) -> list[float]:
    """Potential ``sum_x q_x^eta P(SRW prefix = x)`` for each generation ``0..t``.

    ``mode="max"`` uses ``eta = 1/gamma_dmax`` (non-increasing in the
    generation); ``mode="min"`` uses ``eta = 1/2`` (non-decreasing).
    """
    if event.horizon > cap:
        raise DPCapError(f"potential diagnostic is limited to horizon {cap}")
    eta = 1.0 / gamma(max(len(s) for s in G.slots())) if mode == "max" else 0.5
    dp = solve_event(G, u, event, mode, cap)
    t = event.horizon
    adj = G.slots()
    if dp.tree is not None:
        out = [0.0] * (t + 1)
        stack = [((u,), 1.0)]
        while stack:
            prefix, pr = stack.pop()
            i = len(prefix) - 1
            out[i] += pr * dp.tree[prefix] ** eta
            if i < t:
                nb = adj[prefix[-1]]
                stack.extend((prefix + (y,), pr / len(nb)) for y in nb)
        return out
    from .walk import srw_matrix

    P = srw_matrix(G).matrix
    S = np.zeros(G.n, dtype=bool)
    S[list(event.targets)] = True
    dist = np.zeros(G.n)
    dist[u] = 1.0
    hit_mass = 0.0
    out = []
    for i in range(t + 1):
        if event.kind == "hit":
            hit_mass += dist[S].sum()
            dist[S] = 0.0
        out.append(float(dist @ dp.values[t - i] ** eta) + hit_mass)
        dist = dist @ P
    return out
