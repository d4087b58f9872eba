"""Seeded Monte-Carlo estimation of cover and hitting times.

Trial ``i`` always draws from ``RngStream(seed, i)``, so a report depends
only on the configuration, never on how trials were scheduled.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import graphs as gr
from .walk import RngStream, Strategy, UntilCover, UntilHit, simulate

__all__ = [
    "TrialConfig",
    "EstimateReport",
    "HarnessError",
    "estimate_cover",
    "estimate_hitting",
    "unvisited_profile",
    "family_graph",
    "FAMILIES",
    "compare_table",
    "table1",
    "rows_to_csv",
]

Z95 = 1.959963984540054
# which named strategies make sense for each metric
METRIC_RULES = {
    "cover": {"srw", "greedy-uncovered", "spanning", "torus-cover", "phased"},
    "hit": {"srw", "greedy", "distance-halving", "optimal", "tree-sigma", "torus"},
}
CSV_COLUMNS = ("family", "n", "strategy", "metric", "mean", "ci_lo", "ci_hi", "exact")


class HarnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrialConfig:
    seed: int = 20240601
    trials: int = 100
    cap: int = 10**7
    start: int | str = 0  # a vertex, or "sweep" for the worst start
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not (isinstance(self.start, int) or self.start == "sweep"):
            raise ValueError("start must be a vertex id or 'sweep'")


@dataclass(frozen=True)
class EstimateReport:
    mean: float
    std: float
    ci: tuple[float, float]
    trials: int
    truncated: int
    start: int = 0
    samples: np.ndarray = field(default=None, repr=False, compare=False)

    @classmethod
    def from_samples(cls, steps: np.ndarray, truncated: int, start: int = 0) -> EstimateReport:
        steps = np.asarray(steps, dtype=float)
        k = steps.size
        mean = float(steps.mean())
        std = float(steps.std(ddof=1)) if k > 1 else 0.0
        half = Z95 * std / math.sqrt(k)
        return cls(mean, std, (mean - half, mean + half), k, truncated, start, steps)

    @property
    def sem(self) -> float:
        return self.std / math.sqrt(self.trials)

    def as_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "ci_lo": self.ci[0], "ci_hi": self.ci[1],
                "trials": self.trials, "truncated": self.truncated, "start": self.start}


StrategyLike = Strategy | Callable[[int], Strategy]


def _resolve(strategy: StrategyLike, start: int) -> Strategy:
    return strategy if isinstance(strategy, Strategy) else strategy(start)


def _run_chunk(args) -> list[tuple[int, bool]]:
    G, strategy, start, stop, cap, seed, indices = args
    out = []
    for i in indices:
        tr = simulate(G, strategy, start, stop, cap, RngStream(seed, i))
        out.append((tr.steps, tr.stopped))
    return out


def _run_trials(G, strategy: Strategy, start: int, stop, config: TrialConfig) -> list[tuple[int, bool]]:
    idx = list(range(config.trials))
    if config.workers <= 1 or config.trials < 2:
        return _run_chunk((G, strategy, start, stop, config.cap, config.seed, idx))
    chunks = [idx[k::config.workers] for k in range(config.workers)]
    with ProcessPoolExecutor(config.workers) as pool:
        parts = list(pool.map(_run_chunk, [(G, strategy, start, stop, config.cap, config.seed, c) for c in chunks]))
    # reassemble in trial order so the reduction is schedule-independent
    results: list = [None] * config.trials
    for c, part in zip(chunks, parts):
        for i, r in zip(c, part):
            results[i] = r
    return results


def _estimate(G, strategy: StrategyLike, start: int, stop, config: TrialConfig) -> EstimateReport:
    if config.cap < G.n:
        raise ValueError("cap must be at least n")
    res = _run_trials(G, _resolve(strategy, start), start, stop, config)
    steps = np.asarray([s for s, _ in res])
    truncated = sum(1 for _, ok in res if not ok)
    if truncated == config.trials:
        raise HarnessError(f"all {truncated} trials hit the step cap {config.cap}")
    return EstimateReport.from_samples(steps, truncated, start)


def _starts(G, config: TrialConfig) -> list[int]:
    return list(range(G.n)) if config.start == "sweep" else [int(config.start)]


def estimate_cover(G, strategy: StrategyLike, config: TrialConfig = TrialConfig()) -> EstimateReport:
    """Mean steps to visit every vertex; with ``start="sweep"`` the worst start is reported."""
    reports = [_estimate(G, strategy, s, UntilCover(), config) for s in _starts(G, config)]
    return max(reports, key=lambda r: r.mean)


def estimate_hitting(G, strategy: StrategyLike, start: int, target,
                     config: TrialConfig = TrialConfig()) -> EstimateReport:
    targets = [target] if isinstance(target, (int, np.integer)) else list(target)
    return _estimate(G, strategy, start, UntilHit(targets), config)


def unvisited_profile(G, strategy: StrategyLike, times: Sequence[int],
                      config: TrialConfig = TrialConfig()) -> np.ndarray:
    """Mean number of unvisited vertices at each requested time."""
    times = np.asarray(times, dtype=np.int64)
    horizon = int(times.max()) if times.size else 0
    start = _starts(G, config)[0]
    rule = _resolve(strategy, start)
    total = np.zeros(times.size)
    for i in range(config.trials):
        tr = simulate(G, rule, start, UntilCover(), max(horizon, 1), RngStream(config.seed, i))
        visited = np.searchsorted(np.asarray(tr.first_visits), times, side="right")
        total += G.n - visited
    return total / config.trials


# ---------------------------------------------------------------------------
# sweeps

FAMILIES = ("complete", "path", "cycle", "star", "torus2", "grid2", "tree3", "regular3", "subcubic", "gnp")


def family_graph(family: str, n: int, seed: int = 0) -> gr.Graph:
    """One member of a named family with about ``n`` vertices."""
    if family == "complete":
        return gr.gen_complete(n)
    if family == "path":
        return gr.gen_path(n)
    if family == "cycle":
        return gr.gen_cycle(n)
    if family == "star":
        return gr.gen_star(n)
    if family in ("torus2", "grid2"):
        k = max(3, round(math.sqrt(n)))
        return gr.gen_torus(k, 2) if family == "torus2" else gr.gen_grid(k, 2)
    if family == "tree3":
        return gr.gen_random_tree(n, 3, seed)
    if family == "regular3":
        return gr.gen_random_regular(n, 3, seed)
    if family == "subcubic":
        return gr.gen_random_bounded_degree(n, 3, n // 4, seed)
    if family == "gnp":
        return gr.gen_gnp(n, min(1.0, 2 * math.log(n) / n), seed)
    raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")


def _hit_target(G, start: int) -> int:
    dist = gr.bfs_distances(G, start)
    return max(range(G.n), key=lambda v: (dist[v], v))


def _exact(G, metric: str, start: int, target: int | None):
    from .exact import COVER_GUARD, cover_mdp, optimal_hitting

    if metric == "cover" and G.n <= min(COVER_GUARD, 10):
        return cover_mdp(G, start).optimum
    if metric == "hit" and G.n <= 400:
        return float(optimal_hitting(G, target).h[start])
    return None


def compare_table(cases: Iterable[tuple[str, gr.Graph]], strategies: Sequence[str],
                  config: TrialConfig = TrialConfig(), metrics: Sequence[str] = ("cover", "hit")) -> list[dict]:
    """Estimate each metric for each applicable (graph, strategy) pair.

    Hitting runs from the start to a farthest vertex (largest id on ties).

    ``exact`` is the optimal value over all strategies when the solvers allow it.
    """
    from .strategies import make_strategy

    rows = []
    for family, G in cases:
        start = _starts(G, config)[0]
        target = _hit_target(G, start)
        for metric in metrics:
            exact = _exact(G, metric, start, target)
            for name in strategies:
                if name not in METRIC_RULES[metric]:
                    continue
                rule = make_strategy(name, G, target=target, start=start)
                if metric == "cover":
                    rep = estimate_cover(G, rule, config)
                else:
                    rep = estimate_hitting(G, rule, start, target, config)
                rows.append({"family": family, "n": G.n, "strategy": name, "metric": metric,
                             "mean": rep.mean, "ci_lo": rep.ci[0], "ci_hi": rep.ci[1],
                             "exact": "" if exact is None else exact})
    return rows


def table1(config: TrialConfig = TrialConfig(trials=50)) -> list[dict]:
    """Small reproduction of the CRW-versus-SRW comparison over the standard families."""
    cases = [
        ("complete", family_graph("complete", 100), ("srw", "greedy-uncovered", "optimal")),
        ("complete", family_graph("complete", 8), ("srw", "greedy-uncovered", "optimal")),
        ("torus2", family_graph("torus2", 100), ("srw", "torus-cover", "torus")),
        ("subcubic", family_graph("subcubic", 100, config.seed), ("srw", "spanning", "greedy")),
        ("tree3", family_graph("tree3", 100, config.seed), ("srw", "spanning", "optimal")),
        ("regular3", family_graph("regular3", 100, config.seed), ("srw", "phased", "optimal")),
    ]
    rows = []
    for family, G, names in cases:
        rows.extend(compare_table([(family, G)], names, config))
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
