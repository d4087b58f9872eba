"""Choice random walks: simulation, exact optimal strategies, and boosting."""

__version__ = "0.1.0"

from .graphs import (
    Graph,
    GraphError,
    WeightedMultigraph,
    bfs_distances,
    contract,
    gen_bull,
    gen_complete,
    gen_cycle,
    gen_grid,
    gen_gnp,
    gen_path,
    gen_random_regular,
    gen_random_tree,
    gen_star,
    gen_torus,
    load_graph,
    save_graph,
)
from .walk import (
    RngStream,
    StrategyTable,
    TransitionMatrix,
    alpha_for_weighting,
    alpha_from_ordering,
    mixed_partition_alpha,
    rank_probability,
    simulate,
    transitions_from_alpha,
)
from .boost import EventSpec, gamma, max_boost, mc2, mc2_min, min_boost, power_mean, srw_probability
from .exact import cover_mdp, next_step_oracle, optimal_hitting, spectral, value_iteration_hitting

__all__ = [
    "__version__",
    "Graph",
    "GraphError",
    "WeightedMultigraph",
    "bfs_distances",
    "contract",
    "gen_bull",
    "gen_complete",
    "gen_cycle",
    "gen_grid",
    "gen_gnp",
    "gen_path",
    "gen_random_regular",
    "gen_random_tree",
    "gen_star",
    "gen_torus",
    "load_graph",
    "save_graph",
    "RngStream",
    "StrategyTable",
    "TransitionMatrix",
    "alpha_for_weighting",
    "alpha_from_ordering",
    "mixed_partition_alpha",
    "rank_probability",
    "simulate",
    "transitions_from_alpha",
    "EventSpec",
    "gamma",
    "max_boost",
    "mc2",
    "mc2_min",
    "min_boost",
    "power_mean",
    "srw_probability",
    "cover_mdp",
    "next_step_oracle",
    "optimal_hitting",
    "spectral",
    "value_iteration_hitting",
]
