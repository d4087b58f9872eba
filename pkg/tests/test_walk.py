from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crw.exact import optimal_hitting
from crw.graphs import Graph, contract, gen_bull, gen_complete, gen_path, gen_star
from crw.walk import (
    Coverage,
    OrderingRule,
    PreferUncovered,
    RngStream,
    Strategy,
    StrategyError,
    StrategyTable,
    TableRule,
    TierRule,
    UniformRule,
    UntilCover,
    UntilHit,
    alpha_for_weighting,
    alpha_from_ordering,
    chi_square_pvalue,
    edge_table,
    lazy_matrix,
    mixed_partition_alpha,
    mixed_partition_p,
    rank_probability,
    simulate,
    srw_matrix,
    step,
    transitions_from_alpha,
)

from corpus import random_connected


def pair_oracle(slots, alpha):
    """Enumerate every ordered offer (a, b) of edge slots; exact Fractions if alpha gives them."""
    d = len(slots)
    q = {}
    for a in slots:
        for b in slots:
            pa = Fraction(1, 2) if a == b else alpha(a, b)
            q[a] = q.get(a, 0) + pa / (d * d)
            q[b] = q.get(b, 0) + (1 - pa) / (d * d)
    return q


def strict(order):
    pos = {u: k for k, u in enumerate(order)}
    return lambda a, b: Fraction(1) if pos[a] < pos[b] else Fraction(0)


def test_uniform_alpha_is_srw():
    G = random_connected(9, 3)
    P = transitions_from_alpha(G, StrategyTable.uniform(G))
    assert np.allclose(P.matrix, srw_matrix(G).matrix, atol=1e-15)


def test_strict_order_degree3_labels():
    # a degree-3 vertex: 5/9 for the preferred neighbour, 1/9 for the avoided one
    G = gen_star(4)
    T = alpha_from_ordering(G, [[1, 2, 3], [0], [0], [0]])
    P = transitions_from_alpha(G, T).matrix
    assert P[0, 1] == pytest.approx(5 / 9, abs=1e-15)
    assert P[0, 2] == pytest.approx(3 / 9, abs=1e-15)
    assert P[0, 3] == pytest.approx(1 / 9, abs=1e-15)
    # matches brute-force enumeration of the 9 ordered offers
    q = pair_oracle([1, 2, 3], strict([1, 2, 3]))
    assert q == {1: Fraction(5, 9), 2: Fraction(3, 9), 3: Fraction(1, 9)}


def test_one_preferred_rest_tied():
    G = gen_star(4)
    T = alpha_from_ordering(G, [[[1], [2, 3]], [0], [0], [0]])
    P = transitions_from_alpha(G, T).matrix
    assert P[0, 1] == pytest.approx(5 / 9)
    assert P[0, 2] == pytest.approx(2 / 9) and P[0, 3] == pytest.approx(2 / 9)


def test_two_tier_degree4():
    G = gen_star(5)
    T = alpha_from_ordering(G, [[[1], [2, 3, 4]]] + [[0]] * 4)
    P = transitions_from_alpha(G, T).matrix
    assert P[0, 1] == pytest.approx((16 - 9) / 16)


def test_all_tied_is_uniform():
    G = gen_star(5)
    T = alpha_from_ordering(G, [[[1, 2, 3, 4]]] + [[0]] * 4)
    assert T.alpha[0] == {}


def test_ordering_must_cover_neighbours():
    G = gen_star(4)
    with pytest.raises(StrategyError):
        alpha_from_ordering(G, [[1, 2], [0], [0], [0]])


@pytest.mark.parametrize("d", range(1, 12))
def test_rank_probability_matches_enumeration(d):
    order = list(range(d))
    q = pair_oracle(order, strict(order))
    for r in range(1, d + 1):
        assert q[r - 1] == Fraction(2 * (d - r) + 1, d * d)
        assert rank_probability(d, r) == pytest.approx(float(q[r - 1]), abs=1e-15)
    assert sum(rank_probability(d, r) for r in range(1, d + 1)) == pytest.approx(1.0)


def test_rank_probability_values():
    assert rank_probability(3, 1) == pytest.approx(5 / 9)
    assert rank_probability(4, 2) == pytest.approx(5 / 16)
    with pytest.raises(ValueError):
        rank_probability(3, 4)


def test_mixed_partition_in_range_exact():
    for a in range(0, 40):
        for b in range(0, 40):
            p = Fraction(b, 2 * (a + 2 * b)) if a and b else Fraction(1, 2)
            assert 0 <= p <= Fraction(1, 2)
            assert mixed_partition_p(a, b) == pytest.approx(float(p), abs=1e-15)


@pytest.mark.parametrize("a,b", [(1, 1), (2, 1), (1, 3), (4, 4), (5, 2)])
def test_mixed_partition_probabilities(a, b):
    A, B = list(range(a)), list(range(a, a + b))
    p = Fraction(b, 2 * (a + 2 * b))

    def alpha(i, j):
        if (i in B) == (j in B):
            return Fraction(1, 2)
        return p if i in A else 1 - p

    q = pair_oracle(A + B, alpha)
    for i in A:
        assert q[i] == Fraction(1, a + 2 * b)
    for i in B:
        assert q[i] == Fraction(2, a + 2 * b)


def test_mixed_partition_alpha_star():
    G = gen_star(3)
    T = mixed_partition_alpha(G, [[2], [], []])
    P = transitions_from_alpha(G, T).matrix
    assert P[0, 1] == pytest.approx(1 / 3) and P[0, 2] == pytest.approx(2 / 3)
    assert mixed_partition_alpha(G, [[], [], []]).alpha[0] == {}


def test_alpha_for_weighting():
    G = gen_star(3)
    P = transitions_from_alpha(G, alpha_for_weighting(G, {(0, 1): 1.0, (0, 2): 2.0})).matrix
    assert P[0, 1] == pytest.approx(1 / 3) and P[0, 2] == pytest.approx(2 / 3)
    assert alpha_for_weighting(G, lambda u, v: 3.0).alpha == StrategyTable.uniform(G).alpha
    G4 = gen_star(4)
    with pytest.raises(StrategyError):
        alpha_for_weighting(G4, {(0, 1): 1.0, (0, 2): 2.0, (0, 3): 4.0})
    with pytest.raises(StrategyError):
        alpha_for_weighting(G, {(0, 1): 1.0, (0, 2): 3.0})


def _random_table(G, rng):
    alpha = []
    for v in range(G.n):
        nb = G.adj[v]
        alpha.append({(i, j): float(rng.random()) for k, i in enumerate(nb) for j in nb[k + 1:]})
    return StrategyTable(G.adj, tuple((1,) * len(nb) for nb in G.adj), tuple(alpha))


def test_random_tables_rows_and_pair_sums():
    rng = np.random.default_rng(0)
    for trial in range(1000):
        G = random_connected(int(rng.integers(2, 9)), trial)
        T = _random_table(G, rng)
        P = transitions_from_alpha(G, T).matrix
        assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)
        v = int(rng.integers(G.n))
        A = T.matrix(v)
        d = len(G.adj[v])
        assert np.allclose(A + A.T, 1.0)
        assert A.sum() == pytest.approx(d * d / 2)
        # brute force for one vertex
        q = pair_oracle(list(G.adj[v]), lambda a, b: T(v, a, b))
        for u in G.adj[v]:
            assert P[v, u] == pytest.approx(float(q[u]), abs=1e-12)


def test_multigraph_transitions_use_slots():
    # merged vertex of K4/{0,1}: slots [0,0,1,1,2,2]; always prefer the loop
    W = contract(gen_complete(4), [0, 1])
    T = alpha_from_ordering(W, [[0, 1, 2], [0, 2], [0, 1]])
    P = transitions_from_alpha(W, T).matrix
    # loop holds 2 of 6 slots: taken unless both offers miss it
    assert P[0, 0] == pytest.approx(1 - (4 / 6) ** 2)
    assert np.allclose(P.sum(axis=1), 1.0)


def test_table_rejects_non_neighbours():
    G = gen_path(3)
    with pytest.raises(StrategyError):
        StrategyTable(G.adj, ((1,), (1, 1), (1,)), ({}, {(0, 5): 1.0}, {}))
    H = gen_complete(3)
    with pytest.raises(StrategyError):
        transitions_from_alpha(G, StrategyTable.uniform(H))


@pytest.mark.parametrize("d", range(2, 51))
def test_first_and_last_choice_ratios(d):
    G = gen_star(d + 1)
    order = list(range(1, d + 1))
    P = transitions_from_alpha(G, alpha_from_ordering(G, [[[1], order[1:]]] + [[0]] * d)).matrix
    ratio = P[0, 2] / P[0, 1]
    assert ratio == pytest.approx((d - 1) / (2 * d - 1)) and ratio < 0.5
    P = transitions_from_alpha(G, alpha_from_ordering(G, [[[1], order[1:-1], [d]]] + [[0]] * d)).matrix
    assert P[0, d] / P[0, 1] == pytest.approx(1 / (2 * d - 1))


def test_json_round_trip():
    G = random_connected(7, 2)
    T = _random_table(G, np.random.default_rng(1))
    assert StrategyTable.from_json(G, T.to_json()) == T


def test_lazy_matrix():
    G = gen_path(3)
    L = lazy_matrix(G).matrix
    assert np.allclose(np.diag(L), 0.5) and np.allclose(L.sum(axis=1), 1)


def test_single_edge_alternates():
    G = gen_path(2)
    tr = simulate(G, UniformRule(), 0, cap=6, record=True)
    assert tr.vertices == [0, 1, 0, 1, 0, 1, 0]
    assert tr.truncated and tr.steps == 6


def test_degenerate_vertex_receives_identical_offer():
    seen = []

    class Spy(Strategy):
        def choose(self, t, v, a, b, cov, rng):
            seen.append((v, a, b))
            return a

    simulate(gen_star(4), Spy(), 1, cap=10)
    assert all(a == b == 0 for v, a, b in seen if v != 0)


def test_trajectory_consecutive_adjacent_and_offers():
    G = random_connected(10, 5)
    tr = simulate(G, PreferUncovered(), 0, UntilCover(), record=True, offers=True, rng=RngStream(3, 0))
    assert tr.stopped and len(tr.vertices) == tr.steps + 1 and len(tr.offers) == tr.steps
    for (u, v), (a, b) in zip(zip(tr.vertices, tr.vertices[1:]), tr.offers):
        assert G.has_edge(u, v) and v in (a, b)
    assert len(tr.first_visits) == G.n and tr.first_visits[-1] == tr.steps


def test_stop_checked_before_first_step():
    tr = simulate(gen_path(3), UniformRule(), 1, UntilHit([1]))
    assert tr.steps == 0 and tr.stopped


def test_reproducible_streams():
    G = random_connected(12, 4)
    a = simulate(G, UniformRule(), 0, UntilCover(), rng=RngStream(5, 2), record=True)
    b = simulate(G, UniformRule(), 0, UntilCover(), rng=RngStream(5, 2), record=True)
    c = simulate(G, UniformRule(), 0, UntilCover(), rng=RngStream(5, 3), record=True)
    assert a.vertices == b.vertices
    assert a.vertices != c.vertices


def test_step_uses_rule():
    G = gen_star(4)
    nxt = step(G, TierRule([[[1], [2, 3]], [0], [0], [0]]), 0, RngStream(0, 0))
    assert nxt in (1, 2, 3)


def _empirical(G, rule, start, steps, seed):
    tr = simulate(G, rule, start, cap=steps, rng=RngStream(seed, 0), record=True)
    counts = np.zeros((G.n, G.n))
    np.add.at(counts, (tr.vertices[:-1], tr.vertices[1:]), 1)
    return counts


def test_srw_frequencies_chi_square():
    G = random_connected(8, 7)
    counts = _empirical(G, UniformRule(), 0, 100_000, 11)
    P = srw_matrix(G).matrix
    for v in range(G.n):
        assert chi_square_pvalue(counts[v], P[v]) > 1e-6


def test_bull_optimal_frequencies():
    G = gen_bull()
    sol = optimal_hitting(G, 4)
    counts = _empirical(G, sol.rule, 0, 100_000, 12)
    labels = {(0, 1): 1, (1, 3): 5 / 9, (1, 2): 3 / 9, (1, 0): 1 / 9, (3, 4): 5 / 9,
              (3, 2): 3 / 9, (3, 1): 1 / 9, (2, 3): 3 / 4, (2, 1): 1 / 4}
    for (u, v), p in labels.items():
        m = counts[u].sum()
        sigma = np.sqrt(m * p * (1 - p)) if 0 < p < 1 else 0.0
        assert abs(counts[u, v] - m * p) <= 3 * sigma + 1e-9


def test_random_table_rule_frequencies():
    G = random_connected(6, 8)
    T = _random_table(G, np.random.default_rng(4))
    counts = _empirical(G, TableRule(T), 0, 100_000, 13)
    P = transitions_from_alpha(G, T).matrix
    for v in range(G.n):
        assert chi_square_pvalue(counts[v], P[v]) > 1e-6


def test_ordering_rule_table_matches_table():
    G = random_connected(9, 9)
    rule = OrderingRule(list(range(G.n))[::-1])
    P = transitions_from_alpha(G, rule.table(G)).matrix
    assert edge_table(G, P)[(0, G.adj[0][-1])] == pytest.approx(rank_probability(len(G.adj[0]), 1))


def test_coverage():
    c = Coverage(4, [0, 0, 2])
    assert c.count == 2 and c.uncovered() == [1, 3] and not c.complete


def test_prefer_uncovered_rule():
    cov = Coverage(3, [0, 1])
    assert PreferUncovered().choose(0, 0, 1, 2, cov, None) == 2
    assert PreferUncovered().choose(0, 0, 2, 1, cov, None) == 2


def test_chi_square_detects_mismatch():
    assert chi_square_pvalue([500, 500], [0.9, 0.1]) < 1e-6
    assert chi_square_pvalue([10, 1], [1.0, 0.0]) == 0.0


@settings(max_examples=200)
@given(st.integers(2, 10), st.integers(0, 10**6), st.integers(0, 10**6))
def test_orderings_give_rank_law(n, gseed, oseed):
    G = random_connected(n, gseed)
    order = list(np.random.default_rng(oseed).permutation(n))
    pos = {int(v): k for k, v in enumerate(order)}
    P = transitions_from_alpha(G, OrderingRule([int(v) for v in order]).table(G)).matrix
    for v in range(n):
        nb = sorted(G.adj[v], key=pos.__getitem__)
        for r, u in enumerate(nb, 1):
            assert P[v, u] == pytest.approx(rank_probability(len(nb), r), abs=1e-15)


def test_single_vertex_graph():
    G = Graph.from_edges(1, [])
    tr = simulate(G, UniformRule(), 0, UntilCover())
    assert tr.steps == 0
