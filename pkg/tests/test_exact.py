import itertools
import math
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest

from crw.boost import ChoiceLayer
from crw.exact import (
    cover_mdp,
    cover_value_iteration,
    hitting_times,
    lazyconv_all,
    lazyconv_search,
    next_step_oracle,
    optimal_hitting,
    optimal_return,
    spectral,
    srw_hitting_times,
    stationary,
    value_iteration_hitting,
)
from crw.graphs import (
    GraphError,
    contract,
    gen_bull,
    gen_complete,
    gen_cycle,
    gen_path,
    gen_random_tree,
    gen_star,
)
from crw.harness import TrialConfig, estimate_cover
from crw.strategies import spanning_walk_cover
from crw.walk import lazy_matrix, srw_matrix, transitions_from_alpha

from corpus import corpus, random_connected, subcubic


def fraction_hitting(P, target):
    """Exact rational hitting times by Gauss-Jordan over Fractions (tiny graphs only)."""
    n = len(P)
    free = [v for v in range(n) if v != target]
    k = len(free)
    A = [[Fraction(int(i == j)) - P[free[i]][free[j]] for j in range(k)] + [Fraction(1)] for i in range(k)]
    for c in range(k):
        p = next(r for r in range(c, k) if A[r][c] != 0)
        A[c], A[p] = A[p], A[c]
        A[c] = [x / A[c][c] for x in A[c]]
        for r in range(k):
            if r != c and A[r][c] != 0:
                A[r] = [x - A[r][c] * y for x, y in zip(A[r], A[c])]
    h = [Fraction(0)] * n
    for i, v in enumerate(free):
        h[v] = A[i][k]
    return h


def test_bull_labels_and_values():
    G = gen_bull()
    sol = optimal_hitting(G, 4)
    lab = sol.labels()
    expected = {(0, 1): 1, (1, 3): 5 / 9, (1, 2): 3 / 9, (1, 0): 1 / 9,
                (3, 4): 5 / 9, (3, 2): 3 / 9, (3, 1): 1 / 9, (2, 3): 3 / 4, (2, 1): 1 / 4}
    for arc, p in expected.items():
        assert lab[arc] == pytest.approx(p, abs=1e-9)
    assert sol.h[4] == 0 and sol.ordering[0] == 4
    assert np.all(np.diff(sol.h[sol.ordering]) >= 0)


@pytest.mark.parametrize("n", list(range(3, 51)))
def test_complete_graph_hitting(n):
    sol = optimal_hitting(gen_complete(n), n // 2)
    others = np.delete(sol.h, n // 2)
    assert np.allclose(others, (n - 1) ** 2 / (2 * n - 3), atol=1e-9)


def test_small_exact_values():
    assert optimal_hitting(gen_path(2), 1).h[0] == pytest.approx(1.0)
    h = optimal_hitting(gen_path(3), 2).h
    assert h[0] == pytest.approx(8 / 3) and h[1] == pytest.approx(5 / 3)
    assert value_iteration_hitting(gen_complete(3), 0)[1] == pytest.approx(4 / 3, abs=1e-9)
    # rational oracle on the path: the optimal row at the middle is (1/4, 3/4)
    P = [[0, 1, 0], [Fraction(1, 4), 0, Fraction(3, 4)], [0, 1, 0]]
    assert fraction_hitting(P, 2)[:2] == [Fraction(8, 3), Fraction(5, 3)]


def test_value_iteration_agrees_on_corpus():
    for G in corpus(200, 2, 12, base=1000):
        t = G.n - 1
        sol = optimal_hitting(G, t)
        vi = value_iteration_hitting(G, t)
        assert vi[t] == 0
        assert np.max(np.abs(sol.h - vi)) <= 1e-8


def test_solution_invariants_and_certificate():
    for G in corpus(60, 3, 12, base=2000):
        t = 0
        sol = optimal_hitting(G, t, keep_trace=True)
        h = sol.h
        assert h[t] == 0 and np.all(h >= 0)
        assert sol.residual <= 1e-9
        # h solves its own linear system
        P = transitions_from_alpha(G, sol.strategy).matrix
        assert np.allclose(hitting_times(P, t), h, atol=1e-9)
        # Bellman: no other choice rule does better in one step
        layer = ChoiceLayer(G.slots())
        bell = 1 + layer.apply(h, "min")
        bell[t] = 0
        assert np.allclose(bell, h, atol=1e-9)
        # first-order: the strictly better neighbour is always taken
        for x in range(G.n):
            if x == t:
                continue
            for y, z in itertools.permutations(G.adj[x], 2):
                if h[y] < h[z] - 1e-9:
                    assert sol.strategy(x, y, z) == 1.0
        # re-sorting h reproduces the ordering
        again = sorted(range(G.n), key=lambda v: (round(h[v], 9), v))
        assert [round(h[v], 9) for v in again] == [round(h[v], 9) for v in sol.ordering]
        # policy iteration values never increase
        for a, b in itertools.pairwise(sol.trace):
            assert np.all(b <= a + 1e-9)


def test_target_set_matches_value_iteration():
    G = gen_cycle(6)
    sol = optimal_hitting(G, [0, 3])
    vi = value_iteration_hitting(G, [0, 3])
    assert np.allclose(sol.h, vi, atol=1e-8)
    for G in corpus(30, 4, 10, base=3000):
        S = [0, G.n - 1]
        assert np.allclose(optimal_hitting(G, S).h, value_iteration_hitting(G, S), atol=1e-8)


def test_multigraph_input():
    W = contract(gen_complete(4), [0, 1])
    sol = optimal_hitting(W, 0)
    assert np.allclose(sol.h, value_iteration_hitting(W, 0), atol=1e-8)
    assert sol.h[1] == pytest.approx(sol.h[2])  # the two unmerged vertices are symmetric


def test_quadratic_bounds():
    for G in corpus(200, 2, 12, base=4000):
        worst = max(optimal_hitting(G, t).h.max() for t in range(G.n))
        assert worst < 3 * G.m and worst < G.n**2


def test_subcubic_edges_hit_fast():
    for seed in range(100):
        G = subcubic(int(np.random.default_rng(seed).integers(4, 16)), seed)
        for v in range(G.n):
            h = optimal_hitting(G, v).h
            for u in G.adj[v]:
                assert h[u] <= 9 + 1e-9


@pytest.mark.parametrize("d", [3, 4])
def test_tree_adjacent_sum_linear(d):
    for seed in range(10):
        n = 10 + 4 * seed
        T = gen_random_tree(n, d, seed)
        total = 0.0
        for y in range(n):
            h = optimal_hitting(T, y).h
            total += sum(h[x] for x in T.adj[y])
        assert total <= 8 * d * n


def test_optimal_values_well_separated():
    for G in corpus(100, 2, 8, base=5000):
        h = np.unique(np.round(optimal_hitting(G, 0).h, 14))
        assert np.all(np.diff(h) > 1e-12)


def test_hitting_times_srw_oracles():
    G = random_connected(9, 6)
    P = srw_matrix(G).matrix
    H = srw_hitting_times(G)
    for t in range(G.n):
        assert np.allclose(H[:, t], hitting_times(P, t), atol=1e-8)
    assert srw_hitting_times(gen_path(3))[0, 2] == pytest.approx(4.0)


def test_stationary():
    G = random_connected(10, 2)
    pi = stationary(srw_matrix(G))
    assert np.allclose(pi, np.asarray(G.degrees) / (2 * G.m))
    assert np.allclose(stationary(lazy_matrix(G)), pi)
    assert np.allclose(stationary(srw_matrix(gen_path(2))), [0.5, 0.5])
    with pytest.raises(ValueError, match="reducible"):
        stationary(np.eye(2))


@pytest.mark.parametrize("n", [3, 5, 8, 20])
def test_optimal_return_complete(n):
    pi, _ = optimal_return(gen_complete(n), 0)
    assert pi == pytest.approx(1 / (1 + (n - 1) ** 2 / (2 * n - 3)))


def test_optimal_return_beats_srw():
    for G in corpus(30, 3, 10, base=6000):
        pi_srw = np.asarray(G.degrees) / (2 * G.m)
        pi, _ = optimal_return(G, 0)
        assert pi >= pi_srw[0] - 1e-12
    assert optimal_return(gen_path(2), 0)[0] == pytest.approx(0.5)


def test_cover_examples():
    G = gen_path(3)
    assert cover_mdp(G, 1).optimum == pytest.approx(11 / 3)
    assert cover_mdp(G, 0).optimum == pytest.approx(1 + 5 / 3)  # step in, then optimal hit of the far end
    assert cover_mdp(G, 1, covered=[0, 2]).optimum == 0.0
    assert cover_mdp(gen_complete(3), 0).optimum == pytest.approx(1 + 4 / 3)
    with pytest.raises(GraphError):
        cover_mdp(gen_cycle(15), 0)


def test_cover_layers_match_full_value_iteration():
    for G in corpus(12, 3, 8, base=7000):
        V = cover_value_iteration(G)
        for start in (0, G.n - 1):
            cv = cover_mdp(G, start)
            for mask, vals in cv.values.items():
                for v in np.flatnonzero(~np.isnan(vals)):
                    assert vals[v] == pytest.approx(V[v, mask], abs=1e-8)
            assert cv.optimum == pytest.approx(V[start, 1 << start], abs=1e-8)


def test_cover_value_zero_only_when_covered():
    G = random_connected(7, 3)
    cv = cover_mdp(G, 0)
    full = (1 << G.n) - 1
    for mask, vals in cv.values.items():
        finite = vals[~np.isnan(vals)]
        assert np.all(np.isfinite(finite))
        assert np.all(finite == 0) if mask == full else np.all(finite > 0)


def test_cover_optimum_below_spanning_walk():
    cfg = TrialConfig(seed=3, trials=200)
    for G in corpus(100, 3, 10, base=8000):
        opt = cover_mdp(G, 0).optimum
        rep = estimate_cover(G, spanning_walk_cover(G, 0), cfg)
        assert opt <= rep.mean + 3 * rep.sem + 1e-9


def test_next_step_oracle():
    P4 = gen_path(4)
    # at 1 with 0 already covered: go toward the uncovered side
    assert next_step_oracle(P4, 1, 0, 2, covered=[0]) == 2
    assert next_step_oracle(P4, 1, 2, 0, covered=[0]) == 2
    S = gen_star(4)
    assert next_step_oracle(S, 0, 2, 3, covered=[1]) == 2  # symmetric leaves tie
    G = gen_cycle(5)
    assert next_step_oracle(G, 0, 1, 4, covered=[0, 1, 2, 3]) == 4
    with pytest.raises(ValueError):
        next_step_oracle(P4, 0, 2, 1, covered=[])


def test_spectral_examples():
    assert spectral(gen_cycle(4)).lambda2 == pytest.approx(0.5)
    for n in (3, 6, 10, 40):
        rep = spectral(gen_complete(n))
        assert rep.lambda2 == pytest.approx(0.5 - 1 / (2 * (n - 1)))
        assert rep.t_rel == pytest.approx(1 / (1 - rep.lambda2))
    G = random_connected(15, 4)
    rep = spectral(G)
    L = lazy_matrix(G).matrix
    ev = np.sort(np.linalg.eigvals(L).real)[::-1]
    assert rep.lambda2 == pytest.approx(ev[1], abs=1e-9)
    assert 0 <= rep.lambda2 < 1
    assert np.allclose(rep.pi, np.asarray(G.degrees) / (2 * G.m))
    # networkx normalized Laplacian: lazy eigenvalue = 1 - mu/2
    mu = np.sort(nx.normalized_laplacian_spectrum(G.to_networkx()))
    assert rep.lambda2 == pytest.approx(1 - mu[1] / 2, abs=1e-9)
    with pytest.raises(GraphError):
        spectral(gen_cycle(30), budget=20)


def test_lazyconv_on_corpus():
    for G in corpus(100, 4, 50, base=9000):
        rep = spectral(G)
        T = math.ceil(4 * rep.t_rel * math.log(G.n))
        for S in ([G.n - 1], list(range(G.n // 4))):
            first, horizon = lazyconv_all(G, S, rep)
            assert horizon == T
            assert np.all(first >= 1), (G.n, S)
    t, p = lazyconv_search(gen_cycle(8), 0, [4])
    assert 1 <= t and p >= 1 / 8 / 3
    first, _ = lazyconv_all(gen_cycle(8), [4])
    assert first[0] == t
