import math

import numpy as np
import pytest

from conftest import step_walkers
from roamtrust import markov, topology
from roamtrust.markov import MarkovError


def P_of(graph):
    return markov.lazy_transition_matrix(graph)


def test_lazy_kernel_line2():
    P = P_of(topology.line(2))
    assert P.rows.tolist() == [[0.5, 0.5], [0.5, 0.5]]


def test_lazy_kernel_line3_middle_row():
    P = P_of(topology.line(3))
    assert P.rows[1].tolist() == [0.25, 0.5, 0.25]


def test_lazy_kernel_grid_corner():
    P = P_of(topology.grid(3, 3))
    corner = P.rows[0]
    assert corner[0] == 0.5
    nonzero = {j: corner[j] for j in range(9) if j != 0 and corner[j] > 0}
    assert nonzero == {1: 0.25, 3: 0.25}


def test_lazy_kernel_single_site():
    P = P_of(topology.line(1))
    assert P.rows.tolist() == [[1.0]]


@pytest.mark.parametrize(
    "graph",
    [topology.line(1), topology.line(5), topology.grid(3, 3), topology.grid(4, 5)],
)
def test_rows_stochastic_and_diagonal(graph):
    P = P_of(graph)
    sums = P.rows.sum(axis=1)
    assert np.max(np.abs(sums - 1.0)) <= 1e-12
    if graph.num_sites > 1:
        assert np.all(np.diag(P.rows) == 0.5)


def test_transition_matrix_validation():
    with pytest.raises(MarkovError):
        markov.TransitionMatrix(2, np.array([[0.6, 0.6], [0.5, 0.5]]))
    with pytest.raises(MarkovError):
        markov.TransitionMatrix(2, np.array([[1.5, -0.5], [0.5, 0.5]]))


def test_stationary_line2_line3_line1():
    assert markov.stationary_distribution(P_of(topology.line(2))).tolist() == [0.5, 0.5]
    pi3 = markov.stationary_distribution(P_of(topology.line(3)))
    assert np.allclose(pi3, [0.25, 0.5, 0.25], atol=1e-12)
    assert markov.stationary_distribution(P_of(topology.line(1))).tolist() == [1.0]


@pytest.mark.parametrize("graph", [topology.grid(3, 3), topology.line(6)])
def test_stationary_matches_degree_ratio(graph):
    # the lazy walk is reversible with pi proportional to degree
    P = P_of(graph)
    pi = markov.stationary_distribution(P)
    deg = np.array([graph.degree(s) for s in range(graph.num_sites)], dtype=float)
    assert np.allclose(pi, deg / deg.sum(), atol=1e-12)
    assert np.abs(pi @ P.rows - pi).max() <= 1e-10


def test_hitting_line2_exact():
    H, t_hit = markov.hitting_times(P_of(topology.line(2)))
    assert H[0, 1] == pytest.approx(2.0, abs=1e-12)
    assert H[1, 0] == pytest.approx(2.0, abs=1e-12)
    assert t_hit == pytest.approx(2.0, abs=1e-12)


def test_hitting_diagonal_zero(grid33_P):
    H, _ = markov.hitting_times(grid33_P)
    assert np.all(np.diag(H) == 0.0)


def test_hitting_first_step_recurrence(grid33_P):
    H, _ = markov.hitting_times(grid33_P)
    P = grid33_P.rows
    n = grid33_P.n_states
    for w in range(n):
        for i in range(n):
            if i == w:
                continue
            residual = H[i, w] - (1.0 + P[i] @ H[:, w])
            assert abs(residual) <= 1e-9


def test_meeting_line2_exact():
    M, t_meet = markov.meeting_times(P_of(topology.line(2)))
    assert M[0, 1] == pytest.approx(2.0, abs=1e-12)
    assert np.all(np.diag(M) == 0.0)
    assert t_meet == pytest.approx(2.0, abs=1e-12)


def test_meeting_first_step_recurrence(grid33_P, grid33_mq):
    M = grid33_mq.meeting
    P = grid33_P.rows
    n = grid33_P.n_states
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            expect = 1.0 + sum(
                P[a, x] * P[b, y] * M[x, y] for x in range(n) for y in range(n)
            )
            assert abs(M[a, b] - expect) <= 1e-9


def test_meeting_budget():
    with pytest.raises(MarkovError, match="budget"):
        markov.meeting_times(P_of(topology.grid(3, 3)), max_product_states=10)


def _mc_hitting(P, start, target, trials, rng, cap=100_000):
    cums, dests = markov.inversion_tables(P)
    pos = np.full(trials, start, dtype=np.int64)
    steps = np.zeros(trials, dtype=np.int64)
    active = pos != target
    t = 0
    while active.any():
        t += 1
        if t > cap:
            raise AssertionError("hitting oracle cap exceeded")
        pos[active] = step_walkers(cums, dests, pos[active], rng)
        arrived = active & (pos == target)
        steps[arrived] = t
        active = active & ~arrived
    return steps.mean()


def _mc_meeting(P, start_a, start_b, trials, rng, cap=100_000):
    cums, dests = markov.inversion_tables(P)
    a = np.full(trials, start_a, dtype=np.int64)
    b = np.full(trials, start_b, dtype=np.int64)
    steps = np.zeros(trials, dtype=np.int64)
    active = a != b
    t = 0
    while active.any():
        t += 1
        if t > cap:
            raise AssertionError("meeting oracle cap exceeded")
        a[active] = step_walkers(cums, dests, a[active], rng)
        b[active] = step_walkers(cums, dests, b[active], rng)
        met = active & (a == b)
        steps[met] = t
        active = active & ~met
    return steps.mean()


def test_grid_hitting_against_monte_carlo(grid33_P, grid33_mq, rng):
    H = grid33_mq.hitting
    i, w = np.unravel_index(np.argmax(H), H.shape)
    mc = _mc_hitting(grid33_P, int(i), int(w), 10_000, rng)
    assert abs(mc - H[i, w]) / H[i, w] <= 0.05


def test_grid_meeting_against_monte_carlo(grid33_P, grid33_mq, rng):
    M = grid33_mq.meeting
    a, b = np.unravel_index(np.argmax(M), M.shape)
    mc = _mc_meeting(grid33_P, int(a), int(b), 10_000, rng)
    assert abs(mc - M[a, b]) / M[a, b] <= 0.05


def test_mixing_times():
    assert markov.mixing_time(P_of(topology.line(1))) == 0
    assert markov.mixing_time(P_of(topology.line(2))) == 1


def test_mixing_tv_profile_monotone(grid33_P):
    t_mix = markov.mixing_time(grid33_P)
    profile = markov.tv_profile(grid33_P, t_mix + 5)
    assert np.all(np.diff(profile) <= 1e-12)
    assert profile[t_mix] <= 0.25
    assert profile[t_mix - 1] > 0.25


def test_sample_step_single_state(rng):
    P = P_of(topology.line(1))
    assert markov.sample_step(P, 0, rng) == 0


class _StubRng:
    def __init__(self, u):
        self.u = u

    def random(self):
        return self.u


def test_sample_step_low_draw_is_self_transition():
    # self-first inversion: u < 1/2 always keeps a lazy walker in place
    for graph in (topology.line(3), topology.grid(3, 3)):
        P = P_of(graph)
        for s in range(graph.num_sites):
            assert markov.sample_step(P, s, _StubRng(0.499999)) == s
    P = P_of(topology.line(3))
    assert markov.sample_step(P, 2, _StubRng(0.75)) == 1  # unique neighbor


def test_sample_step_stay_frequency(rng):
    P = P_of(topology.line(2))
    draws = 100_000
    stays = sum(1 for _ in range(draws) if markov.sample_step(P, 0, rng) == 0)
    assert abs(stays / draws - 0.5) <= 0.01


def test_empirical_meeting_frequency_within_two_t_meet(rng):
    # two walks meet within 2 T_meet with probability >= 1/2; assert 0.45
    for graph in (topology.line(2), topology.grid(3, 3)):
        P = P_of(graph)
        _, t_meet = markov.meeting_times(P)
        horizon = math.ceil(2 * t_meet)
        cums, dests = markov.inversion_tables(P)
        n = graph.num_sites
        starts = [(a, b) for a in range(n) for b in range(n) if a != b]
        for a0, b0 in starts:
            trials = 2_000
            a = np.full(trials, a0, dtype=np.int64)
            b = np.full(trials, b0, dtype=np.int64)
            met = np.zeros(trials, dtype=bool)
            for _ in range(horizon):
                a = step_walkers(cums, dests, a, rng)
                b = step_walkers(cums, dests, b, rng)
                met |= a == b
            assert met.mean() >= 0.45


@pytest.mark.parametrize("graph", [topology.line(2), topology.grid(3, 3)])
def test_moving_target_non_meeting_bound(graph, rng):
    # against any fixed trajectory of length ~T_hit, a walker started from
    # the stationary distribution fails to meet with frequency <= 1/e + 0.05
    P = P_of(graph)
    _, t_hit = markov.hitting_times(P)
    horizon = math.ceil(t_hit)
    cums, dests = markov.inversion_tables(P)
    pi = markov.stationary_distribution(P)
    trail = [0]
    for _ in range(horizon - 1):
        trail.append(markov.sample_step(P, trail[-1], rng))
    for trajectory in (trail, [0] * horizon):
        trials = 10_000
        pos = rng.choice(graph.num_sites, size=trials, p=pi).astype(np.int64)
        never_met = pos != trajectory[0]
        for kappa in range(1, horizon):
            pos = step_walkers(cums, dests, pos, rng)
            never_met &= pos != trajectory[kappa]
        assert never_met.mean() <= 1.0 / math.e + 0.05


def test_export_markov_csv(tmp_path, grid33_mq):
    paths = markov.export_markov_csv(grid33_mq, tmp_path)
    assert len(paths) == 4
    hitting = (tmp_path / "hitting.csv").read_text().splitlines()
    assert hitting[0].startswith("from_site,")
    assert len(hitting) == 10
    # plain parseable numbers, no numpy scalar reprs
    for token in hitting[1].split(","):
        float(token)
    summary = (tmp_path / "summary.csv").read_text().splitlines()[1]
    assert float(summary.split(",")[2]) == grid33_mq.t_mix
