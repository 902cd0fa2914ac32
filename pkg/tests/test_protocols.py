import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roamtrust import engine, markov, protocols, topology
from roamtrust.protocols import (
    ParameterError,
    TrustedNeighborhood,
    dcv_params,
    fuse_majority,
    individual_params,
)


def test_individual_params_reference_value():
    pp = individual_params(32, 0.1, 0.25, t_meet=15.8)
    # ceil(ln(655360) / 0.125)
    assert pp.n_alpha == 108
    assert pp.n_alpha_exact == pytest.approx(math.log(655360.0) / 0.125)


@pytest.mark.parametrize("delta", [0.5, 0.1, 0.01])
def test_individual_params_perfect_observation_identity(delta):
    pp = individual_params(1, delta, 0.5, t_meet=3.0)
    assert pp.n_alpha == math.ceil(2.0 * math.log(2.0 / delta))


@pytest.mark.parametrize("n_robots,delta,eps,t_meet", [
    (4, 0.1, 0.25, 15.8), (32, 0.5, 0.4, 2.0), (128, 0.01, 0.1, 36.0),
])
def test_individual_window_is_eight_n_alpha_t_meet(n_robots, delta, eps, t_meet):
    pp = individual_params(n_robots, delta, eps, t_meet)
    assert pp.tau_ind_exact == pytest.approx(8.0 * pp.n_alpha_exact * t_meet, rel=1e-12)


def test_individual_params_floor_at_one():
    pp = individual_params(4, 0.1, 0.25, t_meet=0.0)
    assert pp.tau_ind == 1  # ceil(0) floored to one time-step


def test_individual_params_domain_errors():
    with pytest.raises(ParameterError):
        individual_params(0, 0.1, 0.25, 1.0)
    with pytest.raises(ParameterError):
        individual_params(4, 1.5, 0.25, 1.0)
    with pytest.raises(ParameterError):
        individual_params(4, 0.1, 0.75, 1.0)
    with pytest.raises(ParameterError):
        individual_params(4, 0.1, 0.25, -1.0)


def test_dcv_params_reference_values():
    pp = dcv_params(32, 16, 0.1, 0.25, t_hit=36.0, t_meet=15.8)
    assert pp.q == pytest.approx(0.005 / math.exp(2.0 * math.e), rel=1e-12)
    assert pp.q == pytest.approx(2.18e-5, rel=0.01)
    assert pp.n_alpha == math.ceil(1280.0 * math.log(1.0 / pp.q))
    assert pp.f / pp.n_alpha_exact == pytest.approx(26.0 / (1.0 - 1.0 / math.e) ** 2, rel=1e-12)
    assert pp.f / pp.n_alpha_exact == pytest.approx(65.07, rel=1e-3)
    # crowd-vetting needs more observations per pair than the individual rule
    ind = individual_params(32, 0.1, 0.25, t_meet=15.8)
    assert pp.n_alpha > ind.n_alpha
    assert pp.tau == math.ceil(min(pp.f * 36.0, 4.0 * math.log(4.0 * 32**3 / 0.1) / 0.0625 * 15.8))


def test_dcv_params_branch_recorded():
    pp = dcv_params(32, 16, 0.1, 0.25, t_hit=36.0, t_meet=15.8)
    assert pp.tau_branch == "meeting"  # f T_hit is astronomically larger here
    pp2 = dcv_params(32, 16, 0.1, 0.25, t_hit=0.0, t_meet=15.8)
    assert pp2.tau_branch == "hitting"


def test_dcv_params_rho_constraint():
    with pytest.raises(ParameterError, match="3\\*rho2"):
        dcv_params(32, 16, 0.1, 0.25, 36.0, 15.8, rho=(0.1, 0.3, 0.2, 0.1))
    with pytest.raises(ParameterError):
        dcv_params(32, 16, 0.1, 0.25, 36.0, 15.8, rho=(0.1, -0.1, 0.2, 0.1))
    with pytest.raises(ParameterError):
        dcv_params(32, 40, 0.1, 0.25, 36.0, 15.8)


def test_default_rho_satisfies_fusion_condition():
    pp = dcv_params(8, 4, 0.1, 0.4, 10.0, 5.0)
    r = pp.rho
    assert 3 * r[1] + r[2] + r[3] == pytest.approx(0.9)


def test_params_config_lines_round_trip():
    pp = dcv_params(32, 16, 0.1, 0.25, 36.0, 15.8)
    text = pp.config_lines()
    assert "n_alpha = " in text and "tau_branch = meeting" in text
    back = protocols.ProtocolParams.from_config_lines(text)
    assert back.kind == "dcv" and back.n_alpha == pp.n_alpha and back.tau == pp.tau
    assert back.q == pp.q and back.f == pp.f and back.rho == pp.rho
    ind = individual_params(8, 0.5, 0.4, 12.0)
    back_ind = protocols.ProtocolParams.from_config_lines(ind.config_lines())
    assert back_ind.tau_ind == ind.tau_ind and back_ind.n_alpha == ind.n_alpha
    with pytest.raises(ParameterError, match="unknown parameter key"):
        protocols.ProtocolParams.from_config_lines("kind = dcv\nn_alpha = 3\nbogus = 1\n")
    with pytest.raises(ParameterError, match="at least"):
        protocols.ProtocolParams.from_config_lines("kind = dcv\n")


def _hood(owner, vectors):
    return TrustedNeighborhood(owner, frozenset(vectors), dict(vectors))


def test_fuse_majority_examples():
    # three voters, votes (1, 1, 0) for robot 3 -> trust (2 >= 1.5)
    own = np.array([1, 0, 0, 1], dtype=np.uint8)
    hood = _hood(0, {
        0: own,
        1: np.array([0, 1, 0, 1], dtype=np.uint8),
        2: np.array([0, 0, 1, 0], dtype=np.uint8),
    })
    fused = fuse_majority(own, hood)
    assert fused[3] == 1
    # four voters, votes 2 of 4 -> tie counts as trust
    hood4 = _hood(0, {
        0: np.array([1, 0, 0, 1, 0], dtype=np.uint8),
        1: np.array([0, 0, 0, 1, 0], dtype=np.uint8),
        2: np.array([0, 0, 0, 0, 0], dtype=np.uint8),
        3: np.array([0, 0, 0, 0, 0], dtype=np.uint8),
    })
    fused4 = fuse_majority(hood4.collected_vectors[0], hood4)
    assert fused4[3] == 1  # 2 >= 4/2


def test_fuse_majority_single_voter_returns_own_vector():
    own = np.array([1, 0, 1, 0], dtype=np.uint8)
    fused = fuse_majority(own, _hood(0, {0: own}))
    assert fused.tolist() == own.tolist()


def test_fuse_majority_owner_entry_pinned():
    own = np.array([1, 1], dtype=np.uint8)
    hood = _hood(0, {
        0: own,
        1: np.array([0, 1], dtype=np.uint8),
    })
    # voter 1 distrusts the owner, but the owner keeps trusting itself
    hood = TrustedNeighborhood(0, frozenset({0, 1}), {
        0: own, 1: np.array([0, 0], dtype=np.uint8)
    })
    assert fuse_majority(own, hood)[0] == 1


def test_fuse_majority_validations():
    own = np.array([1, 0], dtype=np.uint8)
    with pytest.raises(ParameterError, match="owner"):
        TrustedNeighborhood(0, frozenset({1}), {1: own})
    with pytest.raises(ParameterError, match="without collected"):
        TrustedNeighborhood(0, frozenset({0, 1}), {0: own})
    hood = _hood(0, {0: own, 1: np.array([1, 0, 0], dtype=np.uint8)})
    with pytest.raises(ParameterError, match="length mismatch"):
        fuse_majority(own, hood)
    with pytest.raises(ParameterError, match="disagrees"):
        fuse_majority(np.array([0, 0], dtype=np.uint8), _hood(0, {0: own}))


@given(
    st.integers(min_value=1, max_value=6).flatmap(
        lambda m: st.tuples(
            st.just(m),
            st.lists(
                st.lists(st.integers(0, 1), min_size=4, max_size=4),
                min_size=m,
                max_size=m,
            ),
        )
    ),
    st.permutations(range(6)),
)
@settings(max_examples=150, deadline=None)
def test_fuse_majority_permutation_invariant(votes, perm):
    m, vectors = votes
    vecs = {i: np.array(v, dtype=np.uint8) for i, v in enumerate(vectors)}
    vecs[0][0] = 1  # owner self-trust
    base = fuse_majority(vecs[0], _hood(0, vecs))
    relabel = {0: 0}
    for i in range(1, m):
        relabel[i] = 10 + perm[i]  # same votes under permuted member ids
    vecs2 = {relabel[i]: v for i, v in vecs.items()}
    again = fuse_majority(vecs2[0], _hood(0, vecs2))
    assert base.tolist() == again.tolist()


@given(
    st.integers(min_value=2, max_value=6),
    st.data(),
)
@settings(max_examples=150, deadline=None)
def test_fuse_majority_monotone(m, data):
    n = 4
    vectors = {
        i: np.array(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)), dtype=np.uint8)
        for i in range(m)
    }
    vectors[0][0] = 1
    fused = fuse_majority(vectors[0], _hood(0, vectors))
    member = data.draw(st.integers(1, m - 1))
    k = data.draw(st.integers(0, n - 1))
    flipped = {i: v.copy() for i, v in vectors.items()}
    flipped[member][k] = 1
    fused_up = fuse_majority(flipped[0], _hood(0, flipped))
    # raising one vote from 0 to 1 never flips any fused entry 1 -> 0
    assert np.all(fused_up >= fused)


def test_run_individual_trivial_single_site(rng):
    graph = topology.line(1)
    P = markov.lazy_transition_matrix(graph)
    team = engine.Team(3, 3)
    pp = protocols.ProtocolParams(
        kind="individual", n_robots=3, delta=0.1, epsilon_alpha=0.5,
        n_alpha=1, n_alpha_exact=1.0, tau_ind=1, tau_ind_exact=1.0, n_legit=3,
    )
    res = protocols.run_individual(graph, P, pp, team, rng)
    assert engine.success_check(res.vectors, team.truth)
    assert res.meeting_stats["min"] == 1


def test_run_individual_zero_window_defaults_to_distrust(rng):
    graph = topology.grid(2, 2)
    P = markov.lazy_transition_matrix(graph)
    team = engine.Team(4, 4)
    pp = protocols.ProtocolParams(
        kind="individual", n_robots=4, delta=0.1, epsilon_alpha=0.5,
        n_alpha=1, n_alpha_exact=1.0, tau_ind=0, tau_ind_exact=0.0, n_legit=4,
    )
    res = protocols.run_individual(graph, P, pp, team, rng)
    for r, i in enumerate(res.record.legit_ids):
        row = res.vectors[r]
        assert row[i] == 1
        assert np.sum(row) == 1  # everyone else distrusted by default


def test_individual_formula_windows_meet_guarantee_monte_carlo():
    # formula windows at delta = 0.5 keep the all-correct frequency above
    # 1 - delta / N over 200 runs (one-sided check; the bound is loose)
    graph = topology.grid(3, 3)
    P = markov.lazy_transition_matrix(graph)
    _, t_meet = markov.meeting_times(P)
    n_robots, delta, eps = 8, 0.5, 0.4
    pp = individual_params(n_robots, delta, eps, t_meet)
    team = engine.Team(n_robots, n_robots // 2)
    ok = 0
    runs = 200
    for i in range(runs):
        res = protocols.run_individual(
            graph, P, pp, team, np.random.SeedSequence(404, spawn_key=(i,)),
            base_config=engine.Config(epsilon_alpha=eps, delta=delta, n_robots=n_robots,
                                      n_legit=n_robots // 2),
        )
        ok += engine.success_check(res.vectors, team.truth)
    assert ok / runs >= 1.0 - delta / n_robots


def test_run_dcv_all_legit_single_site_all_ones(rng):
    graph = topology.line(1)
    P = markov.lazy_transition_matrix(graph)
    team = engine.Team(4, 4)
    pp = protocols.ProtocolParams(
        kind="dcv", n_robots=4, n_legit=4, delta=0.1, epsilon_alpha=0.5,
        n_alpha=1, n_alpha_exact=1.0, tau=1, tau_exact=1.0, rho=(0.1, 0.2, 0.2, 0.1),
    )
    res = protocols.run_dcv(graph, P, pp, team, rng)
    assert np.all(res.final_vectors == 1)
    assert np.all(res.theta_sizes == 4)


def test_run_dcv_all_legit_perfect_obs_every_seed():
    graph = topology.line(1)
    P = markov.lazy_transition_matrix(graph)
    team = engine.Team(5, 5)
    pp = protocols.ProtocolParams(
        kind="dcv", n_robots=5, n_legit=5, delta=0.1, epsilon_alpha=0.5,
        n_alpha=1, n_alpha_exact=1.0, tau=2, tau_exact=2.0, rho=(0.1, 0.2, 0.2, 0.1),
    )
    for seed in range(25):
        res = protocols.run_dcv(graph, P, pp, team, seed)
        assert np.all(res.final_vectors == 1)


def test_dcv_beats_individual_at_sixteen_robots():
    # paired-seed until-correct comparison on the 9-site grid
    from roamtrust import experiments

    spec = experiments.robots_sweep_spec(runs_per_point=100, include_theory=False)
    from dataclasses import replace

    spec = replace(spec, values=(16,))
    result = experiments.run_sweep(spec, 316)
    ind = result.series[(16, "individual")]
    dcv = result.series[(16, "dcv")]
    assert dcv.mean < ind.mean
