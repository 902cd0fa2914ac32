import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roamtrust import trust
from roamtrust.trust import TrustError


def test_model_rejects_bad_epsilon():
    with pytest.raises(TrustError):
        trust.ObservationModel(0.0)
    with pytest.raises(TrustError):
        trust.ObservationModel(0.6)


def test_bernoulli_probabilities():
    m = trust.ObservationModel(0.2)
    assert m.success_probability(True) == pytest.approx(0.7)
    assert m.success_probability(False) == pytest.approx(0.3)
    assert m.kind == "bernoulli"


def test_perfect_observations_are_deterministic(rng):
    m = trust.ObservationModel(0.5)
    for _ in range(50):
        assert trust.sample_observation(m, True, rng) == 1.0
        assert trust.sample_observation(m, False, rng) == 0.0


def test_bernoulli_empirical_mean(rng):
    m = trust.ObservationModel(0.2)
    draws = (rng.random(100_000) < m.success_probability(True)).mean()
    assert abs(draws - 0.7) <= 0.01
    vals = [trust.sample_observation(m, True, rng) for _ in range(20_000)]
    assert abs(np.mean(vals) - 0.7) <= 0.02


def test_custom_sampler_accepted_and_validated(rng):
    def beta_like(legit, r):
        base = 0.85 if legit else 0.15
        return min(1.0, max(0.0, base + 0.1 * (r.random() - 0.5)))

    model = trust.observation_model(0.3, sampler=beta_like, check_rng=rng)
    assert model.kind == "custom"
    v = trust.sample_observation(model, True, rng)
    assert 0.0 <= v <= 1.0


def test_custom_sampler_rejected_when_mean_violates_bound(rng):
    def ambiguous(legit, r):
        return r.random()  # mean 1/2 for both classes

    with pytest.raises(TrustError, match="mean bound"):
        trust.observation_model(0.2, sampler=ambiguous, check_rng=rng)


def test_custom_sampler_rejected_outside_unit_interval(rng):
    with pytest.raises(TrustError, match=r"outside \[0, 1\]"):
        trust.observation_model(0.2, sampler=lambda legit, r: 1.5, check_rng=rng)


def test_trust_score_examples():
    assert trust.trust_score([1, 1, 0]) == pytest.approx(0.5)
    assert trust.trust_score([0, 0]) == pytest.approx(-1.0)
    assert trust.trust_score([0.5, 0.5, 0.5]) == 0.0
    assert trust.trust_score([]) == 0.0


def test_trust_score_rejects_out_of_range():
    with pytest.raises(TrustError):
        trust.trust_score([0.5, 1.2])


dyadic = st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0])


@given(st.lists(dyadic, max_size=30), st.lists(dyadic, max_size=30))
@settings(max_examples=200, deadline=None)
def test_trust_score_additive(a, b):
    # exact on dyadic observation values (all sums representable)
    assert trust.trust_score(a + b) == trust.trust_score(a) + trust.trust_score(b)


def test_interim_bit_rule():
    assert trust.interim_bit(0, 0, 0, 0.0, 5) == 1  # self-trust
    assert trust.interim_bit(0, 1, 4, 2.0, 5) == 0  # insufficient evidence
    assert trust.interim_bit(0, 1, 5, 0.0, 5) == 1  # zero score reads as trust
    assert trust.interim_bit(0, 1, 5, -0.5, 5) == 0


def test_ledger_records_and_interim():
    led = trust.TrustLedger(owner=1, n_robots=3, n_alpha=2)
    led.record(0, 1.0)
    led.record(0, 1.0)
    led.record(2, 0.0)
    led.freeze()
    assert trust.interim_trust_entry(led, 1) == 1
    assert trust.interim_trust_entry(led, 0) == 1
    assert trust.interim_trust_entry(led, 2) == 0  # one observation < n_alpha
    assert led.interim_vector().tolist() == [1, 1, 0]
    assert led.observations[0] == [1.0, 1.0]


def test_ledger_guards():
    led = trust.TrustLedger(owner=0, n_robots=2, n_alpha=1)
    with pytest.raises(TrustError, match="frozen"):
        trust.interim_trust_entry(led, 1)
    with pytest.raises(TrustError, match="observe itself"):
        led.record(0, 1.0)
    with pytest.raises(TrustError, match="unknown target"):
        led.record(7, 1.0)
    led.freeze()
    with pytest.raises(TrustError, match="frozen"):
        led.record(1, 1.0)
    with pytest.raises(TrustError, match="unknown target"):
        trust.interim_trust_entry(led, 9)


def test_ledger_csv_rows():
    rows = trust.ledger_csv_rows(
        1,
        np.array([3, 0, 2]),
        np.array([1.5, 0.0, -1.0]),
        np.array([1, 1, 0]),
        np.array([1, 1, 0]),
    )
    assert rows[0] == "1,0,3,1.5,1,1"
    assert rows[2] == "1,2,2,-1.0,0,0"


@pytest.mark.parametrize("eps,delta", [(0.2, 0.05), (0.3, 0.1)])
def test_majority_vote_bound(eps, delta, rng):
    # with n_alpha = ln(1/delta) / (2 eps^2) observations, the sign of the
    # trust score misclassifies with rate at most delta (loose in practice)
    n_alpha = math.ceil(math.log(1.0 / delta) / (2.0 * eps * eps))
    ledgers = 20_000
    legit_hits = rng.random((ledgers, n_alpha)) < (0.5 + eps)
    legit_beta = legit_hits.sum(axis=1) - 0.5 * n_alpha
    rate_legit = float(np.mean(legit_beta < 0.0))
    mal_hits = rng.random((ledgers, n_alpha)) < (0.5 - eps)
    mal_beta = mal_hits.sum(axis=1) - 0.5 * n_alpha
    rate_mal = float(np.mean(mal_beta >= 0.0))
    assert rate_legit <= delta
    assert rate_mal <= delta


def test_pairwise_streams_are_independent():
    # two ledgers fed from distinct generator streams never share state
    a = np.random.default_rng(np.random.SeedSequence(5, spawn_key=(0,)))
    b = np.random.default_rng(np.random.SeedSequence(5, spawn_key=(1,)))
    model = trust.ObservationModel(0.1)
    va = [trust.sample_observation(model, True, a) for _ in range(64)]
    vb = [trust.sample_observation(model, True, b) for _ in range(64)]
    assert va != vb
