"""Noisy trust observations and their accumulation into trust decisions.

An observation of robot j by robot i is a value in [0, 1] whose mean is at
least 1/2 + epsilon_alpha when j is legitimate and at most 1/2 - epsilon_alpha
when j is malicious. The trust score of a pair is the sum of centered
observations; a non-negative score reads as "trust". A robot withholds trust
from anyone it has observed fewer than n_alpha times.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

CUSTOM_SAMPLER_CHECK_DRAWS = 100_000


class TrustError(ValueError):
    pass


@dataclass(frozen=True)
class ObservationModel:
    """Observation noise model.

    ``sampler`` is None for the default Bernoulli model, which emits 1 with
    probability 1/2 + epsilon_alpha for legitimate targets and
    1/2 - epsilon_alpha for malicious ones. A custom sampler is any callable
    ``(target_is_legitimate, rng) -> value in [0, 1]`` whose conditional
    means satisfy the same epsilon_alpha separation; this is checked
    empirically at construction.
    """

    epsilon_alpha: float
    sampler: Callable[[bool, np.random.Generator], float] | None = None

    def __post_init__(self):
        if not (0.0 < self.epsilon_alpha <= 0.5):
            raise TrustError("epsilon_alpha must lie in (0, 1/2]")

    @property
    def kind(self) -> str:
        return "bernoulli" if self.sampler is None else "custom"

    def success_probability(self, target_is_legitimate: bool) -> float:
        """Bernoulli success probability for the given target class."""
        if target_is_legitimate:
            return 0.5 + self.epsilon_alpha
        return 0.5 - self.epsilon_alpha


def observation_model(
    epsilon_alpha: float,
    sampler: Callable[[bool, np.random.Generator], float] | None = None,
    check_rng: np.random.Generator | None = None,
) -> ObservationModel:
    """Build an ObservationModel, empirically validating any custom sampler.

    The check draws CUSTOM_SAMPLER_CHECK_DRAWS samples per target class and
    requires each empirical mean to satisfy its bound within a 3-sigma
    allowance for sampling noise (values in [0, 1] have sd <= 1/2).
    """
    model = ObservationModel(epsilon_alpha, sampler)
    if sampler is not None:
        rng = check_rng if check_rng is not None else np.random.default_rng(0x0B5E)
        margin = 3 * 0.5 / math.sqrt(CUSTOM_SAMPLER_CHECK_DRAWS)
        for legit, ok in ((True, lambda m: m >= 0.5 + epsilon_alpha - margin),
                          (False, lambda m: m <= 0.5 - epsilon_alpha + margin)):
            draws = [sampler(legit, rng) for _ in range(CUSTOM_SAMPLER_CHECK_DRAWS)]
            lo, hi = min(draws), max(draws)
            if lo < 0.0 or hi > 1.0:
                raise TrustError(f"custom sampler produced a value outside [0, 1]: {lo}, {hi}")
            if not ok(sum(draws) / len(draws)):
                cls = "legitimate" if legit else "malicious"
                raise TrustError(
                    f"custom sampler violates the mean bound for {cls} targets "
                    f"(epsilon_alpha={epsilon_alpha})"
                )
    return model


def sample_observation(
    model: ObservationModel, target_is_legitimate: bool, rng: np.random.Generator
) -> float:
    """One independent observation draw in [0, 1]."""
    if model.sampler is not None:
        value = float(model.sampler(target_is_legitimate, rng))
        if not (0.0 <= value <= 1.0):
            raise TrustError(f"custom sampler produced {value} outside [0, 1]")
        return value
    u = rng.random()
    return 1.0 if u < model.success_probability(target_is_legitimate) else 0.0


def trust_score(observations) -> float:
    """Sum of centered observations, beta = sum(o - 1/2); empty list -> 0."""
    total = 0.0
    for o in observations:
        if not (0.0 <= o <= 1.0):
            raise TrustError(f"observation {o} outside [0, 1]")
        total += o - 0.5
    return total


def interim_bit(owner: int, target: int, eta: int, beta: float, n_alpha: int) -> int:
    """Interim trust rule: self-trust always; otherwise trust requires at
    least n_alpha observations and a non-negative score (a zero score reads
    as trust)."""
    if target == owner:
        return 1
    return 1 if (eta >= n_alpha and beta >= 0.0) else 0


class TrustLedger:
    """One robot's observation log over the whole team.

    Stores the raw per-target observation values (for audit and export) as
    well as the running counts and scores the protocol decisions use. Owned
    by a single robot; freeze() marks the end of the observation window,
    after which interim entries may be read.
    """

    def __init__(self, owner: int, n_robots: int, n_alpha: int):
        if not (0 <= owner < n_robots):
            raise TrustError("owner id out of range")
        if n_alpha < 1:
            raise TrustError("n_alpha must be >= 1")
        self.owner = owner
        self.n_robots = n_robots
        self.n_alpha = n_alpha
        self.observations: list[list[float]] = [[] for _ in range(n_robots)]
        self.eta = np.zeros(n_robots, dtype=np.int64)
        self.beta = np.zeros(n_robots, dtype=np.float64)
        self.frozen = False

    def record(self, target: int, value: float) -> None:
        if self.frozen:
            raise TrustError("ledger is frozen; no further observations may be appended")
        if not (0 <= target < self.n_robots):
            raise TrustError(f"unknown target id {target}")
        if target == self.owner:
            raise TrustError("a robot does not observe itself")
        if not (0.0 <= value <= 1.0):
            raise TrustError(f"observation {value} outside [0, 1]")
        self.observations[target].append(float(value))
        self.eta[target] += 1
        self.beta[target] += value - 0.5

    def freeze(self) -> None:
        self.frozen = True

    def interim_vector(self) -> np.ndarray:
        """Bit per robot from the interim trust rule; requires freeze()."""
        return np.array(
            [interim_trust_entry(self, j) for j in range(self.n_robots)], dtype=np.uint8
        )


def interim_trust_entry(ledger: TrustLedger, target: int) -> int:
    """Interim trust bit of ``ledger.owner`` about ``target``."""
    if not (0 <= target < ledger.n_robots):
        raise TrustError(f"unknown target id {target}")
    if not ledger.frozen:
        raise TrustError("ledger must be frozen before interim entries are read")
    return interim_bit(
        ledger.owner, target, int(ledger.eta[target]), float(ledger.beta[target]), ledger.n_alpha
    )


def ledger_csv_rows(
    owner: int,
    eta: np.ndarray,
    beta: np.ndarray,
    interim: np.ndarray,
    final: np.ndarray,
) -> list[str]:
    """CSV lines ``owner,target,eta,beta,interim,final`` for one robot."""
    rows = []
    for j in range(len(eta)):
        rows.append(f"{owner},{j},{int(eta[j])},{repr(float(beta[j]))},{int(interim[j])},{int(final[j])}")
    return rows
