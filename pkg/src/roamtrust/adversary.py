"""Malicious-robot behaviors: movement policies and fabricated trust vectors.

Malicious robots are not bound to the fast-transition kernel, but they are
bound by the environment: one hop along a graph edge (or staying put) per
time-step. When queried for an opinion during the exchange phase they may
supply any well-formed bit vector; the worst case for the team is a vector
that is wrong about everyone.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MOVEMENTS = ("lazy_walk", "stationary", "shadow", "custom")
DISCLOSURES = ("invert_truth", "all_distrust_legit", "random", "custom")


class AdversaryError(ValueError):
    pass


@dataclass(frozen=True)
class AdversaryStrategy:
    """Immutable malicious behavior bundle.

    movement: "lazy_walk" | "stationary" | "shadow" | "custom"
      - stationary: optional ``site`` pins the initial placement; the robot
        never moves from wherever it stands.
      - shadow: ``target`` is the robot id to chase along shortest paths.
      - custom: ``move_fn(current_site, world, u) -> site`` decides the hop.
    disclosure: "invert_truth" | "all_distrust_legit" | "random" | "custom"
      - invert_truth / all_distrust_legit: claim distrust of every
        legitimate robot and trust of every malicious one (self included).
      - random: each bit set with probability ``p``, refreshed every
        time-step.
      - custom: ``disclose_fn(ground_truth, self_id, rng) -> bit vector``.
    """

    movement: str = "lazy_walk"
    disclosure: str = "invert_truth"
    site: int | None = None
    target: int | None = None
    p: float | None = None
    move_fn: object = None
    disclose_fn: object = None

    def __post_init__(self):
        if self.movement not in MOVEMENTS:
            raise AdversaryError(f"unknown movement policy {self.movement!r}")
        if self.disclosure not in DISCLOSURES:
            raise AdversaryError(f"unknown disclosure policy {self.disclosure!r}")
        if self.movement == "shadow" and self.target is None:
            raise AdversaryError("shadow movement requires a target robot id")
        if self.disclosure == "random" and not (
            self.p is not None and 0.0 <= self.p <= 1.0
        ):
            raise AdversaryError("random disclosure requires p in [0, 1]")
        if self.movement == "custom" and self.move_fn is None:
            raise AdversaryError("custom movement requires move_fn")
        if self.disclosure == "custom" and self.disclose_fn is None:
            raise AdversaryError("custom disclosure requires disclose_fn")


@dataclass(frozen=True)
class WorldView:
    """Public information a movement policy may consult: everyone's position
    at the start of the step, the graph, and its hop-distance matrix."""

    positions: np.ndarray
    graph: object
    distances: np.ndarray
    cums: np.ndarray
    dests: np.ndarray


def apply_movement(
    strategy: AdversaryStrategy, current_site: int, world: WorldView, u: float
) -> int:
    """Resolve one movement decision from a pre-drawn uniform ``u``.

    Every robot consumes exactly one movement uniform per time-step to keep
    the random-stream layout independent of the policy mix; policies that do
    not need randomness simply ignore ``u``.
    """
    if strategy.movement == "stationary":
        return current_site
    if strategy.movement == "lazy_walk":
        row_c = world.cums[current_site]
        k = 0
        while u >= row_c[k]:
            k += 1
        return int(world.dests[current_site, k])
    if strategy.movement == "shadow":
        target_pos = int(world.positions[strategy.target])
        best = current_site
        best_d = world.distances[current_site, target_pos]
        for nbr in world.graph.adjacency[current_site]:
            d = world.distances[nbr, target_pos]
            if d < best_d or (d == best_d and nbr < best):
                best, best_d = nbr, d
        return int(best)
    new = int(strategy.move_fn(current_site, world, u))
    if new != current_site and new not in world.graph.adjacency[current_site]:
        raise AdversaryError(f"custom movement {current_site} -> {new} is not a graph edge")
    return new


def adversary_move(
    strategy: AdversaryStrategy,
    current_site: int,
    world: WorldView,
    rng: np.random.Generator,
) -> int:
    """Draw one uniform and resolve the movement policy with it."""
    return apply_movement(strategy, current_site, world, rng.random())


def fabricate_vector(
    strategy: AdversaryStrategy,
    ground_truth: np.ndarray,
    self_id: int,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Bit vector the malicious robot supplies when asked for its opinions.

    invert_truth and all_distrust_legit both claim the exact opposite of the
    truth: 0 for every legitimate robot, 1 for every malicious one (self
    included) -- the worst-case disclosure for the team.
    """
    truth = np.asarray(ground_truth, dtype=np.uint8)
    if strategy.disclosure in ("invert_truth", "all_distrust_legit"):
        return (1 - truth).astype(np.uint8)
    if strategy.disclosure == "random":
        if rng is None:
            raise AdversaryError("random disclosure requires an rng")
        return (rng.random(len(truth)) < strategy.p).astype(np.uint8)
    vec = np.asarray(strategy.disclose_fn(truth, self_id, rng), dtype=np.uint8)
    if vec.shape != truth.shape or np.any(vec > 1):
        raise AdversaryError("custom disclosure must return a bit vector of team length")
    return vec
