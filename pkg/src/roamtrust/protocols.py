"""The two classification protocols and their closed-form parameters.

Individual protocol: each legitimate robot walks for a window, observes the
robots it meets, and trusts exactly those it has observed at least n_alpha
times with a non-negative trust score (plus itself).

Crowd-vetting protocol: two equal phases. Phase 1 is the individual
protocol on a shorter window, producing a frozen interim vector. In phase 2
the robot keeps walking and, whenever it is co-located with a robot its
interim vector trusts, stores that robot's (frozen or fabricated) vector.
The final vector assigns each entry by majority over the collected vectors,
its own included; ties count as trust.

Natural logarithms throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import engine
from .markov import TransitionMatrix

EULER_TERM = math.exp(2.0 * math.e)  # e^(2e), the fixed factor in q
F_COEFFICIENT = 26.0 / (1.0 - 1.0 / math.e) ** 2  # ~65.07, window growth factor


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolParams:
    """Resolved protocol parameters; ``kind`` says which calculator filled
    them. Exact (pre-ceiling) values are kept alongside the integer windows
    for theory curves and algebraic checks."""

    kind: str
    n_robots: int
    delta: float
    epsilon_alpha: float
    n_alpha: int
    n_alpha_exact: float
    n_legit: int | None = None
    rho: tuple[float, float, float, float] | None = None
    tau_ind: int | None = None
    tau_ind_exact: float | None = None
    tau: int | None = None
    tau_exact: float | None = None
    q: float | None = None
    f: float | None = None
    tau_branch: str | None = None

    def config_lines(self) -> str:
        """Flat key-value rendering for run output and config echo."""
        pairs = [
            ("kind", self.kind),
            ("n_robots", self.n_robots),
            ("n_legit", self.n_legit),
            ("delta", self.delta),
            ("epsilon_alpha", self.epsilon_alpha),
            ("rho", ",".join(repr(r) for r in self.rho) if self.rho else None),
            ("n_alpha", self.n_alpha),
            ("tau_ind", self.tau_ind),
            ("tau", self.tau),
            ("q", repr(self.q) if self.q is not None else None),
            ("f", repr(self.f) if self.f is not None else None),
            ("tau_branch", self.tau_branch),
        ]
        return "\n".join(f"{k} = {v}" for k, v in pairs if v is not None) + "\n"

    @classmethod
    def from_config_lines(cls, text: str) -> "ProtocolParams":
        """Parse the config_lines rendering back into resolved parameters.

        Exact (pre-ceiling) fields are not part of the wire format; they are
        restored as the integer values."""
        fields: dict = {}
        for raw in text.splitlines():
            stripped = raw.split("#", 1)[0].strip()
            if not stripped:
                continue
            key, _, value = stripped.partition("=")
            key, value = key.strip(), value.strip()
            if key in ("kind", "tau_branch"):
                fields[key] = value
            elif key in ("n_robots", "n_legit", "n_alpha", "tau_ind", "tau"):
                fields[key] = int(value)
            elif key in ("delta", "epsilon_alpha", "q", "f"):
                fields[key] = float(value)
            elif key == "rho":
                fields[key] = tuple(float(v) for v in value.split(","))
            else:
                raise ParameterError(f"unknown parameter key {key!r}")
        if "kind" not in fields or "n_alpha" not in fields:
            raise ParameterError("parameter text needs at least 'kind' and 'n_alpha'")
        fields.setdefault("n_alpha_exact", float(fields["n_alpha"]))
        if fields.get("tau_ind") is not None:
            fields.setdefault("tau_ind_exact", float(fields["tau_ind"]))
        if fields.get("tau") is not None:
            fields.setdefault("tau_exact", float(fields["tau"]))
        return cls(**fields)


def _ceil_floor1(x: float) -> int:
    return max(1, math.ceil(x))


def individual_params(
    n_robots: int, delta: float, epsilon_alpha: float, t_meet: float
) -> ProtocolParams:
    """Window and observation count guaranteeing the individual protocol a
    per-team success probability of at least 1 - delta / n_robots:

        n_alpha = ln(2 N^3 / delta) / (2 eps^2)
        tau_ind = 4 ln(2 N^3 / delta) / eps^2 * T_meet  (= 8 n_alpha T_meet)

    Both are rounded up and floored at one time-step.
    """
    _check_domain(n_robots, delta, epsilon_alpha)
    if t_meet < 0:
        raise ParameterError("t_meet must be >= 0")
    log_term = math.log(2.0 * n_robots**3 / delta)
    n_alpha_exact = log_term / (2.0 * epsilon_alpha**2)
    tau_exact = 4.0 * log_term / epsilon_alpha**2 * t_meet
    return ProtocolParams(
        kind="individual",
        n_robots=n_robots,
        delta=delta,
        epsilon_alpha=epsilon_alpha,
        n_alpha=_ceil_floor1(n_alpha_exact),
        n_alpha_exact=n_alpha_exact,
        tau_ind=_ceil_floor1(tau_exact),
        tau_ind_exact=tau_exact,
    )


def dcv_params(
    n_robots: int,
    n_legit: int,
    delta: float,
    epsilon_alpha: float,
    t_hit: float,
    t_meet: float,
    rho: tuple[float, float, float, float] = (0.1, 0.2, 0.2, 0.1),
) -> ProtocolParams:
    """Crowd-vetting parameters:

        q       = (delta rho1 / e^(2e)) (|L| / N)
        n_alpha = 8 / (rho1 eps^2) * ln(1/q)
        f       = 26 / (1 - 1/e)^2 * n_alpha
        tau     = min(f T_hit, 4 ln(4 N^3 / delta) / eps^2 * T_meet)

    per phase; the branch the min selects is recorded. Requires the fusion
    proportions to satisfy 1 > 3 rho2 + rho3 + rho4.
    """
    _check_domain(n_robots, delta, epsilon_alpha)
    if not (1 <= n_legit <= n_robots):
        raise ParameterError("need 1 <= n_legit <= n_robots")
    if t_hit < 0 or t_meet < 0:
        raise ParameterError("walk times must be >= 0")
    rho1, rho2, rho3, rho4 = rho
    if min(rho) < 0:
        raise ParameterError("rho components must be >= 0")
    if rho1 <= 0:
        raise ParameterError("rho1 must be > 0")
    if not 1.0 > 3.0 * rho2 + rho3 + rho4:
        raise ParameterError(
            f"fusion proportions violate 1 > 3*rho2 + rho3 + rho4 "
            f"(got {3 * rho2 + rho3 + rho4})"
        )
    q = (delta * rho1 / EULER_TERM) * (n_legit / n_robots)
    if not q < 1.0:
        raise ParameterError("q >= 1; inputs outside the valid domain")
    n_alpha_exact = 8.0 / (rho1 * epsilon_alpha**2) * math.log(1.0 / q)
    f = F_COEFFICIENT * n_alpha_exact
    tau_hit = f * t_hit
    tau_meet = 4.0 * math.log(4.0 * n_robots**3 / delta) / epsilon_alpha**2 * t_meet
    if tau_meet <= tau_hit:
        tau_exact, branch = tau_meet, "meeting"
    else:
        tau_exact, branch = tau_hit, "hitting"
    return ProtocolParams(
        kind="dcv",
        n_robots=n_robots,
        n_legit=n_legit,
        delta=delta,
        epsilon_alpha=epsilon_alpha,
        rho=tuple(rho),
        n_alpha=_ceil_floor1(n_alpha_exact),
        n_alpha_exact=n_alpha_exact,
        tau=_ceil_floor1(tau_exact),
        tau_exact=tau_exact,
        q=q,
        f=f,
        tau_branch=branch,
    )


def _check_domain(n_robots: int, delta: float, epsilon_alpha: float) -> None:
    if n_robots < 1:
        raise ParameterError("n_robots must be >= 1")
    if not (0.0 < delta < 1.0):
        raise ParameterError("delta must lie in (0, 1)")
    if not (0.0 < epsilon_alpha <= 0.5):
        raise ParameterError("epsilon_alpha must lie in (0, 1/2]")


@dataclass(frozen=True)
class TrustedNeighborhood:
    """The voters a robot fuses over: itself plus every robot it met during
    the exchange phase that its interim vector trusts, each with the vector
    that robot supplied."""

    owner: int
    members: frozenset[int]
    collected_vectors: dict[int, np.ndarray] = field(hash=False)

    def __post_init__(self):
        if self.owner not in self.members:
            raise ParameterError("the owner must be a member of its own trusted neighborhood")
        missing = self.members - set(self.collected_vectors)
        if missing:
            raise ParameterError(f"members without collected vectors: {sorted(missing)}")


def fuse_majority(
    own_vector: np.ndarray,
    neighborhood: TrustedNeighborhood,
    exclude_subject_vote: bool = False,
) -> np.ndarray:
    """Majority fusion over the trusted neighborhood's collected vectors.

    Entry k is 1 iff the votes for k reach half the voter count (ties count
    as trust); the owner's entry about itself is pinned to 1. With
    ``exclude_subject_vote`` a member's own vote about itself is left out of
    its entry's tally, matching the analysis variant rather than the
    algorithm as stated.
    """
    own_vector = np.asarray(own_vector, dtype=np.int64)
    n = own_vector.shape[0]
    stored_own = np.asarray(neighborhood.collected_vectors[neighborhood.owner])
    if stored_own.shape[0] != n or not np.array_equal(stored_own, own_vector):
        raise ParameterError("own_vector disagrees with the neighborhood's stored owner vector")
    tally = np.zeros(n, dtype=np.int64)
    for member in neighborhood.members:
        vec = np.asarray(neighborhood.collected_vectors[member], dtype=np.int64)
        if vec.shape[0] != n:
            raise ParameterError("collected vector length mismatch")
        tally += vec
    theta = len(neighborhood.members)
    out = np.zeros(n, dtype=np.uint8)
    for k in range(n):
        t_k, v_k = theta, tally[k]
        if exclude_subject_vote and k in neighborhood.members:
            v_k -= int(neighborhood.collected_vectors[k][k])
            t_k -= 1
        out[k] = 1 if (t_k == 0 or 2 * v_k >= t_k) else 0
    out[neighborhood.owner] = 1
    return out


@dataclass(frozen=True)
class IndividualResult:
    """Per-legit-robot trust vectors plus meeting-count statistics."""

    vectors: np.ndarray  # rows follow record.legit_ids
    eta: np.ndarray
    record: engine.RunRecord

    @property
    def meeting_stats(self) -> dict:
        ids = list(self.record.legit_ids)
        if not ids:
            return {"min": 0, "mean": 0.0, "max": 0}
        counts = []
        for i in ids:
            for j in range(self.record.config.n_robots):
                if j != i:
                    counts.append(int(self.eta[i, j]))
        return {
            "min": min(counts),
            "mean": float(np.mean(counts)),
            "max": max(counts),
        }


@dataclass(frozen=True)
class DcvResult:
    """Final fused vectors, the interim vectors they fused from, and the
    trusted-neighborhood sizes."""

    final_vectors: np.ndarray
    interim_vectors: np.ndarray
    theta_sizes: np.ndarray
    record: engine.RunRecord


def _override_config(cfg: engine.Config, params: ProtocolParams, protocol: str, mode: str,
                     cap: int | None) -> engine.Config:
    return replace(
        cfg,
        protocol=protocol,
        mode=mode,
        param_mode="explicit",
        n_alpha=params.n_alpha,
        tau_ind=params.tau_ind,
        tau=params.tau,
        cap=cap if cap is not None else cfg.cap,
        delta=params.delta,
        epsilon_alpha=params.epsilon_alpha,
        n_robots=params.n_robots,
        n_legit=params.n_legit if params.n_legit is not None else cfg.n_legit,
    )


def run_individual(
    graph,
    P: TransitionMatrix,
    params: ProtocolParams,
    team: engine.Team,
    rng,
    mode: str = "fixed",
    cap: int | None = None,
    base_config: engine.Config | None = None,
) -> IndividualResult:
    """Run the individual protocol on a prebuilt graph and team."""
    cfg = base_config if base_config is not None else engine.Config(
        n_robots=team.n_robots, n_legit=team.n_legit,
        delta=params.delta, epsilon_alpha=params.epsilon_alpha,
    )
    cfg = _override_config(cfg, params, "individual", mode, cap)
    record = engine.simulate(cfg, rng, graph=graph, team=team, P=P)
    ids = np.array(record.legit_ids, dtype=np.int64)
    vectors = record.final[ids] if len(ids) else np.zeros((0, team.n_robots), dtype=np.uint8)
    return IndividualResult(vectors=vectors, eta=record.eta, record=record)


def run_dcv(
    graph,
    P: TransitionMatrix,
    params: ProtocolParams,
    team: engine.Team,
    rng,
    mode: str = "fixed",
    cap: int | None = None,
    base_config: engine.Config | None = None,
) -> DcvResult:
    """Run the two-phase crowd-vetting protocol on a prebuilt graph and team."""
    cfg = base_config if base_config is not None else engine.Config(
        n_robots=team.n_robots, n_legit=team.n_legit,
        delta=params.delta, epsilon_alpha=params.epsilon_alpha,
    )
    if params.rho is not None:
        cfg = replace(cfg, rho1=params.rho[0], rho2=params.rho[1],
                      rho3=params.rho[2], rho4=params.rho[3])
    cfg = _override_config(cfg, params, "dcv", mode, cap)
    record = engine.simulate(cfg, rng, graph=graph, team=team, P=P)
    ids = np.array(record.legit_ids, dtype=np.int64)
    final = record.final[ids] if len(ids) else np.zeros((0, team.n_robots), dtype=np.uint8)
    interim = record.interim[ids] if len(ids) else np.zeros((0, team.n_robots), dtype=np.uint8)
    return DcvResult(
        final_vectors=final,
        interim_vectors=interim,
        theta_sizes=record.theta_sizes,
        record=record,
    )
