"""Executable oracles for the protocol's probabilistic machinery.

The centerpiece is the four-property event audit: when every legitimate
robot (1) meets most legitimate robots often enough in phase 1, (2)
misclassifies few legitimate robots, (3) trusts few malicious robots, and
(4) meets most legitimate robots in phase 2, the majority fusion is correct
deterministically provided the proportions satisfy 1 > 3 rho2 + rho3 + rho4.
The remaining checks are statistical: empirical tail frequencies must stay
under proven upper bounds, asserted with a one-sided 3-sigma sampling margin
(the bounds are provable, so only violation is a failure, not looseness).
All bound evaluations run in log-space to avoid underflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine, markov, protocols, topology, trust


class VerificationError(ValueError):
    pass


@dataclass(frozen=True)
class EventEAudit:
    """Per-legit-robot counts against the four proportion thresholds.

    A robot always counts itself as met (in both phases) and never as
    misclassified; self-trust is unconditional in the protocol.
    """

    n_legit: int
    n_alpha: int
    rho: tuple[float, float, float, float]
    legit_met_enough: np.ndarray       # property 1 counts, per legit robot
    legit_misclassified: np.ndarray    # property 2 counts
    malicious_misclassified: np.ndarray  # property 3 counts
    legit_met_phase2: np.ndarray       # property 4 counts
    thresholds: tuple[float, float, float, float]
    property_holds: tuple[bool, bool, bool, bool]
    holds: bool
    f_legit_correct: np.ndarray        # F tallies per (legit row, target)
    f_legit_incorrect: np.ndarray
    f_malicious_incorrect: np.ndarray


def lemma_T_condition(rho) -> bool:
    """Strict fusion-correctness inequality 1 > 3 rho2 + rho3 + rho4."""
    rho = tuple(float(r) for r in rho)
    if len(rho) != 4:
        raise VerificationError("rho must have four components")
    if min(rho) < 0:
        raise VerificationError("rho components must be >= 0")
    return 1.0 > 3.0 * rho[1] + rho[2] + rho[3]


def audit_event_E(record: engine.RunRecord, params: protocols.ProtocolParams) -> EventEAudit:
    """Audit the four-property event on a fixed-window crowd-vetting run.

    Also extracts, for every (legit robot i, target j) pair, the tallies of
    legitimate voters in i's trusted phase-2 neighborhood whose vote about j
    is correct / incorrect, and of malicious voters voting incorrectly.
    Requires the record's fabricated vectors to be static (they are for the
    truth-inverting adversaries).
    """
    if record.config.protocol != "dcv" or record.met_phase2 is None:
        raise VerificationError("event audit requires a crowd-vetting (dcv) run record")
    if not record.supply_static:
        raise VerificationError("event audit requires static disclosure vectors")
    rho = params.rho if params.rho is not None else (
        record.config.rho1, record.config.rho2, record.config.rho3, record.config.rho4
    )
    n_alpha = params.n_alpha
    truth = record.truth.astype(bool)
    legit_ids = np.array(record.legit_ids, dtype=np.int64)
    L = len(legit_ids)
    n = record.config.n_robots
    if L == 0:
        raise VerificationError("event audit needs at least one legitimate robot")
    thresholds = (
        (1.0 - rho[0]) * L,
        rho[1] * L,
        rho[2] * L,
        (1.0 - rho[3]) * L,
    )

    met_enough = np.zeros(L, dtype=np.int64)
    legit_mis = np.zeros(L, dtype=np.int64)
    mal_mis = np.zeros(L, dtype=np.int64)
    met_p2 = np.zeros(L, dtype=np.int64)
    for r, i in enumerate(legit_ids):
        eta_row = record.eta[i]
        interim_row = record.interim[i]
        met_enough[r] = 1 + int(np.sum((eta_row >= n_alpha) & truth & (np.arange(n) != i)))
        legit_mis[r] = int(np.sum((interim_row == 0) & truth))
        mal_mis[r] = int(np.sum((interim_row == 1) & ~truth))
        met_p2[r] = 1 + int(np.sum((record.met_phase2[i] == 1) & truth & (np.arange(n) != i)))

    props = (
        bool(np.all(met_enough >= thresholds[0])),
        bool(np.all(legit_mis <= thresholds[1])),
        bool(np.all(mal_mis <= thresholds[2])),
        bool(np.all(met_p2 >= thresholds[3])),
    )

    f_lp = np.zeros((L, n), dtype=np.int64)
    f_lm = np.zeros((L, n), dtype=np.int64)
    f_mm = np.zeros((L, n), dtype=np.int64)
    for r, i in enumerate(legit_ids):
        members = [int(i)] + [
            int(j)
            for j in range(n)
            if j != i and record.interim[i, j] == 1 and record.met_phase2[i, j] == 1
        ]
        for k in members:
            vote = record.interim[k] if truth[k] else record.supply[k]
            agrees = vote.astype(bool) == truth
            if truth[k]:
                f_lp[r] += agrees
                f_lm[r] += ~agrees
            else:
                f_mm[r] += ~agrees
    return EventEAudit(
        n_legit=L,
        n_alpha=n_alpha,
        rho=tuple(rho),
        legit_met_enough=met_enough,
        legit_misclassified=legit_mis,
        malicious_misclassified=mal_mis,
        legit_met_phase2=met_p2,
        thresholds=thresholds,
        property_holds=props,
        holds=all(props),
        f_legit_correct=f_lp,
        f_legit_incorrect=f_lm,
        f_malicious_incorrect=f_mm,
    )


@dataclass(frozen=True)
class TailCheck:
    """Outcome of one empirical-vs-bound tail comparison."""

    name: str
    applicable: bool
    empirical: float
    bound: float
    margin: float
    passed: bool
    detail: str = ""


def _margin(empirical: float, trials: int) -> float:
    return 3.0 * math.sqrt(max(empirical * (1.0 - empirical), 0.0) / trials)


def check_binomial_tail(
    n: int, p: float, rho: float, trials: int, rng: np.random.Generator
) -> TailCheck:
    """Upper-tail bound Pr[Y >= rho n] <= p^(rho n / 2) for Y ~ Bin(n, p),
    valid for rho in (0, 0.8] when p <= rho^2 / exp(2e(1 - rho))."""
    if not (0.0 < rho <= 0.8):
        return TailCheck("binomial-tail", False, 0.0, 0.0, 0.0, True,
                         f"rho={rho} outside (0, 0.8]")
    domain = rho**2 / math.exp(2.0 * math.e * (1.0 - rho))
    if p > domain:
        return TailCheck("binomial-tail", False, 0.0, 0.0, 0.0, True,
                         f"p={p} above the domain limit {domain:.6g}")
    draws = rng.binomial(n, p, size=trials)
    empirical = float(np.mean(draws >= rho * n))
    bound = math.exp(0.5 * rho * n * math.log(p)) if p > 0.0 else 0.0
    margin = _margin(empirical, trials)
    passed = empirical <= bound + margin
    return TailCheck(
        "binomial-tail", True, empirical, bound, margin, passed,
        f"n={n} p={p} rho={rho} trials={trials}",
    )


def check_chernoff_lower_tail(
    n: int, p: float, gamma: float, trials: int, rng: np.random.Generator
) -> TailCheck:
    """Lower-tail bound Pr[X <= (1-gamma) mu] <= exp(-gamma^2 mu / 2) for
    X ~ Bin(n, p), mu = n p, gamma in (0, 1)."""
    if not (0.0 < gamma < 1.0):
        raise VerificationError("gamma must lie in (0, 1)")
    mu = n * p
    draws = rng.binomial(n, p, size=trials)
    empirical = float(np.mean(draws <= (1.0 - gamma) * mu))
    bound = math.exp(-gamma * gamma * mu / 2.0)
    margin = _margin(empirical, trials)
    passed = empirical <= bound + margin
    return TailCheck(
        "chernoff-lower-tail", True, empirical, bound, margin, passed,
        f"n={n} p={p} gamma={gamma} trials={trials}",
    )


def check_proba_bound(n_legit: int, n_robots: int, delta: float, rho1: float = 0.1) -> bool:
    """Log-space check of q^|L| <= delta / (4 N |L|) with q from the
    parameter formulas; expected to hold for every valid input."""
    if not (1 <= n_legit <= n_robots):
        raise VerificationError("need 1 <= n_legit <= n_robots")
    if not (0.0 < delta < 1.0):
        raise VerificationError("delta must lie in (0, 1)")
    log_q = (
        math.log(delta) + math.log(rho1) - 2.0 * math.e
        + math.log(n_legit) - math.log(n_robots)
    )
    lhs = n_legit * log_q
    rhs = math.log(delta) - math.log(4.0 * n_robots * n_legit)
    return lhs <= rhs


def fusion_profile_correct(f_lp: int, f_lm: int, f_mm: int, subject_is_legit: bool) -> bool:
    """Fuse a synthetic profile: the owner's correct vote, f_lp correct
    legitimate voters, f_lm + f_mm incorrect voters; True iff the fused
    entry for the subject is correct. Routes through fuse_majority so it
    cross-checks the real implementation."""
    n = 2 + f_lp + f_lm + f_mm  # owner 0, subject 1, filler voters
    truth_bit = 1 if subject_is_legit else 0
    correct = np.zeros(n, dtype=np.uint8)
    correct[1] = truth_bit
    wrong = np.zeros(n, dtype=np.uint8)
    wrong[1] = 1 - truth_bit

    own = correct.copy()
    own[0] = 1
    collected = {0: own}
    members = [0]
    next_id = 2
    for _ in range(f_lp):
        collected[next_id] = correct
        members.append(next_id)
        next_id += 1
    for _ in range(f_lm + f_mm):
        collected[next_id] = wrong
        members.append(next_id)
        next_id += 1
    hood = protocols.TrustedNeighborhood(0, frozenset(members), collected)
    fused = protocols.fuse_majority(own, hood)
    return int(fused[1]) == truth_bit


_EVENT_E_TOPOLOGIES = (
    ("line", {"n": 1}),
    ("grid", {"rows": 2, "cols": 2}),
    ("line", {"n": 3}),
    ("grid", {"rows": 3, "cols": 3}),
)


def sample_event_E_runs(
    n_runs: int,
    master_seed: int,
    rho: tuple[float, float, float, float] = (0.1, 0.2, 0.2, 0.1),
):
    """Generate randomized fixed-window crowd-vetting runs on configurations
    generous enough for the four-property event to hold often, audit each,
    and yield (record, params, audit, success) tuples.

    Configurations vary topology, team size and split, observation quality,
    observation count, and window margin; every run uses the worst-case
    truth-inverting adversary.
    """
    results = []
    meet_prob_cache: dict = {}
    for idx in range(n_runs):
        rng_cfg = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(idx, 0)))
        kind, kw = _EVENT_E_TOPOLOGIES[int(rng_cfg.integers(len(_EVENT_E_TOPOLOGIES)))]
        n_robots = int(rng_cfg.choice([6, 8, 10, 12, 16]))
        n_legit = max(1, int(round(n_robots * float(rng_cfg.choice([0.5, 0.625, 0.75])))))
        eps = float(rng_cfg.choice([0.35, 0.45, 0.5]))
        n_alpha = int(rng_cfg.choice([8, 12, 16, 20]))
        margin = float(rng_cfg.choice([2.0, 2.5, 3.0]))

        key = (kind, tuple(sorted(kw.items())))
        if key not in meet_prob_cache:
            graph = topology.build_topology(kind, **kw)
            P = markov.lazy_transition_matrix(graph)
            pi = markov.stationary_distribution(P)
            meet_prob_cache[key] = (graph, float(np.sum(pi**2)))
        graph, meet_prob = meet_prob_cache[key]
        tau = max(1, math.ceil(margin * n_alpha / meet_prob))

        cfg = engine.Config(
            protocol="dcv",
            mode="fixed",
            topology=kind,
            rows=kw.get("rows", 1),
            cols=kw.get("cols", 1),
            n_sites=kw.get("n"),
            n_robots=n_robots,
            n_legit=n_legit,
            delta=0.1,
            epsilon_alpha=eps,
            rho1=rho[0], rho2=rho[1], rho3=rho[2], rho4=rho[3],
            param_mode="explicit",
            n_alpha=n_alpha,
            tau=tau,
        )
        record = engine.simulate(
            cfg, np.random.SeedSequence(master_seed, spawn_key=(idx, 1)), graph=graph
        )
        params = protocols.ProtocolParams(
            kind="dcv", n_robots=n_robots, n_legit=n_legit, delta=0.1,
            epsilon_alpha=eps, n_alpha=n_alpha, n_alpha_exact=float(n_alpha), rho=rho,
        )
        audit = audit_event_E(record, params)
        ids = np.array(record.legit_ids, dtype=np.int64)
        success = engine.success_check(record.final[ids], record.truth)
        results.append((record, params, audit, success))
    return results


BINOMIAL_TAIL_GRID = (
    # (n, p_fraction_of_domain_limit, rho)
    (20, 1.0, 0.8),
    (20, 0.5, 0.8),
    (50, 1.0, 0.5),
    (50, 0.25, 0.5),
    (100, 1.0, 0.3),
    (1, 0.001, 0.5),
)

CHERNOFF_GRID = tuple(
    (n, p, gamma) for gamma in (0.25, 0.5) for n in (50, 200) for p in (0.3, 0.7)
)


def run_bound_suites(master_seed: int = 0, trials: int = 100_000) -> list[TailCheck]:
    """The concentration-bound check grids used by the CLI and acceptance."""
    rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(77,)))
    checks = []
    for n, frac, rho in BINOMIAL_TAIL_GRID:
        domain = rho**2 / math.exp(2.0 * math.e * (1.0 - rho))
        checks.append(check_binomial_tail(n, frac * domain, rho, trials, rng))
    for n, p, gamma in CHERNOFF_GRID:
        checks.append(check_chernoff_lower_tail(n, p, gamma, trials, rng))
    return checks


def run_proba_bound_sweep(max_robots: int = 256, deltas=(0.5, 0.1, 0.01)) -> bool:
    """Exhaustive check of the q^|L| inequality over 1 <= |L| <= N <= max."""
    for n_robots in range(1, max_robots + 1):
        for n_legit in range(1, n_robots + 1):
            for delta in deltas:
                if not check_proba_bound(n_legit, n_robots, delta):
                    return False
    return True
