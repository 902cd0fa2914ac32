"""Lazy-walk transition kernels and their exact Markov-chain quantities.

The fast-transition rule keeps a robot at its current site with probability
1/2 and otherwise moves it to a uniformly chosen non-self neighbor. All
derived quantities (stationary distribution, hitting times, meeting times)
come from dense/sparse linear solves rather than power iteration, so they are
exact up to solver round-off; the mixing time is the one iterative quantity.

Sampling contract: a single step consumes exactly one uniform draw and
inverts it against the cumulative row probabilities visited in the order
[current site, then all other sites ascending]. With the 1/2 self mass this
means ``u < 1/2`` always maps to "stay". Both simulation backends use this
exact rule, so they consume identical random streams.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .topology import SiteGraph

ROW_SUM_TOL = 1e-12
MAX_PRODUCT_STATES = 40_000
MIXING_ITERATION_CAP = 1_000_000


class MarkovError(ValueError):
    """Raised for invalid kernels or exceeded size/iteration budgets."""


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic kernel over sites."""

    n_states: int
    rows: np.ndarray = field(repr=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.shape != (self.n_states, self.n_states):
            raise MarkovError("rows must be a square (n_states, n_states) array")
        if np.any(rows < 0.0) or np.any(rows > 1.0):
            raise MarkovError("transition probabilities must lie in [0, 1]")
        if np.max(np.abs(rows.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise MarkovError("rows must sum to 1 within 1e-12")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)


def lazy_transition_matrix(graph: SiteGraph) -> TransitionMatrix:
    """Fast-transition kernel: 1/2 stay, 1/(2 deg) to each non-self neighbor.

    The degenerate single-site graph gets the identity kernel ``[[1]]``.
    """
    n = graph.num_sites
    P = np.zeros((n, n), dtype=np.float64)
    for s in range(n):
        neighbors = graph.adjacency[s]
        if not neighbors:
            P[s, s] = 1.0
            continue
        P[s, s] = 0.5
        share = 0.5 / len(neighbors)
        for t in neighbors:
            P[s, t] = share
    return TransitionMatrix(n, P)


def stationary_distribution(P: TransitionMatrix) -> np.ndarray:
    """Unique stationary vector, from the linear system (P^T - I) pi = 0
    with the normalization sum(pi) = 1 replacing one equation."""
    n = P.n_states
    A = P.rows.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = scipy.linalg.solve(A, b)
    except scipy.linalg.LinAlgError as exc:
        raise MarkovError("singular stationary system; kernel is not irreducible") from exc
    return pi


def hitting_times(P: TransitionMatrix) -> tuple[np.ndarray, float]:
    """Expected steps ``H[i, w]`` for a walk from i to first reach w.

    Each target solves the first-step system h(w) = 0,
    h(i) = 1 + sum_k P[i, k] h(k); returns the full matrix and its max.
    """
    n = P.n_states
    H = np.zeros((n, n), dtype=np.float64)
    base = np.eye(n) - P.rows
    for w in range(n):
        A = base.copy()
        A[w, :] = 0.0
        A[w, w] = 1.0
        b = np.ones(n)
        b[w] = 0.0
        try:
            H[:, w] = scipy.linalg.solve(A, b)
        except scipy.linalg.LinAlgError as exc:
            raise MarkovError(f"singular hitting system for target {w}") from exc
    return H, float(H.max())


def meeting_times(
    P: TransitionMatrix, max_product_states: int = MAX_PRODUCT_STATES
) -> tuple[np.ndarray, float]:
    """Expected steps ``M[a, b]`` until two independent walks from a and b
    first occupy the same site simultaneously.

    Solved on the product chain over ordered site pairs (both walkers step
    by P each time-step) with the diagonal absorbing. ``M`` is symmetric and
    zero on the diagonal; the max is over off-diagonal starts.
    """
    n = P.n_states
    if n * n > max_product_states:
        raise MarkovError(
            f"product chain has {n * n} states, above the budget of {max_product_states}"
        )
    if n == 1:
        return np.zeros((1, 1)), 0.0
    K = scipy.sparse.kron(
        scipy.sparse.csr_matrix(P.rows), scipy.sparse.csr_matrix(P.rows), format="csr"
    )
    diag_states = [s * n + s for s in range(n)]
    A = (scipy.sparse.eye(n * n, format="csr") - K).tolil()
    b = np.ones(n * n)
    for d in diag_states:
        A.rows[d] = [d]
        A.data[d] = [1.0]
        b[d] = 0.0
    m = scipy.sparse.linalg.spsolve(A.tocsr(), b)
    M = m.reshape(n, n)
    M = (M + M.T) / 2.0  # starts (a,b) and (b,a) are the same problem
    return M, float(M.max())


def mixing_time(P: TransitionMatrix, threshold: float = 0.25) -> int:
    """Smallest t with max-over-starts total-variation distance between
    the t-step distribution and the stationary distribution <= threshold."""
    pi = stationary_distribution(P)
    Mt = np.eye(P.n_states)
    for t in range(MIXING_ITERATION_CAP + 1):
        tv = 0.5 * np.max(np.abs(Mt - pi).sum(axis=1))
        if tv <= threshold:
            return t
        Mt = Mt @ P.rows
    raise MarkovError("mixing-time iteration cap exceeded")


def tv_profile(P: TransitionMatrix, steps: int) -> np.ndarray:
    """Max-over-starts TV distance to stationarity at t = 0..steps."""
    pi = stationary_distribution(P)
    Mt = np.eye(P.n_states)
    out = np.empty(steps + 1)
    for t in range(steps + 1):
        out[t] = 0.5 * np.max(np.abs(Mt - pi).sum(axis=1))
        if t < steps:
            Mt = Mt @ P.rows
    return out


def inversion_tables(P: TransitionMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Per-state cumulative probabilities and destination ids for one-draw
    sampling, in the documented self-first order.

    ``cums[s]`` is non-decreasing with final entry 1.0 and ``dests[s, k]`` is
    the destination reached when ``u`` falls in the k-th cell. Shared by
    ``sample_step``, the pure-Python engine, and the compiled kernel.
    """
    n = P.n_states
    cums = np.empty((n, n), dtype=np.float64)
    dests = np.empty((n, n), dtype=np.int64)
    for s in range(n):
        order = [s] + [t for t in range(n) if t != s]
        acc = 0.0
        for k, t in enumerate(order):
            acc += P.rows[s, t]
            cums[s, k] = acc
            dests[s, k] = t
        cums[s, n - 1] = 1.0  # guard against round-off in the last cell
    return cums, dests


def sample_step(P: TransitionMatrix, state: int, rng: np.random.Generator) -> int:
    """Advance one step from ``state``; consumes exactly one uniform draw."""
    if not (0 <= state < P.n_states):
        raise MarkovError(f"state {state} out of range")
    u = rng.random()
    acc = P.rows[state, state]
    if u < acc or P.n_states == 1:
        return state
    last = state
    for t in range(P.n_states):
        if t == state:
            continue
        acc += P.rows[state, t]
        last = t
        if u < acc:
            return t
    return last  # round-off fall-through: final cell absorbs u up to 1.0


@dataclass(frozen=True)
class MarkovQuantities:
    """Bundle of the exact walk quantities for one kernel."""

    stationary: np.ndarray
    hitting: np.ndarray
    t_hit: float
    meeting: np.ndarray
    t_meet: float
    t_mix: int

    @property
    def meet_probability(self) -> float:
        """Per-step co-location probability of two independent stationary
        walkers, sum_s pi_s^2; used to size simulation windows."""
        return float(np.sum(self.stationary**2))


def compute_markov_quantities(
    P: TransitionMatrix, max_product_states: int = MAX_PRODUCT_STATES
) -> MarkovQuantities:
    pi = stationary_distribution(P)
    H, t_hit = hitting_times(P)
    M, t_meet = meeting_times(P, max_product_states)
    t_mix = mixing_time(P)
    return MarkovQuantities(pi, H, t_hit, M, t_meet, t_mix)


def export_markov_csv(mq: MarkovQuantities, directory) -> list[str]:
    """Write stationary.csv, hitting.csv, meeting.csv and summary.csv into
    ``directory``; returns the written paths."""
    import os

    os.makedirs(directory, exist_ok=True)
    paths = []

    def write(name, header, rows):
        path = os.path.join(directory, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(",".join(repr(float(v)) if isinstance(v, (float, np.floating))
                                  else str(v) for v in row) + "\n")
        paths.append(path)

    n = len(mq.stationary)
    write("stationary.csv", "site,pi", [(s, mq.stationary[s]) for s in range(n)])
    write(
        "hitting.csv",
        "from_site," + ",".join(f"to_{w}" for w in range(n)),
        [(s, *mq.hitting[s]) for s in range(n)],
    )
    write(
        "meeting.csv",
        "site_a," + ",".join(f"with_{w}" for w in range(n)),
        [(s, *mq.meeting[s]) for s in range(n)],
    )
    write(
        "summary.csv",
        "t_hit,t_meet,t_mix,meet_probability",
        [(mq.t_hit, mq.t_meet, mq.t_mix, mq.meet_probability)],
    )
    return paths
