"""Deterministic seeded time-step simulation of the detection protocols.

One run is a single logical thread advancing global time-steps; all of its
randomness comes from one seeded generator consumed in a documented order,
so identical seed + config reproduces a bit-identical RunRecord.

Draw order per run (the external replay contract):

  0. topology draws, for random topology kinds only;
  1. initial placement: one uniform per robot in robot-id order (skipped
     when explicit positions are configured);
  2. every time-step, movement: one uniform per robot in robot-id order --
     every robot consumes exactly one regardless of its movement policy;
  3. every observation-phase time-step, after movement: for each legitimate
     robot i in ascending id order, one observation draw per co-located
     robot j != i in ascending j order (custom observation samplers consume
     their own draws in this same pair order);
  4. every exchange-phase time-step, after movement: for each
     random-disclosure adversary in ascending id order, one uniform per
     team slot to refresh its fabricated vector.

Movement and observations are synchronous: all robots commit their moves
simultaneously, then meetings are evaluated at the new positions. The
default generator family is PCG64; the compiled kernel (when built and when
the config is on its fast path) consumes the identical stream, so both
backends produce identical records.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import adversary as adv
from . import markov, topology, trust

try:
    from . import _speedups
except ImportError:  # pure-Python fallback
    _speedups = None

DEFAULT_CAP = 10_000_000

CONFIG_DEFAULTS = {
    "protocol": "individual",
    "mode": "fixed",
    "topology": "grid",
    "rows": 3,
    "cols": 3,
    "n_sites": None,
    "ba_k": None,
    "er_p": None,
    "edges": None,
    "n_robots": 4,
    "n_legit": 2,
    "delta": 0.1,
    "epsilon_alpha": 0.25,
    "rho1": 0.1,
    "rho2": 0.2,
    "rho3": 0.2,
    "rho4": 0.1,
    "param_mode": "formula",
    "n_alpha": None,
    "tau_ind": None,
    "tau": None,
    "cap": DEFAULT_CAP,
    "seed": None,
    "adversary_movement": "lazy_walk",
    "adversary_disclosure": "invert_truth",
    "adversary_random_p": None,
    "adversary_site": None,
    "adversary_target": None,
    "rng_family": "pcg64",
    "record_trace": False,
    "record_observations": False,
    "initial_positions": None,
    "exclude_subject_vote": False,
}

_BOOL_KEYS = {"record_trace", "record_observations", "exclude_subject_vote"}
_INT_KEYS = {
    "rows", "cols", "n_sites", "ba_k", "n_robots", "n_legit", "n_alpha",
    "tau_ind", "tau", "cap", "seed", "adversary_site", "adversary_target",
}
_FLOAT_KEYS = {
    "er_p", "delta", "epsilon_alpha", "rho1", "rho2", "rho3", "rho4",
    "adversary_random_p",
}


class EngineError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    """Flat run configuration; see CONFIG_DEFAULTS for keys and defaults."""

    protocol: str = "individual"
    mode: str = "fixed"
    topology: str = "grid"
    rows: int = 3
    cols: int = 3
    n_sites: int | None = None
    ba_k: int | None = None
    er_p: float | None = None
    edges: str | None = None
    n_robots: int = 4
    n_legit: int = 2
    delta: float = 0.1
    epsilon_alpha: float = 0.25
    rho1: float = 0.1
    rho2: float = 0.2
    rho3: float = 0.2
    rho4: float = 0.1
    param_mode: str = "formula"
    n_alpha: int | None = None
    tau_ind: int | None = None
    tau: int | None = None
    cap: int = DEFAULT_CAP
    seed: int | None = None
    adversary_movement: str = "lazy_walk"
    adversary_disclosure: str = "invert_truth"
    adversary_random_p: float | None = None
    adversary_site: int | None = None
    adversary_target: int | None = None
    rng_family: str = "pcg64"
    record_trace: bool = False
    record_observations: bool = False
    initial_positions: tuple[int, ...] | None = None
    exclude_subject_vote: bool = False

    def validate(self) -> None:
        if self.protocol not in ("individual", "dcv"):
            raise EngineError(f"unknown protocol {self.protocol!r}")
        if self.mode not in ("fixed", "until-correct"):
            raise EngineError(f"unknown mode {self.mode!r}")
        if not (0 <= self.n_legit <= self.n_robots):
            raise EngineError("need 0 <= n_legit <= n_robots")
        if not (0.0 < self.delta < 1.0):
            raise EngineError("delta must lie in (0, 1)")
        if not (0.0 < self.epsilon_alpha <= 0.5):
            raise EngineError("epsilon_alpha must lie in (0, 1/2]")
        if self.cap < 0:
            raise EngineError("cap must be >= 0")
        if self.rng_family not in ("pcg64", "philox"):
            raise EngineError(f"unsupported rng family {self.rng_family!r}")
        if self.exclude_subject_vote and self.mode == "until-correct":
            # the until-correct stop check uses the stated inclusive majority;
            # the analysis-variant fusion is a fixed-window tool only
            raise EngineError("exclude_subject_vote requires fixed mode")


def parse_config(text: str) -> Config:
    """Parse the flat ``key = value`` config format (# starts a comment)."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise EngineError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = stripped.partition("=")
        key, val = key.strip(), val.strip()
        if key not in CONFIG_DEFAULTS:
            raise EngineError(f"config line {lineno}: unknown key {key!r}")
        if val.lower() in ("none", ""):
            values[key] = None
        elif key in _BOOL_KEYS:
            values[key] = val.lower() in ("1", "true", "yes", "on")
        elif key in _INT_KEYS:
            values[key] = int(val)
        elif key in _FLOAT_KEYS:
            values[key] = float(val)
        elif key == "initial_positions":
            values[key] = tuple(int(v) for v in val.split(","))
        else:
            values[key] = val
    cfg = Config(**values)
    cfg.validate()
    return cfg


def format_config(cfg: Config) -> str:
    """Canonical flat key-value rendering (sorted keys, one per line)."""
    lines = []
    for key in sorted(CONFIG_DEFAULTS):
        value = getattr(cfg, key)
        if value is None:
            continue
        if key == "initial_positions":
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Team:
    """Team composition: which robots are legitimate and how the malicious
    ones behave. Robot ids 0..n_legit-1 are the legitimate ones."""

    n_robots: int
    n_legit: int
    strategies: dict[int, adv.AdversaryStrategy] = field(default_factory=dict)

    @property
    def legit_ids(self) -> tuple[int, ...]:
        return tuple(range(self.n_legit))

    @property
    def truth(self) -> np.ndarray:
        t = np.zeros(self.n_robots, dtype=np.uint8)
        t[: self.n_legit] = 1
        return t

    def strategy(self, robot: int) -> adv.AdversaryStrategy:
        return self.strategies.get(robot, adv.AdversaryStrategy())


def build_team(cfg: Config) -> Team:
    strategy = adv.AdversaryStrategy(
        movement=cfg.adversary_movement,
        disclosure=cfg.adversary_disclosure,
        site=cfg.adversary_site,
        target=cfg.adversary_target,
        p=cfg.adversary_random_p,
    )
    strategies = {r: strategy for r in range(cfg.n_legit, cfg.n_robots)}
    return Team(cfg.n_robots, cfg.n_legit, strategies)


def build_graph(cfg: Config, rng: np.random.Generator) -> topology.SiteGraph:
    kind = cfg.topology
    if kind == "grid":
        return topology.grid(cfg.rows, cfg.cols)
    if kind == "line":
        return topology.line(cfg.n_sites if cfg.n_sites else cfg.rows * cfg.cols)
    if kind == "barabasi_albert":
        return topology.barabasi_albert(cfg.n_sites, cfg.ba_k, rng)
    if kind == "erdos_renyi":
        return topology.erdos_renyi(cfg.n_sites, cfg.er_p, rng)
    if kind == "explicit":
        pairs = [tuple(int(v) for v in e.split("-")) for e in cfg.edges.split(";") if e]
        return topology.explicit(pairs, cfg.n_sites)
    raise EngineError(f"unknown topology kind {kind!r}")


@dataclass
class RunRecord:
    """Complete, reproducible trace of one simulation run."""

    config: Config
    seed: int | None
    backend: str
    graph_edges: tuple[tuple[int, int], ...]
    n_sites: int
    truth: np.ndarray
    legit_ids: tuple[int, ...]
    params: dict
    phase1_steps: int
    phase2_steps: int
    steps_run: int
    first_correct_time: int | None
    status: str
    initial_positions: np.ndarray
    final_positions: np.ndarray
    eta: np.ndarray
    beta: np.ndarray
    interim: np.ndarray
    final: np.ndarray
    met_phase2: np.ndarray | None = None
    phase2_encounters: np.ndarray | None = None
    theta_sizes: np.ndarray | None = None
    supply: np.ndarray | None = None
    supply_static: bool = True
    trace_positions: np.ndarray | None = None
    observation_log: list | None = None

    def meetings_at(self, t: int) -> list[tuple[int, int]]:
        """Co-located pairs (i < j) at recorded step t (requires trace)."""
        if self.trace_positions is None:
            raise EngineError("run was not traced")
        pos = self.trace_positions[t]
        n = len(pos)
        return [(i, j) for i in range(n) for j in range(i + 1, n) if pos[i] == pos[j]]

    def serialize(self) -> str:
        """Line-delimited structured-text rendering; bit-stable for a given
        record, so identical runs serialize to identical bytes."""
        out = ["# roamtrust run record v1"]
        out.append("[config]")
        out.append(format_config(self.config).rstrip("\n"))
        out.append("[run]")
        out.append(f"seed = {self.seed}")
        out.append(f"backend = {self.backend}")
        out.append(f"n_sites = {self.n_sites}")
        out.append("graph_edges = " + ";".join(f"{a}-{b}" for a, b in self.graph_edges))
        out.append("truth = " + ",".join(str(int(v)) for v in self.truth))
        out.append("legit_ids = " + ",".join(str(v) for v in self.legit_ids))
        out.append("[params]")
        for key in sorted(self.params):
            out.append(f"{key} = {self.params[key]!r}")
        out.append("[outcome]")
        out.append(f"phase1_steps = {self.phase1_steps}")
        out.append(f"phase2_steps = {self.phase2_steps}")
        out.append(f"steps_run = {self.steps_run}")
        out.append(f"first_correct_time = {self.first_correct_time}")
        out.append(f"status = {self.status}")
        out.append("initial_positions = " + ",".join(str(int(v)) for v in self.initial_positions))
        out.append("final_positions = " + ",".join(str(int(v)) for v in self.final_positions))
        if self.theta_sizes is not None:
            out.append("theta_sizes = " + ",".join(str(int(v)) for v in self.theta_sizes))

        def matrix(name, M, fmt):
            out.append(f"[{name}]")
            for i in self.legit_ids:
                out.append(f"{i}: " + ",".join(fmt(v) for v in M[i]))

        matrix("eta", self.eta, lambda v: str(int(v)))
        matrix("beta", self.beta, lambda v: repr(float(v)))
        matrix("interim", self.interim, lambda v: str(int(v)))
        matrix("final", self.final, lambda v: str(int(v)))
        if self.met_phase2 is not None:
            matrix("met_phase2", self.met_phase2, lambda v: str(int(v)))
        if self.phase2_encounters is not None:
            matrix("phase2_encounters", self.phase2_encounters, lambda v: str(int(v)))
        if self.supply is not None:
            out.append(f"[supply static={self.supply_static}]")
            for j in range(self.supply.shape[0]):
                out.append(f"{j}: " + ",".join(str(int(v)) for v in self.supply[j]))
        if self.trace_positions is not None:
            out.append("[trace]")
            for t in range(self.trace_positions.shape[0]):
                pos = ",".join(str(int(v)) for v in self.trace_positions[t])
                meet = ";".join(f"{a}-{b}" for a, b in self.meetings_at(t))
                out.append(f"t={t} positions={pos} meetings={meet}")
        if self.observation_log is not None:
            out.append("[observations]")
            for t, i, j, value in self.observation_log:
                out.append(f"t={t} {i}->{j} {value!r}")
        return "\n".join(out) + "\n"

    def ledgers_csv(self) -> str:
        """Ledger dump: owner,target,eta,beta,interim,final over legit rows."""
        lines = ["owner,target,eta,beta,interim,final"]
        for i in self.legit_ids:
            lines.extend(
                trust.ledger_csv_rows(i, self.eta[i], self.beta[i], self.interim[i], self.final[i])
            )
        return "\n".join(lines) + "\n"


def records_equivalent(a: RunRecord, b: RunRecord) -> bool:
    """Field-wise equality ignoring which backend produced the record."""
    a2 = replace(a, backend="*")
    b2 = replace(b, backend="*")
    return a2.serialize() == b2.serialize()


def success_check(vectors: np.ndarray, ground_truth: np.ndarray) -> bool:
    """True iff every row (one legitimate robot's bit vector) matches the
    ground truth in every entry; vacuously true with zero rows."""
    vectors = np.asarray(vectors)
    ground_truth = np.asarray(ground_truth)
    if vectors.size == 0:
        return True
    if vectors.ndim != 2 or vectors.shape[1] != ground_truth.shape[0]:
        raise EngineError("vector length mismatch against ground truth")
    return bool(np.all(vectors == ground_truth[None, :]))


def _interim_matrix(eta, beta, n_alpha, legit_ids, n_robots) -> np.ndarray:
    interim = np.zeros((n_robots, n_robots), dtype=np.uint8)
    for i in legit_ids:
        row = (eta[i] >= n_alpha) & (beta[i] >= 0.0)
        row[i] = True
        interim[i] = row.astype(np.uint8)
    return interim


class _PurePhases:
    """Pure-Python reference implementation of the inner loops.

    Mirrors the compiled kernel step for step and draw for draw; also the
    only path that supports traces, raw observation logs, non-lazy movement,
    random/custom disclosure, and custom observation samplers.
    """

    def __init__(self, rng, graph, cums, dests, team, model, world_positions):
        self.rng = rng
        self.graph = graph
        self.cums = cums
        self.dests = dests
        self.team = team
        self.model = model
        self.n = team.n_robots
        self.legit = team.truth.astype(bool)
        self.p_obs = np.where(
            self.legit,
            0.5 + model.epsilon_alpha,
            0.5 - model.epsilon_alpha,
        )
        self.nonlazy = {
            r: s for r, s in team.strategies.items() if s.movement != "lazy_walk"
        }
        self.distances = graph.distance_matrix() if self.nonlazy else None
        self.trace = None
        self.obs_log = None
        self.positions = world_positions

    def _move(self):
        us = self.rng.random(self.n)
        pos = self.positions
        crows = self.cums[pos]
        k = np.sum(crows <= us[:, None], axis=1)
        np.minimum(k, self.cums.shape[1] - 1, out=k)
        new = self.dests[pos, k]
        if self.nonlazy:
            world = adv.WorldView(pos.copy(), self.graph, self.distances, self.cums, self.dests)
            for r, strat in sorted(self.nonlazy.items()):
                new[r] = adv.apply_movement(strat, int(pos[r]), world, float(us[r]))
                if new[r] != pos[r] and new[r] not in self.graph.adjacency[pos[r]]:
                    raise EngineError(f"adversary {r} attempted a non-edge move")
        self.positions[:] = new  # in place: callers hold a view of this array

    def _observe(self, t, eta, beta):
        pos = self.positions
        pairs_i, pairs_j = [], []
        for i in np.flatnonzero(self.legit):
            js = np.flatnonzero(pos == pos[i])
            js = js[js != i]
            pairs_i.extend([i] * len(js))
            pairs_j.extend(js.tolist())
        if not pairs_j:
            return
        ii = np.asarray(pairs_i, dtype=np.int64)
        jj = np.asarray(pairs_j, dtype=np.int64)
        if self.model.sampler is None:
            us = self.rng.random(len(jj))
            vals = (us < self.p_obs[jj]).astype(np.float64)
        else:
            vals = np.array(
                [
                    trust.sample_observation(self.model, bool(self.legit[j]), self.rng)
                    for j in jj
                ]
            )
        eta[ii, jj] += 1
        beta[ii, jj] += vals - 0.5
        if self.obs_log is not None:
            self.obs_log.extend(
                (t, int(i), int(j), float(v)) for i, j, v in zip(ii, jj, vals)
            )

    def _phase1_wrong(self, eta, beta, n_alpha, truth):
        bits = (eta >= n_alpha) & (beta >= 0.0)
        cmp = bits == truth.astype(bool)[None, :]
        legit_rows = np.flatnonzero(self.legit)
        cmp[legit_rows, legit_rows] = True  # self entries are pinned to trust
        return int(np.sum(~cmp[legit_rows]))

    def run_phase1(self, n_steps, t0, eta, beta, truth, n_alpha, check, stop_on_correct):
        first = -1
        for step in range(1, n_steps + 1):
            t = t0 + step
            self._move()
            self._observe(t, eta, beta)
            if self.trace is not None:
                self.trace.append(self.positions.copy())
            if check and first < 0 and self._phase1_wrong(eta, beta, n_alpha, truth) == 0:
                first = t
                if stop_on_correct:
                    return first, step
        return first, n_steps

    def _fused_wrong(self, tally, theta, truth):
        legit_rows = np.flatnonzero(self.legit)
        fused = (2 * tally[legit_rows] >= theta[legit_rows, None])
        fused[np.arange(len(legit_rows)), legit_rows] = True  # owner self-entry pinned
        return int(np.sum(fused != truth.astype(bool)[None, :]))

    def run_phase2(
        self, n_steps, t0, trusted, supply, tally, theta, met2, enc, truth,
        check, stop_on_correct, stop_on_quiescent,
    ):
        legit_rows = np.flatnonzero(self.legit)
        remaining = 0  # trusted robots not yet met in phase 2 (self excluded)
        for i in legit_rows:
            row = trusted[i].astype(bool).copy()
            row[i] = False
            remaining += int(np.sum(row & (met2[i] == 0)))
        random_disclosers = sorted(
            r
            for r, s in self.team.strategies.items()
            if s.disclosure == "random"
        )
        first = -1
        for step in range(1, n_steps + 1):
            t = t0 + step
            self._move()
            for r in random_disclosers:
                supply[r] = (self.rng.random(self.n) < self.team.strategies[r].p).astype(np.uint8)
            pos = self.positions
            for i in legit_rows:
                js = np.flatnonzero(pos == pos[i])
                js = js[js != i]
                if len(js) == 0:
                    continue
                enc[i, js] += 1
                new = js[(met2[i, js] == 0)]
                met2[i, js] = 1
                collect = new[trusted[i, new] == 1]
                if len(collect):
                    tally[i] += supply[collect].sum(axis=0, dtype=np.int64)
                    theta[i] += len(collect)
                    remaining -= len(collect)
            if self.trace is not None:
                self.trace.append(self.positions.copy())
            if check:
                wrong = self._fused_wrong(tally, theta, truth)
                if wrong == 0 and first < 0:
                    first = t
                    if stop_on_correct:
                        return first, step
                if stop_on_quiescent and remaining == 0 and wrong > 0:
                    return -2, step
        return first, n_steps


def _kernel_eligible(cfg: Config, team: Team, model: trust.ObservationModel) -> bool:
    if _speedups is None:
        return False
    if cfg.record_trace or cfg.record_observations or cfg.exclude_subject_vote:
        return False
    if model.sampler is not None:
        return False
    for strat in team.strategies.values():
        if strat.movement != "lazy_walk":
            return False
        if strat.disclosure not in ("invert_truth", "all_distrust_legit"):
            return False
    return True


def _resolve_params(cfg: Config, graph, P) -> dict:
    """Window and threshold resolution; formula mode defers to the protocol
    parameter calculators (which need the graph's walk quantities)."""
    from . import protocols  # local import: protocols layers on top of engine

    params: dict = {"param_mode": cfg.param_mode}
    if cfg.param_mode == "explicit":
        if cfg.n_alpha is None:
            raise EngineError("explicit param_mode requires n_alpha")
        params["n_alpha"] = cfg.n_alpha
        params["tau_ind"] = cfg.tau_ind
        params["tau"] = cfg.tau
        return params
    mq = markov.compute_markov_quantities(P)
    params["t_hit"] = mq.t_hit
    params["t_meet"] = mq.t_meet
    if cfg.protocol == "individual":
        pp = protocols.individual_params(cfg.n_robots, cfg.delta, cfg.epsilon_alpha, mq.t_meet)
        params.update(n_alpha=pp.n_alpha, tau_ind=pp.tau_ind, tau=None)
    else:
        pp = protocols.dcv_params(
            cfg.n_robots, cfg.n_legit, cfg.delta, cfg.epsilon_alpha,
            mq.t_hit, mq.t_meet, (cfg.rho1, cfg.rho2, cfg.rho3, cfg.rho4),
        )
        params.update(
            n_alpha=pp.n_alpha, tau=pp.tau, tau_ind=None,
            q=pp.q, f=pp.f, tau_branch=pp.tau_branch,
        )
    return params


def _make_generator(cfg: Config, rng_seed) -> tuple[np.random.Generator, int | None]:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed, None
    seed = rng_seed if rng_seed is not None else cfg.seed
    if seed is None:
        raise EngineError("a seed is required (config.seed or the rng_seed argument)")
    if isinstance(seed, np.random.SeedSequence):
        ss, seed_echo = seed, None
    else:
        ss, seed_echo = np.random.SeedSequence(int(seed)), int(seed)
    bitgen = np.random.PCG64(ss) if cfg.rng_family == "pcg64" else np.random.Philox(ss)
    return np.random.Generator(bitgen), seed_echo


def simulate(
    config: Config,
    rng_seed=None,
    *,
    graph: topology.SiteGraph | None = None,
    team: Team | None = None,
    model: trust.ObservationModel | None = None,
    P: markov.TransitionMatrix | None = None,
    backend: str = "auto",
) -> RunRecord:
    """Run one simulation to its window (fixed mode) or to first success
    (until-correct mode) and return the full RunRecord.

    ``rng_seed`` may be an int, a SeedSequence, or a ready Generator (the
    latter loses the seed echo in the record). ``graph``/``team``/``model``/
    ``P`` override the config-derived objects for programmatic use.
    """
    config.validate()
    rng, seed_echo = _make_generator(config, rng_seed)
    if graph is None:
        graph = build_graph(config, rng)
    team = team if team is not None else build_team(config)
    model = model if model is not None else trust.ObservationModel(config.epsilon_alpha)
    if team.n_robots != config.n_robots or team.n_legit != config.n_legit:
        raise EngineError("team composition disagrees with config")

    if P is None:
        P = markov.lazy_transition_matrix(graph)
    elif P.n_states != graph.num_sites:
        raise EngineError("transition matrix size disagrees with the graph")
    cums, dests = markov.inversion_tables(P)
    params = _resolve_params(config, graph, P)
    n_alpha = int(params["n_alpha"])
    n = config.n_robots
    truth = team.truth
    legit_ids = team.legit_ids

    if config.initial_positions is not None:
        if len(config.initial_positions) != n:
            raise EngineError("initial_positions length must equal n_robots")
        positions = np.array(config.initial_positions, dtype=np.int64)
        if np.any(positions < 0) or np.any(positions >= graph.num_sites):
            raise EngineError("initial position outside the site range")
    else:
        positions = np.floor(rng.random(n) * graph.num_sites).astype(np.int64)
    for r, strat in team.strategies.items():
        if strat.movement == "stationary" and strat.site is not None and config.initial_positions is None:
            if not (0 <= strat.site < graph.num_sites):
                raise EngineError(f"stationary site {strat.site} outside the site range")
            positions[r] = strat.site
    initial_positions = positions.copy()

    use_kernel = _kernel_eligible(config, team, model) and backend != "python"
    if backend == "compiled" and not use_kernel:
        raise EngineError("compiled backend unavailable or config not on its fast path")
    backend_name = "compiled" if use_kernel else "python"

    eta = np.zeros((n, n), dtype=np.int64)
    beta = np.zeros((n, n), dtype=np.float64)
    legit_u8 = truth.copy()

    pure = _PurePhases(rng, graph, cums, dests, team, model, positions)
    if config.record_trace:
        pure.trace = [initial_positions.copy()]
    if config.record_observations:
        pure.obs_log = []

    until = config.mode == "until-correct"
    p_obs = pure.p_obs.copy()

    def phase1(steps, t0, check, stop):
        if use_kernel:
            bg = rng.bit_generator
            with bg.lock:
                return _speedups.run_phase1(
                    bg, steps, t0, positions, cums, dests, legit_u8, p_obs,
                    eta, beta, truth, n_alpha, check, stop,
                )
        return pure.run_phase1(steps, t0, eta, beta, truth, n_alpha, check, stop)

    first_correct: int | None = None
    status = "window-elapsed"
    met2 = enc = theta = None
    interim = None
    phase2_steps_run = 0

    if config.protocol == "individual":
        if until:
            budget = config.cap
            res, done = phase1(budget, 0, True, True)
            phase1_steps_run = done
            if res >= 0:
                first_correct, status = res, "correct"
            else:
                status = "cap-exceeded"
        else:
            window = config.tau_ind if config.tau_ind is not None else params.get("tau_ind")
            if window is None:
                raise EngineError("fixed-window individual run requires tau_ind")
            res, done = phase1(int(window), 0, True, False)
            phase1_steps_run = done
            if res >= 0:
                first_correct = res
        interim = _interim_matrix(eta, beta, n_alpha, legit_ids, n)
        final = interim.copy()
    else:
        tau1 = params.get("tau")
        if config.tau is not None:
            tau1 = config.tau
        if tau1 is None:
            raise EngineError("dcv run requires tau (explicit or from formulas)")
        tau1 = int(tau1)
        if until and tau1 >= config.cap:
            raise EngineError("cap must exceed the DCV phase-1 window in until-correct mode")
        _, phase1_steps_run = phase1(tau1, 0, False, False)
        interim = _interim_matrix(eta, beta, n_alpha, legit_ids, n)

        # Vectors each robot supplies in the exchange phase: legitimate robots
        # their frozen interim vector, malicious robots a fabrication. Random
        # disclosure rows refresh inside the phase-2 loop; custom disclosure
        # fabricates once here (ascending id order) from the run generator.
        supply = np.zeros((n, n), dtype=np.uint8)
        for j in range(n):
            if truth[j]:
                supply[j] = interim[j]
                continue
            strat = team.strategy(j)
            if strat.disclosure == "random":
                continue
            supply[j] = adv.fabricate_vector(
                strat, truth, j, rng=rng if strat.disclosure == "custom" else None
            )
        trusted = interim.copy()
        tally = np.zeros((n, n), dtype=np.int64)
        theta = np.zeros(n, dtype=np.int64)
        for i in legit_ids:
            tally[i] = interim[i].astype(np.int64)
            theta[i] = 1
        met2 = np.zeros((n, n), dtype=np.uint8)
        enc = np.zeros((n, n), dtype=np.int64)

        budget = (config.cap - tau1) if until else tau1
        if use_kernel:
            bg = rng.bit_generator
            with bg.lock:
                res, done = _speedups.run_phase2(
                    bg, budget, tau1, positions, cums, dests, legit_u8,
                    trusted, supply, tally, theta, met2, enc, truth,
                    True, until, until,
                )
        else:
            res, done = pure.run_phase2(
                budget, tau1, trusted, supply, tally, theta, met2, enc, truth,
                True, until, until,
            )
        phase2_steps_run = done
        if res >= 0:
            first_correct = res
            if until:
                status = "correct"
        elif until:
            status = "quiescent-failure" if res == -2 else "cap-exceeded"

        final = np.zeros((n, n), dtype=np.uint8)
        for i in legit_ids:
            row = 2 * tally[i] >= theta[i]
            row[i] = True
            final[i] = row.astype(np.uint8)
        if config.exclude_subject_vote:
            from . import protocols

            for i in legit_ids:
                members = {i} | {
                    int(j) for j in np.flatnonzero((trusted[i] == 1) & (met2[i] == 1)) if j != i
                }
                hood = protocols.TrustedNeighborhood(
                    owner=i,
                    members=frozenset(members),
                    collected_vectors={m: supply[m] if m != i else interim[i] for m in members},
                )
                final[i] = protocols.fuse_majority(interim[i], hood, exclude_subject_vote=True)

    supply_out = None
    supply_is_static = True
    if config.protocol == "dcv":
        supply_out = supply
        supply_is_static = all(
            team.strategy(r).disclosure != "random"
            for r in range(config.n_legit, config.n_robots)
        )
    record = RunRecord(
        config=config,
        seed=seed_echo,
        backend=backend_name,
        graph_edges=tuple(sorted(graph.edges)),
        n_sites=graph.num_sites,
        truth=truth,
        legit_ids=legit_ids,
        params=params,
        phase1_steps=phase1_steps_run,
        phase2_steps=phase2_steps_run,
        steps_run=phase1_steps_run + phase2_steps_run,
        first_correct_time=first_correct,
        status=status,
        initial_positions=initial_positions,
        final_positions=positions.copy(),
        eta=eta,
        beta=beta,
        interim=interim,
        final=final,
        met_phase2=met2,
        phase2_encounters=enc,
        theta_sizes=theta[np.array(legit_ids, dtype=np.int64)] if theta is not None and legit_ids else (
            np.zeros(0, dtype=np.int64) if theta is not None else None
        ),
        supply=supply_out,
        supply_static=supply_is_static,
        trace_positions=np.array(pure.trace) if pure.trace is not None else None,
        observation_log=pure.obs_log,
    )
    return record
