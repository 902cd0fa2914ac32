"""roamtrust: malicious-robot detection in mobile teams.

Robots random-walk over a site graph, gather noisy pairwise trust
observations when co-located, and classify teammates either from their own
observations alone or by a two-phase protocol that additionally fuses
trusted neighbors' frozen opinions by majority rule. The package bundles
the protocol implementations, exact Markov-chain quantities for the lazy
walk, pluggable adversaries, a deterministic seeded simulation engine with
a compiled fast path, statistical verification oracles, and a Monte-Carlo
sweep harness with CSV/SVG export.
"""
from . import engine as _engine
from .adversary import AdversaryStrategy, adversary_move, fabricate_vector
from .engine import (
    Config,
    RunRecord,
    Team,
    parse_config,
    records_equivalent,
    simulate,
    success_check,
)
from .experiments import (
    SweepResult,
    SweepSpec,
    calibrated_dcv_thresholds,
    export,
    parse_sweep_spec,
    run_sweep,
    theory_curve,
)
from .markov import (
    MarkovQuantities,
    TransitionMatrix,
    compute_markov_quantities,
    hitting_times,
    lazy_transition_matrix,
    meeting_times,
    mixing_time,
    sample_step,
    stationary_distribution,
)
from .protocols import (
    ProtocolParams,
    TrustedNeighborhood,
    dcv_params,
    fuse_majority,
    individual_params,
    run_dcv,
    run_individual,
)
from .topology import SiteGraph, build_topology, parse_edge_list
from .trust import (
    ObservationModel,
    TrustLedger,
    interim_trust_entry,
    observation_model,
    sample_observation,
    trust_score,
)
from .verification import (
    EventEAudit,
    audit_event_E,
    check_binomial_tail,
    check_chernoff_lower_tail,
    check_proba_bound,
    lemma_T_condition,
    sample_event_E_runs,
)

__version__ = "0.1.0"


def simulation_backend() -> str:
    """Which inner-loop implementation this process is using."""
    return "compiled" if _engine._speedups is not None else "python"


__all__ = [
    "AdversaryStrategy",
    "Config",
    "EventEAudit",
    "MarkovQuantities",
    "ObservationModel",
    "ProtocolParams",
    "RunRecord",
    "SiteGraph",
    "SweepResult",
    "SweepSpec",
    "Team",
    "TransitionMatrix",
    "TrustLedger",
    "TrustedNeighborhood",
    "adversary_move",
    "audit_event_E",
    "build_topology",
    "calibrated_dcv_thresholds",
    "check_binomial_tail",
    "check_chernoff_lower_tail",
    "check_proba_bound",
    "compute_markov_quantities",
    "dcv_params",
    "export",
    "fabricate_vector",
    "fuse_majority",
    "hitting_times",
    "individual_params",
    "interim_trust_entry",
    "lazy_transition_matrix",
    "lemma_T_condition",
    "meeting_times",
    "mixing_time",
    "observation_model",
    "parse_config",
    "parse_edge_list",
    "parse_sweep_spec",
    "records_equivalent",
    "run_dcv",
    "run_individual",
    "run_sweep",
    "sample_event_E_runs",
    "sample_observation",
    "sample_step",
    "simulate",
    "simulation_backend",
    "stationary_distribution",
    "success_check",
    "theory_curve",
    "trust_score",
]
