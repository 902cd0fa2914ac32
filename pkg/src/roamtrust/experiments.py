"""Monte-Carlo sweeps, theory prediction curves, and result export.

A sweep varies one axis (team size, site count, or legitimate fraction),
runs both protocols to first success on paired per-run seeds, and reports
mean first-correct times with spread and failure counts, optionally next to
the closed-form guarantee windows ("theory") computed from the exact walk
quantities of the same topologies.

Until-correct runs need concrete decision thresholds. The individual
protocol uses its formula observation count (which grows with team size).
For the crowd-vetting protocol the guarantee-formula window is far beyond
where simulated runs succeed, so sweeps default to a simulation calibration
that keeps the same two-phase structure but sizes phase 1 to gather a
per-pair-confident observation count from a typical encounter rate:

    n_alpha = ceil(ln(1/delta) / (2 eps^2))
    tau     = ceil(margin * n_alpha / meet_probability)

with meet_probability = sum_s pi_s^2 for the topology's stationary
distribution. Both thresholds are constant in the team size, mirroring the
guarantee's scaling. Pass ``dcv_calibration="guarantee"`` for the literal
formula windows.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import engine, markov, protocols

PHASE1_MARGIN = 1.6
SERIES_ORDER = ("individual", "dcv", "theory_individual", "theory_dcv")
SVG_COLORS = {
    "individual": "#7f7f7f",
    "dcv": "#1f77b4",
    "theory_individual": "#b58fd4",
    "theory_dcv": "#9467bd",
}


class ExperimentError(ValueError):
    pass


def calibrated_dcv_thresholds(
    delta: float, epsilon_alpha: float, meet_probability: float, margin: float = PHASE1_MARGIN
) -> tuple[int, int]:
    """Simulation-calibrated (n_alpha, per-phase window) for until-correct
    crowd-vetting runs; constant in the team size."""
    if meet_probability <= 0.0:
        raise ExperimentError("meet_probability must be > 0")
    n_alpha = max(1, math.ceil(math.log(1.0 / delta) / (2.0 * epsilon_alpha**2)))
    tau = max(1, math.ceil(margin * n_alpha / meet_probability))
    return n_alpha, tau


@dataclass(frozen=True)
class SweepSpec:
    """One sweep: an axis, its values, and the shared base configuration."""

    axis: str
    values: tuple
    base: engine.Config
    runs_per_point: int = 100
    protocols: tuple[str, ...] = ("individual", "dcv")
    include_theory: bool = True
    dcv_calibration: str = "simulation"  # or "guarantee"
    dcv_margin: float = PHASE1_MARGIN

    def validate(self) -> None:
        if self.axis not in ("n_robots", "n_sites", "legit_fraction"):
            raise ExperimentError(f"unknown sweep axis {self.axis!r}")
        if len(self.values) == 0:
            raise ExperimentError("sweep needs at least one axis value")
        if any(b >= a for a, b in zip(self.values[1:], self.values)):
            raise ExperimentError("axis values must be strictly increasing")
        if self.runs_per_point < 1:
            raise ExperimentError("runs_per_point must be >= 1")
        if not self.protocols:
            raise ExperimentError("protocols must be non-empty")
        for p in self.protocols:
            if p not in ("individual", "dcv"):
                raise ExperimentError(f"unknown protocol {p!r}")
        if self.dcv_calibration not in ("simulation", "guarantee"):
            raise ExperimentError(f"unknown dcv calibration {self.dcv_calibration!r}")
        for v in self.values:
            self.point_config(v)  # raises on inconsistent axis values

    def point_config(self, value) -> engine.Config:
        """Base config specialized to one axis value."""
        base = self.base
        if self.axis == "n_robots":
            n = int(value)
            if n < 2 or n % 2:
                raise ExperimentError("n_robots axis values must be even and >= 2")
            return replace(base, n_robots=n, n_legit=n // 2)
        if self.axis == "n_sites":
            n = int(value)
            if base.topology == "grid":
                side = math.isqrt(n)
                if side * side != n:
                    raise ExperimentError("grid site counts must be perfect squares")
                return replace(base, rows=side, cols=side)
            if base.topology == "line":
                return replace(base, n_sites=n)
            return replace(base, n_sites=n)
        frac = float(value)
        n_legit = frac * base.n_robots
        if abs(n_legit - round(n_legit)) > 1e-9 or round(n_legit) < 1:
            raise ExperimentError(
                f"legit_fraction {value} does not give an integer team split >= 1"
            )
        return replace(base, n_legit=int(round(n_legit)))


@dataclass(frozen=True)
class PointStats:
    mean: float
    sd: float
    ci_lo: float
    ci_hi: float
    runs: int
    failures: int


@dataclass
class SweepResult:
    axis: str
    values: tuple
    series: dict = field(default_factory=dict)  # (value, protocol) -> PointStats
    theory: dict = field(default_factory=dict)  # (value, protocol) -> window

    def stat_fields(self):
        """Canonical tuple form of the statistical content, for round-trips."""
        rows = []
        for value in self.values:
            for proto in SERIES_ORDER:
                if proto.startswith("theory_"):
                    key = (value, proto.removeprefix("theory_"))
                    if key in self.theory:
                        w = float(self.theory[key])
                        rows.append((value, proto, w, 0.0, w, w, 0, 0))
                else:
                    key = (value, proto)
                    if key in self.series:
                        s = self.series[key]
                        rows.append(
                            (value, proto, s.mean, s.sd, s.ci_lo, s.ci_hi, s.runs, s.failures)
                        )
        return rows


def _aggregate(times: list[int], failures: int) -> PointStats:
    runs = len(times) + failures
    if not times:
        return PointStats(math.nan, math.nan, math.nan, math.nan, runs, failures)
    arr = np.asarray(times, dtype=np.float64)
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    half = 1.96 * sd / math.sqrt(len(arr))
    return PointStats(mean, sd, mean - half, mean + half, runs, failures)


def _point_seeds(master_seed: int, pidx: int, ridx: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(pidx, ridx, stream))


_RANDOM_KINDS = ("barabasi_albert", "erdos_renyi")


def run_sweep(spec: SweepSpec, master_seed: int, collect_records: bool = False) -> SweepResult:
    """Execute the sweep deterministically.

    Per (point, run): one seed stream draws the topology (fresh per run for
    random graph kinds, shared per point otherwise); each protocol then runs
    until-correct on its own derived stream over the identical topology and
    team composition. Theory windows for random kinds average the exact walk
    times over the per-run topologies.
    """
    spec.validate()
    result = SweepResult(axis=spec.axis, values=tuple(spec.values))
    if collect_records:
        result.records = {}

    for pidx, value in enumerate(spec.values):
        cfg = spec.point_config(value)
        random_topology = cfg.topology in _RANDOM_KINDS
        fixed_graph = None
        if not random_topology:
            fixed_graph = engine.build_graph(cfg, np.random.default_rng(0))
        times: dict[str, list[int]] = {p: [] for p in spec.protocols}
        fails: dict[str, int] = {p: 0 for p in spec.protocols}
        walk_times: list[tuple[float, float]] = []
        meet_prob_fixed = None

        for ridx in range(spec.runs_per_point):
            if random_topology:
                topo_rng = np.random.default_rng(_point_seeds(master_seed, pidx, ridx, 0))
                graph = engine.build_graph(cfg, topo_rng)
            else:
                graph = fixed_graph
            P = markov.lazy_transition_matrix(graph)
            pi = markov.stationary_distribution(P)
            meet_prob = float(np.sum(pi**2))
            if not random_topology:
                meet_prob_fixed = meet_prob
            if spec.include_theory and (random_topology or not walk_times):
                _, t_hit = markov.hitting_times(P)
                _, t_meet = markov.meeting_times(P)
                walk_times.append((t_hit, t_meet))

            for stream, proto in ((1, "individual"), (2, "dcv")):
                if proto not in spec.protocols:
                    continue
                run_cfg = _until_correct_config(spec, cfg, proto, meet_prob)
                record = engine.simulate(
                    run_cfg, _point_seeds(master_seed, pidx, ridx, stream), graph=graph
                )
                if record.status == "correct":
                    times[proto].append(record.first_correct_time)
                else:
                    fails[proto] += 1
                if collect_records:
                    result.records.setdefault((value, proto), []).append(record)

        for proto in spec.protocols:
            result.series[(value, proto)] = _aggregate(times[proto], fails[proto])

        if spec.include_theory:
            t_hit = float(np.mean([w[0] for w in walk_times]))
            t_meet = float(np.mean([w[1] for w in walk_times]))
            ind = protocols.individual_params(cfg.n_robots, cfg.delta, cfg.epsilon_alpha, t_meet)
            dcv = protocols.dcv_params(
                cfg.n_robots, cfg.n_legit, cfg.delta, cfg.epsilon_alpha, t_hit, t_meet,
                (cfg.rho1, cfg.rho2, cfg.rho3, cfg.rho4),
            )
            result.theory[(value, "individual")] = ind.tau_ind
            result.theory[(value, "dcv")] = 2 * dcv.tau
    return result


def _until_correct_config(
    spec: SweepSpec, cfg: engine.Config, proto: str, meet_prob: float
) -> engine.Config:
    if proto == "individual":
        pp = protocols.individual_params(cfg.n_robots, cfg.delta, cfg.epsilon_alpha, 0.0)
        return replace(
            cfg, protocol="individual", mode="until-correct",
            param_mode="explicit", n_alpha=pp.n_alpha, tau_ind=None, tau=None,
        )
    if spec.dcv_calibration == "simulation":
        n_alpha, tau = calibrated_dcv_thresholds(
            cfg.delta, cfg.epsilon_alpha, meet_prob, spec.dcv_margin
        )
    else:
        P = markov.lazy_transition_matrix(engine.build_graph(cfg, np.random.default_rng(0)))
        mq = markov.compute_markov_quantities(P)
        pp = protocols.dcv_params(
            cfg.n_robots, cfg.n_legit, cfg.delta, cfg.epsilon_alpha, mq.t_hit, mq.t_meet,
            (cfg.rho1, cfg.rho2, cfg.rho3, cfg.rho4),
        )
        n_alpha, tau = pp.n_alpha, pp.tau
    return replace(
        cfg, protocol="dcv", mode="until-correct",
        param_mode="explicit", n_alpha=n_alpha, tau=tau, tau_ind=None,
    )


def theory_curve(axis_values, spec: SweepSpec, topology_samples: int = 1,
                 master_seed: int = 0) -> list[tuple[int, int]]:
    """Guarantee windows (tau_ind, 2 tau) per axis value from exact walk
    quantities; random topologies average over ``topology_samples`` draws."""
    out = []
    for pidx, value in enumerate(axis_values):
        cfg = spec.point_config(value)
        random_topology = cfg.topology in _RANDOM_KINDS
        samples = topology_samples if random_topology else 1
        hits, meets = [], []
        for s in range(samples):
            rng = np.random.default_rng(
                np.random.SeedSequence(master_seed, spawn_key=(pidx, s, 9))
            )
            graph = engine.build_graph(cfg, rng)
            P = markov.lazy_transition_matrix(graph)
            _, t_hit = markov.hitting_times(P)
            _, t_meet = markov.meeting_times(P)
            hits.append(t_hit)
            meets.append(t_meet)
        t_hit, t_meet = float(np.mean(hits)), float(np.mean(meets))
        ind = protocols.individual_params(cfg.n_robots, cfg.delta, cfg.epsilon_alpha, t_meet)
        dcv = protocols.dcv_params(
            cfg.n_robots, cfg.n_legit, cfg.delta, cfg.epsilon_alpha, t_hit, t_meet,
            (cfg.rho1, cfg.rho2, cfg.rho3, cfg.rho4),
        )
        out.append((ind.tau_ind, 2 * dcv.tau))
    return out


CSV_HEADER = "axis,axis_value,series,mean,sd,ci_lo,ci_hi,runs,failures"


def result_to_csv(result: SweepResult) -> str:
    lines = [CSV_HEADER]
    for value, series, mean, sd, lo, hi, runs, failures in result.stat_fields():
        lines.append(
            f"{result.axis},{value!r},{series},{mean!r},{sd!r},{lo!r},{hi!r},{runs},{failures}"
        )
    return "\n".join(lines) + "\n"


def _num(token: str):
    try:
        return int(token)
    except ValueError:
        return float(token)


def result_from_csv(text: str) -> SweepResult:
    """Inverse of result_to_csv for the statistical fields."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ExperimentError("unrecognized sweep CSV header")
    axis = None
    values: list = []
    series = {}
    theory = {}
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 9:
            raise ExperimentError(f"malformed CSV row: {ln!r}")
        axis = parts[0]
        value = _num(parts[1])
        name = parts[2]
        mean, sd, lo, hi = (float(_num(p)) for p in parts[3:7])
        runs, failures = int(parts[7]), int(parts[8])
        if value not in values:
            values.append(value)
        if name.startswith("theory_"):
            theory[(value, name.removeprefix("theory_"))] = mean
        else:
            series[(value, name)] = PointStats(mean, sd, lo, hi, runs, failures)
    return SweepResult(axis=axis, values=tuple(values), series=series, theory=theory)


def results_stat_equal(a: SweepResult, b: SweepResult) -> bool:
    """Statistical-field equality (NaN-tolerant), used for round-trip checks."""
    ra, rb = a.stat_fields(), b.stat_fields()
    if len(ra) != len(rb) or a.axis != b.axis:
        return False
    for x, y in zip(ra, rb):
        for u, v in zip(x, y):
            if isinstance(u, float) and isinstance(v, float):
                if math.isnan(u) and math.isnan(v):
                    continue
                if u != v:
                    return False
            elif u != v:
                return False
    return True


def _svg_escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


AXIS_LABELS = {
    "n_robots": "number of robots",
    "n_sites": "number of sites",
    "legit_fraction": "legitimate fraction",
}


def result_to_svg(result: SweepResult, title: str = "time-steps to correct trust vectors") -> str:
    """Minimal deterministic SVG line plot: one series per protocol plus the
    theory windows, with axis labels and a legend. Identical input renders
    identical bytes."""
    rows = result.stat_fields()
    if not rows:
        raise ExperimentError("empty sweep result; nothing to render")
    W, H = 640, 420
    ml, mr, mt, mb = 78, 16, 34, 54
    pw, ph = W - ml - mr, H - mt - mb
    xs = [float(v) for v in result.values]
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    y_hi = max(max(r[5] for r in rows), max(r[2] for r in rows)) * 1.08
    if not math.isfinite(y_hi) or y_hi <= 0:
        y_hi = 1.0

    def X(v):
        return ml + (float(v) - x_lo) / (x_hi - x_lo) * pw

    def Y(v):
        return mt + ph - min(float(v), y_hi) / y_hi * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{ml}" y="{mt - 14}" font-size="13">{_svg_escape(title)}</text>',
        f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>',
    ]
    for i in range(5):
        yv = y_hi * i / 4.0
        y = Y(yv)
        parts.append(f'<line x1="{ml - 4}" y1="{y:.2f}" x2="{ml}" y2="{y:.2f}" stroke="black"/>')
        parts.append(
            f'<text x="{ml - 8}" y="{y + 4:.2f}" text-anchor="end">{yv:.0f}</text>'
        )
    for v in result.values:
        x = X(v)
        parts.append(
            f'<line x1="{x:.2f}" y1="{mt + ph}" x2="{x:.2f}" y2="{mt + ph + 4}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{mt + ph + 18}" text-anchor="middle">{v}</text>'
        )
    parts.append(
        f'<text x="{ml + pw / 2:.2f}" y="{H - 12}" text-anchor="middle">'
        f"{_svg_escape(AXIS_LABELS.get(result.axis, result.axis))}</text>"
    )
    parts.append(
        f'<text x="16" y="{mt + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {mt + ph / 2:.2f})">time-steps</text>'
    )

    legend_y = mt + 8
    by_series: dict[str, list] = {}
    for row in rows:
        by_series.setdefault(row[1], []).append(row)
    for name in SERIES_ORDER:
        if name not in by_series:
            continue
        color = SVG_COLORS[name]
        dash = ' stroke-dasharray="6,4"' if name.startswith("theory_") else ""
        pts = " ".join(
            f"{X(r[0]):.2f},{Y(r[2]):.2f}" for r in by_series[name] if math.isfinite(r[2])
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"{dash}/>'
        )
        for r in by_series[name]:
            if not math.isfinite(r[2]):
                continue
            parts.append(
                f'<circle cx="{X(r[0]):.2f}" cy="{Y(r[2]):.2f}" r="3" fill="{color}"/>'
            )
            if not name.startswith("theory_") and math.isfinite(r[4]):
                parts.append(
                    f'<line x1="{X(r[0]):.2f}" y1="{Y(r[4]):.2f}" '
                    f'x2="{X(r[0]):.2f}" y2="{Y(r[5]):.2f}" stroke="{color}"/>'
                )
        parts.append(
            f'<line x1="{ml + pw - 150}" y1="{legend_y:.2f}" x2="{ml + pw - 126}" '
            f'y2="{legend_y:.2f}" stroke="{color}" stroke-width="2"{dash}/>'
        )
        parts.append(
            f'<text x="{ml + pw - 120}" y="{legend_y + 4:.2f}">{_svg_escape(name)}</text>'
        )
        legend_y += 16
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def export(result: SweepResult, out_dir, formats=("csv", "svg"), stem: str = "sweep") -> list[str]:
    """Write the result as CSV and/or SVG; returns the written paths."""
    if not result.series and not result.theory:
        raise ExperimentError("empty sweep result; nothing to export")
    formats = tuple(formats)
    for f in formats:
        if f not in ("csv", "svg"):
            raise ExperimentError(f"unknown export format {f!r}")
    if not formats:
        raise ExperimentError("no export formats requested")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if "csv" in formats:
        path = os.path.join(out_dir, stem + ".csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(result_to_csv(result))
        paths.append(path)
    if "svg" in formats:
        path = os.path.join(out_dir, stem + ".svg")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(result_to_svg(result))
        paths.append(path)
    return paths


SWEEP_KEYS = {
    "axis": str,
    "values": None,
    "runs_per_point": int,
    "protocols": None,
    "include_theory": None,
    "dcv_calibration": str,
    "dcv_margin": float,
}


def parse_sweep_spec(text: str) -> SweepSpec:
    """Parse a sweep spec file: the sweep keys plus any base config keys,
    all in the flat key-value format."""
    sweep_vals: dict = {}
    config_lines = []
    for raw in text.splitlines():
        stripped = raw.split("#", 1)[0].strip()
        if not stripped or "=" not in stripped:
            config_lines.append(raw)
            continue
        key = stripped.partition("=")[0].strip()
        if key in SWEEP_KEYS:
            value = stripped.partition("=")[2].strip()
            if key == "values":
                parsed = tuple(float(v) if "." in v else int(v) for v in value.split(","))
            elif key == "protocols":
                parsed = tuple(v.strip() for v in value.split(","))
            elif key == "include_theory":
                parsed = value.lower() in ("1", "true", "yes", "on")
            else:
                parsed = SWEEP_KEYS[key](value)
            sweep_vals[key] = parsed
        else:
            config_lines.append(raw)
    if "axis" not in sweep_vals or "values" not in sweep_vals:
        raise ExperimentError("sweep spec needs at least 'axis' and 'values'")
    base = engine.parse_config("\n".join(config_lines))
    spec = SweepSpec(base=base, **sweep_vals)
    spec.validate()
    return spec


def _figure_base(**overrides) -> engine.Config:
    base = dict(
        topology="grid", rows=3, cols=3, n_robots=32, n_legit=16,
        delta=0.1, epsilon_alpha=0.25, cap=2_000_000,
    )
    base.update(overrides)
    return engine.Config(**base)


def robots_sweep_spec(runs_per_point: int = 100, include_theory: bool = True) -> SweepSpec:
    """Team-size sweep on the 9-site grid with an even legit/malicious split."""
    return SweepSpec(
        axis="n_robots",
        values=(4, 8, 16, 32),
        base=_figure_base(),
        runs_per_point=runs_per_point,
        include_theory=include_theory,
    )


def sites_sweep_spec(runs_per_point: int = 100, include_theory: bool = True) -> SweepSpec:
    """Grid-size sweep at 32 robots."""
    return SweepSpec(
        axis="n_sites",
        values=(4, 9, 16),
        base=_figure_base(),
        runs_per_point=runs_per_point,
        include_theory=include_theory,
    )


def legit_fraction_sweep_spec(runs_per_point: int = 100, include_theory: bool = True) -> SweepSpec:
    """Legitimate-fraction sweep at 32 robots on the 9-site grid."""
    return SweepSpec(
        axis="legit_fraction",
        values=(0.25, 0.5, 0.75, 0.9375),
        base=_figure_base(),
        runs_per_point=runs_per_point,
        include_theory=include_theory,
    )
