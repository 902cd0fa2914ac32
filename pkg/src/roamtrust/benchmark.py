"""Backend benchmark: compiled kernel vs pure-Python fallback.

Runs the same until-correct workloads (both protocols, 9-site grid) on each
backend, verifies the records come out identical, and reports wall-clock
times. The compiled kernel consumes the identical random stream, so any
output difference is a bug, not noise.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

from . import engine, experiments


@dataclass(frozen=True)
class BenchmarkReport:
    n_robots: int
    n_runs: int
    python_seconds: float
    compiled_seconds: float | None
    identical: bool | None
    mean_steps: float

    @property
    def speedup(self) -> float | None:
        if self.compiled_seconds is None or self.compiled_seconds == 0:
            return None
        return self.python_seconds / self.compiled_seconds


def _workload_configs(n_robots: int) -> list[engine.Config]:
    base = engine.Config(
        topology="grid", rows=3, cols=3, n_robots=n_robots, n_legit=n_robots // 2,
        delta=0.1, epsilon_alpha=0.25, mode="until-correct", cap=2_000_000,
        param_mode="explicit",
    )
    from dataclasses import replace

    ind = replace(base, protocol="individual", n_alpha=60)
    n_alpha, tau = experiments.calibrated_dcv_thresholds(base.delta, base.epsilon_alpha, 0.118)
    dcv = replace(base, protocol="dcv", n_alpha=n_alpha, tau=tau)
    return [ind, dcv]


def run_benchmark(seeds=range(5), n_robots: int = 32) -> BenchmarkReport:
    configs = _workload_configs(n_robots)
    seeds = list(seeds)

    def run_all(backend):
        t0 = time.perf_counter()
        records = []
        for cfg in configs:
            for seed in seeds:
                records.append(engine.simulate(cfg, seed, backend=backend))
        return time.perf_counter() - t0, records

    py_time, py_records = run_all("python")
    compiled_time = None
    identical = None
    if engine._speedups is not None:
        compiled_time, c_records = run_all("compiled")
        identical = all(
            engine.records_equivalent(a, b) for a, b in zip(py_records, c_records)
        )
    mean_steps = sum(r.steps_run for r in py_records) / len(py_records)
    return BenchmarkReport(
        n_robots=n_robots,
        n_runs=len(py_records),
        python_seconds=py_time,
        compiled_seconds=compiled_time,
        identical=identical,
        mean_steps=mean_steps,
    )


def format_report(report: BenchmarkReport) -> str:
    lines = [
        f"workload: {report.n_runs} until-correct runs, {report.n_robots} robots, "
        f"mean {report.mean_steps:.0f} steps/run",
        f"python backend:   {report.python_seconds:.3f} s",
    ]
    if report.compiled_seconds is None:
        lines.append("compiled backend: not built (pure-Python fallback active)")
    else:
        lines.append(f"compiled backend: {report.compiled_seconds:.3f} s")
        lines.append(f"speedup: {report.speedup:.1f}x; identical outputs: {report.identical}")
    return "\n".join(lines)
