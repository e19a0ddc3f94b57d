"""The simulation engine.

Each TTI runs the four-step scheduling protocol: read the system state into a
snapshot, build a problem instance from it, solve (heuristically or exactly),
then enforce the decision by draining queues. Two evaluation topologies sit
on top of that loop:

* twin runs: two trajectories evolve from identical traces, one driven by a
  heuristic and one by the exact solver, and their objectives are compared
  per TTI (the solver's decisions feed back into its own trajectory);
* snapshot mode: a single heuristic-driven trajectory, where every TTI's
  snapshot is also written to disk and solved offline purely for comparison
  (the optimal result never alters the trajectory).

Every optimal scheduling call is timed in three phases (creation, solving,
reading) so the in-process and external-process pathways can be compared.
"""

import csv
import math
import os
from dataclasses import dataclass

from .errors import ConfigError, ContractViolation, SolverFailure, XmlParseError
from .mbs import (
    Allocation,
    build_ilp,
    build_snapshot,
    decode_solution,
    objective_of,
    schedule_greedy_backlog,
    schedule_maxci,
    schedule_pf,
    snapshot_filename,
    write_snapshot,
)
from .scenario import (
    ChannelTrace,
    ScenarioConfig,
    SystemState,
    TrafficTrace,
    apply_arrivals,
    apply_service,
    gen_channel_trace,
    gen_traffic_trace,
    initial_state,
)
from .solvers import SolverBackend, run_backend
from .timing import PhaseTimings, now_us

MAXCI = "maxci"
GREEDY = "greedy"
PF = "pf"
OPTIMAL = "optimal"
HEURISTIC_KINDS = (MAXCI, GREEDY, PF)

TIMING_PHASES = ("creation", "solving", "reading")

ROW_SOLVED = "solved"
ROW_UNSOLVED = "unsolved"


@dataclass(frozen=True)
class SchedulerSpec:
    kind: str
    backend: SolverBackend | None = None

    def validate(self) -> None:
        if self.kind not in HEURISTIC_KINDS and self.kind != OPTIMAL:
            raise ConfigError(f"unknown scheduler {self.kind!r}")
        if self.kind == OPTIMAL and self.backend is None:
            raise ConfigError("the optimal scheduler needs a solver backend")


@dataclass
class RunMetrics:
    """Per-TTI series for one trajectory."""

    scheduler: str
    objective: list[int]
    cum_objective: list[int]
    served: list[list[int]]
    backlog: list[list[int | float]]  # after service
    timings: list[PhaseTimings]


@dataclass
class TwinReport:
    heuristic_metrics: RunMetrics
    optimal_metrics: RunMetrics
    ratio_series: list[float]
    cumulative_ratio: float


@dataclass
class SnapshotRow:
    tti: int
    heur_obj: int
    opt_obj: int | None
    ratio: float | None
    status: str


@dataclass
class SnapshotReport:
    rows: list[SnapshotRow]
    cumulative_ratio: float


def optimality_ratio(heur_obj: int, opt_obj: int) -> float:
    """Ratio on one instance; requires dominance. 0/0 counts as fully optimal."""
    if heur_obj < 0:
        raise ContractViolation(f"negative heuristic objective {heur_obj}")
    if heur_obj > opt_obj:
        raise ContractViolation(
            f"dominance violation: heuristic {heur_obj} exceeds optimal {opt_obj}")
    return heur_obj / opt_obj if opt_obj > 0 else 1.0


def _cross_ratio(heur_obj: int, opt_obj: int) -> float:
    # Twin trajectories diverge, so per-TTI dominance is not guaranteed and
    # plain division applies; an idle optimal TTI against a busy heuristic
    # one yields inf.
    if opt_obj > 0:
        return heur_obj / opt_obj
    return 1.0 if heur_obj == 0 else math.inf


def _run_heuristic(inst, kind: str, avg_throughput: list[float]) -> Allocation:
    if kind == MAXCI:
        return schedule_maxci(inst)
    if kind == GREEDY:
        return schedule_greedy_backlog(inst)
    if kind == PF:
        return schedule_pf(inst, avg_throughput)
    raise ConfigError(f"unknown heuristic {kind!r}")


def schedule_once(state: SystemState, channel: ChannelTrace, config: ScenarioConfig,
                  sched: SchedulerSpec) -> tuple[Allocation, PhaseTimings]:
    """One scheduling call: snapshot, build, solve, decode. State untouched."""
    sched.validate()
    start = now_us()
    inst = build_snapshot(state, channel, config)
    t_snapshot = now_us() - start

    if sched.kind != OPTIMAL:
        t0 = now_us()
        alloc = _run_heuristic(inst, sched.kind, state.avg_throughput)
        t_heur = now_us() - t0
        timings = PhaseTimings(creation_us=t_snapshot, solving_us=t_heur,
                               reading_us=0, total_us=now_us() - start)
        timings.validate()
        return alloc, timings

    t0 = now_us()
    problem = build_ilp(inst)
    t_ilp = now_us() - t0
    try:
        sol, inner = run_backend(inst, problem, sched.backend)
        t0 = now_us()
        alloc = decode_solution(inst, sol)
        t_decode = now_us() - t0
    except SolverFailure as exc:
        raise type(exc)(f"tti {inst.tti}: {exc}") from exc
    timings = PhaseTimings(
        creation_us=t_snapshot + t_ilp + inner.creation_us,
        solving_us=inner.solving_us,
        reading_us=inner.reading_us + t_decode,
        total_us=now_us() - start,
    )
    timings.validate()
    return alloc, timings


def _check_trace_dims(config: ScenarioConfig, channel: ChannelTrace, traffic: TrafficTrace) -> None:
    if len(channel.cqi) != config.num_ttis or len(traffic.arrivals) != config.num_ttis:
        raise ConfigError("trace length does not match num_ttis")


def run_in_loop(config: ScenarioConfig, sched: SchedulerSpec, channel: ChannelTrace,
                traffic: TrafficTrace) -> RunMetrics:
    """Evolve one trajectory; the scheduler's decisions feed back every TTI."""
    config.validate()
    sched.validate()
    _check_trace_dims(config, channel, traffic)
    state = initial_state(config)
    metrics = RunMetrics(scheduler=sched.kind, objective=[], cum_objective=[],
                         served=[], backlog=[], timings=[])
    cum = 0
    for t in range(config.num_ttis):
        state = apply_arrivals(state, traffic, t)
        alloc, timings = schedule_once(state, channel, config, sched)
        if sched.kind != OPTIMAL:
            # the three phases describe solver calls; heuristics keep only the total
            timings = PhaseTimings(0, 0, 0, timings.total_us)
        state = apply_service(state, alloc, config.pf_alpha)
        objective = sum(alloc.served)
        cum += objective
        metrics.objective.append(objective)
        metrics.cum_objective.append(cum)
        metrics.served.append(list(alloc.served))
        metrics.backlog.append(list(state.backlog))
        metrics.timings.append(timings)
    return metrics


def run_twin(config: ScenarioConfig, heuristic: SchedulerSpec,
             backend: SolverBackend) -> TwinReport:
    """Two trajectories from identical traces: heuristic-fed vs solver-fed."""
    if heuristic.kind == OPTIMAL:
        raise ConfigError("the twin heuristic must not be the optimal scheduler")
    channel = gen_channel_trace(config)
    traffic = gen_traffic_trace(config)
    heur_metrics = run_in_loop(config, heuristic, channel, traffic)
    opt_metrics = run_in_loop(config, SchedulerSpec(OPTIMAL, backend), channel, traffic)
    ratio_series = [_cross_ratio(h, o)
                    for h, o in zip(heur_metrics.objective, opt_metrics.objective)]
    cumulative = _cross_ratio(sum(heur_metrics.objective), sum(opt_metrics.objective))
    return TwinReport(heuristic_metrics=heur_metrics, optimal_metrics=opt_metrics,
                      ratio_series=ratio_series, cumulative_ratio=cumulative)


def run_snapshot_mode(config: ScenarioConfig, heuristic: SchedulerSpec,
                      backend: SolverBackend, export_dir: str) -> SnapshotReport:
    """One heuristic trajectory; every snapshot is exported and solved offline."""
    if heuristic.kind == OPTIMAL:
        raise ConfigError("snapshot mode compares a heuristic against the solver")
    config.validate()
    heuristic.validate()
    os.makedirs(export_dir, exist_ok=True)
    channel = gen_channel_trace(config)
    traffic = gen_traffic_trace(config)
    state = initial_state(config)
    rows = []
    solved_heur_total = 0
    solved_opt_total = 0
    for t in range(config.num_ttis):
        state = apply_arrivals(state, traffic, t)
        inst = build_snapshot(state, channel, config)
        write_snapshot(inst, os.path.join(export_dir, snapshot_filename(t)))
        alloc = _run_heuristic(inst, heuristic.kind, state.avg_throughput)
        heur_obj = objective_of(inst, alloc)
        try:
            sol, _ = run_backend(inst, build_ilp(inst), backend)
            opt_obj = objective_of(inst, decode_solution(inst, sol))
        except (SolverFailure, XmlParseError, ContractViolation):
            # offline analysis survives a flaky backend; the trajectory is
            # heuristic-driven either way
            rows.append(SnapshotRow(t, heur_obj, None, None, ROW_UNSOLVED))
        else:
            ratio = optimality_ratio(heur_obj, opt_obj)
            rows.append(SnapshotRow(t, heur_obj, opt_obj, ratio, ROW_SOLVED))
            solved_heur_total += heur_obj
            solved_opt_total += opt_obj
        state = apply_service(state, alloc, config.pf_alpha)
    if solved_opt_total > 0:
        cumulative = solved_heur_total / solved_opt_total
    else:
        cumulative = 1.0
    return SnapshotReport(rows=rows, cumulative_ratio=cumulative)


def timing_report(tagged: list[tuple[str, RunMetrics]]) -> list[tuple[str, str, float, int, int]]:
    """Aggregate phase durations per method: (method, phase, mean, total, count)."""
    if not tagged:
        raise ConfigError("timing report needs at least one run")
    rows = []
    for method, metrics in tagged:
        count = len(metrics.timings)
        if count == 0:
            raise ConfigError(f"method {method!r} has no timed scheduling calls")
        for phase in TIMING_PHASES:
            total = sum(getattr(pt, f"{phase}_us") for pt in metrics.timings)
            rows.append((method, phase, total / count, total, count))
    return rows


# --- CSV emission -------------------------------------------------------------

def write_metrics_csv(metrics: RunMetrics, path: str) -> None:
    num_users = len(metrics.served[0]) if metrics.served else 0
    header = ["tti", "objective", "cum_objective",
              "creation_us", "solving_us", "reading_us", "total_us"]
    header += [f"backlog_u{u}" for u in range(num_users)]
    header += [f"served_u{u}" for u in range(num_users)]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for t in range(len(metrics.objective)):
            pt = metrics.timings[t]
            row = [t, metrics.objective[t], metrics.cum_objective[t],
                   pt.creation_us, pt.solving_us, pt.reading_us, pt.total_us]
            row += ["inf" if q == math.inf else q for q in metrics.backlog[t]]
            row += metrics.served[t]
            writer.writerow(row)


def write_twin_csv(report: TwinReport, path: str) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["tti", "heur_obj", "opt_obj", "ratio"])
        for t, ratio in enumerate(report.ratio_series):
            writer.writerow([t, report.heuristic_metrics.objective[t],
                             report.optimal_metrics.objective[t], ratio])


def write_snapshot_report_csv(report: SnapshotReport, path: str) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["tti", "heur_obj", "opt_obj", "ratio", "status"])
        for row in report.rows:
            writer.writerow([row.tti, row.heur_obj,
                             "" if row.opt_obj is None else row.opt_obj,
                             "" if row.ratio is None else row.ratio,
                             row.status])


def write_timing_csv(rows: list[tuple[str, str, float, int, int]], path: str) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["method", "phase", "mean_us", "total_us", "count"])
        for method, phase, mean_us, total_us, count in rows:
            writer.writerow([method, phase, mean_us, total_us, count])
