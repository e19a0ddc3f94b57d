"""Command-line entry points.

Subcommands:
  twin       two trajectories on identical traces, heuristic vs exact solver
  snapshots  one heuristic trajectory, every snapshot solved offline
  bench      time the in-process and external solver pathways on equal traces
  solve      act as the external solver: LP file in, solution XML out

`solve` is what makes the package self-hosting: an external backend whose
command template is `<python> -m mbsched solve --lp {lp} --out {sol}` runs
the full file-exchange pathway with no third-party solver installed.

Exit codes: 0 success, 2 usage/config/parse errors, 3 solver/runtime failures.

Heavy imports happen inside the command functions: `solve` is spawned once
per external scheduling call, so its startup cost is part of the measured
solving phase and must stay minimal.
"""

import argparse
import json
import os
import sys
import traceback

from .errors import (
    ConfigError,
    ContractViolation,
    InstanceTooLarge,
    SolverFailure,
    XmlParseError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mbsched",
        description="Multiband downlink scheduling simulator with an exact solver in the loop")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_command(name: str, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the TOML run configuration")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="scenario seed (overrides the config)")
        p.add_argument("--keep-files", action="store_true",
                       help="keep the per-call LP/solution files of external solves")
        p.add_argument("--jobs", type=int, default=1,
                       help="run replications in up to N parallel processes")
        return p

    add_run_command("twin", "heuristic and optimal trajectories on identical traces").set_defaults(func=cmd_twin)
    add_run_command("snapshots", "heuristic trajectory with offline optimal comparison").set_defaults(func=cmd_snapshots)
    add_run_command("bench", "compare solver pathway timings per phase").set_defaults(func=cmd_bench)

    p = sub.add_parser("solve", help="solve one LP file and write a solution XML file")
    p.add_argument("--lp", required=True, help="LP problem file to solve")
    p.add_argument("--out", required=True, help="where to write the solution XML")
    p.set_defaults(func=cmd_solve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverFailure, XmlParseError, ContractViolation, InstanceTooLarge) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception:
        traceback.print_exc()
        return EXIT_RUNTIME


def _load_with_overrides(args):
    import dataclasses

    from .config import load_config

    cfg = load_config(args.config)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, output_dir=args.out)
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must fit in 64 unsigned bits")
        cfg = dataclasses.replace(cfg, scenario=dataclasses.replace(cfg.scenario, seed=args.seed))
    if args.keep_files:
        cfg = dataclasses.replace(cfg, keep_files=True)
    return cfg


def _replication_configs(cfg):
    """One (config, output_dir) per replication; seeds advance by the stride."""
    import dataclasses

    pairs = []
    for rep in range(cfg.replications):
        seed = (cfg.scenario.seed + rep * cfg.seed_stride) % 2 ** 64
        rep_cfg = dataclasses.replace(cfg, scenario=dataclasses.replace(cfg.scenario, seed=seed))
        out_dir = cfg.output_dir if cfg.replications == 1 else os.path.join(
            cfg.output_dir, f"rep{rep}")
        pairs.append((rep_cfg, out_dir))
    return pairs


def _run_replications(pairs, worker, jobs: int):
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    if jobs == 1 or len(pairs) == 1:
        return [worker(pair) for pair in pairs]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=min(jobs, len(pairs))) as pool:
        return list(pool.map(worker, pairs))


def _write_summary(out_dir: str, payload: dict) -> None:
    with open(os.path.join(out_dir, "summary.json"), "w") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def _ratio_summary(command: str, ratios: list[float]) -> dict:
    return {
        "command": command,
        "replications": len(ratios),
        "cumulative_ratios": ratios,
        "mean_cumulative_ratio": sum(ratios) / len(ratios),
        "min_cumulative_ratio": min(ratios),
    }


def _twin_replication(pair) -> float:
    from .config import make_backend
    from .simloop import SchedulerSpec, run_twin, write_metrics_csv, write_twin_csv

    cfg, out_dir = pair
    os.makedirs(out_dir, exist_ok=True)
    backend = make_backend(cfg, os.path.join(out_dir, "solver_files"))
    report = run_twin(cfg.scenario, SchedulerSpec(cfg.scheduler), backend)
    write_twin_csv(report, os.path.join(out_dir, "twin.csv"))
    write_metrics_csv(report.heuristic_metrics,
                      os.path.join(out_dir, f"metrics_{cfg.scheduler}.csv"))
    write_metrics_csv(report.optimal_metrics, os.path.join(out_dir, "metrics_optimal.csv"))
    return report.cumulative_ratio


def cmd_twin(args) -> int:
    cfg = _load_with_overrides(args)
    os.makedirs(cfg.output_dir, exist_ok=True)
    ratios = _run_replications(_replication_configs(cfg), _twin_replication, args.jobs)
    summary = _ratio_summary("twin", ratios)
    _write_summary(cfg.output_dir, summary)
    print(f"twin: {len(ratios)} replication(s), "
          f"mean cumulative ratio {summary['mean_cumulative_ratio']:.4f}")
    return EXIT_OK


def _snapshot_replication(pair) -> float:
    from .config import make_backend
    from .simloop import SchedulerSpec, run_snapshot_mode, write_snapshot_report_csv

    cfg, out_dir = pair
    os.makedirs(out_dir, exist_ok=True)
    backend = make_backend(cfg, os.path.join(out_dir, "solver_files"))
    report = run_snapshot_mode(cfg.scenario, SchedulerSpec(cfg.scheduler), backend,
                               os.path.join(out_dir, "snapshots"))
    write_snapshot_report_csv(report, os.path.join(out_dir, "snapshot_report.csv"))
    return report.cumulative_ratio


def cmd_snapshots(args) -> int:
    cfg = _load_with_overrides(args)
    os.makedirs(cfg.output_dir, exist_ok=True)
    ratios = _run_replications(_replication_configs(cfg), _snapshot_replication, args.jobs)
    summary = _ratio_summary("snapshots", ratios)
    _write_summary(cfg.output_dir, summary)
    print(f"snapshots: {len(ratios)} replication(s), "
          f"mean cumulative ratio {summary['mean_cumulative_ratio']:.4f}")
    return EXIT_OK


def _bench_replication(pair) -> dict:
    from .config import make_backend
    from .scenario import gen_channel_trace, gen_traffic_trace
    from .simloop import (
        OPTIMAL,
        SchedulerSpec,
        run_in_loop,
        timing_report,
        write_metrics_csv,
        write_timing_csv,
    )
    from .solvers import IN_PROCESS, SolverBackend

    cfg, out_dir = pair
    os.makedirs(out_dir, exist_ok=True)
    channel = gen_channel_trace(cfg.scenario)
    traffic = gen_traffic_trace(cfg.scenario)

    methods = [("in-process", SolverBackend(kind=IN_PROCESS, timeout_s=cfg.backend_timeout))]
    if cfg.backend_kind != IN_PROCESS:
        methods.append(
            ("external", make_backend(cfg, os.path.join(out_dir, "solver_files"))))

    tagged = []
    objectives = {}
    for method, backend in methods:
        metrics = run_in_loop(cfg.scenario, SchedulerSpec(OPTIMAL, backend), channel, traffic)
        write_metrics_csv(metrics, os.path.join(out_dir, f"metrics_{method.replace('-', '')}.csv"))
        tagged.append((method, metrics))
        objectives[method] = metrics.cum_objective[-1]
    rows = timing_report(tagged)
    write_timing_csv(rows, os.path.join(out_dir, "timing_report.csv"))

    result = {"objectives": objectives}
    for method, phase, mean_us, total_us, count in rows:
        result[f"{method}/{phase}"] = {"mean_us": mean_us, "total_us": total_us, "count": count}
    return result


def cmd_bench(args) -> int:
    cfg = _load_with_overrides(args)
    os.makedirs(cfg.output_dir, exist_ok=True)
    results = _run_replications(_replication_configs(cfg), _bench_replication, args.jobs)
    _write_summary(cfg.output_dir, {"command": "bench", "replications": results})
    for rep, result in enumerate(results):
        for method in sorted(result["objectives"]):
            overhead = sum(result[f"{method}/{phase}"]["mean_us"]
                           for phase in ("creation", "reading"))
            print(f"bench rep{rep} {method}: cumulative objective "
                  f"{result['objectives'][method]}, "
                  f"mean creation+reading {overhead:.1f} us, "
                  f"mean solving {result[f'{method}/solving']['mean_us']:.1f} us")
    return EXIT_OK


def cmd_solve(args) -> int:
    from .bnb import solve_bb
    from .mbs import parse_lp
    from .solvers import allocation_to_solution
    from .solxml import solution_to_xml

    with open(args.lp) as handle:
        text = handle.read()
    inst = parse_lp(text)
    result = solve_bb(inst)
    sol = allocation_to_solution(inst, result.allocation, result.objective, result.status)
    xml = solution_to_xml(sol, f"mbs_t{inst.tti}")
    with open(args.out, "w") as handle:
        handle.write(xml)
    if result.status != "optimal":
        print(f"solve stopped at status {result.status}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK
