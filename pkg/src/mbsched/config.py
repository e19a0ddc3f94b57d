"""Run configuration: a TOML file with scenario, run, and backend sections.

Unknown keys are rejected so typos fail loudly instead of silently running a
default. Trace-file paths are resolved relative to the config file itself;
the output directory is resolved relative to the working directory.
"""

import os
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ConfigError
from .scenario import UNBOUNDED, CqiModel, ScenarioConfig, TrafficModel
from .simloop import HEURISTIC_KINDS
from .solvers import EXTERNAL, IN_PROCESS, SolverBackend, self_exec_backend

SELF_EXEC = "self-exec"
BACKEND_KINDS = (IN_PROCESS, EXTERNAL, SELF_EXEC)

_MISSING = object()


@dataclass
class RunConfig:
    scenario: ScenarioConfig
    scheduler: str
    backend_kind: str
    backend_command: str
    backend_timeout: float | None
    backend_workdir: str
    output_dir: str
    keep_files: bool
    replications: int
    seed_stride: int


def _take(table: dict, key: str, where: str, kind: type, default=_MISSING):
    if key not in table:
        if default is _MISSING:
            raise ConfigError(f"{where}: missing required key {key!r}")
        return default
    value = table.pop(key)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (kind is not bool and isinstance(value, bool)):
        raise ConfigError(f"{where}: key {key!r} must be of type {kind.__name__}")
    return value


def _no_leftovers(table: dict, where: str) -> None:
    if table:
        raise ConfigError(f"{where}: unknown keys {sorted(table)}")


def _section(data: dict, name: str, where: str) -> dict:
    section = data.pop(name, {})
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: [{name}] must be a table")
    return dict(section)


def _resolve(path: str, base_dir: str) -> str:
    return path if os.path.isabs(path) else os.path.join(base_dir, path)


def _parse_cqi(table: dict, base_dir: str) -> CqiModel:
    where = "[scenario.cqi]"
    model = _take(table, "model", where, str, "bounded-random-walk")
    step = _take(table, "step", where, int, 1)
    path = _take(table, "path", where, str, None)
    _no_leftovers(table, where)
    if path is not None:
        path = _resolve(path, base_dir)
    return CqiModel(kind=model, step=step, path=path)


def _parse_traffic(table: dict, base_dir: str) -> TrafficModel:
    where = "[scenario.traffic]"
    model = _take(table, "model", where, str, "constant-bits-per-tti")
    bits = _take(table, "bits", where, int, 0)
    prob = _take(table, "prob", where, float, 1.0)
    path = _take(table, "path", where, str, None)
    _no_leftovers(table, where)
    if path is not None:
        path = _resolve(path, base_dir)
    return TrafficModel(kind=model, bits=bits, prob=prob, path=path)


def _parse_scenario(table: dict, base_dir: str) -> ScenarioConfig:
    where = "[scenario]"
    num_users = _take(table, "num_users", where, int)
    num_bands = _take(table, "num_bands", where, int)
    num_ttis = _take(table, "num_ttis", where, int)
    seed = _take(table, "seed", where, int, 0)
    pf_alpha = _take(table, "pf_alpha", where, float, 0.05)

    backlog_raw = table.pop("initial_backlog", 0)
    if backlog_raw == "unbounded":
        initial_backlog: int | float = UNBOUNDED
    elif isinstance(backlog_raw, int) and not isinstance(backlog_raw, bool):
        initial_backlog = backlog_raw
    else:
        raise ConfigError(f"{where}: initial_backlog must be an integer or \"unbounded\"")

    rate_table_raw = table.pop("rate_table", None)
    if rate_table_raw is None:
        rate_table = None
    else:
        if (not isinstance(rate_table_raw, list)
                or any(isinstance(r, bool) or not isinstance(r, int) for r in rate_table_raw)):
            raise ConfigError(f"{where}: rate_table must be a list of integers")
        rate_table = tuple(rate_table_raw)

    cqi = _parse_cqi(_section(table, "cqi", where), base_dir)
    traffic = _parse_traffic(_section(table, "traffic", where), base_dir)
    _no_leftovers(table, where)

    kwargs = dict(num_users=num_users, num_bands=num_bands, num_ttis=num_ttis,
                  cqi=cqi, traffic=traffic, initial_backlog=initial_backlog,
                  seed=seed, pf_alpha=pf_alpha)
    if rate_table is not None:
        kwargs["rate_table"] = rate_table
    config = ScenarioConfig(**kwargs)
    config.validate()
    return config


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as handle:
            raw = tomllib.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    base_dir = os.path.dirname(os.path.abspath(path))

    data = dict(raw)
    scenario_raw = data.pop("scenario", None)
    if not isinstance(scenario_raw, dict):
        raise ConfigError(f"{path}: missing [scenario] section")
    run_raw = _section(data, "run", path)
    backend_raw = _section(data, "backend", path)
    _no_leftovers(data, path)

    scenario = _parse_scenario(dict(scenario_raw), base_dir)

    where = "[run]"
    scheduler = _take(run_raw, "scheduler", where, str, "maxci")
    if scheduler not in HEURISTIC_KINDS:
        raise ConfigError(f"{where}: scheduler must be one of {', '.join(HEURISTIC_KINDS)}")
    replications = _take(run_raw, "replications", where, int, 1)
    if replications < 1:
        raise ConfigError(f"{where}: replications must be >= 1")
    seed_stride = _take(run_raw, "seed_stride", where, int, 1)
    output_dir = _take(run_raw, "output_dir", where, str, "out")
    keep_files = _take(run_raw, "keep_files", where, bool, False)
    _no_leftovers(run_raw, where)

    where = "[backend]"
    backend_kind = _take(backend_raw, "kind", where, str, IN_PROCESS)
    if backend_kind not in BACKEND_KINDS:
        raise ConfigError(f"{where}: kind must be one of {', '.join(BACKEND_KINDS)}")
    backend_command = _take(backend_raw, "command", where, str, "")
    backend_timeout = _take(backend_raw, "timeout", where, float, None)
    backend_workdir = _take(backend_raw, "workdir", where, str, "")
    _no_leftovers(backend_raw, where)
    if backend_timeout is not None and backend_timeout <= 0:
        raise ConfigError(f"{where}: timeout must be positive")
    if backend_kind == EXTERNAL:
        if "{lp}" not in backend_command or "{sol}" not in backend_command:
            raise ConfigError(
                f"{where}: an external command must contain the {{lp}} and {{sol}} placeholders")
    if backend_workdir:
        backend_workdir = _resolve(backend_workdir, base_dir)

    return RunConfig(
        scenario=scenario,
        scheduler=scheduler,
        backend_kind=backend_kind,
        backend_command=backend_command,
        backend_timeout=backend_timeout,
        backend_workdir=backend_workdir,
        output_dir=output_dir,
        keep_files=keep_files,
        replications=replications,
        seed_stride=seed_stride,
    )


def make_backend(cfg: RunConfig, default_workdir: str) -> SolverBackend:
    """Build the SolverBackend for one replication's working directory."""
    workdir = cfg.backend_workdir or default_workdir
    if cfg.backend_kind == IN_PROCESS:
        return SolverBackend(kind=IN_PROCESS, timeout_s=cfg.backend_timeout)
    if cfg.backend_kind == SELF_EXEC:
        return self_exec_backend(workdir, timeout_s=cfg.backend_timeout,
                                 keep_files=cfg.keep_files)
    return SolverBackend(kind=EXTERNAL, command_template=cfg.backend_command,
                         workdir=workdir, timeout_s=cfg.backend_timeout,
                         keep_files=cfg.keep_files)
