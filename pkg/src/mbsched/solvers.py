"""Solver backends: in-process exact solve, or an external process per call.

The external pathway is the file-exchange protocol: write the problem as an
LP file, run a command with {lp} and {sol} substituted, read the solution
back from an XML file. Any solver speaking that pair of formats fits the
command template; the default is this package invoking itself (the `solve`
subcommand), which keeps the pathway fully exercised without a third-party
solver. Both backends report the same three per-call phases: creation
(writing the problem), solving (computing), reading (getting the answer back).
"""

import os
import shlex
import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass

from .bnb import solve_bb
from .errors import ConfigError, SolverFailure, SolverTimeout
from .lpformat import LpProblem, LpSolution, write_lp
from .mbs import SnapshotInstance, s_var, x_var
from .solxml import parse_solution_xml
from .timing import PhaseTimings, now_us

IN_PROCESS = "in-process"
EXTERNAL = "external"

LP_FILENAME = "problem.lp"
SOL_FILENAME = "solution.sol"


@dataclass(frozen=True)
class SolverBackend:
    kind: str
    command_template: str = ""
    workdir: str = ""
    timeout_s: float | None = None
    keep_files: bool = False

    def validate(self) -> None:
        if self.kind not in (IN_PROCESS, EXTERNAL):
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.timeout_s is not None and self.timeout_s <= 0:
            raise ConfigError("backend timeout must be positive")
        if self.kind == EXTERNAL:
            if "{lp}" not in self.command_template or "{sol}" not in self.command_template:
                raise ConfigError(
                    "external command template must contain both {lp} and {sol} placeholders")
            if not self.workdir:
                raise ConfigError("external backend needs a workdir")


def self_exec_template() -> str:
    """Command template that runs this package as its own external solver."""
    return shlex.quote(sys.executable) + " -m mbsched solve --lp {lp} --out {sol}"


def self_exec_backend(workdir: str, timeout_s: float | None = None,
                      keep_files: bool = False) -> SolverBackend:
    return SolverBackend(kind=EXTERNAL, command_template=self_exec_template(),
                         workdir=workdir, timeout_s=timeout_s, keep_files=keep_files)


def allocation_to_solution(inst: SnapshotInstance, allocation, objective: int,
                           status: str) -> LpSolution:
    """Package an allocation as the full variable-value map of the MILP."""
    values: dict[str, int | float] = {}
    for u in range(inst.num_users):
        for b in range(inst.num_bands):
            values[x_var(u, b)] = 1 if allocation.assignment[b] == u else 0
    for u in range(inst.num_users):
        values[s_var(u)] = allocation.served[u]
    return LpSolution(status=status, objective=objective, values=values)


def solve_inprocess(inst: SnapshotInstance, max_nodes: int | None = None,
                    timeout_s: float | None = None) -> tuple[LpSolution, PhaseTimings]:
    """Exact solve in this process; no files, no child process."""
    start = now_us()
    # creation: the solver works on its own copy of the instance data
    work = SnapshotInstance(inst.tti, [row[:] for row in inst.rates], list(inst.backlog))
    t_created = now_us()
    result = solve_bb(work, max_nodes=max_nodes, timeout_s=timeout_s)
    t_solved = now_us()
    sol = allocation_to_solution(inst, result.allocation, result.objective, result.status)
    t_read = now_us()
    timings = PhaseTimings(
        creation_us=t_created - start,
        solving_us=t_solved - t_created,
        reading_us=t_read - t_solved,
        total_us=now_us() - start,
    )
    timings.validate()
    return sol, timings


def solve_external(problem: LpProblem, backend: SolverBackend) -> tuple[LpSolution, PhaseTimings]:
    """One file-exchange round trip with the external solver command."""
    backend.validate()
    if backend.kind != EXTERNAL:
        raise ConfigError("solve_external needs an external backend")
    os.makedirs(backend.workdir, exist_ok=True)
    # unique directory per call so concurrent solves never share files; the
    # child runs inside it, so substituted paths must stay valid from there
    calldir = os.path.abspath(tempfile.mkdtemp(prefix=f"{problem.name}_", dir=backend.workdir))
    try:
        start = now_us()
        lp_path = os.path.join(calldir, LP_FILENAME)
        sol_path = os.path.join(calldir, SOL_FILENAME)
        with open(lp_path, "w") as handle:
            handle.write(write_lp(problem))
        t_created = now_us()

        argv = [token.replace("{lp}", lp_path).replace("{sol}", sol_path)
                for token in shlex.split(backend.command_template)]
        try:
            proc = subprocess.run(argv, cwd=calldir, capture_output=True, text=True,
                                  timeout=backend.timeout_s)
        except subprocess.TimeoutExpired:
            raise SolverTimeout(
                f"external solver exceeded {backend.timeout_s} s") from None
        except OSError as exc:
            raise SolverFailure(f"cannot run external solver {argv[0]!r}: {exc}") from exc
        t_solved = now_us()
        if proc.returncode != 0:
            detail = proc.stderr.strip() or proc.stdout.strip() or "no output"
            raise SolverFailure(f"external solver exited with {proc.returncode}: {detail}")

        try:
            with open(sol_path) as handle:
                sol_text = handle.read()
        except OSError as exc:
            raise SolverFailure(f"external solver wrote no solution file: {exc}") from exc
        sol = parse_solution_xml(sol_text)
        t_read = now_us()
        timings = PhaseTimings(
            creation_us=t_created - start,
            solving_us=t_solved - t_created,
            reading_us=t_read - t_solved,
            total_us=now_us() - start,
        )
        timings.validate()
        return sol, timings
    finally:
        if not backend.keep_files:
            shutil.rmtree(calldir, ignore_errors=True)


def run_backend(inst: SnapshotInstance, problem: LpProblem,
                backend: SolverBackend) -> tuple[LpSolution, PhaseTimings]:
    """Dispatch one solve through the configured pathway."""
    if backend.kind == IN_PROCESS:
        return solve_inprocess(inst, timeout_s=backend.timeout_s)
    return solve_external(problem, backend)
