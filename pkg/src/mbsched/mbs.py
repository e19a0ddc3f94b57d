"""The multiband scheduling problem (MBS) and everything that solves it.

An instance is a frozen per-TTI snapshot: a K x N rate table (bits each band
can carry for each user this TTI) plus per-user backlogs. A decision assigns
each band to at most one user; user u is then served
min(q_u, sum of rates over its bands) bits. The objective is total served
bits. With finite backlogs the per-band argmax is no longer optimal, which is
what makes heuristic-vs-exact comparisons here non-trivial.

This module holds the instance and allocation types, the ILP encoding and its
inverse, the heuristic schedulers, and an exhaustive oracle used to validate
the exact solver.
"""

import itertools
import json
import re
from dataclasses import dataclass

from .errors import ConfigError, ContractViolation, InstanceTooLarge, LpParseError, SolverFailure
from .lpformat import STATUS_OPTIMAL, LpConstraint, LpProblem, LpSolution, parse_problem
from .scenario import UNBOUNDED, ChannelTrace, ScenarioConfig, SystemState, cqi_to_rate

BRUTE_FORCE_LIMIT = 10 ** 7

PF_EPSILON = 1e-6
BINARY_TOLERANCE = 1e-6
OBJECTIVE_TOLERANCE = 1e-6


@dataclass
class SnapshotInstance:
    """All scheduler-relevant state at one TTI, usable standalone."""

    tti: int
    rates: list[list[int]]   # [user][band]
    backlog: list[int | float]

    def __post_init__(self):
        if self.tti < 0:
            raise ValueError(f"negative tti {self.tti}")
        if not self.rates or not self.rates[0]:
            raise ValueError("rates table must be K x N with K, N >= 1")
        width = len(self.rates[0])
        for row in self.rates:
            if len(row) != width:
                raise ValueError("rates table is ragged")
            for r in row:
                if not isinstance(r, int) or r < 0:
                    raise ValueError(f"rate {r!r} is not a non-negative integer")
        if len(self.backlog) != len(self.rates):
            raise ValueError("backlog length does not match the rate table")
        for q in self.backlog:
            if q == UNBOUNDED:
                continue
            if not isinstance(q, int) or q < 0:
                raise ValueError(f"backlog {q!r} is not a non-negative integer or unbounded")

    @property
    def num_users(self) -> int:
        return len(self.rates)

    @property
    def num_bands(self) -> int:
        return len(self.rates[0])


@dataclass
class Allocation:
    """One scheduling decision: band -> user (None = idle) plus served bits."""

    assignment: list[int | None]
    served: list[int]

    @property
    def objective(self) -> int:
        return sum(self.served)


def served_for_assignment(inst: SnapshotInstance, assignment: list[int | None]) -> list[int]:
    """Served bits implied by an assignment: per-user sum of rates, queue-capped."""
    gross = [0] * inst.num_users
    for b, u in enumerate(assignment):
        if u is not None:
            gross[u] += inst.rates[u][b]
    served = []
    for u, q in enumerate(inst.backlog):
        served.append(gross[u] if q == UNBOUNDED else min(q, gross[u]))
    return served


def build_snapshot(state: SystemState, channel: ChannelTrace, config: ScenarioConfig) -> SnapshotInstance:
    """Step 1 of a scheduling call: read rates and queues out of the system."""
    if not 0 <= state.tti < len(channel.cqi):
        raise ValueError(f"tti {state.tti} outside channel trace of length {len(channel.cqi)}")
    cqi_now = channel.cqi[state.tti]
    rates = [[cqi_to_rate(cqi_now[u][b], config) for b in range(config.num_bands)]
             for u in range(config.num_users)]
    return SnapshotInstance(tti=state.tti, rates=rates, backlog=list(state.backlog))


def objective_of(inst: SnapshotInstance, alloc: Allocation) -> int:
    """Total served bits; re-derives served from the assignment as a check."""
    if len(alloc.assignment) != inst.num_bands or len(alloc.served) != inst.num_users:
        raise ContractViolation("allocation dimensions do not match the instance")
    expected = served_for_assignment(inst, alloc.assignment)
    if expected != alloc.served:
        raise ContractViolation(
            f"served vector {alloc.served} inconsistent with assignment (expected {expected})")
    return sum(expected)


# --- heuristic schedulers ---------------------------------------------------

def schedule_maxci(inst: SnapshotInstance) -> Allocation:
    """Per band, pick the backlogged user with the highest rate (max-C/I)."""
    assignment: list[int | None] = [None] * inst.num_bands
    for b in range(inst.num_bands):
        best_u = None
        best_r = 0
        for u in range(inst.num_users):
            if inst.backlog[u] <= 0:
                continue
            r = inst.rates[u][b]
            if r > best_r:
                best_u, best_r = u, r
        assignment[b] = best_u
    return Allocation(assignment, served_for_assignment(inst, assignment))


def schedule_greedy_backlog(inst: SnapshotInstance) -> Allocation:
    """Best-band-first greedy on marginal served bits.

    Bands are visited in descending max-rate order; each goes to the user
    with the largest min(residual backlog, rate). Unlike max-C/I this stops
    piling bands onto a user whose queue is already covered.
    """
    k_n, n_n = inst.num_users, inst.num_bands
    band_order = sorted(range(n_n), key=lambda b: (-max(inst.rates[u][b] for u in range(k_n)), b))
    residual = list(inst.backlog)
    assignment: list[int | None] = [None] * n_n
    for b in band_order:
        best_u = None
        best_m = 0
        for u in range(k_n):
            m = min(residual[u], inst.rates[u][b])
            if m > best_m:
                best_u, best_m = u, m
        if best_u is None:
            continue
        assignment[b] = best_u
        residual[best_u] -= best_m
    return Allocation(assignment, served_for_assignment(inst, assignment))


def schedule_pf(inst: SnapshotInstance, avg_throughput: list[float]) -> Allocation:
    """Proportional fair: per band, argmax of rate / EWMA throughput."""
    if len(avg_throughput) != inst.num_users:
        raise ValueError("avg_throughput length does not match the instance")
    for a in avg_throughput:
        if a < 0:
            raise ValueError(f"negative avg_throughput {a}")
    assignment: list[int | None] = [None] * inst.num_bands
    for b in range(inst.num_bands):
        best_u = None
        best_metric = 0.0
        for u in range(inst.num_users):
            if inst.backlog[u] <= 0:
                continue
            r = inst.rates[u][b]
            if r == 0:
                continue
            metric = r / max(avg_throughput[u], PF_EPSILON)
            if metric > best_metric:
                best_u, best_metric = u, metric
        assignment[b] = best_u
    return Allocation(assignment, served_for_assignment(inst, assignment))


# --- exhaustive oracle -------------------------------------------------------

def brute_force_optimal(inst: SnapshotInstance) -> tuple[Allocation, int]:
    """Enumerate every band->user assignment; exact integer arithmetic.

    Ties go to the lexicographically smallest assignment vector with
    idle < user 0 < user 1 < ... ; enumeration order makes that the first
    maximizer found.
    """
    k_n, n_n = inst.num_users, inst.num_bands
    if (k_n + 1) ** n_n > BRUTE_FORCE_LIMIT:
        raise InstanceTooLarge(
            f"(K+1)^N = {(k_n + 1) ** n_n} assignments exceed the brute-force guard")
    rates = inst.rates
    backlog = inst.backlog
    best_combo = None
    best_value = -1
    for combo in itertools.product(range(-1, k_n), repeat=n_n):
        gross = [0] * k_n
        for b in range(n_n):
            u = combo[b]
            if u >= 0:
                gross[u] += rates[u][b]
        value = 0
        for u in range(k_n):
            q = backlog[u]
            value += gross[u] if q == UNBOUNDED else min(q, gross[u])
        if value > best_value:
            best_combo, best_value = combo, value
    assignment = [u if u >= 0 else None for u in best_combo]
    return Allocation(assignment, served_for_assignment(inst, assignment)), best_value


# --- ILP encoding and decoding ----------------------------------------------

def x_var(u: int, b: int) -> str:
    return f"x_{u}_{b}"


def s_var(u: int) -> str:
    return f"s_{u}"


def variable_order(num_users: int, num_bands: int) -> list[str]:
    """Canonical order: every x_u_b user-major, then s_0 .. s_{K-1}."""
    order = [x_var(u, b) for u in range(num_users) for b in range(num_bands)]
    order.extend(s_var(u) for u in range(num_users))
    return order


def build_ilp(inst: SnapshotInstance) -> LpProblem:
    """Encode the instance as a MILP.

    maximize sum_u s_u subject to, per band, at most one x_u_b set, and per
    user s_u <= sum_b r_ub x_ub (cap) and s_u <= q_u (queue, finite q only).
    Zero-rate terms are kept so the cap rows always carry the full K x N grid.
    """
    k_n, n_n = inst.num_users, inst.num_bands
    constraints = []
    for b in range(n_n):
        constraints.append(LpConstraint(
            f"band_{b}", [(1, x_var(u, b)) for u in range(k_n)], "<=", 1))
    for u in range(k_n):
        terms = [(1, s_var(u))]
        terms.extend((-inst.rates[u][b], x_var(u, b)) for b in range(n_n))
        constraints.append(LpConstraint(f"cap_{u}", terms, "<=", 0))
    for u in range(k_n):
        if inst.backlog[u] != UNBOUNDED:
            constraints.append(LpConstraint(f"queue_{u}", [(1, s_var(u))], "<=", inst.backlog[u]))
    return LpProblem(
        name=f"mbs_t{inst.tti}",
        objective=[(1, s_var(u)) for u in range(k_n)],
        constraints=constraints,
        bounds={s_var(u): (0, None) for u in range(k_n)},
        binaries=[x_var(u, b) for u in range(k_n) for b in range(n_n)],
    )


_X_RE = re.compile(r"x_(\d+)_(\d+)\Z")
_PROBLEM_RE = re.compile(r"mbs_t(\d+)\Z")


def parse_lp(text: str) -> SnapshotInstance:
    """Inverse of write_lp(build_ilp(inst)) for MBS-shaped problems."""
    problem = parse_problem(text)
    m = _PROBLEM_RE.match(problem.name)
    if not m:
        raise LpParseError(f"problem name {problem.name!r} is not of the form mbs_t<tti>")
    tti = int(m.group(1))

    coords = []
    for var in problem.binaries:
        vm = _X_RE.match(var)
        if not vm:
            raise LpParseError(f"binary {var!r} is not an assignment variable x_<u>_<b>")
        coords.append((int(vm.group(1)), int(vm.group(2))))
    if not coords:
        raise LpParseError("no assignment variables declared")
    k_n = max(u for u, _ in coords) + 1
    n_n = max(b for _, b in coords) + 1
    if problem.binaries != [x_var(u, b) for u in range(k_n) for b in range(n_n)]:
        raise LpParseError("assignment variables do not form the canonical K x N grid")
    if problem.objective != [(1, s_var(u)) for u in range(k_n)]:
        raise LpParseError("objective is not the canonical sum of served-bits variables")

    by_name = {con.name: con for con in problem.constraints}
    expected_names = [f"band_{b}" for b in range(n_n)]
    expected_names += [f"cap_{u}" for u in range(k_n)]
    expected_names += sorted((n for n in by_name if n.startswith("queue_")),
                             key=lambda n: int(n.split("_")[1]))
    if [con.name for con in problem.constraints] != expected_names:
        raise LpParseError("constraints are not in canonical band/cap/queue order")

    for b in range(n_n):
        con = by_name[f"band_{b}"]
        if (con.terms != [(1, x_var(u, b)) for u in range(k_n)]
                or con.relation != "<=" or con.rhs != 1):
            raise LpParseError(f"constraint band_{b} is not a canonical band row")

    rates = []
    for u in range(k_n):
        con = by_name[f"cap_{u}"]
        expected_vars = [s_var(u)] + [x_var(u, b) for b in range(n_n)]
        if (len(con.terms) != n_n + 1
                or [v for _, v in con.terms] != expected_vars
                or con.terms[0][0] != 1 or con.relation != "<=" or con.rhs != 0):
            raise LpParseError(f"constraint cap_{u} is not a canonical cap row")
        row = []
        for coeff, _ in con.terms[1:]:
            rate = -coeff
            if not isinstance(rate, int) or rate < 0:
                raise LpParseError(f"cap_{u}: rate coefficient {coeff!r} is not a non-positive integer")
            row.append(rate)
        rates.append(row)

    backlog: list[int | float] = [UNBOUNDED] * k_n
    for name, con in by_name.items():
        if not name.startswith("queue_"):
            continue
        u = int(name.split("_")[1])
        if u >= k_n:
            raise LpParseError(f"{name}: no such user")
        if con.terms != [(1, s_var(u))] or con.relation != "<=":
            raise LpParseError(f"{name} is not a canonical queue row")
        if not isinstance(con.rhs, int) or con.rhs < 0:
            raise LpParseError(f"{name}: backlog {con.rhs!r} is not a non-negative integer")
        backlog[u] = con.rhs

    if problem.bounds != {s_var(u): (0, None) for u in range(k_n)}:
        raise LpParseError("bounds are not the canonical '0 <= s_u' entries")
    return SnapshotInstance(tti=tti, rates=rates, backlog=backlog)


def decode_solution(inst: SnapshotInstance, sol: LpSolution) -> Allocation:
    """Step 4 of a scheduling call: turn solver output into an allocation.

    Assignment is read from the x variables only; served bits are always
    recomputed from the assignment, so solver numeric noise in the s values
    cannot leak into the system trajectory.
    """
    if sol.status != STATUS_OPTIMAL:
        raise SolverFailure(f"cannot enforce a solution with status {sol.status!r}")
    assignment: list[int | None] = [None] * inst.num_bands
    for u in range(inst.num_users):
        for b in range(inst.num_bands):
            name = x_var(u, b)
            if name not in sol.values:
                raise ContractViolation(f"solution lacks a value for {name}")
            value = sol.values[name]
            if abs(value) <= BINARY_TOLERANCE:
                continue
            if abs(value - 1) > BINARY_TOLERANCE:
                raise ContractViolation(f"{name} = {value!r} is not binary")
            if assignment[b] is not None:
                raise ContractViolation(
                    f"band {b} assigned to both user {assignment[b]} and user {u}")
            assignment[b] = u
    served = served_for_assignment(inst, assignment)
    if sol.objective is None or abs(sum(served) - sol.objective) > OBJECTIVE_TOLERANCE:
        raise ContractViolation(
            f"solver objective {sol.objective!r} does not match recomputed {sum(served)}")
    return Allocation(assignment, served)


# --- snapshot files ----------------------------------------------------------

def snapshot_filename(tti: int) -> str:
    return f"snap_{tti}.json"


def write_snapshot(inst: SnapshotInstance, path: str) -> None:
    payload = {
        "tti": inst.tti,
        "rates": inst.rates,
        "backlog": ["inf" if q == UNBOUNDED else q for q in inst.backlog],
    }
    with open(path, "w") as handle:
        json.dump(payload, handle)
        handle.write("\n")


def read_snapshot(path: str) -> SnapshotInstance:
    try:
        with open(path) as handle:
            payload = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot open snapshot {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"snapshot {path} is not valid JSON: {exc}") from exc
    try:
        tti = payload["tti"]
        rates = payload["rates"]
        raw_backlog = payload["backlog"]
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"snapshot {path} lacks field {exc}") from exc
    if not isinstance(raw_backlog, list):
        raise ConfigError(f"snapshot {path}: backlog is not a list")
    backlog = [UNBOUNDED if q == "inf" else q for q in raw_backlog]
    try:
        return SnapshotInstance(tti=tti, rates=rates, backlog=backlog)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"snapshot {path} is malformed: {exc}") from exc
