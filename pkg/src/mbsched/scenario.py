"""Simulated system state: channel quality, traffic arrivals, and queues.

CQI is an integer 0..15 per (tti, user, band); a monotone rate table maps it
to the bits one band can deliver in one TTI. Backlogs are exact integer bit
counts; ``UNBOUNDED`` (math.inf) marks a full-buffer queue that absorbs
arrivals and service without ever changing.

Randomness is drawn from per-component streams derived by hashing
(seed, component tag), so two runs that share a seed see identical channel
and traffic randomness no matter what the schedulers do in between.
"""

import csv
import hashlib
import math
import random
from dataclasses import dataclass, field

from .errors import ConfigError, ContractViolation, TraceFileError

UNBOUNDED = math.inf

CQI_MIN = 0
CQI_MAX = 15

DEFAULT_RATE_TABLE = tuple(100 * cqi for cqi in range(CQI_MAX + 1))

CQI_MODELS = ("iid-uniform", "bounded-random-walk", "trace-file")
TRAFFIC_MODELS = ("constant-bits-per-tti", "bernoulli-burst", "trace-file")


@dataclass(frozen=True)
class CqiModel:
    kind: str = "bounded-random-walk"
    step: int = 1          # bounded-random-walk only
    path: str | None = None  # trace-file only


@dataclass(frozen=True)
class TrafficModel:
    kind: str = "constant-bits-per-tti"
    bits: int = 0          # burst/constant size
    prob: float = 1.0      # bernoulli-burst only
    path: str | None = None  # trace-file only


@dataclass
class ScenarioConfig:
    num_users: int
    num_bands: int
    num_ttis: int
    cqi: CqiModel = field(default_factory=CqiModel)
    traffic: TrafficModel = field(default_factory=TrafficModel)
    initial_backlog: int | float = 0
    rate_table: tuple[int, ...] = DEFAULT_RATE_TABLE
    seed: int = 0
    pf_alpha: float = 0.05

    def validate(self) -> None:
        if self.num_users < 1 or self.num_bands < 1 or self.num_ttis < 1:
            raise ConfigError("num_users, num_bands and num_ttis must all be >= 1")
        if len(self.rate_table) != CQI_MAX + 1:
            raise ConfigError(f"rate_table must have {CQI_MAX + 1} entries, got {len(self.rate_table)}")
        if self.rate_table[0] != 0:
            raise ConfigError("rate_table[0] must be 0")
        for rate in self.rate_table:
            if not isinstance(rate, int) or rate < 0:
                raise ConfigError(f"rate_table entry {rate!r} is not a non-negative integer")
        for lo, hi in zip(self.rate_table, self.rate_table[1:]):
            if hi < lo:
                raise ConfigError("rate_table must be non-decreasing in CQI")
        if self.cqi.kind not in CQI_MODELS:
            raise ConfigError(f"unknown CQI model {self.cqi.kind!r}")
        if self.cqi.kind == "bounded-random-walk" and self.cqi.step < 0:
            raise ConfigError("random-walk step must be >= 0")
        if self.cqi.kind == "trace-file" and not self.cqi.path:
            raise ConfigError("CQI trace-file model needs a path")
        if self.traffic.kind not in TRAFFIC_MODELS:
            raise ConfigError(f"unknown traffic model {self.traffic.kind!r}")
        if self.traffic.kind == "trace-file" and not self.traffic.path:
            raise ConfigError("traffic trace-file model needs a path")
        if self.traffic.bits < 0:
            raise ConfigError("traffic bits must be >= 0")
        if not 0.0 <= self.traffic.prob <= 1.0:
            raise ConfigError("burst probability must lie in [0, 1]")
        if self.initial_backlog != UNBOUNDED and (
                not isinstance(self.initial_backlog, int) or self.initial_backlog < 0):
            raise ConfigError("initial_backlog must be a non-negative integer or unbounded")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        if not 0.0 < self.pf_alpha <= 1.0:
            raise ConfigError("pf_alpha must lie in (0, 1]")


@dataclass
class ChannelTrace:
    cqi: list[list[list[int]]]  # [tti][user][band]


@dataclass
class TrafficTrace:
    arrivals: list[list[int]]  # [tti][user]


@dataclass
class SystemState:
    tti: int
    backlog: list[int | float]
    cumulative_served: list[int]
    avg_throughput: list[float]


def _stream_rng(seed: int, tag: str, index: int = 0) -> random.Random:
    # Independent stream per component: identical across runs for a given seed,
    # unaffected by draws made on any other component's stream.
    digest = hashlib.sha256(f"{seed}/{tag}/{index}".encode()).digest()
    return random.Random(int.from_bytes(digest, "big"))


def initial_state(config: ScenarioConfig) -> SystemState:
    k = config.num_users
    # Optimistic EWMA start so PF does not divide by a near-zero average early on.
    top_rate = float(config.rate_table[CQI_MAX])
    return SystemState(
        tti=0,
        backlog=[config.initial_backlog] * k,
        cumulative_served=[0] * k,
        avg_throughput=[top_rate] * k,
    )


def gen_channel_trace(config: ScenarioConfig) -> ChannelTrace:
    """Generate the T x K x N CQI table; pure function of (config, seed)."""
    config.validate()
    t_n, k_n, n_n = config.num_ttis, config.num_users, config.num_bands
    model = config.cqi
    if model.kind == "trace-file":
        return ChannelTrace(_load_channel_csv(model.path, t_n, k_n, n_n))
    rng = _stream_rng(config.seed, "channel")
    if model.kind == "iid-uniform":
        cqi = [[[rng.randint(CQI_MIN, CQI_MAX) for _ in range(n_n)]
                for _ in range(k_n)] for _ in range(t_n)]
        return ChannelTrace(cqi)
    # bounded random walk, clamped to the CQI range
    step = model.step
    current = [[rng.randint(CQI_MIN, CQI_MAX) for _ in range(n_n)] for _ in range(k_n)]
    cqi = [[row[:] for row in current]]
    for _ in range(1, t_n):
        for u in range(k_n):
            for b in range(n_n):
                delta = rng.randint(-step, step)
                current[u][b] = min(CQI_MAX, max(CQI_MIN, current[u][b] + delta))
        cqi.append([row[:] for row in current])
    return ChannelTrace(cqi)


def gen_traffic_trace(config: ScenarioConfig) -> TrafficTrace:
    """Generate the T x K arrivals table; pure function of (config, seed)."""
    config.validate()
    t_n, k_n = config.num_ttis, config.num_users
    model = config.traffic
    if model.kind == "trace-file":
        return TrafficTrace(_load_traffic_csv(model.path, t_n, k_n))
    if model.kind == "constant-bits-per-tti":
        return TrafficTrace([[model.bits] * k_n for _ in range(t_n)])
    rng = _stream_rng(config.seed, "traffic")
    arrivals = [[model.bits if rng.random() < model.prob else 0 for _ in range(k_n)]
                for _ in range(t_n)]
    return TrafficTrace(arrivals)


def cqi_to_rate(cqi: int, config: ScenarioConfig) -> int:
    """Bits one band delivers in one TTI at the given channel quality."""
    if not CQI_MIN <= cqi <= CQI_MAX:
        raise ConfigError(f"CQI {cqi} outside {CQI_MIN}..{CQI_MAX}")
    return config.rate_table[cqi]


def apply_arrivals(state: SystemState, traffic: TrafficTrace, tti: int) -> SystemState:
    """Add this TTI's arrivals to every finite queue; unbounded queues absorb."""
    if not 0 <= tti < len(traffic.arrivals):
        raise ValueError(f"tti {tti} outside traffic trace of length {len(traffic.arrivals)}")
    if state.tti != tti:
        raise ContractViolation(f"state is at tti {state.tti}, arrivals requested for {tti}")
    row = traffic.arrivals[tti]
    return SystemState(
        tti=state.tti,
        backlog=[q + a for q, a in zip(state.backlog, row)],
        cumulative_served=list(state.cumulative_served),
        avg_throughput=list(state.avg_throughput),
    )


def apply_service(state: SystemState, alloc, pf_alpha: float) -> SystemState:
    """Drain served bits from the queues and advance the TTI.

    Also updates the per-user EWMA throughput used by the proportional-fair
    scheduler: avg <- (1 - alpha) * avg + alpha * served.
    """
    served = alloc.served
    for u, (q, s) in enumerate(zip(state.backlog, served)):
        if q != UNBOUNDED and s > q:
            raise ContractViolation(f"user {u}: served {s} exceeds backlog {q}")
        if s < 0:
            raise ContractViolation(f"user {u}: negative served {s}")
    return SystemState(
        tti=state.tti + 1,
        backlog=[q - s for q, s in zip(state.backlog, served)],
        cumulative_served=[c + s for c, s in zip(state.cumulative_served, served)],
        avg_throughput=[(1.0 - pf_alpha) * a + pf_alpha * s
                        for a, s in zip(state.avg_throughput, served)],
    )


def _read_csv_rows(path: str, expected_header: list[str]):
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise TraceFileError(f"cannot open trace file {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFileError(f"{path}: empty trace file") from None
        if [h.strip() for h in header] != expected_header:
            raise TraceFileError(
                f"{path}: expected header {','.join(expected_header)!r}, got {','.join(header)!r}")
        return list(reader)


def _int_cell(path: str, lineno: int, column: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise TraceFileError(f"{path}, line {lineno}: column {column!r} is not an integer: {raw!r}") from None


def _load_channel_csv(path: str, t_n: int, k_n: int, n_n: int) -> list[list[list[int]]]:
    rows = _read_csv_rows(path, ["tti", "user", "band", "cqi"])
    cqi = [[[None] * n_n for _ in range(k_n)] for _ in range(t_n)]
    for i, row in enumerate(rows):
        lineno = i + 2  # header is line 1
        if len(row) != 4:
            raise TraceFileError(f"{path}, line {lineno}: expected 4 columns, got {len(row)}")
        t = _int_cell(path, lineno, "tti", row[0])
        u = _int_cell(path, lineno, "user", row[1])
        b = _int_cell(path, lineno, "band", row[2])
        v = _int_cell(path, lineno, "cqi", row[3])
        if not 0 <= t < t_n:
            raise TraceFileError(f"{path}, line {lineno}: tti {t} outside 0..{t_n - 1}")
        if not 0 <= u < k_n:
            raise TraceFileError(f"{path}, line {lineno}: user {u} outside 0..{k_n - 1}")
        if not 0 <= b < n_n:
            raise TraceFileError(f"{path}, line {lineno}: band {b} outside 0..{n_n - 1}")
        if not CQI_MIN <= v <= CQI_MAX:
            raise TraceFileError(f"{path}, line {lineno}: cqi {v} outside {CQI_MIN}..{CQI_MAX}")
        if cqi[t][u][b] is not None:
            raise TraceFileError(f"{path}, line {lineno}: duplicate entry for (tti={t}, user={u}, band={b})")
        cqi[t][u][b] = v
    for t in range(t_n):
        for u in range(k_n):
            for b in range(n_n):
                if cqi[t][u][b] is None:
                    raise TraceFileError(f"{path}: missing entry for (tti={t}, user={u}, band={b})")
    return cqi


def _load_traffic_csv(path: str, t_n: int, k_n: int) -> list[list[int]]:
    rows = _read_csv_rows(path, ["tti", "user", "bits"])
    arrivals = [[None] * k_n for _ in range(t_n)]
    for i, row in enumerate(rows):
        lineno = i + 2
        if len(row) != 3:
            raise TraceFileError(f"{path}, line {lineno}: expected 3 columns, got {len(row)}")
        t = _int_cell(path, lineno, "tti", row[0])
        u = _int_cell(path, lineno, "user", row[1])
        bits = _int_cell(path, lineno, "bits", row[2])
        if not 0 <= t < t_n:
            raise TraceFileError(f"{path}, line {lineno}: tti {t} outside 0..{t_n - 1}")
        if not 0 <= u < k_n:
            raise TraceFileError(f"{path}, line {lineno}: user {u} outside 0..{k_n - 1}")
        if bits < 0:
            raise TraceFileError(f"{path}, line {lineno}: negative bits {bits}")
        if arrivals[t][u] is not None:
            raise TraceFileError(f"{path}, line {lineno}: duplicate entry for (tti={t}, user={u})")
        arrivals[t][u] = bits
    for t in range(t_n):
        for u in range(k_n):
            if arrivals[t][u] is None:
                raise TraceFileError(f"{path}: missing entry for (tti={t}, user={u})")
    return arrivals
