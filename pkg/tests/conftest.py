"""Shared fixtures: the reference instance and seeded random-instance batches."""

import os
import random

import pytest

from mbsched.mbs import SnapshotInstance
from mbsched.scenario import UNBOUNDED, CqiModel, ScenarioConfig, TrafficModel

# K=2, N=2 instance where maxci (10), greedy (11) and the optimum (17) all
# differ; small enough for the exhaustive oracle to confirm every claim.
REFERENCE_RATES = [[10, 9], [8, 1]]
REFERENCE_BACKLOG = [10, 8]

# scenario wrapping: with this table and these traces, the t=0 snapshot of a
# zero-backlog system is exactly the reference instance
REFERENCE_RATE_TABLE = (0, 1, 8, 9, 10, 10, 10, 10, 10, 10, 10, 10, 10, 10, 10, 10)
REFERENCE_CHANNEL_CSV = "tti,user,band,cqi\n0,0,0,4\n0,0,1,3\n0,1,0,2\n0,1,1,1\n"
REFERENCE_TRAFFIC_CSV = "tti,user,bits\n0,0,10\n0,1,8\n"


def reference_scenario(dir_path) -> ScenarioConfig:
    """Single-TTI trace-file scenario reproducing the reference instance."""
    channel_path = os.path.join(str(dir_path), "channel.csv")
    traffic_path = os.path.join(str(dir_path), "traffic.csv")
    with open(channel_path, "w") as handle:
        handle.write(REFERENCE_CHANNEL_CSV)
    with open(traffic_path, "w") as handle:
        handle.write(REFERENCE_TRAFFIC_CSV)
    return ScenarioConfig(
        num_users=2, num_bands=2, num_ttis=1,
        cqi=CqiModel(kind="trace-file", path=channel_path),
        traffic=TrafficModel(kind="trace-file", path=traffic_path),
        rate_table=REFERENCE_RATE_TABLE,
    )


@pytest.fixture
def ref_instance() -> SnapshotInstance:
    return SnapshotInstance(tti=0, rates=[row[:] for row in REFERENCE_RATES],
                            backlog=list(REFERENCE_BACKLOG))


def random_instance(rng: random.Random, max_users: int = 4, max_bands: int = 5,
                    max_rate: int = 1500, unbounded_only: bool = False) -> SnapshotInstance:
    k = rng.randint(1, max_users)
    n = rng.randint(1, max_bands)
    rates = [[rng.randint(0, max_rate) for _ in range(n)] for _ in range(k)]
    if unbounded_only:
        backlog: list[int | float] = [UNBOUNDED] * k
    else:
        # mix of unbounded, tight and roomy queues so the coupling constraints bind
        backlog = []
        for _ in range(k):
            roll = rng.random()
            if roll < 0.25:
                backlog.append(UNBOUNDED)
            elif roll < 0.45:
                backlog.append(rng.randint(0, max(1, max_rate // 10)))
            else:
                backlog.append(rng.randint(0, 3 * max_rate))
    return SnapshotInstance(tti=rng.randint(0, 99), rates=rates, backlog=backlog)


@pytest.fixture
def instance_batch():
    """Factory for deterministic batches: identical (count, seed) = identical set."""
    def gen(count: int, seed: int, **kwargs) -> list[SnapshotInstance]:
        rng = random.Random(seed)
        return [random_instance(rng, **kwargs) for _ in range(count)]
    return gen
