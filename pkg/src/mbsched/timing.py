"""Per-phase wall-clock accounting for one scheduling call.

All durations are integer microseconds from the monotonic clock. The three
named phases are sub-intervals of the call, so their sum never exceeds the
independently measured total.
"""

import time
from dataclasses import dataclass


def now_us() -> int:
    """Monotonic timestamp in integer microseconds."""
    return time.perf_counter_ns() // 1000


@dataclass
class PhaseTimings:
    creation_us: int = 0
    solving_us: int = 0
    reading_us: int = 0
    total_us: int = 0

    def validate(self) -> None:
        for label, value in (("creation", self.creation_us), ("solving", self.solving_us),
                             ("reading", self.reading_us), ("total", self.total_us)):
            if value < 0:
                raise ValueError(f"negative {label} duration: {value}")
        if self.creation_us + self.solving_us + self.reading_us > self.total_us:
            raise ValueError("phase durations exceed total call duration")

    def phases_sum_us(self) -> int:
        return self.creation_us + self.solving_us + self.reading_us
