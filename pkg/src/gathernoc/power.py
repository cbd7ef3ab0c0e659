"""Activity-counter energy proxy.

Dynamic energy is modeled as a linear combination of per-router event
counts; coefficients default to one energy unit per event and are
configurable, so only relative numbers are meaningful.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

EVENT_KINDS = (
    "buffer_write",
    "buffer_read",
    "xbar_traversal",
    "link_traversal",
    "va_arb",
    "sa_arb",
    "payload_upload",
)


class ActivityCounters:
    """Per-router event counts, monotonically non-decreasing during a run."""

    def __init__(self) -> None:
        self.per_router: dict[str, dict[int, int]] = {k: {} for k in EVENT_KINDS}

    def record(self, kind: str, router: int, n: int = 1) -> None:
        if n < 0:
            raise ValueError("activity counters only move forward")
        bucket = self.per_router[kind]
        bucket[router] = bucket.get(router, 0) + n

    def total(self, kind: str) -> int:
        return sum(self.per_router[kind].values())

    def totals(self) -> dict[str, int]:
        return {k: self.total(k) for k in EVENT_KINDS}

    def snapshot(self) -> dict[str, int]:
        return self.totals()

    def add_scaled(self, delta: dict[str, int], factor: int, router: int = -1) -> None:
        """Fold ``factor`` repetitions of a per-round delta into the counters.

        Used when identical rounds are replayed instead of re-simulated; the
        bulk counts are attributed to the pseudo-router id ``-1``.
        """
        for kind, n in delta.items():
            if n:
                self.record(kind, router, n * factor)

    @staticmethod
    def diff(after: dict[str, int], before: dict[str, int]) -> dict[str, int]:
        return {k: after[k] - before[k] for k in EVENT_KINDS}


@dataclass(frozen=True)
class EnergyCoefficients:
    """Energy units charged per event occurrence."""

    buffer_write: float = 1.0
    buffer_read: float = 1.0
    xbar_traversal: float = 1.0
    link_traversal: float = 1.0
    va_arb: float = 1.0
    sa_arb: float = 1.0
    payload_upload: float = 1.0

    def __post_init__(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError("energy coefficients must be non-negative")

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def total_energy(counters: ActivityCounters | dict[str, int],
                 coeffs: EnergyCoefficients | None = None) -> float:
    totals = counters.totals() if isinstance(counters, ActivityCounters) else counters
    c = (coeffs or EnergyCoefficients()).as_dict()
    return float(sum(totals.get(k, 0) * c[k] for k in EVENT_KINDS))


def energy_improvement(baseline: float, proposed: float) -> float:
    """Fractional energy saving of ``proposed`` relative to ``baseline``."""
    if baseline == 0:
        return 0.0
    return (baseline - proposed) / baseline
