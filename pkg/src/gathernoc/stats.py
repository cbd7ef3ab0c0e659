"""Aggregated results of one simulated run."""
from __future__ import annotations

from dataclasses import dataclass, field

from .power import EVENT_KINDS


@dataclass
class RunStats:
    """Everything a finished run reports.

    ``per_round_collection`` is measured from the cycle the first PE of a
    round could post its result to the cycle the round's last packet commits
    into the buffer.  ``delta_measured`` is the observed minus closed-form
    ideal collection cycles for full rounds (congestion plus skew), never
    negative.
    """

    model: str
    layer: str
    mode: str
    rows: int
    cols: int
    seed: int
    rounds: int = 0
    total_cycles: int = 0
    per_round_latency: list[int] = field(default_factory=list)
    per_round_collection: list[int] = field(default_factory=list)
    ideal_collection: int = 0
    delta_measured: list[int] = field(default_factory=list)
    timeout_packets: int = 0
    packets: int = 0
    flits: int = 0
    hops: int = 0
    payloads_delivered: int = 0
    head_latencies: list[int] = field(default_factory=list)
    counter_totals: dict[str, int] = field(default_factory=lambda: {k: 0 for k in EVENT_KINDS})
    energy: float = 0.0
    improvement_pct: float | None = None

    @property
    def mesh(self) -> str:
        return f"{self.rows}x{self.cols}"

    @property
    def collection_cycles(self) -> int:
        return sum(self.per_round_collection)
