"""Exception hierarchy shared across the simulator."""


class GatherNocError(Exception):
    """Base class for all package errors."""


class ConfigError(GatherNocError):
    """Invalid mesh, run, or workload configuration."""


class CapacityError(GatherNocError):
    """Payloads do not fit in the requested packet."""


class SimulationError(GatherNocError):
    """Base class for invariant violations detected during a run."""


class LostPayloadError(SimulationError):
    """A posted payload was not delivered exactly once."""


class OracleMismatchError(SimulationError):
    """A PE accumulator disagrees with the reference dot product."""


class DrainError(SimulationError):
    """The network did not drain to empty at a round boundary."""


class DeadlockError(SimulationError):
    """The progress watchdog saw queued flits make no progress."""
