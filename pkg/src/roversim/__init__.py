"""Planetary rover navigation and multi-robot coordination simulator."""

__version__ = "0.1.0"

from .errors import (AllocationError, BoundsError, DomainError, LogIntegrityError, RoutingError,  # noqa: E402
                     UnreachableError, ValidationError)
from .harness import EventLog, run, sweep  # noqa: E402
from .metrics import MetricsReport, compute_metrics, daily_traverse_projection  # noqa: E402
from .scenario import Scenario, load_scenario  # noqa: E402

__all__ = [
    "AllocationError", "BoundsError", "DomainError", "EventLog", "LogIntegrityError", "MetricsReport",
    "RoutingError", "Scenario", "UnreachableError", "ValidationError", "__version__", "compute_metrics",
    "daily_traverse_projection", "load_scenario", "run", "sweep",
]
