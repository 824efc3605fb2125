"""Exception types shared across the simulator."""


class ValidationError(ValueError):
    """A configuration value violates its declared constraint.

    ``path`` names the offending field (dotted for nested documents).
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class DomainError(ValueError):
    """A numeric argument lies outside the function's domain."""


class BoundsError(IndexError):
    """A position lies outside the terrain or map extent."""


class UnreachableError(RuntimeError):
    """No traversable route exists between start and goal."""


class RoutingError(KeyError):
    """A message names an agent that is not registered on the bus."""


class AllocationError(RuntimeError):
    """No agent is eligible to receive tasks."""


class LogIntegrityError(ValueError):
    """An event log is truncated or internally inconsistent."""
