"""Exception hierarchy."""


class DynaDmaError(Exception):
    """Base class for all errors raised by this package."""


class InpParseError(DynaDmaError, ValueError):
    """A network or partition file could not be parsed.

    ``line`` is 1-based (0 when the problem is not tied to a line) and
    ``token`` is the offending token, if any.
    """

    def __init__(self, message: str, line: int = 0, token: str | None = None):
        self.line = line
        self.token = token
        where = f"line {line}: " if line else ""
        what = f" (token {token!r})" if token is not None else ""
        super().__init__(f"{where}{message}{what}")


class PartitionError(DynaDmaError, ValueError):
    pass


class NetworkValidationError(DynaDmaError, ValueError):
    def __init__(self, violations: list):
        self.violations = list(violations)
        lines = "\n".join(f"  - {v}" for v in self.violations)
        super().__init__(f"network has {len(self.violations)} violation(s):\n{lines}")


class HydraulicError(DynaDmaError):
    pass


class DisconnectedError(HydraulicError):
    def __init__(self, nodes):
        self.nodes = list(nodes)
        super().__init__(f"junctions not connected to any reservoir: {', '.join(self.nodes)}")


class SingularSystemError(HydraulicError):
    def __init__(self, nodes):
        self.nodes = list(nodes)
        super().__init__(f"singular hydraulic system involving nodes: {', '.join(self.nodes)}")


class ConvergenceError(HydraulicError):
    pass


class AggregationError(DynaDmaError):
    pass


class OptimizationError(DynaDmaError):
    pass
