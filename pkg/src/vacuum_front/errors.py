"""Exception hierarchy shared by all modules.

Every error carries the exit status the command-line runner should use, so
``cli`` can map failures to process exit codes without string matching.
"""

from __future__ import annotations


class VacuumFrontError(Exception):
    exit_code = 1

    def __init__(self, message: str, *, module: str = "", operation: str = "", location=None):
        super().__init__(message)
        self.module = module
        self.operation = operation
        self.location = location

    def report(self) -> dict:
        return {
            "error": type(self).__name__,
            "message": str(self),
            "module": self.module,
            "operation": self.operation,
            "location": None if self.location is None else str(self.location),
            "exit_code": self.exit_code,
        }


class ConfigError(VacuumFrontError):
    exit_code = 2


class ParameterError(VacuumFrontError):
    exit_code = 2


class PhysicsError(VacuumFrontError):
    exit_code = 3


class AdmissibilityError(PhysicsError):
    pass


class CausalityError(PhysicsError):
    pass


class LiftViolation(PhysicsError):
    pass


class BasicStateViolation(PhysicsError):
    def __init__(self, message: str, violations: list, **kw):
        super().__init__(message, **kw)
        self.violations = violations


class CompatibilityError(PhysicsError):
    pass


class RegularityError(PhysicsError):
    pass


class ResolutionError(ParameterError):
    pass


class StabilityError(PhysicsError):
    pass


class DivergenceError(VacuumFrontError):
    exit_code = 4

    def __init__(self, message: str, table=None, **kw):
        super().__init__(message, **kw)
        self.table = table


class SnapshotIOError(VacuumFrontError):
    exit_code = 5
