"""Exception hierarchy shared by services and the CLI."""

from __future__ import annotations


class HybridADError(Exception):
    """Base class for every error raised on purpose by hybridad."""

    def record(self) -> dict:
        """Machine-readable error record (the CLI prints it as JSON)."""
        return {"error": type(self).__name__, "message": str(self)}


class ConfigError(HybridADError, ValueError):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field

    def record(self) -> dict:
        return {**super().record(), "field": self.field}


class OracleCapError(HybridADError, ValueError):
    """A dense test/oracle path was asked to exceed its size cap."""


class NonFiniteInputError(HybridADError, ValueError):
    pass


class DegenerateTruthError(HybridADError, ValueError):
    """Ground truth without at least one active and one inactive device."""


class SolverError(HybridADError, RuntimeError):
    def __init__(self, message: str, ap_index: int | None = None):
        if ap_index is not None:
            message = f"ap={ap_index}: {message}"
        super().__init__(message)
        self.ap_index = ap_index

    def record(self) -> dict:
        return {**super().record(), "ap_index": self.ap_index}
