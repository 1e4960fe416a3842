"""Exception types shared across the toolkit."""

from __future__ import annotations


class ContagionError(Exception):
    """Base class for all toolkit errors."""


class EventLogError(ContagionError):
    """Malformed event log. Carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyCohortError(ContagionError):
    """No usable series in the requested friend-count range."""


class BinMismatchError(ContagionError):
    """Operands use different bin grids."""


class FitError(ContagionError):
    """Fit could not be performed (degenerate or underdetermined input)."""


class FitConvergenceError(FitError):
    """Optimizer hit its iteration budget. ``best_params`` holds the best point seen."""

    def __init__(self, message: str, best_params: dict):
        self.best_params = best_params
        super().__init__(message)


class BracketError(ContagionError):
    """Root bracketing failed. Carries the objective values at both endpoints."""

    def __init__(self, message: str, lo: float, hi: float, f_lo: float, f_hi: float):
        self.lo = lo
        self.hi = hi
        self.f_lo = f_lo
        self.f_hi = f_hi
        super().__init__(f"{message} (f({lo:g})={f_lo:g}, f({hi:g})={f_hi:g})")
