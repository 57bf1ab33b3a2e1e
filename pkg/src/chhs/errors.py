"""Exception hierarchy shared by the solver, diagnostics and CLI."""


class CHHSError(Exception):
    """Base class for all errors raised by this package."""


class StructureError(CHHSError, ValueError):
    """Shape, domain or parity mismatch between fields."""


class NonFiniteError(CHHSError, FloatingPointError):
    """A nonlinear evaluation produced inf/nan."""

    def __init__(self, where: str):
        super().__init__(f"non-finite values produced in {where}")
        self.where = where


class BlowUpError(CHHSError):
    """The time integration diverged."""

    def __init__(self, step: int, time: float, reason: str, state=None):
        super().__init__(f"blow-up at step {step} (t={time:.6g}): {reason}")
        self.step = step
        self.time = time
        self.state = state


class DissipationFailure(CHHSError):
    """Step size fell below dt_min while trying to keep the energy non-increasing."""

    def __init__(self, time: float, dt: float, state=None):
        super().__init__(
            f"energy increase could not be avoided at t={time:.6g} with dt={dt:.3g} (below dt_min)"
        )
        self.time = time
        self.dt = dt
        self.state = state


class InsufficientDataError(CHHSError, ValueError):
    pass


class FitDomainError(CHHSError, ValueError):
    """Non-positive values passed to a log-linear fit."""


class ConfigError(CHHSError, ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line
