"""Library-wide exception types."""


class PnpfError(Exception):
    """Base class for domain errors."""


class TrainingFailure(PnpfError):
    """Raised when an optimization run ends above its fit tolerance.

    Carries the full loss curve and any per-item diagnostics so callers can
    inspect what went wrong.
    """

    def __init__(self, message, loss_curve=None, diagnostics=None):
        super().__init__(message)
        self.loss_curve = list(loss_curve) if loss_curve is not None else []
        self.diagnostics = diagnostics or {}


class StuckError(PnpfError):
    """Controller made no progress and the safeguard found no improving step."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
