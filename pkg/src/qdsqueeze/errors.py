"""Exception hierarchy shared by all modules."""


class QDSqueezeError(Exception):
    """Base class for every error raised by the package."""


class InvalidDimensionError(QDSqueezeError, ValueError):
    pass


class InvalidEmbeddingError(QDSqueezeError, ValueError):
    pass


class ConsistencyError(QDSqueezeError):
    """An assembled operator violates a structural guarantee (e.g. Hermiticity)."""


class ConfigError(QDSqueezeError, ValueError):
    """Invalid parameters or configuration.  ``violations`` lists every problem found."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class TruncationError(QDSqueezeError, ValueError):
    """Fock truncation too small for the requested state."""


class InvalidStateError(QDSqueezeError, ValueError):
    pass


class IntegrationError(QDSqueezeError, RuntimeError):
    """Time integration failed a quality gate.  ``diagnostics`` carries the offending numbers."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConvergenceError(QDSqueezeError, RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
