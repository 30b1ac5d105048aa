"""Exception types shared across the package."""


class QSError(Exception):
    """Base class for all package errors."""


class DimensionError(QSError, ValueError):
    """Operands have incompatible matrix or grid dimensions."""


class NonFiniteError(QSError, ValueError):
    """An input or intermediate value contains NaN or Inf."""


class CoefficientError(QSError, ValueError):
    """Material coefficients violate a baseline admissibility relation."""

    def __init__(self, relation: str, detail: str):
        self.relation = relation
        self.detail = detail
        super().__init__(f"{relation}: {detail}")


class ConfigError(QSError, ValueError):
    """A run configuration is malformed or inconsistent."""


class BlowUpError(QSError, FloatingPointError):
    """The time integration produced non-finite values."""

    def __init__(self, t: float, norm: float, what: str = "state"):
        self.t = t
        self.norm = norm
        self.what = what
        super().__init__(f"numerical blow-up at t={t!r}: {what} norm={norm!r}")
