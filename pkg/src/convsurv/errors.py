"""Exception hierarchy shared across the library.

The CLI maps these onto exit codes: configuration problems exit 1, data and
validation problems exit 2, everything else exits 3.
"""

from __future__ import annotations


class ConvsurvError(Exception):
    """Base class for all library errors."""


class ConfigError(ConvsurvError):
    """Invalid configuration or incompatible option combination."""


class EmptyInputError(ConvsurvError):
    """An operation received an empty dataset or empty population."""


class InvalidCurveError(ConvsurvError):
    """A step function violates the invariants required by the operation."""


class WrongEstimatorError(ConvsurvError):
    """Single-risk estimator applied to a competing-risks dataset."""


class InvalidEventError(ConvsurvError):
    """Unknown or inapplicable event type."""


class DegenerateFitError(ConvsurvError):
    """Training data cannot support a fit (e.g. no events)."""


class ConvergenceError(ConvsurvError):
    """Iterative fit failed to converge; carries the last iterate."""

    def __init__(self, message: str, last_fit=None):
        super().__init__(message)
        self.last_fit = last_fit


class MonotoneLikelihoodError(ConvsurvError):
    """Perfect separation drove an unpenalized Cox coefficient to diverge."""


class ShapeMismatchError(ConvsurvError):
    """Covariate vector dimensionality does not match the fitted model."""


class InvalidModelError(ConvsurvError):
    """Operation is not defined for this model kind."""


class StratificationError(ConvsurvError):
    """Stratified split impossible (single-class dataset)."""


class UndefinedMetricError(ConvsurvError):
    """Metric has an empty population and no defined value."""


class LogParseError(ConvsurvError):
    """Malformed player-log input; carries the offending line number."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number


class LogValidationError(ConvsurvError):
    """Player log violates a structural invariant; carries the player id."""

    def __init__(self, message: str, player_id: str | None = None):
        super().__init__(message)
        self.player_id = player_id


class CompatibilityError(ConvsurvError):
    """Model file and input data disagree (feature spec hash, version)."""
