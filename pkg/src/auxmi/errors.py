"""Exception hierarchy. Every error raised on purpose derives from AuxmiError
so the CLI can turn it into a machine-readable failure."""


class AuxmiError(Exception):
    """Base class for all library errors."""


class SpecError(AuxmiError, ValueError):
    """Invalid model, imputation, missingness or harness specification."""


class CsvFormatError(AuxmiError, ValueError):
    """CSV input that cannot be parsed against the declared variables."""

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class RankDeficiencyError(AuxmiError, ValueError):
    """Design matrix is (numerically) rank deficient."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class ConvergenceError(AuxmiError, RuntimeError):
    """Iterative fit did not converge."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class PerfectPredictionError(AuxmiError, RuntimeError):
    """An imputation model separates its response perfectly."""

    def __init__(self, variable, predictors, message=None):
        predictors = list(predictors)
        if message is None:
            message = (
                f"perfect prediction while imputing {variable!r} "
                f"from predictors {predictors}"
            )
        super().__init__(message)
        self.variable = variable
        self.predictors = predictors


class CalibrationError(AuxmiError, RuntimeError):
    """MAR selection intercept could not be calibrated to the target rate."""
