"""Exception hierarchy shared by every stage of the engine."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class CapacityError(PipelineError):
    """A circuit needs more qubits than the configured cap allows."""


class NormalizationError(PipelineError, ValueError):
    """An amplitude vector is not unit-norm."""


class InitializationOrderError(PipelineError):
    """A register was initialized after it stopped being in |0...0>."""


class QubitIndexError(PipelineError, IndexError):
    """Qubit indices are out of range or not distinct."""


class DimensionError(PipelineError, ValueError):
    """Array shapes do not match."""


class ParameterError(PipelineError, ValueError):
    """A scalar parameter is outside its valid range."""


class DegenerateDistributionError(PipelineError):
    """A conditional probability was requested on a zero-probability event."""


class IngestionError(PipelineError, ValueError):
    """A dataset file does not follow the CSV contract."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class StratificationError(PipelineError, ValueError):
    """A class has fewer instances than the requested number of folds."""


class PairingError(PipelineError, KeyError):
    """Two result sets cannot be paired on (dataset, fold, k)."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ConfigError(PipelineError, ValueError):
    """An experiment configuration failed validation."""
