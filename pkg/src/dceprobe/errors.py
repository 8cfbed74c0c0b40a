"""Exception types raised across the package."""


class DCEProbeError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(DCEProbeError, ValueError):
    pass


class DimensionMismatchError(DCEProbeError, ValueError):
    pass


class NotHermitianError(DCEProbeError, ValueError):
    pass


class TruncationError(DCEProbeError):
    """The Fock truncation is too small for the requested state."""


class UnsupportedRegimeError(DCEProbeError, ValueError):
    pass


class PropagationDivergedError(DCEProbeError):
    def __init__(self, message, worst_step=None, deviation=None):
        super().__init__(message)
        self.worst_step = worst_step
        self.deviation = deviation


class InvalidInputError(DCEProbeError, ValueError):
    pass


class ImpossibleOutcomeError(DCEProbeError):
    def __init__(self, outcome, probability):
        super().__init__(
            f"outcome {outcome!r} has probability {probability:.3e}, below the conditioning floor"
        )
        self.outcome = outcome
        self.probability = probability


class FitFailedError(DCEProbeError):
    pass


class ResetFailedError(DCEProbeError):
    def __init__(self, cycles, residual_n):
        super().__init__(
            f"cavity reset did not reach vacuum after {cycles} cycles (residual <n> = {residual_n:.4g})"
        )
        self.cycles = cycles
        self.residual_n = residual_n


class EmptyRecordError(DCEProbeError, ValueError):
    pass


class ConfigError(DCEProbeError, ValueError):
    pass
