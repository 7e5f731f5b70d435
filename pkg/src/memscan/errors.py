"""Exception types raised across the toolkit."""


class ScannerError(Exception):
    """Base class for all toolkit errors."""


class SpecParseError(ScannerError, ValueError):
    """A device-spec file could not be parsed."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class SpecValidationError(ScannerError, ValueError):
    """A device parameter violates one of its invariants."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class BracketError(ScannerError):
    """A -3 dB crossing lies outside the swept range."""


class MultiPeakError(ScannerError):
    """More than one local maximum rises above the half-power level."""


class StepSizeError(ScannerError, ValueError):
    """Integration step too coarse for the resonance being simulated."""


class InsufficientPeaksError(ScannerError):
    """Not enough decaying peaks in a trace to estimate a decrement."""


class NonDecayingError(ScannerError):
    """Peak amplitudes do not decay."""


class DegenerateExtentError(ScannerError, ValueError):
    """Both scan extents are zero, so a multi-cell grid is undefined."""


class DegenerateDataError(ScannerError, ValueError):
    """Dataset carries no usable shape information (constant or all zero)."""


class FitNotConvergedError(ScannerError):
    """Least-squares iteration hit its limit; ``result`` holds the best parameters seen."""

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)
