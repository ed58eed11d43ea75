"""Exception hierarchy shared across the pipeline stages."""


class CardiocorrError(Exception):
    """Base class for all errors raised by this package."""


# --- ingest ---------------------------------------------------------------

class MissingFile(CardiocorrError):
    pass


class BadColumn(CardiocorrError):
    pass


class EmptySignal(CardiocorrError):
    pass


class NonFiniteSample(CardiocorrError):
    """A sample failed to parse as a finite number.

    ``index`` is the 0-based data-row index (header excluded).
    """

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"non-finite sample at row {index}")


class SampleRateMismatch(CardiocorrError):
    pass


# --- delineation ----------------------------------------------------------

class BadBand(CardiocorrError):
    pass


class SignalTooShort(CardiocorrError):
    pass


# --- monitoring -----------------------------------------------------------

class BadPolicy(CardiocorrError):
    pass


class TimeRegression(CardiocorrError):
    pass


class EmptyVerdicts(CardiocorrError):
    pass


# --- statistics -----------------------------------------------------------

class LengthMismatch(CardiocorrError):
    pass


class ZeroVariance(CardiocorrError):
    pass


class TooFewSamples(CardiocorrError):
    pass


# --- synthesis ------------------------------------------------------------

class BadSpec(CardiocorrError):
    pass
