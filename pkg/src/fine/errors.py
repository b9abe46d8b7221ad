"""Exception hierarchy shared by every stage of the pipeline."""


class FineError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(FineError, ValueError):
    pass


class EmptyInputError(FineError, ValueError):
    pass


class ParseError(FineError, ValueError):
    """A value in an input file could not be parsed.

    ``row`` is the 1-based line number in the source file.
    """

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class DegenerateDocumentError(FineError, ValueError):
    pass


class InvalidParameterError(FineError, ValueError):
    pass


class InsufficientSamplesError(FineError, ValueError):
    pass


class DimensionError(FineError, ValueError):
    pass


class SupportError(FineError, ValueError):
    pass


class MetricMismatchError(FineError, ValueError):
    pass


class DisconnectedGraphError(FineError, ValueError):
    pass


class InsufficientSpectrumError(FineError, ValueError):
    pass


class StratificationError(FineError, ValueError):
    pass


class MissingLabelError(FineError, ValueError):
    pass
