"""Exception hierarchy. Every error carries a machine-readable ``category``
which the CLI reports and maps to an exit code."""


class NLDRError(Exception):
    category = "error"
    exit_code = 1


class InvalidInputError(NLDRError, ValueError):
    category = "invalid-input"
    exit_code = 3


class DegenerateDataError(NLDRError, ValueError):
    category = "degenerate-data"
    exit_code = 4


class NumericalFailureError(NLDRError, ArithmeticError):
    category = "numerical-failure"
    exit_code = 5


class IndefiniteKernelError(NumericalFailureError):
    category = "indefinite-kernel"


class UndefinedMetricError(NLDRError, ValueError):
    category = "undefined-metric"
    exit_code = 6


class ParseError(NLDRError, ValueError):
    category = "parse-error"
    exit_code = 7

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
