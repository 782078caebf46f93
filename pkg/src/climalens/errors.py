"""Exception types shared across the pipeline."""


class ClimalensError(Exception):
    pass


class MalformedPattern(ClimalensError, ValueError):
    pass


class FormatError(ClimalensError, ValueError):
    def __init__(self, message: str, lineno: int | None = None, source: str | None = None):
        self.lineno = lineno
        self.source = source
        where = ":".join(str(p) for p in (source, lineno) if p is not None)
        super().__init__(f"{where}: {message}" if where else message)


class TransportError(ClimalensError):
    pass


class MissingFixture(ClimalensError, FileNotFoundError):
    def __init__(self, key: str, path):
        self.key = key
        self.path = path
        super().__init__(f"no recorded response for fixture key {key} (looked for {path})")


class UndefinedIndex(ClimalensError, ValueError):
    pass


class InsufficientData(ClimalensError, ValueError):
    pass


class RankDeficient(ClimalensError, ValueError):
    def __init__(self, column: int, name: str | None = None):
        self.column = column
        self.name = name
        label = f"{column} ({name})" if name else str(column)
        super().__init__(f"design matrix is rank deficient at column {label}")


class DegenerateClusters(ClimalensError, ValueError):
    pass


class NoOverlap(ClimalensError, ValueError):
    pass


class NonPositiveLevel(ClimalensError, ValueError):
    def __init__(self, series: str, month, value: float):
        self.series = series
        self.month = month
        super().__init__(f"{series} must be > 0 to take a log, got {value!r} in {month}")


class EmptyPanel(ClimalensError, ValueError):
    pass


class NoWithinVariation(ClimalensError, ValueError):
    def __init__(self, variable: str):
        self.variable = variable
        super().__init__(f"regressor {variable!r} has no within-firm variation")
