"""Exception types raised by bandspec."""


class BandspecError(Exception):
    """Base class for all bandspec errors."""


class SingularBlock(BandspecError):
    """A block that must be inverted is numerically singular.

    ``index`` is the row index of the offending extreme band entry when the
    failure happens inside a recurrence sweep, otherwise ``None``.
    """

    def __init__(self, msg, cond=None, index=None):
        super().__init__(msg)
        self.cond = cond
        self.index = index


class SingularSection(BandspecError):
    """The finite section of (lambda I - A) could not be inverted reliably."""


class OverlapMismatch(BandspecError):
    """The two branches of the kernel formula disagree on the overlap strip."""

    def __init__(self, msg, k, n, gap):
        super().__init__(msg)
        self.k = k
        self.n = n
        self.gap = gap


class NoConvergence(BandspecError):
    """Weyl matrix estimates did not settle before the section size cap."""

    def __init__(self, msg, gap=None, M=None):
        super().__init__(msg)
        self.gap = gap
        self.M = M


class DegenerateWindow(BandspecError):
    """Every kernel norm in a decay-fit window underflowed to zero."""


class ParseError(BandspecError):
    """Operator file could not be parsed against the schema."""

    def __init__(self, msg, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            msg = f"{msg} ({', '.join(where)})"
        super().__init__(msg)
        self.line = line
        self.field = field


class ValidationError(BandspecError):
    """Operator violates the invertibility condition on its extreme diagonals."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report
