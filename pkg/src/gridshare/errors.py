"""Exception types shared across the package.

The CLI maps these onto process exit codes, so solver and input code
should raise the most specific type that applies rather than bare
ValueError once a problem instance has passed construction-time
validation.
"""

from __future__ import annotations


class GridshareError(Exception):
    """Base class for errors raised by this package."""


class ScenarioFormatError(GridshareError):
    """A scenario file failed to parse or validate.

    ``location`` is a human-readable pointer into the file: either a
    dotted key path ("network.lines[2].reactance") or a line/column
    reference produced by the TOML parser.
    """

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        if location:
            message = f"{message} (at {location})"
        super().__init__(message)


class InfeasibleError(GridshareError):
    """A constrained problem admits no feasible point.

    ``kind`` is "equality" or "range"; ``index`` identifies one
    offending constraint row (the most violated one at the least
    infeasible point found), which serves as a certificate for
    diagnostics.
    """

    def __init__(self, message: str, kind: str, index: int):
        self.kind = kind
        self.index = index
        super().__init__(f"{message} [certificate: {kind} constraint {index}]")


class SolverFailureError(GridshareError):
    """A numerical routine failed to converge or returned garbage."""
