"""Exception and warning types shared across the package."""


class NetlistError(ValueError):
    """Unparsable or locally inconsistent netlist text.

    Carries the 1-based line and column of the offending token when known.
    """

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f"line {line}"
            if column is not None:
                loc += f", column {column}"
            loc = f" ({loc})"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class ValidationError(ValueError):
    """Raised when a parsed circuit fails graph-level validation.

    ``diagnostics`` holds the full list produced by :func:`cqe.netlist.validate`.
    """

    def __init__(self, diagnostics):
        errors = [d for d in diagnostics if d.severity == "error"]
        super().__init__("; ".join(d.message for d in errors) or "validation failed")
        self.diagnostics = diagnostics


class TransformError(RuntimeError):
    """Coordinate transformation could not be constructed (singular or
    ill-conditioned circuit matrices, or internal block-structure check
    failure)."""


class SolverError(RuntimeError):
    """Eigensolver failure; ``residuals`` and ``sweep_index`` are attached
    when available."""

    def __init__(self, message, residuals=None, sweep_index=None):
        super().__init__(message)
        self.residuals = residuals
        self.sweep_index = sweep_index


class CircuitWarning(UserWarning):
    """Non-fatal conditions: frozen charge islands, truncation adjustments,
    tree-dependent flux dephasing, and similar."""
