"""Exception hierarchy shared by all modules."""


class GridInjectError(Exception):
    """Base class for errors raised by gridinject."""


class CaseParseError(GridInjectError, ValueError):
    """Malformed case text. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CaseStructureError(GridInjectError, ValueError):
    """A required block (baseMVA, bus, branch) is missing or misshapen."""


class CaseValidationError(GridInjectError, ValueError):
    """Case content violates a model invariant (duplicate bus id, ...)."""


class IndexingError(GridInjectError, KeyError):
    """A branch references a bus id that does not exist."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class SingularBranchError(GridInjectError, ValueError):
    """An in-service branch has r = x = 0."""


class DomainError(GridInjectError, ValueError):
    """Argument outside the operation's domain (shapes, k = 0, ...)."""


class ConstructionError(GridInjectError, ValueError):
    """Sparse matrix construction from invalid coordinates."""


class InconsistencyError(GridInjectError, RuntimeError):
    """A precomputed plan does not cover the coordinates it must."""


class StalePlanError(GridInjectError, RuntimeError):
    """A plan was used with a matrix or workspace it was not built for."""


class OracleRefusal(GridInjectError, RuntimeError):
    """Dense oracle refused a case above its size cap."""


class VerificationError(GridInjectError, RuntimeError):
    """Cross-method verification found a mismatch above tolerance."""

    def __init__(self, message, mismatch):
        self.mismatch = mismatch
        super().__init__(f"{message} (max mismatch {mismatch:.3e})")
