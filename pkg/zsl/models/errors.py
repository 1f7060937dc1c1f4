class BZSLException(Exception):
    """A base exception class."""

    def __init__(self, msg):
        super().__init__(msg)


# ==== validation errors (exit code 1) ====
class ValidationError(BZSLException):
    """A base exception for malformed inputs and misconfiguration to stem from."""
    pass


class BundleError(ValidationError):
    """Raised when a dataset bundle file is missing or malformed."""

    def __init__(self, filename, msg, offset=None):
        where = filename if offset is None else f"{filename} (offset {offset})"
        super().__init__(f"{where}: {msg}")
        self.filename = filename
        self.offset = offset


class InvalidArgument(ValidationError):
    """Raised when an argument is invalid."""
    pass


class SplitError(ValidationError):
    """Raised when a split definition is inconsistent with the dataset."""
    pass


class TooFewClasses(ValidationError):
    """Raised when there are not enough seen classes to form meta-classes."""

    def __init__(self, available, needed):
        super().__init__(f"Too few seen classes: {available} available, at least {needed} needed.")
        self.available = available
        self.needed = needed


class EmptyInput(ValidationError):
    """Raised when an operation receives no rows, classes or candidates to work on."""

    def __init__(self, msg=None):
        super().__init__(msg or "The input is empty.")


class DimensionMismatch(ValidationError):
    """Raised when a vector or matrix does not have the dimension the model expects."""

    def __init__(self, expected, got):
        super().__init__(f"Dimension mismatch: expected {expected}, got {got}.")
        self.expected = expected
        self.got = got


class NotSerializable(ValidationError):
    """Raised when a model variant has no representation in the model file."""

    def __init__(self, variant):
        super().__init__(f"Models of variant {variant} cannot be written to a model file.")


# ==== numerical errors (exit code 2) ====
class NumericalError(BZSLException):
    """A base exception for numerical failures to stem from."""
    pass


class NotPositiveDefinite(NumericalError):
    """Raised when a scale or covariance matrix has no Cholesky factor."""

    def __init__(self, what="scale matrix"):
        super().__init__(f"The {what} is not positive definite.")


class InvalidDegreesOfFreedom(NumericalError):
    """Raised when hyperparameters yield a non-positive Student-t degrees of freedom."""

    def __init__(self, dof):
        super().__init__(f"Degrees of freedom must be positive, got {dof}. Check m (or a0) against D.")
        self.dof = dof


class NonFiniteResult(NumericalError):
    """Raised when a density evaluates to a non-finite number."""

    def __init__(self, msg=None):
        super().__init__(msg or "A log-density evaluated to a non-finite value.")


class DegenerateData(NumericalError):
    """Raised when the data cannot support the requested estimate (e.g. PCA rank, singleton classes)."""
    pass
