"""Exception hierarchy shared across the package."""


class CredalError(Exception):
    """Base class for all package errors."""


class ConfigurationError(CredalError, ValueError):
    """Invalid hyperparameters, layer sizes or config file fields."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class InputError(CredalError, ValueError):
    """Malformed input arrays: wrong shape, empty, not a distribution."""


class ValidationError(InputError):
    """Data that parses but violates a contract (e.g. rows not summing to 1)."""


class ParseError(InputError):
    """Malformed file content; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TrainingDivergenceError(CredalError, RuntimeError):
    """Non-finite loss or gradient during training."""

    def __init__(self, message, batch=None, epoch=None, member_index=None):
        self.batch = batch
        self.epoch = epoch
        self.member_index = member_index
        where = []
        if member_index is not None:
            where.append(f"member {member_index}")
        if epoch is not None:
            where.append(f"epoch {epoch}")
        if batch is not None:
            where.append(f"batch {batch}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class SolverError(CredalError, RuntimeError):
    """A numerical solver failed to terminate or reported an error."""
