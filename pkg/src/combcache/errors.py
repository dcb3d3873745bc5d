class ParameterError(ValueError):
    """Invalid user-supplied parameter (bad H, r, t, user id, ...)."""


class ConfigurationError(ValueError):
    """A requested construction does not fit the configured field or sizes."""


class InvariantError(RuntimeError):
    """An internal consistency check failed; indicates a bug or a tampered plan."""


class VerificationError(RuntimeError):
    """The decodability oracle found a user that cannot recover its file."""

    def __init__(self, message, user=None, missing=()):
        super().__init__(message)
        self.user = user
        self.missing = tuple(missing)
