"""Exception types shared across the package.

Error messages start with a stable token (e.g. "empty-subset") so callers
and tests can match on the failure class without parsing prose.
"""


class AlgoError(RuntimeError):
    """An identification run failed for an algorithmic reason (CLI exit 1)."""

    def __init__(self, token, message="", payload=None):
        self.token = token
        self.payload = payload
        super().__init__(f"{token}: {message}" if message else token)


class ParseError(ValueError):
    """Malformed input file or CLI configuration (CLI exit 2)."""

    def __init__(self, token, message=""):
        self.token = token
        super().__init__(f"{token}: {message}" if message else token)
