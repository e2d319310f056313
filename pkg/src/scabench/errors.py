class ScaBenchError(Exception):
    """Base class; ``kind`` is the machine-readable tag the CLI reports."""

    kind = "error"


class CoordinateError(ScaBenchError):
    kind = "coordinate-error"


class DataError(ScaBenchError):
    kind = "data-error"


class UsageError(ScaBenchError):
    kind = "usage-error"


class VersionParseError(ScaBenchError):
    kind = "parse-error"

    def __init__(self, ecosystem, text: str, reason: str = ""):
        self.ecosystem = ecosystem
        self.text = text
        msg = f"cannot parse {ecosystem} version {text!r}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class TransportError(ScaBenchError):
    kind = "transport-error"


class FixtureMissError(TransportError):
    kind = "fixture-error"


class NotFoundError(ScaBenchError):
    kind = "not-found"


class DecodeError(ScaBenchError):
    kind = "decode-error"


class RunError(ScaBenchError):
    kind = "run-error"


class AbortError(ScaBenchError):
    kind = "abort"

    def __init__(self, message: str, manifest: dict | None = None):
        super().__init__(message)
        self.manifest = manifest or {}
