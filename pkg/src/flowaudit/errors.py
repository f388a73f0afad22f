"""Exception types raised across the package."""


class FlowAuditError(Exception):
    """Base class for every error raised by flowaudit."""


class RootNotFound(FlowAuditError):
    pass


class NoSupportedFiles(FlowAuditError):
    pass


class UnknownFunction(FlowAuditError, KeyError):
    pass


class LocationOutsideFunction(FlowAuditError, ValueError):
    pass


class UnsupportedBugType(FlowAuditError, ValueError):
    pass


class AlreadyPresent(FlowAuditError):
    """Raised when a memory key is stored twice; the original entry is kept."""


class ValueOutsideFunction(FlowAuditError, ValueError):
    pass


class EmptyCandidate(FlowAuditError, ValueError):
    pass


class BackendUnreachable(FlowAuditError):
    pass


class MockResponseMissing(FlowAuditError, LookupError):
    def __init__(self, fingerprint: str, key: str = ""):
        self.fingerprint = fingerprint
        self.key = key
        detail = f" ({key})" if key else ""
        super().__init__(f"no scripted mock response for fingerprint {fingerprint}{detail}")


class OutputTruncated(FlowAuditError):
    pass


class ConfigInvalid(FlowAuditError, ValueError):
    pass


class UnwritableOutput(FlowAuditError, OSError):
    pass
