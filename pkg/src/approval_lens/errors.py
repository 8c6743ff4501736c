"""Exception hierarchy shared by every stage of the pipeline."""


class ApprovalLensError(Exception):
    """Base class for all errors raised by approval_lens."""


class MalformedRecord(ApprovalLensError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class SourceUnavailable(ApprovalLensError):
    pass


class OrderViolation(ApprovalLensError):
    pass


class MalformedRegistry(ApprovalLensError):
    pass


class DuplicateToken(MalformedRegistry):
    pass


class NetworkError(ApprovalLensError):
    pass


class TraceUnsupported(ApprovalLensError):
    pass


class InsufficientState(ApprovalLensError):
    pass


class TokenAbsent(ApprovalLensError):
    pass


class EmptySequence(ApprovalLensError):
    pass


class SequenceTooLong(ApprovalLensError):
    pass


class InfeasibleSpec(ApprovalLensError):
    pass


class ConfigError(ApprovalLensError):
    pass
