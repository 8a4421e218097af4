"""Exception hierarchy shared by every protocol actor."""


class ProtocolError(Exception):
    """Base class. ``code`` is a stable machine-readable tag."""

    code = "protocol-error"


class WidthViolation(ProtocolError):
    code = "width-violation"


class MalformedFrame(ProtocolError):
    code = "malformed-frame"


class DuplicateServerIdentity(ProtocolError):
    code = "duplicate-server-identity"


class DuplicateUserIdentity(ProtocolError):
    code = "duplicate-user-identity"


class EmptyPassword(ProtocolError):
    code = "empty-password"


class WeakPassword(ProtocolError):
    code = "weak-password"


class NonpositiveParameter(ProtocolError):
    code = "nonpositive-parameter"


class ResourceBudgetExceeded(ProtocolError):
    code = "resource-budget-exceeded"


class Rejected(ProtocolError):
    """A verifier refused a message or credential."""

    code = "rejected"


class CredentialMismatch(Rejected):
    code = "credential-mismatch"


class UnknownServer(Rejected):
    code = "unknown-server"


class UnknownUser(Rejected):
    code = "unknown-user"


class StaleRequest(Rejected):
    code = "stale-request"


class StaleResponse(Rejected):
    code = "stale-response"


class RequestForgery(Rejected):
    code = "request-forgery"


class ResponseForgery(Rejected):
    code = "response-forgery"


class NoPendingLogin(Rejected):
    code = "no-pending-login"
