"""Client-side exception types."""


class ClientError(Exception):
    """Base class for SDK errors."""


class ProtocolViolation(ClientError):
    """The byte stream or a payload did not follow the wire contract."""


class IntegrityError(ClientError):
    """A served split failed checksum verification; the run must not train."""


class ServerError(ClientError):
    """The server answered with an ERROR frame."""

    def __init__(self, code: str, detail: str = ""):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}" if detail else code)


class HookError(ClientError):
    """The trainer hook returned metrics outside the valid range."""
