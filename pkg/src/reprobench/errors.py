"""Exception hierarchy shared across the package."""


class ReproBenchError(Exception):
    """Base class for all errors raised by this package."""


class InvalidRecord(ReproBenchError):
    """A canonical record line could not be parsed or violates its schema."""


class InvalidKey(ReproBenchError):
    """An experiment key is empty or malformed."""


class InvalidPurpose(ReproBenchError):
    """Sub-seed derivation requested for an unknown purpose label."""


class StorageError(ReproBenchError):
    """A journal file could not be opened or written."""


class CorruptJournal(ReproBenchError):
    """A committed journal line failed its per-line checksum.

    ``line_number`` is 1-based and points at the first bad line.
    """

    def __init__(self, line_number: int, detail: str = ""):
        self.line_number = line_number
        msg = f"corrupt journal line {line_number}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class ChallengeTooSmall(ReproBenchError):
    """Splitting requires at least two dataset items."""


class FrameTooLarge(ReproBenchError):
    """Declared frame length exceeds the protocol bound."""


class ProtocolError(ReproBenchError):
    """A frame payload is truncated or not a valid message record."""


class UnknownMessage(ReproBenchError):
    """A frame carried a record whose "type" tag is not part of the protocol."""


class UnknownExperiment(ReproBenchError):
    """No experiment is registered under the requested key."""


class InvalidConfusion(ReproBenchError):
    """Confusion matrix input is ragged, non-square, or has negative counts."""


class InvalidSample(ReproBenchError):
    """A statistical sample is empty or contains NaN."""


class ExactUnavailable(ReproBenchError):
    """Exact U-test requested but its preconditions do not hold."""


class InsufficientData(ReproBenchError):
    """Not enough completed runs to compute the requested statistic."""


class PairMismatch(ReproBenchError):
    """Experiments are not a valid buggy/corrected pair."""


class IntegrityError(ReproBenchError):
    """A served split failed client-side checksum verification."""


class ServerErrorReply(ReproBenchError):
    """The server answered a request with an ERROR frame."""

    def __init__(self, code: str, detail: str = ""):
        self.code = code
        self.detail = detail
        super().__init__(f"server error {code}: {detail}" if detail else f"server error {code}")


class InvalidFormat(ReproBenchError):
    """Unknown report rendering format."""
