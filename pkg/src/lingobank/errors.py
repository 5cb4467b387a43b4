"""Error taxonomy shared by every subsystem.

Each exception carries a stable machine-readable ``code`` that is part of
the wire contract: the signaling router turns any of these raised during
dispatch into an ERROR envelope with that code, never a dropped connection.
"""

from __future__ import annotations


class LingobankError(Exception):
    """Base class; ``code`` is stable and machine-readable."""

    code = "INTERNAL"

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.code)
        self.detail = detail or self.code


# --- time-bank ledger ---------------------------------------------------

class DuplicateAccount(LingobankError):
    code = "DUPLICATE_ACCOUNT"


class UnknownAccount(LingobankError):
    code = "UNKNOWN_ACCOUNT"


class InsufficientBalance(LingobankError):
    code = "INSUFFICIENT_BALANCE"


class AlreadyGranted(LingobankError):
    code = "ALREADY_GRANTED"


class InvalidAmount(LingobankError):
    code = "INVALID_AMOUNT"


# --- presence / matchmaking ----------------------------------------------

class UnknownUser(LingobankError):
    code = "UNKNOWN_USER"


class DuplicateUser(LingobankError):
    code = "DUPLICATE_USER"


class SelfInvite(LingobankError):
    code = "SELF_INVITE"


class RecipientUnavailable(LingobankError):
    code = "RECIPIENT_UNAVAILABLE"


class LanguageMismatch(LingobankError):
    code = "LANGUAGE_MISMATCH"


class InvalidState(LingobankError):
    code = "INVALID_STATE"


class NotRecipient(LingobankError):
    code = "NOT_RECIPIENT"


# --- session engine -------------------------------------------------------

class InvalidInvitationState(LingobankError):
    code = "INVALID_INVITATION_STATE"


class NotTeacher(LingobankError):
    code = "NOT_TEACHER"


class OutOfRange(LingobankError):
    code = "OUT_OF_RANGE"


class SessionEnded(LingobankError):
    code = "SESSION_ENDED"


class SessionNotEnded(LingobankError):
    code = "SESSION_NOT_ENDED"


class NotParticipant(LingobankError):
    code = "NOT_PARTICIPANT"


class AlreadyRated(LingobankError):
    code = "ALREADY_RATED"


class InvalidStars(LingobankError):
    code = "INVALID_STARS"


class UnknownSession(LingobankError):
    code = "UNKNOWN_SESSION"


class BadLesson(LingobankError):
    code = "BAD_LESSON"


# --- signaling protocol ----------------------------------------------------

class MalformedFrame(LingobankError):
    code = "MALFORMED_FRAME"


class UnknownType(LingobankError):
    code = "UNKNOWN_TYPE"


class SchemaViolation(LingobankError):
    code = "SCHEMA_VIOLATION"


class NotAuthenticated(LingobankError):
    code = "NOT_AUTHENTICATED"


class BadToken(LingobankError):
    code = "BAD_TOKEN"


class SeqRegression(LingobankError):
    code = "SEQ_REGRESSION"


class NoLiveSession(LingobankError):
    code = "NO_LIVE_SESSION"


class UnknownConnection(LingobankError):
    code = "UNKNOWN_CONNECTION"


# --- growth analytics -------------------------------------------------------

class EmptyWindow(LingobankError):
    code = "EMPTY_WINDOW"


class EmptyPreviousDay(LingobankError):
    code = "EMPTY_PREVIOUS_DAY"


class DegenerateInput(LingobankError):
    code = "DEGENERATE_INPUT"


class EmptyPopulation(LingobankError):
    code = "EMPTY_POPULATION"


# --- event store -------------------------------------------------------------

class StorageFailure(LingobankError):
    code = "STORAGE_FAILURE"


class OffsetOutOfRange(LingobankError):
    code = "OFFSET_OUT_OF_RANGE"


class ParseError(LingobankError):
    code = "PARSE_ERROR"

    def __init__(self, detail: str = "", line: int | None = None):
        if line is not None:
            detail = f"line {line}: {detail}"
        super().__init__(detail)
        self.line = line


# --- simulator ----------------------------------------------------------------

class ConfigInvalid(LingobankError):
    code = "CONFIG_INVALID"
