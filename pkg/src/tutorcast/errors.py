"""Exception hierarchy shared across the engine and the HTTP layer."""

from __future__ import annotations


class TutorcastError(Exception):
    """Base class for all domain errors raised by this package."""


class InputError(TutorcastError):
    """A caller-supplied argument is malformed or out of range."""


class SectionValidationError(TutorcastError):
    """A section (or quiz) violates structural invariants.

    Carries the full violation report so callers can surface every
    problem at once instead of fixing them one by one.
    """

    def __init__(self, report):
        self.report = list(report)
        lines = "; ".join(v.describe() for v in self.report) or "invalid section"
        super().__init__(lines)


class ReplayError(TutorcastError):
    """An event could not be applied to the playback state."""

    def __init__(self, seq: int, rule: str, message: str):
        self.seq = seq
        self.rule = rule
        super().__init__(f"event {seq}: {rule}: {message}")


class OrderingError(TutorcastError):
    """An event batch does not continue the session's dense sequence."""

    def __init__(self, expected_seq: int, got_seq: int):
        self.expected_seq = expected_seq
        self.got_seq = got_seq
        super().__init__(f"expected seq {expected_seq}, got {got_seq}")


class LifecycleError(TutorcastError):
    """The operation is not allowed in the object's current state."""


class AuthorizationError(TutorcastError):
    """The principal may not perform this operation."""


class AuthenticationError(TutorcastError):
    """Credentials or token could not be verified."""


class NotFoundError(TutorcastError):
    """The referenced object does not exist."""


class ConflictError(TutorcastError):
    """Optimistic concurrency check failed; retry with fresh state."""


class IntegrityError(TutorcastError):
    """Stored artifact bytes do not match their recorded hash."""

    def __init__(self, path: str, message: str = "content hash mismatch"):
        self.path = path
        super().__init__(f"{path}: {message}")


class InfrastructureError(TutorcastError):
    """Sandbox or storage machinery failed; distinct from user-code failure."""
