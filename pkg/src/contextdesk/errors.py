"""Error taxonomy shared by every layer.

Each error carries a stable machine-readable ``code`` that the HTTP API
and the protocol facades map onto wire-level status codes.
"""

from __future__ import annotations


class DeskError(Exception):
    """Base class for all domain errors."""

    code = "INTERNAL"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details = details

    def to_dict(self) -> dict:
        return {"error": self.code, "message": self.message, **self.details}


class UnknownIdError(DeskError):
    code = "UNKNOWN_ID"


class InvariantViolation(DeskError):
    code = "INVARIANT_VIOLATION"


class GapInLog(DeskError):
    code = "GAP_IN_LOG"


class CorruptRecord(DeskError):
    code = "CORRUPT_RECORD"


class EmptyName(DeskError):
    code = "EMPTY_NAME"


class UnknownParent(DeskError):
    code = "UNKNOWN_PARENT"


class ParentNotActive(DeskError):
    code = "PARENT_NOT_ACTIVE"


class BadStrength(DeskError):
    code = "BAD_STRENGTH"


class CtxNotWritable(DeskError):
    code = "CTX_NOT_WRITABLE"


class CtxNotActive(DeskError):
    code = "CTX_NOT_ACTIVE"


class CtxIsCurrent(DeskError):
    code = "CTX_IS_CURRENT"


class SrcIsCurrent(DeskError):
    code = "SRC_IS_CURRENT"


class MergeSelf(DeskError):
    code = "MERGE_SELF"


class PartialAssignment(DeskError):
    code = "PARTIAL_ASSIGNMENT"


class UnknownMembership(DeskError):
    code = "UNKNOWN_MEMBERSHIP"


class StaleProposal(DeskError):
    code = "STALE_PROPOSAL"


class ClockSkew(DeskError):
    code = "CLOCK_SKEW"


class KindMismatch(DeskError):
    code = "KIND_MISMATCH"


class CtxRetracted(DeskError):
    code = "CTX_RETRACTED"


class MissingAttr(DeskError):
    code = "MISSING_ATTR"


# HTTP status mapping used by the sidebar API.  Codes absent from this
# table answer 400 (client sent something the operation rejects).
HTTP_STATUS_BY_CODE = {
    "UNKNOWN_ID": 404,
    "UNKNOWN_PARENT": 404,
    "UNKNOWN_MEMBERSHIP": 404,
    "EMPTY_NAME": 400,
    "BAD_STRENGTH": 400,
    "PARTIAL_ASSIGNMENT": 400,
    "MISSING_ATTR": 400,
    "KIND_MISMATCH": 400,
    "INVARIANT_VIOLATION": 400,
    "PARENT_NOT_ACTIVE": 409,
    "CTX_NOT_WRITABLE": 409,
    "CTX_NOT_ACTIVE": 409,
    "CTX_IS_CURRENT": 409,
    "SRC_IS_CURRENT": 409,
    "MERGE_SELF": 409,
    "STALE_PROPOSAL": 409,
    "CTX_RETRACTED": 409,
    "CLOCK_SKEW": 409,
    "GAP_IN_LOG": 500,
    "CORRUPT_RECORD": 500,
    "INTERNAL": 500,
}


def http_status(err: DeskError) -> int:
    return HTTP_STATUS_BY_CODE.get(err.code, 400)
