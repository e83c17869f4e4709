"""Error types for IRVO model construction, parsing and task mapping."""

from typing import Optional


class IrvoError(Exception):
    """Base exception for all IRVO errors.

    `code` is a stable diagnostic code; `subject` names the identifier the
    error is about so the parser can point at the right token.
    """

    code = "E-STRUCTURE"

    def __init__(self, message: str, subject: Optional[str] = None) -> None:
        self.subject = subject
        super().__init__(message)


class InvalidIdentifier(IrvoError):
    code = "E-BAD-ID"


class DuplicateId(IrvoError):
    code = "E-DUP-ID"


class UnknownPlace(IrvoError):
    code = "E-UNKNOWN-REF"


class UnknownEntity(IrvoError):
    code = "E-UNKNOWN-REF"


class UnknownEndpoint(IrvoError):
    code = "E-UNKNOWN-REF"


class UserInVirtualWorld(IrvoError):
    code = "E-WORLD"


class ModelInRealWorld(IrvoError):
    code = "E-WORLD"


class MissingWorldTag(IrvoError):
    code = "E-WORLD"


class TransducerWorld(IrvoError):
    code = "E-WORLD"


class InvalidAttribute(IrvoError):
    """Stack, nesting, mobility or place used where the entity kind forbids it."""

    code = "E-ATTRIBUTE"


class InvalidBoundary(IrvoError):
    code = "E-BOUNDARY"


class PortChannelError(IrvoError):
    code = "E-PORT-CHANNEL"


class ChannelMismatch(IrvoError):
    code = "E-CHANNEL-MISMATCH"


class ChannelUnresolvable(IrvoError):
    code = "E-CHANNEL-UNRESOLVED"


class InvalidEndpoint(IrvoError):
    code = "E-RELATION"


class PerceptionNotIntoUser(IrvoError):
    code = "E-RELATION"


class CommunicationNotUserToUser(IrvoError):
    code = "E-RELATION"


class ActionNotFromUser(IrvoError):
    code = "E-RELATION"


class TooFewMembers(IrvoError):
    code = "E-MIXED"


class AllSameWorld(IrvoError):
    code = "E-MIXED"


class MemberAlreadyGrouped(IrvoError):
    code = "E-MIXED"


class InvalidMember(IrvoError):
    code = "E-MIXED"


class TooFewInputs(IrvoError):
    code = "E-MERGE"


class OutputNotUser(IrvoError):
    code = "E-MERGE"


class MergeInputNotPerceived(IrvoError):
    code = "E-MERGE"


# Task mapping

class UnknownTask(IrvoError):
    code = "E-UNKNOWN-TASK"


class ConflictingDescendantLink(IrvoError):
    code = "E-LINK-CONFLICT"


class TaskAlreadyLinked(IrvoError):
    code = "E-LINK-CONFLICT"


class UncoveredLeaf(IrvoError):
    code = "E-UNCOVERED-LEAF"


class AttributeConflict(IrvoError):
    code = "E-ATTRIBUTE-CONFLICT"

    def __init__(self, subject: str, attribute: str, detail: str = "") -> None:
        self.attribute = attribute
        message = f"conflicting '{attribute}' for '{subject}'"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message, subject)


class IncompatibleIntent(IrvoError):
    code = "E-INTENT-CONFLICT"


class InvalidTaskTree(IrvoError):
    code = "E-TREE"


class IrvoParseError(IrvoError):
    """Raised by load helpers when a source yields error diagnostics."""

    code = "E-PARSE"

    def __init__(self, source: str, diagnostics: list) -> None:
        self.source = source
        self.diagnostics = diagnostics
        first = diagnostics[0] if diagnostics else None
        message = f"{source}: {len(diagnostics)} diagnostic(s)"
        if first is not None:
            message = f"{message}; first: {first}"
        super().__init__(message)


class ReferenceCycle(IrvoError):
    """Nesting or relative-mobility references loop back on themselves."""

    code = "E-NEST-CYCLE"
