"""Exception taxonomy shared by every layer of the engine.

The service and CLI map these onto HTTP status codes and process exit codes,
so new error conditions should reuse one of the classes below rather than
raising bare ValueErrors.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class InputError(EngineError):
    """Caller passed something structurally invalid (bad shape, bad range,
    dimension mismatch, empty map where one is required)."""


class FormatError(EngineError):
    """A serialized payload failed validation.

    ``offset`` is the byte offset at which decoding failed, when known.
    """

    def __init__(self, message: str, *, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ParseError(EngineError):
    """A spatial-relation string failed to parse.

    ``position`` is the character index of the first offending character.
    """

    def __init__(self, message: str, *, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownRelationError(ParseError):
    """The relation identifier is syntactically fine but not one we support."""

    def __init__(self, name: str, *, position: int):
        super().__init__(f"unknown relation {name!r}", position=position)
        self.name = name


class ObjectNotFoundError(EngineError):
    """A spatial-relation operand matched nothing in the map."""

    def __init__(self, operand: str):
        super().__init__(f"no object found for operand {operand!r}")
        self.operand = operand


class DegenerateFeatureError(EngineError):
    """A feature vector vanished where a direction was required
    (antipodal cancellation during blending, zero-norm click target)."""


class MapBusyError(EngineError):
    """Another writer currently holds the map; retry later."""
