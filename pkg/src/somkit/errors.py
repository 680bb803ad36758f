"""Exception types raised by somkit beyond the builtin ValueError."""


class SomkitError(Exception):
    """Base class for somkit-specific errors."""


class FormatError(SomkitError):
    """A file or byte stream does not conform to one of the somkit formats.

    Raised for bad magic, truncation, trailing bytes, and any payload that
    would violate the invariants of the decoded object. The message names
    the offending field or record.
    """


class InvalidStateError(SomkitError):
    """An operation was called on an object that cannot support it."""
