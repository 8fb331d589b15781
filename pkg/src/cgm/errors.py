"""Exception types shared across the package."""


class CGMError(Exception):
    """Base class for every error raised by this package."""


class ContractError(CGMError, ValueError):
    """An input violated the documented precondition of an operation."""


class UnknownNodeError(CGMError, KeyError):
    """A node id was looked up that the graph does not contain."""

    def __str__(self) -> str:
        return f"unknown node id: {self.args[0]!r}" if self.args else "unknown node id"


class BuildError(CGMError):
    """Graph construction failed (I/O problem or malformed parse)."""
