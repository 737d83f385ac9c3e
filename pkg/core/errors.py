"""
Exception hierarchy for the downgrade simulator.

Protocol failures inside a handshake are not exceptions: endpoints abort
with an AbortReason recorded in their state. The errors below signal bad
inputs (malformed keys, scripts, scenario files) and unavailable oracles.
"""


class DowngradeLabError(Exception):
    """Base class for all simulator errors."""


class GroupError(DowngradeLabError, ValueError):
    """Diffie-Hellman group parameters are invalid (non-prime modulus, bad generator)."""


class KeyParamError(DowngradeLabError, ValueError):
    """Public key parameters are malformed or out of range."""


class EncodingError(DowngradeLabError, ValueError):
    """A value does not fit the toy message space or cannot be decoded."""


class OracleUnavailable(DowngradeLabError):
    """The requested oracle does not exist for the given primitive."""


class ScriptError(DowngradeLabError):
    """An adversary script references a field or message it cannot act on."""


class ConfigError(DowngradeLabError):
    """A scenario or endpoint configuration is malformed."""


class NotFound(DowngradeLabError, KeyError):
    """Lookup of an attack, suite or group failed."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "not found"


class FormatError(DowngradeLabError):
    """Unknown report format requested."""
