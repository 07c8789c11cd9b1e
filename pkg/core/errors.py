"""
Supertask Lab Exceptions
========================

Every failure raised by the lab derives from SupertaskError. The CLI maps
ManifestError to exit code 2 and VerificationError to exit code 1.
"""


class SupertaskError(Exception):
    """Base class for all lab errors."""


class LevelRangeError(SupertaskError, IndexError):
    """A level or event horizon lies outside the available chain."""


class CapacityError(SupertaskError):
    """Enumeration requested above the configured cap."""


class DomainError(SupertaskError, ValueError):
    """An argument lies outside the operation's domain."""


class ConstructionRefused(DomainError):
    """Chain construction requested for a finite or cofinite target."""


class ManifestError(SupertaskError):
    """Experiment manifest is malformed or references missing files."""


class VerificationError(SupertaskError):
    """An exact identity check failed."""
