"""Error types shared across the package.

Each public error class maps to a distinct CLI exit code so batch drivers can
tell configuration mistakes, physics preconditions, and internal-consistency
failures apart.
"""


class DephlabError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(DephlabError):
    """Malformed or contradictory run configuration."""

    exit_code = 2


class SizeLimit(DephlabError):
    """A requested computation exceeds the configured enumeration budget."""

    exit_code = 3


class DegenerateGroundState(DephlabError):
    """The doubled single-particle spectrum has no gap at the target filling."""

    exit_code = 4


class SignProblem(DephlabError):
    """Negative Monte Carlo weights encountered (odd flavor power)."""

    exit_code = 5


class IntegrityError(DephlabError):
    """An internal consistency check failed (e.g. a provably real weight
    acquired an imaginary part); indicates a bug, not bad input."""

    exit_code = 6


class ConfigurationNode(DephlabError):
    """Signal: the current auxiliary-field configuration has exactly zero
    weight (singular overlap). Valid point of the measure; measurements are
    skipped, never accepted from."""

    exit_code = 1
