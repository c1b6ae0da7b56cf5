"""Error taxonomy shared across the toolkit.

Every domain error derives from ArlifError so the CLI can catch one type
and turn it into a nonzero exit with a diagnostic.
"""


class ArlifError(Exception):
    """Base class for all toolkit errors."""


# --- ingest ---------------------------------------------------------------

class FieldCountMismatch(ArlifError):
    """A record line carries the wrong number of comma-separated fields."""


class NumericParse(ArlifError):
    """Non-numeric text in a numeric column."""


class SingleClass(ArlifError):
    """All labels identical; a supervised statistic is undefined."""


# --- iforest --------------------------------------------------------------

class InsufficientData(ArlifError):
    """Too few points to build a forest."""


# --- attention / detector -------------------------------------------------

class DimensionMismatch(ArlifError):
    """Array shape incompatible with the configured k / m."""


class StaleCache(ArlifError):
    """Forward cache does not match the parameters it is replayed against."""


class EmptyStream(ArlifError):
    """Online training requires at least one labeled sample."""


# --- model file -----------------------------------------------------------

class BadMagic(ArlifError):
    """File does not start with the ARLF magic."""


class VersionUnsupported(ArlifError):
    """Model file version or layout flags this build cannot read."""


class TruncatedFile(ArlifError):
    """Model file ends (or continues) where the layout says it must not."""


# --- metrics --------------------------------------------------------------

class LengthMismatch(ArlifError):
    """Predictions and labels differ in length."""


class Empty(ArlifError):
    """Empty input where at least one evaluated sample is required."""
