"""Exception hierarchy shared across the package.

Each subclass maps to one failure class surfaced by the CLI with a
distinct exit code (see cli.EXIT_CODES).
"""


class NextlineError(Exception):
    """Base class for all errors raised by this package."""


class InputError(NextlineError):
    """Bad user input or a violated data precondition."""


class ConfigError(NextlineError):
    """Invalid configuration value."""


class ParseError(NextlineError):
    """Malformed text artifact (edge shard, vocabulary sidecar, walk dump)."""


class FormatError(NextlineError):
    """Binary artifact is corrupt, truncated, or has an unsupported version."""


class ArtifactError(NextlineError):
    """An expected artifact file is missing or unreadable."""


class IntegrityError(NextlineError):
    """Cross-artifact consistency check failed (counts, dims, versions)."""


class TrainingError(NextlineError):
    """Numerical failure (NaN/Inf) detected during embedding training."""


class StoreError(NextlineError):
    """Map store build, open, or lookup failure."""


class ResolutionError(NextlineError):
    """Out-of-vocabulary resolution is impossible (e.g. empty text index)."""


class EvalError(NextlineError):
    """Evaluation produced no usable measurements."""


class BenchError(NextlineError):
    """A benchmark stage failed; the message identifies the failing size."""


class InternalError(NextlineError):
    """Pipeline invariant violated; indicates a bug, not bad input."""
