"""Error types shared across the package.

Plain ValueError is used for ordinary argument validation; the classes here
mark conditions callers are expected to branch on.
"""


class SizeExceededError(ValueError):
    """Exact solve requested above the dynamic-program size limit."""


class DegenerateRegionError(RuntimeError):
    """Point generation could not place a point after the retry budget."""


class InvalidTourError(ValueError):
    """A vertex order is not a permutation of the instance's vertices."""
