"""Exception types shared across more than one module.

Module-specific failures (tag grammar, group math, ...) live next to the
code that raises them; only genuinely cross-cutting ones belong here.
"""


class DimensionMismatch(ValueError):
    """Two gridded inputs (masks, frames, matrices) disagree in shape."""
