"""Record which side of each kink the non-smooth primitives took.

A central difference is only a valid derivative estimate when both probe
points lie on the same smooth piece as the base point. Ops with kinks
(relu, leaky relu, abs, max-floor, clamp) report their branch masks here
while a recording is active, so a checker can compare the three traces.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_trace: list[bytes] | None = None


@contextmanager
def record_branches():
    """Collect a branch trace for everything evaluated inside the block."""
    global _trace
    outer, _trace = _trace, []
    try:
        yield _trace
    finally:
        _trace = outer


def note(mask: np.ndarray) -> None:
    if _trace is not None:
        _trace.append(np.packbits(np.asarray(mask, dtype=bool).ravel()).tobytes())
