"""Derivative-free maximization of unimodal scalar functions."""

from __future__ import annotations

import math

_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_maximize(f, lo: float, hi: float, tol: float) -> float:
    """Locate the maximizer of a unimodal ``f`` on ``[lo, hi]``.

    Shrinks the bracket by the golden ratio until it is narrower than ``tol``
    and returns its midpoint, so the result is within ``tol / 2`` of the true
    maximizer.
    """
    if not hi >= lo:
        raise ValueError(f"empty bracket [{lo!r}, {hi!r}]")
    if not tol > 0.0:
        raise ValueError(f"tol must be > 0, got {tol!r}")
    c = hi - (hi - lo) * _INV_GOLDEN
    d = lo + (hi - lo) * _INV_GOLDEN
    fc = f(c)
    fd = f(d)
    while hi - lo > tol:
        if fc < fd:
            lo, c, fc = c, d, fd
            d = lo + (hi - lo) * _INV_GOLDEN
            fd = f(d)
        else:
            hi, d, fd = d, c, fc
            c = hi - (hi - lo) * _INV_GOLDEN
            fc = f(c)
    return 0.5 * (lo + hi)
