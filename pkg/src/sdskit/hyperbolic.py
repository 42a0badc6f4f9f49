"""Poincare half-plane distance and the extended metric on half-line x (0,inf).

The textbook formula log((t+s)/(t-s)) with s=|z-w|, t=|z-conj(w)| loses all
precision for nearby points, where t-s underflows by cancellation.  We use the
exact identity t^2 - s^2 = 4*im(z)*im(w) and evaluate

    theta = log1p(2*s / (t-s)) = log1p(s*(t+s) / (2*im(z)*im(w))),

which is cancellation-free.  Double precision throughout; tests compare
against a high-precision oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError


def poincare(z1: tuple, z2: tuple) -> float:
    """Hyperbolic distance between points (re, im) of the upper half plane."""
    x1, y1 = z1
    x2, y2 = z2
    if y1 <= 0 or y2 <= 0:
        raise DomainError("points must have positive imaginary part")
    dx = x1 - x2
    s = math.hypot(dx, y1 - y2)      # |z - w|
    t = math.hypot(dx, y1 + y2)      # |z - conj(w)|
    # t^2 - s^2 == 4*y1*y2 exactly
    return math.log1p(s * (t + s) / (2.0 * y1 * y2))


@dataclass(frozen=True)
class ExtendedPoint:
    """Point of the extended space: base on the half-line, height > 0."""

    base: float
    height: float

    def __post_init__(self):
        if not self.height > 0:
            raise DomainError("extended point needs height > 0")


def extended_distance(p: ExtendedPoint, q: ExtendedPoint) -> float:
    """Extended metric: hyperbolic distance of (0, h_p) and (|base gap|, h_q)."""
    return poincare((0.0, p.height), (abs(p.base - q.base), q.height))
