"""Concrete random Lipschitz maps of the half-line and the system they drive.

Map variants: Affine a*x+b, ReflAffine |a*x-b|, ReflTranslate |x-b|, and
Composite (left-to-right application).  Each map knows its Lipschitz constant
and its displacement of a reference point; together these drive the affine
majorant that dominates any trajectory along a common map sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .distributions import DistributionSpec
from .errors import ConfigurationError, DomainError
from .hyperbolic import ExtendedPoint


@dataclass(frozen=True)
class Affine:
    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0:
            raise ConfigurationError("Affine slope must be > 0")


@dataclass(frozen=True)
class ReflAffine:
    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ConfigurationError("ReflAffine requires a > 0 and b > 0")


@dataclass(frozen=True)
class ReflTranslate:
    b: float


@dataclass(frozen=True)
class Composite:
    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise ConfigurationError("Composite needs at least one factor")


MapDescriptor = Union[Affine, ReflAffine, ReflTranslate, Composite]

FAMILIES = ("affine", "reflected_affine", "reflected_rw")


@dataclass(frozen=True)
class SystemSpec:
    """A family of i.i.d. random maps: which variant, and the parameter laws.

    Either (a_law, b_law) or joint_pairs is given.  joint_pairs couples (a, b)
    as a discrete law over pairs; reflected_rw has no a_law (Lipschitz 1).
    """

    family: str
    b_law: Optional[DistributionSpec] = None
    a_law: Optional[DistributionSpec] = None
    joint_pairs: Optional[tuple] = None  # (((a, b), weight), ...)
    reference_point: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}")
        if self.reference_point < 0:
            raise ConfigurationError("reference point must be >= 0")
        if self.joint_pairs is not None:
            if self.a_law is not None or self.b_law is not None:
                raise ConfigurationError("give either joint_pairs or marginal laws, not both")
            if self.family == "reflected_rw":
                raise ConfigurationError("reflected_rw takes a b_law, not joint pairs")
            pairs = tuple(((float(a), float(b)), float(w)) for (a, b), w in self.joint_pairs)
            object.__setattr__(self, "joint_pairs", pairs)
            if abs(sum(w for _, w in pairs) - 1.0) > 1e-9:
                raise ConfigurationError("joint pair weights must sum to 1")
            if any(a <= 0 for (a, _), _ in pairs):
                raise ConfigurationError("joint pair slopes must be > 0")
        else:
            if self.b_law is None:
                raise ConfigurationError("b_law is required")
            if self.family == "reflected_rw":
                if self.a_law is not None:
                    raise ConfigurationError("reflected_rw has no a_law (Lipschitz 1)")
            elif self.a_law is None:
                raise ConfigurationError(f"{self.family} requires an a_law")


# ---------------------------------------------------------------------------

def apply(f: MapDescriptor, x: float) -> float:
    """Evaluate the map; reflected variants refuse negative input."""
    if isinstance(f, Affine):
        return f.a * x + f.b
    if isinstance(f, ReflAffine):
        if x < 0:
            raise DomainError("reflected map evaluated at negative point")
        return abs(f.a * x - f.b)
    if isinstance(f, ReflTranslate):
        if x < 0:
            raise DomainError("reflected map evaluated at negative point")
        return abs(x - f.b)
    if isinstance(f, Composite):
        for g in f.factors:
            x = apply(g, x)
        return x
    raise ConfigurationError(f"unknown map {f!r}")


def lipschitz(f: MapDescriptor) -> float:
    """Lipschitz constant; for Composite this is the product upper bound."""
    if isinstance(f, (Affine, ReflAffine)):
        return f.a
    if isinstance(f, ReflTranslate):
        return 1.0
    if isinstance(f, Composite):
        out = 1.0
        for g in f.factors:
            out *= lipschitz(g)
        return out
    raise ConfigurationError(f"unknown map {f!r}")


def displacement(f: MapDescriptor, o: float = 0.0) -> float:
    """How far the map moves the reference point: |f(o) - o|."""
    return abs(apply(f, o) - o)


def lift_apply(f: MapDescriptor, p: ExtendedPoint) -> ExtendedPoint:
    """Lift to the extended space: (x, h) -> (f(x), lip(f)*h).

    The lifted map is 1-Lipschitz for the extended hyperbolic distance.
    """
    return ExtendedPoint(apply(f, p.base), lipschitz(f) * p.height)
