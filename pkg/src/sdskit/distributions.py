"""Parameter laws for the random maps: sampling, CDFs, moments, lattice structure.

Every law is described by a small spec object.  Specs are immutable after
construction and safe to share across threads; random draws always go through
a caller-owned numpy Generator so that equal (spec, stream) pairs give
bit-identical output.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, DomainError

EULER_GAMMA = 0.5772156649015329

# Cutoff ladder for divergence detection in improper integrals.
_CUTOFFS = (1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8)
_REL_STABLE = 1e-4


@dataclass(frozen=True)
class TwoPoint:
    """Discrete law on finitely many points: ((value, weight), ...)."""

    values: tuple

    def __post_init__(self):
        vals = tuple((float(v), float(w)) for v, w in self.values)
        object.__setattr__(self, "values", vals)
        if not vals:
            raise ConfigurationError("TwoPoint needs at least one (value, weight) pair")
        if any(w < 0 for _, w in vals):
            raise ConfigurationError("TwoPoint weights must be nonnegative")
        if abs(sum(w for _, w in vals) - 1.0) > 1e-9:
            raise ConfigurationError("TwoPoint weights must sum to 1")


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigurationError("Uniform requires lo < hi")


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if self.rate <= 0:
            raise ConfigurationError("Exponential rate must be > 0")


@dataclass(frozen=True)
class LogNormal:
    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ConfigurationError("LogNormal sigma must be > 0")


@dataclass(frozen=True)
class ParetoType:
    """Density a*(1+x)^-(1+a) on x >= 0."""

    a: float

    def __post_init__(self):
        if self.a <= 0:
            raise ConfigurationError("ParetoType exponent must be > 0")


@dataclass(frozen=True)
class Constant:
    c: float


@dataclass(frozen=True)
class TabulatedDensity:
    """Density given by values on an increasing grid, integrated by trapezoid.

    The tabulated density must integrate to 1 within 1e-6.  Sampling is by
    inverse CDF on the cumulative trapezoid, linear inside bins.
    """

    grid: tuple
    density: tuple
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        dens = np.asarray(self.density, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or dens.shape != grid.shape:
            raise ConfigurationError("TabulatedDensity needs matching 1-d grid and density")
        if np.any(np.diff(grid) <= 0):
            raise ConfigurationError("TabulatedDensity grid must be strictly increasing")
        if np.any(dens < 0):
            raise ConfigurationError("TabulatedDensity values must be nonnegative")
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
        if abs(cum[-1] - 1.0) > 1e-6:
            raise ConfigurationError(
                f"TabulatedDensity integrates to {cum[-1]:.8f}, not 1 within 1e-6"
            )
        object.__setattr__(self, "grid", tuple(grid))
        object.__setattr__(self, "density", tuple(dens))
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def from_unnormalized(cls, grid, density):
        grid = np.asarray(grid, dtype=float)
        dens = np.asarray(density, dtype=float)
        total = np.trapezoid(dens, grid)
        if total <= 0:
            raise ConfigurationError("density must have positive mass")
        return cls(tuple(grid), tuple(dens / total))


DistributionSpec = Union[
    TwoPoint, Uniform, Exponential, LogNormal, ParetoType, Constant, TabulatedDensity
]


@dataclass(frozen=True)
class MomentReport:
    mean_log: float
    second_moment_log: float
    logplus_moment: float
    logplus_order: float
    regime: str  # contractive | centered | expanding | undefined


@dataclass(frozen=True)
class LatticeReport:
    span: Optional[float]
    nonlattice_proved: bool


# ---------------------------------------------------------------------------
# support / structural queries

def support(spec: DistributionSpec) -> tuple:
    """(lo, hi) bounds of the support; hi may be inf."""
    if isinstance(spec, TwoPoint):
        vals = [v for v, w in spec.values if w > 0]
        return min(vals), max(vals)
    if isinstance(spec, Uniform):
        return spec.lo, spec.hi
    if isinstance(spec, Exponential):
        return 0.0, math.inf
    if isinstance(spec, LogNormal):
        return 0.0, math.inf
    if isinstance(spec, ParetoType):
        return 0.0, math.inf
    if isinstance(spec, Constant):
        return spec.c, spec.c
    if isinstance(spec, TabulatedDensity):
        return spec.grid[0], spec.grid[-1]
    raise ConfigurationError(f"unknown spec {spec!r}")


def is_discrete(spec: DistributionSpec) -> bool:
    return isinstance(spec, (TwoPoint, Constant))


def atoms(spec: DistributionSpec) -> list:
    if isinstance(spec, TwoPoint):
        return [v for v, w in spec.values if w > 0]
    if isinstance(spec, Constant):
        return [spec.c]
    return []


# ---------------------------------------------------------------------------
# sampling

def sample_array(spec: DistributionSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. values; deterministic given the stream state."""
    if isinstance(spec, TwoPoint):
        vals = np.array([v for v, _ in spec.values])
        weights = np.array([w for _, w in spec.values])
        idx = rng.choice(len(vals), size=n, p=weights)
        return vals[idx]
    if isinstance(spec, Uniform):
        return spec.lo + (spec.hi - spec.lo) * rng.random(n)
    if isinstance(spec, Exponential):
        return rng.standard_exponential(n) / spec.rate
    if isinstance(spec, LogNormal):
        return np.exp(spec.mu + spec.sigma * rng.standard_normal(n))
    if isinstance(spec, ParetoType):
        u = rng.random(n)
        return (1.0 - u) ** (-1.0 / spec.a) - 1.0
    if isinstance(spec, Constant):
        return np.full(n, spec.c)
    if isinstance(spec, TabulatedDensity):
        u = rng.random(n)
        return np.interp(u, spec._cum, np.asarray(spec.grid))
    raise ConfigurationError(f"unknown spec {spec!r}")


def sample(spec: DistributionSpec, rng: np.random.Generator) -> float:
    return float(sample_array(spec, 1, rng)[0])


# ---------------------------------------------------------------------------
# cdf / pdf / mean

def cdf(spec: DistributionSpec, x):
    """P[X <= x], vectorized over x; returns a float for scalar input."""
    scalar = np.isscalar(x) or np.ndim(x) == 0
    out = _cdf_array(spec, np.atleast_1d(np.asarray(x, dtype=float)))
    return float(out[0]) if scalar else out


def _cdf_array(spec: DistributionSpec, x: np.ndarray) -> np.ndarray:
    if isinstance(spec, TwoPoint):
        out = np.zeros_like(x)
        for v, w in spec.values:
            out = out + w * (x >= v)
        return out
    if isinstance(spec, Uniform):
        return np.clip((x - spec.lo) / (spec.hi - spec.lo), 0.0, 1.0)
    if isinstance(spec, Exponential):
        return np.where(x < 0, 0.0, -np.expm1(-spec.rate * np.maximum(x, 0.0)))
    if isinstance(spec, LogNormal):
        from scipy.stats import norm

        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = norm.cdf((np.log(x[pos]) - spec.mu) / spec.sigma)
        return out
    if isinstance(spec, ParetoType):
        return np.where(x < 0, 0.0, 1.0 - (1.0 + np.maximum(x, 0.0)) ** (-spec.a))
    if isinstance(spec, Constant):
        return (x >= spec.c).astype(float)
    if isinstance(spec, TabulatedDensity):
        return np.interp(x, np.asarray(spec.grid), spec._cum, left=0.0, right=1.0)
    raise ConfigurationError(f"unknown spec {spec!r}")


def pdf(spec: DistributionSpec, x):
    """Lebesgue density; refused for discrete variants."""
    if is_discrete(spec):
        raise DomainError(f"{type(spec).__name__} has no Lebesgue density")
    scalar = np.isscalar(x) or np.ndim(x) == 0
    out = _pdf_array(spec, np.atleast_1d(np.asarray(x, dtype=float)))
    return float(out[0]) if scalar else out


def _pdf_array(spec: DistributionSpec, x: np.ndarray) -> np.ndarray:
    if isinstance(spec, Uniform):
        inside = (x >= spec.lo) & (x <= spec.hi)
        return inside / (spec.hi - spec.lo)
    if isinstance(spec, Exponential):
        return np.where(x < 0, 0.0, spec.rate * np.exp(-spec.rate * np.maximum(x, 0.0)))
    if isinstance(spec, LogNormal):
        out = np.zeros_like(x)
        pos = x > 0
        z = (np.log(x[pos]) - spec.mu) / spec.sigma
        out[pos] = np.exp(-0.5 * z * z) / (x[pos] * spec.sigma * math.sqrt(2 * math.pi))
        return out
    if isinstance(spec, ParetoType):
        return np.where(x < 0, 0.0, spec.a * (1.0 + np.maximum(x, 0.0)) ** (-(1.0 + spec.a)))
    if isinstance(spec, TabulatedDensity):
        return np.interp(x, np.asarray(spec.grid), np.asarray(spec.density), left=0.0, right=0.0)
    raise ConfigurationError(f"unknown spec {spec!r}")


def _improper_integral(f: Callable, lo: float = 0.0) -> tuple:
    """Integrate f >= 0 on [lo, inf) over the growing cutoff ladder.

    Returns (value, status) with status in {"finite", "infinite",
    "undecided"}.  Finite either because the cutoff sequence stabilizes
    within relative 1e-4, or because the per-decade increments decay
    geometrically (then the geometric tail is added); infinite when the
    increments do not decay.
    """
    with warnings.catch_warnings():
        # roundoff / subdivision complaints are expected when probing divergence
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        total = integrate.quad(f, lo, _CUTOFFS[0], limit=200)[0]
        deltas = []
        for c_lo, c_hi in zip(_CUTOFFS, _CUTOFFS[1:]):
            d = integrate.quad(f, c_lo, c_hi, limit=200)[0]
            deltas.append(d)
            total += d
            if abs(d) <= _REL_STABLE * max(abs(total), 1e-300):
                return total, "finite"
    # slow algebraic behavior: judge by the decay ratio of decade increments
    ratios = [b / a for a, b in zip(deltas, deltas[1:]) if a > 0]
    if not ratios:
        return total, "finite"
    r = float(np.median(ratios[-3:]))
    if r < 0.98:
        return total + deltas[-1] * r / (1.0 - r), "finite"
    if r >= 1.0:
        return math.inf, "infinite"
    return math.inf, "undecided"


def mean(spec: DistributionSpec) -> float:
    """E[X]; may be +inf."""
    if isinstance(spec, TwoPoint):
        return math.fsum(v * w for v, w in spec.values)
    if isinstance(spec, Uniform):
        return 0.5 * (spec.lo + spec.hi)
    if isinstance(spec, Exponential):
        return 1.0 / spec.rate
    if isinstance(spec, LogNormal):
        return math.exp(spec.mu + 0.5 * spec.sigma**2)
    if isinstance(spec, ParetoType):
        return 1.0 / (spec.a - 1.0) if spec.a > 1 else math.inf
    if isinstance(spec, Constant):
        return spec.c
    if isinstance(spec, TabulatedDensity):
        g = np.asarray(spec.grid)
        return float(np.trapezoid(g * np.asarray(spec.density), g))
    raise ConfigurationError(f"unknown spec {spec!r}")


# ---------------------------------------------------------------------------
# log-moments and regime classification

def _check_a_law(spec: DistributionSpec) -> None:
    lo, _ = support(spec)
    if lo < 0:
        raise DomainError("A-law must be supported on the positive reals")
    if any(v == 0.0 for v in atoms(spec)):
        raise DomainError("A-law must not have an atom at 0")


def _mean_log(spec: DistributionSpec) -> float:
    if isinstance(spec, TwoPoint):
        return math.fsum(w * math.log(v) for v, w in spec.values if w > 0)
    if isinstance(spec, Constant):
        return math.log(spec.c)
    if isinstance(spec, Uniform):
        lo, hi = spec.lo, spec.hi
        f = lambda t: t * (math.log(t) - 1.0) if t > 0 else 0.0
        return (f(hi) - f(lo)) / (hi - lo)
    if isinstance(spec, Exponential):
        return -EULER_GAMMA - math.log(spec.rate)
    if isinstance(spec, LogNormal):
        return spec.mu
    # quadrature fallbacks
    val_pos, status = _improper_integral(lambda x: math.log(x) * float(pdf(spec, x)), lo=1.0)
    if status != "finite":
        return math.inf
    val_neg = integrate.quad(
        lambda x: math.log(x) * float(pdf(spec, x)), max(support(spec)[0], 1e-12), 1.0, limit=200
    )[0]
    return val_pos + val_neg


def _second_moment_log(spec: DistributionSpec) -> float:
    if isinstance(spec, TwoPoint):
        return math.fsum(w * math.log(v) ** 2 for v, w in spec.values if w > 0)
    if isinstance(spec, Constant):
        return math.log(spec.c) ** 2
    if isinstance(spec, LogNormal):
        return spec.mu**2 + spec.sigma**2
    if isinstance(spec, Exponential):
        m = -EULER_GAMMA - math.log(spec.rate)
        return math.pi**2 / 6.0 + m * m
    val_pos, status = _improper_integral(lambda x: math.log(x) ** 2 * float(pdf(spec, x)), lo=1.0)
    if status != "finite":
        return math.inf
    val_neg = integrate.quad(
        lambda x: math.log(x) ** 2 * float(pdf(spec, x)),
        max(support(spec)[0], 1e-12),
        1.0,
        limit=200,
    )[0]
    return val_pos + val_neg


def logplus_moment(spec: DistributionSpec, order: float) -> float:
    """E[(log+ X)^order]; +inf when divergent."""
    if isinstance(spec, (TwoPoint, Constant)):
        return math.fsum(
            w * max(math.log(v), 0.0) ** order
            for v, w in (spec.values if isinstance(spec, TwoPoint) else [(spec.c, 1.0)])
            if w > 0 and v > 0
        )
    val, status = _improper_integral(
        lambda x: max(math.log(x), 0.0) ** order * float(pdf(spec, x)), lo=1.0
    )
    return val if status == "finite" else math.inf


def moment_report(spec: DistributionSpec, epsilon: float = 0.1) -> MomentReport:
    """Log-moment summary of an A-law with contraction-regime classification.

    epsilon is the slack in the (2+epsilon)-th log-plus moment; the theory only
    needs some positive value, so it is an explicit parameter with default 0.1.
    """
    _check_a_law(spec)
    ml = _mean_log(spec)
    closed_form = isinstance(spec, (TwoPoint, Constant, Uniform, Exponential, LogNormal))
    tol = 1e-12 if closed_form else 1e-9
    if not math.isfinite(ml):
        regime = "undefined"
    elif abs(ml) <= tol:
        regime = "centered"
    elif ml < 0:
        regime = "contractive"
    else:
        regime = "expanding"
    return MomentReport(
        mean_log=ml,
        second_moment_log=_second_moment_log(spec),
        logplus_moment=logplus_moment(spec, 2.0 + epsilon),
        logplus_order=2.0 + epsilon,
        regime=regime,
    )


# ---------------------------------------------------------------------------
# lattice span

def _exact_power_ratio(v: Fraction, base: Fraction, max_q: int = 64) -> Optional[Fraction]:
    """p/q with v^q == base^p exactly, or None if no such small ratio exists.

    For rational v and base, log v / log base is rational iff such an exact
    power identity holds, and the denominator is bounded by the largest prime
    exponent in base, so a bounded search is exhaustive.
    """
    ratio = math.log(v) / math.log(base)
    for q in range(1, max_q + 1):
        p = round(ratio * q)
        if math.gcd(p, q) != 1:
            continue
        if abs(ratio * q - p) > 1e-6 * max(1.0, abs(p)):
            continue
        if v**q == base**p:
            return Fraction(p, q)
    return None


def lattice_span(spec: DistributionSpec) -> LatticeReport:
    """Maximal kappa with log(support) inside kappa*Z, for discrete A-laws.

    Continuous variants return span None (not a lattice law).  Discrete
    support with irrational log-ratios returns None with the proved flag set.
    """
    _check_a_law(spec)
    if not is_discrete(spec):
        return LatticeReport(span=None, nonlattice_proved=True)
    vals = [Fraction(v) for v in atoms(spec)]
    nontrivial = [v for v in vals if v != 1]
    if not nontrivial:
        # log-support is {0}: every kappa works, no maximal one
        return LatticeReport(span=None, nonlattice_proved=False)
    base = min(nontrivial, key=lambda v: abs(math.log(v)))
    ratios = []
    for v in nontrivial:
        r = _exact_power_ratio(v, base)
        if r is None:
            return LatticeReport(span=None, nonlattice_proved=True)
        ratios.append(r)
    common_den = math.lcm(*(r.denominator for r in ratios))
    ints = [r.numerator * (common_den // r.denominator) for r in ratios]
    g = math.gcd(*ints)
    span = abs(math.log(base)) * g / common_den
    return LatticeReport(span=span, nonlattice_proved=False)
