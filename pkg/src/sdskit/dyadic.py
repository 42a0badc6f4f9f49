"""Exact rational arithmetic for the base-2 and base-3 reflection examples.

The maps are f_1(x) = |2x - 1| and f_{-1}(x) = |x/2 - 1| (base 2), and their
base-3 analogues g_{+-1}.  Everything in this module runs on
fractions.Fraction: the key identities (the 2/3 ladder gap between starts
1 and 1/3, the piecewise-affine iterate structure, closure of the dyadic
state classes D_r) are exact equalities that a single rounding would destroy.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .engine import ladder_epochs
from .errors import ConfigurationError, DomainError, IdentityViolation

ExactRational = Fraction

HALF = Fraction(1, 2)
ONE = Fraction(1)


def exact_step(eps: int, x: Fraction, base: int = 2) -> Fraction:
    """One exact map application: eps=+1 -> |base*x - 1|, eps=-1 -> |x/base - 1|."""
    if base not in (2, 3):
        raise ConfigurationError("base must be 2 or 3")
    if eps not in (1, -1):
        raise ConfigurationError("eps must be +1 or -1")
    x = Fraction(x)
    if x < 0:
        raise DomainError("exact_step needs x >= 0")
    if eps == 1:
        return abs(base * x - 1)
    return abs(x / base - 1)


def iterate_exact(eps_sequence: Iterable[int], x: Fraction, base: int = 2) -> list:
    """Exact trajectory [x, X_1, ..., X_n] under the given +-1 sequence."""
    path = [Fraction(x)]
    for eps in eps_sequence:
        path.append(exact_step(eps, path[-1], base))
    return path


# ---------------------------------------------------------------------------
# piecewise-affine iterate structure (base 2 on [0,1])

@dataclass(frozen=True)
class PiecewiseAffineMap:
    """x |-> X_n^x on [0,1] for the base-2 system, in exact closed form.

    The map has 2^m pieces on the dyadic intervals [j*2^-m, (j+1)*2^-m],
    slope +-2^s on each piece (signs alternating), and each piece is mapped
    affinely onto one common interval [(image_l - 1)*2^(s-m), image_l*2^(s-m)].
    m is the running maximum of the +-1 partial sums, s the final sum.
    """

    slopes: tuple       # Fractions, piece j slope
    intercepts: tuple   # Fractions, piece j intercept
    m: int
    s: int
    image_l: int        # the integer L locating the common piece image

    @property
    def pieces(self) -> int:
        return len(self.slopes)

    @property
    def breakpoints(self) -> tuple:
        step = Fraction(1, 2 ** self.m)
        return tuple(j * step for j in range(2 ** self.m + 1))

    @property
    def image(self) -> tuple:
        w = Fraction(2 ** self.s, 2 ** self.m) if self.s >= 0 else Fraction(1, 2 ** (self.m - self.s))
        return ((self.image_l - 1) * w, self.image_l * w)

    def __call__(self, x) -> Fraction:
        x = Fraction(x)
        if not 0 <= x <= 1:
            raise DomainError("the piecewise form lives on [0,1]")
        j = min(int(x * 2 ** self.m), 2 ** self.m - 1)
        return self.slopes[j] * x + self.intercepts[j]

    def verify(self) -> None:
        """Re-check every structural invariant; raises on any failure."""
        n_pieces = 2 ** self.m
        if len(self.slopes) != n_pieces or len(self.intercepts) != n_pieces:
            raise IdentityViolation(f"expected {n_pieces} pieces, have {len(self.slopes)}")
        mag = Fraction(2 ** self.s) if self.s >= 0 else Fraction(1, 2 ** (-self.s))
        step = Fraction(1, n_pieces)
        lo, hi = self.image
        width = hi - lo
        if width * 2 ** (self.m - self.s) != 1 or not 1 <= self.image_l <= 2 ** (self.m - self.s):
            raise IdentityViolation("common image is not a grid interval of width 2^(s-m)")
        for j in range(n_pieces):
            sl, c = self.slopes[j], self.intercepts[j]
            if abs(sl) != mag:
                raise IdentityViolation(f"piece {j} slope {sl} is not +-2^{self.s}")
            if j and (sl > 0) == (self.slopes[j - 1] > 0):
                raise IdentityViolation(f"slope signs fail to alternate at piece {j}")
            left, right = sl * (j * step) + c, sl * ((j + 1) * step) + c
            if {min(left, right), max(left, right)} != {lo, hi}:
                raise IdentityViolation(f"piece {j} image differs from the common image")
            if j and self.slopes[j - 1] * (j * step) + self.intercepts[j - 1] != left:
                raise IdentityViolation(f"discontinuity at breakpoint {j}/{n_pieces}")


def _identity_form() -> PiecewiseAffineMap:
    return PiecewiseAffineMap(slopes=(ONE,), intercepts=(Fraction(0),), m=0, s=0, image_l=1)


def _compose_one(form: PiecewiseAffineMap, eps: int) -> PiecewiseAffineMap:
    slopes, intercepts = list(form.slopes), list(form.intercepts)
    m, s = form.m, form.s
    lo, hi = form.image
    if eps == -1:
        # X/2 - 1 <= 0 on [0,1]: the reflection never engages, one affine branch.
        new_slopes = [-sl / 2 for sl in slopes]
        new_intercepts = [1 - c / 2 for c in intercepts]
        new_l = 2 ** (m - s + 1) - form.image_l + 1
        return PiecewiseAffineMap(tuple(new_slopes), tuple(new_intercepts), m, s - 1, new_l)
    if s < m:
        # image width <= 1/2 and grid-aligned, so it sits entirely on one
        # side of the kink value 1/2
        if hi <= HALF:
            new_slopes = [-2 * sl for sl in slopes]
            new_intercepts = [1 - 2 * c for c in intercepts]
            new_l = 2 ** (m - s - 1) - form.image_l + 1
        elif lo >= HALF:
            new_slopes = [2 * sl for sl in slopes]
            new_intercepts = [2 * c - 1 for c in intercepts]
            new_l = form.image_l - 2 ** (m - s - 1)
        else:
            raise IdentityViolation("piece image straddles 1/2 with s < m")
        return PiecewiseAffineMap(tuple(new_slopes), tuple(new_intercepts), m, s + 1, new_l)
    # s == m: every piece maps onto [0,1] and crosses the kink at its
    # midpoint, so every piece splits in two
    new_slopes, new_intercepts = [], []
    half_step = Fraction(1, 2 ** (m + 1))
    for j, (sl, c) in enumerate(zip(slopes, intercepts)):
        mid = (2 * j + 1) * half_step
        if sl * mid + c != HALF:
            raise IdentityViolation(f"kink preimage is not the midpoint of piece {j}")
        for half in (0, 1):
            x_probe = (2 * j + half) * half_step + half_step / 2
            below = sl * x_probe + c < HALF
            if below:
                new_slopes.append(-2 * sl)
                new_intercepts.append(1 - 2 * c)
            else:
                new_slopes.append(2 * sl)
                new_intercepts.append(2 * c - 1)
    return PiecewiseAffineMap(tuple(new_slopes), tuple(new_intercepts), m + 1, s + 1, 1)


def piecewise_affine_form(eps_sequence: Sequence[int]) -> PiecewiseAffineMap:
    """Exact closed form of the n-step iterate, built map by map.

    Structural invariants (piece count 2^m, slopes +-2^s alternating in sign,
    one common piece image) are re-verified after every composition step.
    """
    form = _identity_form()
    for eps in eps_sequence:
        if eps not in (1, -1):
            raise ConfigurationError("eps_sequence entries must be +-1")
        form = _compose_one(form, eps)
        form.verify()
    return form


# ---------------------------------------------------------------------------
# ladder identity

@dataclass(frozen=True)
class LadderVerdict:
    epoch: int          # step index t(k)
    k: int              # ladder rank
    value: Fraction     # exact trajectory value at the epoch
    branch: str         # "f1-iterate" or "one-minus-f1-iterate"


def f1_iterate(k: int, x: Fraction) -> Fraction:
    v = Fraction(x)
    for _ in range(k):
        v = abs(2 * v - 1)
    return v


def ladder_identity_check(eps_sequence: Sequence[int], x: Fraction) -> list:
    """At every strictly ascending ladder epoch t(k) of the +-1 walk, assert
    X_{t(k)}^x == f1^(k)(x) or 1 - f1^(k)(x) exactly, and report the branch.

    A violation falsifies the iterate lemma and is raised as fatal.
    """
    eps = list(eps_sequence)
    path = iterate_exact(eps, x, base=2)
    s_walk = np.concatenate([[0], np.cumsum(np.asarray(eps, dtype=np.int64))]).astype(float)
    decomp = ladder_epochs(s_walk, "ascending_strict")
    verdicts = []
    for k, epoch in enumerate(decomp.epochs, start=1):
        value = path[int(epoch)]
        target = f1_iterate(k, x)
        if value == target:
            branch = "f1-iterate"
        elif value == 1 - target:
            branch = "one-minus-f1-iterate"
        else:
            raise IdentityViolation(
                f"ladder identity fails at epoch {int(epoch)} (k={k}): "
                f"value {value} vs f1^k(x) {target}"
            )
        verdicts.append(LadderVerdict(epoch=int(epoch), k=k, value=value, branch=branch))
    return verdicts


# ---------------------------------------------------------------------------
# the countable Markov chain on D_r

def dyadic_level(r: int, x: Fraction) -> int:
    """The n with x = k/(r*2^n), gcd(k, r*2^n) = 1; DomainError if x not in D_r."""
    if r <= 0 or r % 2 == 0:
        raise ConfigurationError("r must be an odd positive integer")
    x = Fraction(x)
    if x < 0:
        raise DomainError(f"{x} is not in D_{r}")
    q = x.denominator
    # lowest-terms denominator must be exactly r * 2^n
    if q % r:
        raise DomainError(f"{x} is not in D_{r}")
    ratio = q // r
    if ratio & (ratio - 1):
        raise DomainError(f"{x} is not in D_{r}")
    return ratio.bit_length() - 1


def dyadic_chain_step(r: int, x: Fraction, eps: int) -> tuple:
    """One transition of the D_r chain; returns (x', level(x')).

    For a state at level n >= 1 the move is deterministic in level:
    eps=+1 lands at n-1, eps=-1 at n+1 (asserted).  Level-0 states carry no
    such guarantee.
    """
    n = dyadic_level(r, x)
    x_new = exact_step(eps, x, base=2)
    n_new = dyadic_level(r, x_new)   # closure f_{+-1}(D_r) in D_r, checked here
    if n >= 1:
        expected = n - 1 if eps == 1 else n + 1
        if n_new != expected:
            raise IdentityViolation(
                f"level moved {n} -> {n_new} under eps={eps}, expected {expected}"
            )
    return x_new, n_new


POSITIVE_RECURRENT = "positive-recurrent"
NULL_RECURRENT = "null-recurrent"
TRANSIENT = "transient"


def birth_death_classification(p: float) -> str:
    """Trichotomy for the comparison birth-death chain on the levels.

    p is the downward probability (toward level 0): recurrence is positive
    for p > 1/2, null at p = 1/2, and the chain is transient for p < 1/2.
    """
    if not 0 < p < 1:
        raise ConfigurationError("p must lie in (0, 1)")
    if p > 0.5:
        return POSITIVE_RECURRENT
    if p == 0.5:
        return NULL_RECURRENT
    return TRANSIENT


# ---------------------------------------------------------------------------
# limit-set probes

@dataclass(frozen=True)
class ProbeReport:
    base: int
    depth: int
    points: int
    min_point: Fraction
    max_point: Fraction
    largest_gap: Fraction
    truncated: bool


def attractor_probe(base: int, seeds: Sequence, depth: int, cap: int = 2 ** 20) -> ProbeReport:
    """Breadth-first image statistics over all +-1 words up to the depth.

    Returns min/max over all visited points and the largest gap between
    consecutive sorted points — a covering-mesh heuristic for density of the
    limit set, not a proof.  The point set is capped; exceeding the cap sets
    the truncated flag and stops expansion.
    """
    frontier = {Fraction(s) for s in seeds}
    seen = set(frontier)
    truncated = False
    for _ in range(depth):
        nxt = set()
        for x in frontier:
            for eps in (1, -1):
                y = exact_step(eps, x, base)
                if y not in seen:
                    seen.add(y)
                    nxt.add(y)
                    if len(seen) >= cap:
                        truncated = True
                        break
            if truncated:
                break
        frontier = nxt
        if truncated or not frontier:
            break
    pts = sorted(seen)
    gaps = [b - a for a, b in zip(pts, pts[1:])]
    return ProbeReport(
        base=base,
        depth=depth,
        points=len(pts),
        min_point=pts[0],
        max_point=pts[-1],
        largest_gap=max(gaps) if gaps else Fraction(0),
        truncated=truncated,
    )


# ---------------------------------------------------------------------------
# exact normalized distances

def normalized_distance_exact(eps_sequence: Sequence[int], x, y, base: int = 2) -> list:
    """Exact D_n = |X_n^x - X_n^y| / A_(0,n) along one +-1 sequence.

    D_n is nonincreasing pathwise for this reflected-affine family (the
    difference follows Z_n = |A_n Z_(n-1) - c_n| pairwise); any increase is
    raised as fatal.  Returns [D_0, ..., D_n] as Fractions.
    """
    px, py = Fraction(x), Fraction(y)
    scale = Fraction(1)   # 1 / A_{0,n}
    series = [abs(px - py)]
    for eps in eps_sequence:
        px = exact_step(eps, px, base)
        py = exact_step(eps, py, base)
        scale = scale / base if eps == 1 else scale * base
        d = abs(px - py) * scale
        if d > series[-1]:
            raise IdentityViolation("exact normalized distance increased")
        series.append(d)
    return series
