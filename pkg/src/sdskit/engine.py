"""Coupled trajectory simulation with deterministic parallel replication.

Every replica owns a counter-based Philox substream keyed by (seed, replica),
so results are bit-identical regardless of worker count or execution order.
Log-Lipschitz sums S_n are the primary state; running products exp(S_n) are
derived on demand, so horizons of 1e6+ steps cannot overflow.

Parameter draw order is fixed: per replica, steps are consumed in chunks of
CHUNK_STEPS; within a chunk, slopes are drawn before offsets (joint pairs draw
one index array).  All record modes share this layout, so a strided run sees
the same maps as a full run with the same seed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import _kernels, distributions
from .errors import ConfigurationError, SdsError, UnsupportedError
from .maps import SystemSpec

CHUNK_STEPS = 1 << 20

_FAMILY_CODE = {"affine": 0, "reflected_affine": 1, "reflected_rw": 2}

LADDER_KINDS = (
    "ascending_nonstrict",
    "ascending_strict",
    "descending_nonstrict",
    "descending_strict",
)


@dataclass(frozen=True)
class SimulationPlan:
    system: SystemSpec
    starting_points: tuple
    horizon: int
    replicas: int = 1
    seed: int = 0
    track_extended: bool = False
    extended_height: float = 1.0
    record: object = "full"  # "full" | "summary" | ("strided", k)

    def __post_init__(self):
        pts = tuple(float(x) for x in self.starting_points)
        object.__setattr__(self, "starting_points", pts)
        if not pts:
            raise ConfigurationError("starting_points must be nonempty")
        if self.horizon < 1:
            raise ConfigurationError("horizon must be >= 1")
        if self.replicas < 1:
            raise ConfigurationError("replicas must be >= 1")
        if self.extended_height <= 0:
            raise ConfigurationError("extended height must be > 0")
        if self.system.family != "affine" and any(x < 0 for x in pts):
            raise ConfigurationError("reflected families need starting points >= 0")
        rec = self.record
        ok = rec in ("full", "summary") or (
            isinstance(rec, tuple) and len(rec) == 2 and rec[0] == "strided" and int(rec[1]) >= 1
        )
        if not ok:
            raise ConfigurationError(f"bad record mode {rec!r}")


@dataclass
class TrajectoryBundle:
    """One replica's coupled paths, all driven by the same map sequence."""

    replica: int
    family: str
    starting_points: np.ndarray
    indices: np.ndarray       # recorded step indices, indices[0] == 0
    paths: np.ndarray         # (n_points, n_recorded)
    s: np.ndarray             # log-Lipschitz sums S_n at recorded indices
    m: np.ndarray             # running max M_n = max(0, S_1..S_n) at indices
    horizon: int
    a: Optional[np.ndarray] = None  # per-step slopes, record="full" only
    b: Optional[np.ndarray] = None  # per-step offsets, record="full" only
    extended_heights: Optional[np.ndarray] = None
    truncated: bool = False

    @property
    def terminal(self) -> np.ndarray:
        return self.paths[:, -1]

    def products(self) -> np.ndarray:
        """Running Lipschitz products A_{0,n} = exp(S_n) at recorded indices."""
        return np.exp(self.s)

    def b_walk(self) -> np.ndarray:
        """Partial sums of the offsets (S_0 = 0 convention); needs record=full."""
        if self.b is None:
            raise SdsError("b_walk needs record='full'")
        return np.concatenate([[0.0], np.cumsum(self.b)])

    def point_index(self, x: float) -> int:
        hits = np.flatnonzero(self.starting_points == x)
        if hits.size == 0:
            raise SdsError(f"{x} is not a starting point of this bundle")
        return int(hits[0])


@dataclass(frozen=True)
class LadderDecomposition:
    kind: str
    epochs: np.ndarray
    ladder_values: np.ndarray

    def __post_init__(self):
        if self.kind not in LADDER_KINDS:
            raise ConfigurationError(f"unknown ladder kind {self.kind!r}")
        if np.any(np.diff(self.epochs) <= 0):
            raise ConfigurationError("ladder epochs must be strictly increasing")


# ---------------------------------------------------------------------------
# parameter streams

def replica_rng(seed: int, replica: int) -> np.random.Generator:
    """The substream owned by one replica; Philox keyed by (seed, replica)."""
    key = np.array([seed % (1 << 64), replica], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _draw_params(system: SystemSpec, n: int, rng: np.random.Generator):
    """(a, b) arrays for n steps; a is None for reflected_rw (Lipschitz 1)."""
    if system.joint_pairs is not None:
        pairs = np.array([[a, b] for (a, b), _ in system.joint_pairs])
        weights = np.array([w for _, w in system.joint_pairs])
        idx = rng.choice(len(weights), size=n, p=weights)
        return pairs[idx, 0], pairs[idx, 1]
    if system.family == "reflected_rw":
        return None, distributions.sample_array(system.b_law, n, rng)
    a = distributions.sample_array(system.a_law, n, rng)
    b = distributions.sample_array(system.b_law, n, rng)
    return a, b


def _recorded_mask(lo: int, hi: int, record, horizon: int) -> np.ndarray:
    """Which global step indices in (lo, hi] are recorded."""
    idx = np.arange(lo + 1, hi + 1)
    if record == "full":
        return np.ones(idx.size, dtype=bool)
    if record == "summary":
        return idx == horizon
    k = int(record[1])
    return (idx % k == 0) | (idx == horizon)


def _nonnegative_offsets(system: SystemSpec) -> bool:
    if system.joint_pairs is not None:
        return all(b >= 0 for (_, b), _ in system.joint_pairs)
    return distributions.support(system.b_law)[0] >= 0


def _simulate_replica(plan: SimulationPlan, replica: int) -> TrajectoryBundle:
    system = plan.system
    n = plan.horizon
    # Nonnegative affine systems run in log space: the linear state grows like
    # exp(range of S_n) and exceeds float64 at long horizons, while the
    # log-state recursion is exact-rank stable at any horizon.
    log_state = (
        system.family == "affine"
        and all(x >= 0 for x in plan.starting_points)
        and _nonnegative_offsets(system)
    )
    family = _kernels.AFFINE_LOG if log_state else _FAMILY_CODE[system.family]
    rng = replica_rng(plan.seed, replica)
    x = np.array(plan.starting_points, dtype=float)
    n_pts = x.size
    rec_idx = [np.array([0])]
    rec_paths = [x.reshape(n_pts, 1).copy()]
    if log_state:
        with np.errstate(divide="ignore"):
            x = np.log(x)
    rec_s = [np.array([0.0])]
    rec_m = [np.array([0.0])]
    full_a = [] if plan.record == "full" else None
    full_b = [] if plan.record == "full" else None

    s_carry = 0.0
    m_carry = 0.0
    ones = None
    for lo in range(0, n, CHUNK_STEPS):
        hi = min(lo + CHUNK_STEPS, n)
        nc = hi - lo
        a, b = _draw_params(system, nc, rng)
        if a is None:
            s_chunk = np.full(nc, s_carry)
            if ones is None or ones.size != nc:
                ones = np.ones(nc)
            a_arr = ones
        else:
            loga = np.log(a)
            s_chunk = s_carry + np.cumsum(loga)
            a_arr = a
        m_chunk = np.maximum.accumulate(np.maximum(s_chunk, m_carry))

        out = np.empty((n_pts, nc))
        if log_state:
            with np.errstate(divide="ignore"):
                _kernels.iterate_paths(family, x, loga, np.log(b), out)
            bad_mask = np.isnan(out)
        else:
            _kernels.iterate_paths(family, x, a_arr, b, out)
            bad_mask = ~np.isfinite(out)
        if np.any(bad_mask):
            bad = np.argwhere(bad_mask)[0]
            raise SdsError(
                f"non-finite state at replica {replica}, step {lo + 1 + int(bad[1])}, "
                f"starting point index {int(bad[0])}"
            )

        mask = _recorded_mask(lo, hi, plan.record, n)
        if np.any(mask):
            rec_idx.append(np.arange(lo + 1, hi + 1)[mask])
            chunk_vals = out[:, mask]
            if log_state:
                # values beyond float range are legitimately +inf here; the
                # exact dynamics stay in the log-space carry
                with np.errstate(over="ignore"):
                    rec_paths.append(np.exp(chunk_vals))
            else:
                rec_paths.append(chunk_vals.copy())
            rec_s.append(s_chunk[mask])
            rec_m.append(m_chunk[mask])
        if full_a is not None:
            full_a.append(np.asarray(a_arr).copy())
            full_b.append(b)
        s_carry = float(s_chunk[-1])
        m_carry = float(m_chunk[-1])

    indices = np.concatenate(rec_idx)
    s = np.concatenate(rec_s)
    heights = plan.extended_height * np.exp(s) if plan.track_extended else None
    return TrajectoryBundle(
        replica=replica,
        family=system.family,
        starting_points=np.array(plan.starting_points),
        indices=indices,
        paths=np.concatenate(rec_paths, axis=1),
        s=s,
        m=np.concatenate(rec_m),
        horizon=n,
        a=np.concatenate(full_a) if full_a is not None else None,
        b=np.concatenate(full_b) if full_b is not None else None,
        extended_heights=heights,
    )


def simulate(plan: SimulationPlan, workers: int = 1) -> Iterator[TrajectoryBundle]:
    """Stream one TrajectoryBundle per replica, in replica order.

    The worker count only affects wall time, never the results.
    """
    if workers <= 1:
        for r in range(plan.replicas):
            yield _simulate_replica(plan, r)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(lambda r: _simulate_replica(plan, r), range(plan.replicas))


# ---------------------------------------------------------------------------
# right process (affine only)

@dataclass
class RightProcessPath:
    replica: int
    starting_points: np.ndarray
    values: np.ndarray  # (n_points, horizon+1), values[:, 0] = starting points
    slopes: np.ndarray  # A_{0,n}, n = 0..horizon


def right_process(plan: SimulationPlan) -> Iterator[RightProcessPath]:
    """R_n^x = F_1 o ... o F_n(x), computed incrementally for affine maps.

    R_n = A_{0,n} x + sum_{k<=n} A_{0,k-1} b_k; each step appends one term, no
    recomputation.  Reflected families have no such incremental form and are
    deliberately unsupported.
    """
    if plan.system.family != "affine":
        raise UnsupportedError("right_process is only available for the affine family")
    for r in range(plan.replicas):
        rng = replica_rng(plan.seed, r)
        parts_q = [np.array([0.0])]
        parts_p = [np.array([1.0])]
        s_carry = 0.0
        q_carry = 0.0
        for lo in range(0, plan.horizon, CHUNK_STEPS):
            nc = min(lo + CHUNK_STEPS, plan.horizon) - lo
            a, b = _draw_params(plan.system, nc, rng)
            s = s_carry + np.cumsum(np.log(a))
            prod_prev = np.exp(np.concatenate([[s_carry], s[:-1]]))
            q = q_carry + np.cumsum(prod_prev * b)
            parts_q.append(q)
            parts_p.append(np.exp(s))
            s_carry = float(s[-1])
            q_carry = float(q[-1])
        slopes = np.concatenate(parts_p)
        q_all = np.concatenate(parts_q)
        x = np.array(plan.starting_points, dtype=float)
        yield RightProcessPath(
            replica=r,
            starting_points=x,
            values=slopes[None, :] * x[:, None] + q_all[None, :],
            slopes=slopes,
        )


# ---------------------------------------------------------------------------
# ladder epochs

def ladder_epochs(series, kind: str) -> LadderDecomposition:
    """All ladder epochs of a walk given as (S_0=0, S_1, ..., S_n).

    An epoch is a step whose value matches or beats every earlier value
    (direction and strictness per kind).
    """
    s = np.asarray(series, dtype=float)
    if s.ndim != 1 or s.size < 1 or s[0] != 0.0:
        raise ConfigurationError("series must be 1-d and start with S_0 = 0")
    if kind not in LADDER_KINDS:
        raise ConfigurationError(f"unknown ladder kind {kind!r}")
    if s.size == 1:
        return LadderDecomposition(kind, np.array([], dtype=int), np.array([]))
    if kind.startswith("ascending"):
        prefix = np.maximum.accumulate(s)[:-1]
        hit = s[1:] > prefix if kind == "ascending_strict" else s[1:] >= prefix
    else:
        prefix = np.minimum.accumulate(s)[:-1]
        hit = s[1:] < prefix if kind == "descending_strict" else s[1:] <= prefix
    epochs = np.flatnonzero(hit) + 1
    return LadderDecomposition(kind, epochs, s[epochs])


def embedded_bundle(bundle: TrajectoryBundle, decomp: LadderDecomposition) -> TrajectoryBundle:
    """Sub-sample a fully recorded bundle at epoch 0 and the given ladder epochs."""
    if bundle.indices.size != bundle.horizon + 1:
        raise SdsError("embedding needs a fully recorded bundle")
    epochs = np.asarray(decomp.epochs, dtype=int)
    truncated = bool(np.any(epochs > bundle.horizon))
    epochs = epochs[epochs <= bundle.horizon]
    take = np.concatenate([[0], epochs]) if epochs.size == 0 or epochs[0] != 0 else epochs
    heights = bundle.extended_heights
    return TrajectoryBundle(
        replica=bundle.replica,
        family=bundle.family,
        starting_points=bundle.starting_points,
        indices=bundle.indices[take],
        paths=bundle.paths[:, take],
        s=bundle.s[take],
        m=bundle.m[take],
        horizon=bundle.horizon,
        extended_heights=heights[take] if heights is not None else None,
        truncated=truncated,
    )
