"""Batch experiment runner: one TOML config in, reproducible artifacts out.

Every run writes into its output directory:
  manifest.json  - config echo, resolved seed, library versions, wall time
  report.json    - the experiment's summary numbers (deterministic)
  data files     - kind-specific CSV (or fixed-layout binary for huge runs)

Re-running the same config reproduces the data files and report byte for
byte; only the manifest carries timestamps.  Exit codes: 0 success, 2 config
error, 3 exact-identity/assertion failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time
from fractions import Fraction
from importlib import metadata
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import diagnostics, distributions, dyadic, engine, measures
from .errors import ConfigurationError, DomainError, IdentityViolation, SdsError
from .maps import SystemSpec

OUTPUT_ROOT_ENV = "SDSKIT_OUT"

KINDS = (
    "simulate", "classify", "invariant", "ratio", "kac",
    "criteria", "wiener_hopf", "dyadic", "probe",
)

# rows above this go to the fixed-layout binary format instead of CSV
_CSV_ROW_LIMIT = 10_000_000
_BINARY_MAGIC = b"SDSKBIN1"

# section policy per kind: "required" | "optional" | None (forbidden)
_SECTIONS = {
    "simulate": {"system": "required", "plan": "required"},
    "classify": {"system": "required", "plan": "required"},
    "invariant": {"system": "required", "plan": "required"},
    "ratio": {"system": "required", "plan": "required"},
    "kac": {"system": "required", "plan": "required"},
    "wiener_hopf": {"system": "required", "plan": "required"},
    "criteria": {"system": "required", "plan": None},
    "dyadic": {"system": None, "plan": "optional"},
    "probe": {"system": None, "plan": None},
}


def _reject_unknown(table: dict, allowed, where: str) -> None:
    extra = sorted(set(table) - set(allowed))
    if extra:
        raise ConfigurationError(f"unknown key(s) {extra} in {where}")


_LAW_FIELDS = {
    "twopoint": ("values",),
    "uniform": ("lo", "hi"),
    "exponential": ("rate",),
    "lognormal": ("mu", "sigma"),
    "pareto": ("a",),
    "constant": ("c",),
    "tabulated": ("grid", "density"),
}


def _law_from_table(table: dict, where: str):
    if "kind" not in table:
        raise ConfigurationError(f"{where} needs a 'kind'")
    kind = table["kind"]
    if kind not in _LAW_FIELDS:
        raise ConfigurationError(f"{where}: unknown law kind {kind!r}")
    _reject_unknown(table, ("kind",) + _LAW_FIELDS[kind], where)
    missing = [f for f in _LAW_FIELDS[kind] if f not in table]
    if missing:
        raise ConfigurationError(f"{where}: missing {missing} for law kind {kind!r}")
    if kind == "twopoint":
        return distributions.TwoPoint(tuple(tuple(p) for p in table["values"]))
    if kind == "uniform":
        return distributions.Uniform(table["lo"], table["hi"])
    if kind == "exponential":
        return distributions.Exponential(table["rate"])
    if kind == "lognormal":
        return distributions.LogNormal(table["mu"], table["sigma"])
    if kind == "pareto":
        return distributions.ParetoType(table["a"])
    if kind == "constant":
        return distributions.Constant(table["c"])
    return distributions.TabulatedDensity(tuple(table["grid"]), tuple(table["density"]))


def _system_from_table(table: dict) -> SystemSpec:
    _reject_unknown(table, ("family", "b_law", "a_law", "joint", "reference_point"), "[system]")
    if "family" not in table:
        raise ConfigurationError("[system] needs a 'family'")
    joint = table.get("joint")
    if joint is not None:
        joint = tuple(((a, b), w) for (a, b), w in ((tuple(p[0]), p[1]) for p in joint))
    return SystemSpec(
        family=table["family"],
        b_law=_law_from_table(table["b_law"], "[system.b_law]") if "b_law" in table else None,
        a_law=_law_from_table(table["a_law"], "[system.a_law]") if "a_law" in table else None,
        joint_pairs=joint,
        reference_point=table.get("reference_point", 0.0),
    )


def _plan_from_table(table: dict, system: SystemSpec, seed_override) -> engine.SimulationPlan:
    _reject_unknown(
        table,
        ("horizon", "replicas", "seed", "points", "record", "track_extended", "extended_height"),
        "[plan]",
    )
    record = table.get("record", "full")
    if isinstance(record, list):
        record = (record[0], int(record[1]))
    return engine.SimulationPlan(
        system=system,
        starting_points=tuple(table.get("points", (0.0,))),
        horizon=int(table.get("horizon", 1000)),
        replicas=int(table.get("replicas", 1)),
        seed=int(seed_override if seed_override is not None else table.get("seed", 0)),
        track_extended=bool(table.get("track_extended", False)),
        extended_height=float(table.get("extended_height", 1.0)),
        record=record,
    )


# ---------------------------------------------------------------------------
# data writers

def _write_csv(path: Path, header: str, rows: np.ndarray, fmt) -> None:
    with open(path, "wb") as fh:
        fh.write((header + "\n").encode())
        np.savetxt(fh, rows, fmt=fmt, delimiter=",")


def _write_trajectory_rows(out_dir: Path, rows: np.ndarray, fmt_choice: str) -> str:
    """rows: float64 (n, 5) with columns replica, n, x_index, value, s_n.

    Binary layout (documented in the README): 8-byte magic "SDSKBIN1",
    little-endian uint64 row count, little-endian uint32 column count (5),
    then row-major little-endian float64 values.
    """
    use_binary = fmt_choice == "binary" or (fmt_choice == "auto" and rows.shape[0] > _CSV_ROW_LIMIT)
    if use_binary:
        path = out_dir / "trajectories.bin"
        with open(path, "wb") as fh:
            fh.write(_BINARY_MAGIC)
            fh.write(np.uint64(rows.shape[0]).tobytes())
            fh.write(np.uint32(rows.shape[1]).tobytes())
            fh.write(rows.astype("<f8").tobytes())
    else:
        path = out_dir / "trajectories.csv"
        _write_csv(path, "replica,n,x_index,value,s_n", rows,
                   fmt=["%d", "%d", "%d", "%.17g", "%.17g"])
    return path.name


def _bundle_rows(bundle: engine.TrajectoryBundle) -> np.ndarray:
    n_pts, n_rec = bundle.paths.shape
    rows = np.empty((n_pts * n_rec, 5))
    for i in range(n_pts):
        block = rows[i * n_rec : (i + 1) * n_rec]
        block[:, 0] = bundle.replica
        block[:, 1] = bundle.indices
        block[:, 2] = i
        block[:, 3] = bundle.paths[i]
        block[:, 4] = bundle.s
    return rows


# ---------------------------------------------------------------------------
# kind handlers: (config, system, plan, params, out_dir, workers) -> report dict

def _run_simulate(system, plan, params, out_dir, workers):
    _reject_unknown(params, ("format",), "[params]")
    fmt_choice = params.get("format", "auto")
    if fmt_choice not in ("auto", "csv", "binary"):
        raise ConfigurationError(f"bad format {fmt_choice!r}")
    all_rows = []
    terminals = []
    for bundle in engine.simulate(plan, workers=workers):
        all_rows.append(_bundle_rows(bundle))
        terminals.append(bundle.terminal)
    rows = np.concatenate(all_rows)
    fname = _write_trajectory_rows(out_dir, rows, fmt_choice)
    term = np.concatenate(terminals)
    return {
        "data_file": fname,
        "rows": int(rows.shape[0]),
        "terminal": {
            "count": int(term.size),
            "mean": float(term.mean()),
            "min": float(term.min()),
            "max": float(term.max()),
        },
    }


def _run_classify(system, plan, params, out_dir, workers):
    allowed = ("r0_quantile", "return_fraction", "transient_factor",
               "transient_fraction", "min_replicas")
    _reject_unknown(params, allowed, "[params]")
    thresholds = diagnostics.ClassifyThresholds(**{k: params[k] for k in allowed if k in params})
    summaries = [
        diagnostics.summarize_for_classify(b) for b in engine.simulate(plan, workers=workers)
    ]
    rep = diagnostics.classify_summaries(summaries, thresholds)
    rows = np.array(
        [
            [s.replica, s.final_quarter_min, int(ret), int(tr)]
            for s, ret, tr in zip(summaries, rep.per_replica_returned, rep.per_replica_transient)
        ]
    )
    _write_csv(out_dir / "replicas.csv", "replica,final_quarter_min,returned,transient",
               rows, fmt=["%d", "%.17g", "%d", "%d"])
    return {
        "verdict": rep.verdict,
        "r0": rep.r0,
        "returned_fraction": rep.returned_fraction,
        "transient_fraction": rep.transient_fraction,
        "replicas": rep.replicas,
        "data_file": "replicas.csv",
    }


def _run_invariant(system, plan, params, out_dir, workers):
    _reject_unknown(params, ("bins", "grid_hi"), "[params]")
    if system.family != "reflected_rw":
        raise ConfigurationError("kind=invariant needs family=reflected_rw")
    bins = int(params.get("bins", 64))
    terminals = np.concatenate(
        [b.terminal for b in engine.simulate(plan, workers=workers)]
    )
    hi = float(params.get("grid_hi", np.quantile(terminals, 0.9999) * 1.25))
    grid = np.linspace(0.0, hi, 4097)
    inv = measures.reflected_rw_invariant_density(system.b_law, grid)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (inv.density[1:] + inv.density[:-1]) * np.diff(grid))])
    ref_cdf = lambda x: np.interp(x, grid, cum / cum[-1], left=0.0, right=1.0)
    ks = measures.ks_from_samples(terminals, ref_cdf)
    emp = measures.EmpiricalMeasure.from_samples(terminals, np.linspace(0.0, hi, bins + 1))
    rows = np.column_stack([emp.bin_edges[:-1], emp.bin_edges[1:], emp.masses])
    _write_csv(out_dir / "histogram.csv", "bin_lo,bin_hi,mass", rows,
               fmt=["%.17g", "%.17g", "%.17g"])
    return {
        "ks": ks,
        "samples": int(terminals.size),
        "total_mass": inv.total_mass,
        "data_file": "histogram.csv",
    }


def _run_ratio(system, plan, params, out_dir, workers):
    _reject_unknown(params, ("phi", "psi"), "[params]")
    phi = tuple(params.get("phi", (0.0, 0.5)))
    psi = tuple(params.get("psi", (0.5, 1.0)))
    bundle = next(iter(engine.simulate(plan, workers=workers)))
    est = measures.ratio_estimate(bundle.paths[0], phi, psi)
    return {
        "ratio": est.final if est.defined else None,
        "phi_visits": est.phi_visits,
        "psi_visits": est.psi_visits,
        "defined": est.defined,
        "steps": int(plan.horizon),
    }


def _run_kac(system, plan, params, out_dir, workers):
    _reject_unknown(params, ("threshold",), "[params]")
    if system.family != "reflected_rw":
        raise ConfigurationError("kind=kac needs family=reflected_rw")
    t = float(params.get("threshold", 0.5))
    rep = measures.kac_return_time(
        system.b_law, t, replicas=plan.replicas, horizon=plan.horizon, seed=plan.seed
    )
    return {
        "empirical_mean": rep.empirical_mean,
        "prediction": rep.prediction,
        "replicas": rep.replicas,
        "censored": rep.censored,
        "censoring_ok": rep.censoring_ok,
    }


def _run_criteria(system, plan, params, out_dir, workers):
    _reject_unknown(params, (), "[params]")
    rep = measures.recurrence_criteria(system.b_law)
    return {
        "conditions": rep.conditions,
        "raw_conditions": rep.raw_conditions,
        "sqrt_bplus": rep.sqrt_bplus,
        "sqrt_bplus_cubed": rep.sqrt_bplus_cubed,
        "mean_b": rep.mean_b if math.isfinite(rep.mean_b) else "inf",
        "iv_sequence": list(rep.iv_sequence),
    }


def _run_wiener_hopf(system, plan, params, out_dir, workers):
    _reject_unknown(params, ("grid_points",), "[params]")
    rep = measures.wiener_hopf_check(
        system.b_law,
        paths=plan.replicas,
        horizon=plan.horizon,
        seed=plan.seed,
        grid_points=int(params.get("grid_points", 4001)),
    )
    return {
        "ks": rep.ks,
        "paths": rep.paths,
        "censored": rep.censored,
        "acceptance_rate": rep.acceptance_rate,
        "acceptance_se": rep.acceptance_se,
        "density_integral": rep.density_integral,
    }


def _run_dyadic(system, plan, params, out_dir, workers):
    _reject_unknown(params, ("x", "y", "epochs", "p", "max_steps"), "[params]")
    x = Fraction(str(params.get("x", "1")))
    y = Fraction(str(params.get("y", "1/3")))
    n_epochs = int(params.get("epochs", 10))
    p = float(params.get("p", 0.5))
    max_steps = int(params.get("max_steps", 1 << 17))
    rng = np.random.Generator(np.random.Philox(key=np.array([plan.seed, 2], dtype=np.uint64)))
    eps = np.where(rng.random(max_steps) < p, 1, -1)
    walk = np.concatenate([[0], np.cumsum(eps)]).astype(float)
    decomp = engine.ladder_epochs(walk, "ascending_strict")
    if decomp.epochs.size < n_epochs:
        raise SdsError(
            f"only {decomp.epochs.size} ladder epochs within {max_steps} steps; raise max_steps"
        )
    cut = int(decomp.epochs[n_epochs - 1])
    vx = dyadic.ladder_identity_check(eps[:cut].tolist(), x)
    vy = dyadic.ladder_identity_check(eps[:cut].tolist(), y)
    epochs_out = []
    for a, b in zip(vx, vy):
        epochs_out.append({
            "epoch": a.epoch,
            "k": a.k,
            "value_x": str(a.value),
            "branch_x": a.branch,
            "value_y": str(b.value),
            "branch_y": b.branch,
            "distance": str(abs(a.value - b.value)),
        })
    with open(out_dir / "epochs.csv", "w") as fh:
        fh.write("epoch,k,value_x,value_y,distance\n")
        for e in epochs_out:
            fh.write(f"{e['epoch']},{e['k']},{e['value_x']},{e['value_y']},{e['distance']}\n")
    return {"x": str(x), "y": str(y), "epochs": epochs_out, "data_file": "epochs.csv"}


def _run_probe(system, plan, params, out_dir, workers):
    _reject_unknown(params, ("base", "seeds", "depth", "cap"), "[params]")
    base = int(params.get("base", 2))
    seeds = [Fraction(str(s)) for s in params.get("seeds", ["1"])]
    rep = dyadic.attractor_probe(
        base, seeds, int(params.get("depth", 12)), cap=int(params.get("cap", 1 << 20))
    )
    return {
        "base": rep.base,
        "depth": rep.depth,
        "points": rep.points,
        "min": str(rep.min_point),
        "max": str(rep.max_point),
        "max_float": float(rep.max_point),
        "largest_gap": str(rep.largest_gap),
        "largest_gap_float": float(rep.largest_gap),
        "truncated": rep.truncated,
    }


_HANDLERS = {
    "simulate": _run_simulate,
    "classify": _run_classify,
    "invariant": _run_invariant,
    "ratio": _run_ratio,
    "kac": _run_kac,
    "criteria": _run_criteria,
    "wiener_hopf": _run_wiener_hopf,
    "dyadic": _run_dyadic,
    "probe": _run_probe,
}


def _versions() -> dict:
    import numba
    import scipy

    try:
        own = metadata.version("sdskit")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "sdskit": own,
    }


def run_config(config_path: str, workers: int = 1, out_dir=None, seed_override=None) -> Path:
    """Execute one experiment config; returns the output directory."""
    path = Path(config_path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        config = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config parse error in {path}: {exc}") from exc

    _reject_unknown(config, ("kind", "output", "system", "plan", "params"), "config")
    kind = config.get("kind")
    if kind not in KINDS:
        raise ConfigurationError(f"kind must be one of {KINDS}, got {kind!r}")
    policy = _SECTIONS[kind]
    for section in ("system", "plan"):
        if policy[section] == "required" and section not in config:
            raise ConfigurationError(f"kind={kind} requires a [{section}] section")
        if policy[section] is None and section in config:
            raise ConfigurationError(f"kind={kind} does not take a [{section}] section")

    system = _system_from_table(config["system"]) if "system" in config else None
    if system is not None and "plan" in config:
        plan = _plan_from_table(config["plan"], system, seed_override)
    else:
        # exact-arithmetic kinds only consume a seed
        seed = config.get("plan", {}).get("seed", 0)
        _reject_unknown(config.get("plan", {}), ("seed",), "[plan]")
        plan = argparse.Namespace(seed=int(seed if seed_override is None else seed_override))
    params = config.get("params", {})

    if out_dir is None:
        root = config.get("output") or os.environ.get(OUTPUT_ROOT_ENV, "sdskit-runs")
        out_dir = Path(root) / path.stem
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    started = time.time()
    report = _HANDLERS[kind](system, plan, params, out_dir, workers)
    wall = time.time() - started

    with open(out_dir / "report.json", "w") as fh:
        json.dump({"kind": kind, **report}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = {
        "config": config,
        "config_path": str(path),
        "seed_override": seed_override,
        "workers": workers,
        "versions": _versions(),
        "wall_time_s": wall,
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_dir


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sdskit", description="Run stochastic-dynamical-system experiments from a config."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="execute one experiment config (TOML)")
    runp.add_argument("config", help="path to the experiment config")
    runp.add_argument("--workers", type=int, default=1)
    runp.add_argument("--out", default=None, help="output directory (overrides config/env)")
    runp.add_argument("--seed-override", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        out = run_config(args.config, workers=args.workers, out_dir=args.out,
                         seed_override=args.seed_override)
    except (ConfigurationError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (IdentityViolation, SdsError) as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return 3
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
