"""Command-line harness: ``fluxonsim {run,ensemble,probe,validate}``.

Artifacts land in the output directory:

    run       trace.csv, report.json
    ensemble  members.csv, summary.json, report.json
    probe     probe_report.json, probe_histograms.csv, probe_samples.csv

Exit status is 0 only when every check passes. Invalid configuration
exits with 2 and a simulation failure (e.g. a collision) with 3.
"""

import argparse
import csv
import json
from dataclasses import replace
from pathlib import Path
import sys
import time

import numpy as np

from . import __version__, stats
from .config import (
    bath_of,
    config_digest,
    dwell_of,
    load_config,
    paths_of,
    policy_of,
    potential_of,
    source_of,
    trajectory_preset,
)
from .errors import ConfigInvalid, FluxonSimError
from .experiments import (
    circle_loop,
    default_region,
    map_members,
    run_locality_probe,
    run_scalar_ab,
    run_single_fluxon,
    run_three_fluxon,
    run_two_fluxon_loop,
    run_two_fluxon_open,
    three_fluxon_loops,
)
from .geometry import TWO_PI, wrap_positive

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_CONFIG_INVALID = 2
EXIT_SIMULATION_FAILED = 3


def _check(name, value, tolerance):
    return {"name": name, "value": value, "tolerance": tolerance, "passed": bool(abs(value) < tolerance)}


def execute(cfg, seed=None, keep_trace=True):
    """Run the configured experiment once.

    Returns ``(record, trace)``: ``record`` holds the results and the checks
    they were judged by; ``trace`` is the ExperimentTrace (or None).
    """
    seed = cfg.seed if seed is None else seed
    w = cfg.world
    policy = policy_of(cfg)
    tol = policy.closure_tol
    kind = cfg.experiment
    checks = []

    if kind == "single-fluxon":
        if w.loop is not None:
            loop = trajectory_preset(w.loop, "world.loop", w.windings, w.period)
            duration = w.duration if w.duration is not None else getattr(loop, "end_time", w.period)
        else:
            loop, duration = circle_loop(w.windings, period=w.period)
            if w.duration is not None:
                duration = w.duration
        res = run_single_fluxon(w.xi, loop, duration, policy, source=source_of(cfg))
        results = {
            "n": res.n,
            "delta_phi": res.delta_phi,
            "delta_theta": res.delta_theta,
            "predicted": w.xi * res.delta_theta,
            "closure_residual": res.delta_phi - w.xi * res.delta_theta,
        }
        checks.append(_check("angle_law", results["closure_residual"], tol))
        trace = res.trace
    elif kind == "two-fluxon-loop":
        loop = duration = None
        if w.loop is not None:
            loop = trajectory_preset(w.loop, "world.loop", w.windings, w.period)
        if w.duration is not None:
            duration = w.duration
        res = run_two_fluxon_loop(
            w.xi, w.windings, bath_of(cfg, seed), None, policy, loop, duration, keep_trace=keep_trace
        )
        results = res.summary()
        checks.append(_check("closure", res.closure_residual, tol))
        checks.append(_check("bath_integrality", res.bath_offset, tol))
        trace = res.trace
    elif kind == "two-fluxon-open":
        p1, p2 = paths_of(cfg, 2)
        src = source_of(cfg)
        res = run_two_fluxon_open(w.xi, p1, p2, w.duration, src, bath_of(cfg, seed), None, policy, keep_trace)
        results = res.summary()
        checks.append(_check("closure", res.closure_residual, tol))
        checks.append(_check("bath_integrality", res.bath_offset, tol))
        trace = res.trace
    elif kind == "three-fluxon":
        if w.paths is not None:
            loops, duration = paths_of(cfg, 3), w.duration
        else:
            loops, duration = three_fluxon_loops(w.windings, w.period)
        res = run_three_fluxon(w.xi, None, bath_of(cfg, seed), None, policy, loops, duration, keep_trace)
        results = res.summary()
        checks.append(_check("closure", res.closure_residual, tol))
        trace = res.trace
    elif kind == "scalar-ab":
        potential = potential_of(cfg)
        if not potential.regions:
            potential = default_region(1.5)
        res = run_scalar_ab(potential, dwell_of(cfg), bath_of(cfg, seed), None, policy, w.xi, keep_trace)
        results = res.summary()
        checks.append(_check("scalar_phase", res.residual, res.tolerance))
        trace = res.trace
    else:
        raise ConfigInvalid(f"experiment {kind!r} is not a single run; use the probe command", "experiment")

    record = {
        "experiment": kind,
        "seed": seed,
        "results": results,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
    return record, trace


# -- artifacts -----------------------------------------------------------------


def _fmt(v):
    return format(float(v), ".17g")


def write_trace(path, trace):
    K = trace.phi.shape[1]
    header = ["t"]
    for k in range(K):
        header += [f"x_{k}", f"y_{k}", f"theta_{k}", f"phi_{k}", f"phi_mod_{k}"]
    if K >= 2:
        header.append("gamma")
    if K == 3:
        header.append("phi_sum")
    phi_mod = wrap_positive(trace.phi)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for s in range(len(trace.times)):
            row = [trace.times[s]]
            for k in range(K):
                row += [*trace.positions[s, k], trace.theta[s, k], trace.phi[s, k], phi_mod[s, k]]
            if K >= 2:
                row.append(trace.phi[s, 1] - trace.phi[s, 0])
            if K == 3:
                row.append(trace.phi[s].sum())
            out.writerow([_fmt(v) for v in row])


def _dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def _header(cfg):
    return {"tool": "fluxonsim", "version": __version__, "config_digest": config_digest(cfg)}


def _out_dir(cfg, override):
    d = Path(override or cfg.output.dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


# -- commands ------------------------------------------------------------------


def cmd_run(cfg, out=None, seed=None):
    if cfg.experiment == "locality-probe":
        return cmd_probe(cfg, out, seed)
    d = _out_dir(cfg, out)
    t0 = time.perf_counter()
    record, trace = execute(cfg, seed)
    if cfg.output.stride > 1:
        keep = np.zeros(len(trace.times), dtype=bool)
        keep[:: cfg.output.stride] = True
        keep[-1] = True
        trace = _subsample(trace, keep)
    write_trace(d / "trace.csv", trace)
    report = {**_header(cfg), **record, "wall_time_s": time.perf_counter() - t0}
    _dump_json(d / "report.json", report)
    return EXIT_OK if record["passed"] else EXIT_CHECKS_FAILED


def _subsample(trace, keep):
    return replace(
        trace,
        times=trace.times[keep],
        positions=trace.positions[keep],
        source_positions=trace.source_positions[keep],
        theta=trace.theta[keep],
        phi=trace.phi[keep],
        scalar=trace.scalar[keep],
        bath_phase=trace.bath_phase[keep],
    )


def _member(args):
    cfg, seed = args
    try:
        record, _ = execute(cfg, seed, keep_trace=False)
    except FluxonSimError as exc:
        return {"experiment": cfg.experiment, "seed": seed, "error": f"{type(exc).__name__}: {exc}"}
    return record


def member_seeds(master, count):
    return [(master + i) % 2**64 for i in range(count)]


def aggregate(cfg, master, records):
    """Order-independent summary of ensemble member records."""
    records = sorted(records, key=lambda r: r["seed"])
    ok = [r for r in records if "error" not in r]
    failed = [r["seed"] for r in records if "error" in r]
    frac = len(failed) / len(records) if records else 0.0
    summary = {
        **_header(cfg),
        "experiment": cfg.experiment,
        "master_seed": master,
        "count": len(records),
        "completed": len(ok),
        "failures": len(failed),
        "failure_fraction": frac,
        "failure_limit": cfg.ensemble.failure_limit,
        "failed_seeds": failed,
    }
    if ok:
        res = np.array([r["results"]["closure_residual"] for r in ok])
        summary["closure_residual"] = {
            "min": float(res.min()),
            "max": float(res.max()),
            "spread": float(res.max() - res.min()),
            "max_abs": float(np.abs(res).max()),
            "tolerance": ok[0]["checks"][0]["tolerance"],
        }
        if "N" in ok[0]["results"]:
            summary["N_distinct"] = len({r["results"]["N"] for r in ok})
        if "gamma_mid_mod" in ok[0]["results"]:
            ray = stats.rayleigh_test([r["results"]["gamma_mid_mod"] for r in ok])
            summary["gamma_mid"] = {
                "resultant_length": ray.R,
                "rayleigh_z": ray.z,
                "rayleigh_p": ray.p_value,
                "level": ray.level,
                "uniform": ray.uniform,
            }
        if "delta_phi_mod" in ok[0]["results"]:
            per = np.array([r["results"]["delta_phi_mod"] for r in ok])
            summary["delta_phi_circular_variance"] = [stats.circular_variance(per[:, k]) for k in range(per.shape[1])]
    summary["all_checks_passed"] = all(r["passed"] for r in ok)
    summary["passed"] = summary["all_checks_passed"] and frac <= cfg.ensemble.failure_limit
    return summary


def cmd_ensemble(cfg, out=None, seed=None, count=None, parallelism=None):
    d = _out_dir(cfg, out)
    master = cfg.seed if seed is None else seed
    count = cfg.ensemble.count if count is None else count
    par = cfg.ensemble.parallelism if parallelism is None else parallelism
    if count < 1:
        raise ConfigInvalid("must be >= 1", "ensemble.count")
    t0 = time.perf_counter()
    records = map_members(_member, [(cfg, s) for s in member_seeds(master, count)], par)
    summary = aggregate(cfg, master, records)

    with open(d / "members.csv", "w", newline="") as fh:
        out_csv = csv.writer(fh, lineterminator="\n")
        out_csv.writerow(["seed", "status", "n", "N", "closure_residual", "gamma_mid_mod", "passed", "error"])
        for r in sorted(records, key=lambda r: r["seed"]):
            if "error" in r:
                out_csv.writerow([r["seed"], "failed", "", "", "", "", "", r["error"]])
                continue
            res = r["results"]
            n = res.get("n", "")
            out_csv.writerow(
                [
                    r["seed"],
                    "ok",
                    " ".join(map(str, n)) if isinstance(n, list) else n,
                    res.get("N", ""),
                    _fmt(res["closure_residual"]),
                    _fmt(res["gamma_mid_mod"]) if "gamma_mid_mod" in res else "",
                    r["passed"],
                    "",
                ]
            )
    _dump_json(d / "summary.json", summary)
    _dump_json(d / "report.json", {**summary, "members": sorted(records, key=lambda r: r["seed"]), "wall_time_s": time.perf_counter() - t0})
    return EXIT_OK if summary["passed"] else EXIT_CHECKS_FAILED


def cmd_probe(cfg, out=None, seed=None, parallelism=None):
    p = cfg.probe
    if len(p.xi_candidates) < 2:
        raise ConfigInvalid("needs at least two candidates", "probe.xi_candidates")
    d = _out_dir(cfg, out)
    seed = cfg.seed if seed is None else seed
    par = cfg.ensemble.parallelism if parallelism is None else parallelism
    policy = policy_of(cfg)
    t0 = time.perf_counter()
    res = run_locality_probe(
        p.xi_candidates,
        p.segment_fraction,
        p.ensemble_size,
        bath_of(cfg, seed),
        seed,
        p.bins,
        p.n_splits,
        cfg.world.windings,
        policy,
        par,
    )
    tol = policy.closure_tol
    sep_err = res.separation_error
    report = {
        **_header(cfg),
        "experiment": "locality-probe",
        "seed": seed,
        "xi_candidates": list(res.xi_candidates),
        "segment_fraction": res.segment_fraction,
        "ensemble_size": p.ensemble_size,
        "bins": res.bins,
        "null_threshold": res.null_threshold,
        "pairwise_tv": [{"xi_a": a, "xi_b": b, "tv": v} for (a, b), v in res.pairwise_tv.items()],
        "local_distinguishability": "HIGH" if res.locally_distinguishable else "LOW",
        "segment_resultant_length": [{"xi": k, "R": v} for k, v in res.resultant_lengths.items()],
        "closed_separation": [
            {"xi_a": a, "xi_b": b, "measured": v, "predicted": res.predicted_separation[(a, b)]}
            for (a, b), v in res.closed_separation.items()
        ],
        "checks": [_check("closed_loop_separation", sep_err, tol)],
        "reseeded_members": res.failures,
    }
    report["passed"] = all(c["passed"] for c in report["checks"])
    report["wall_time_s"] = time.perf_counter() - t0

    edges = np.linspace(0.0, TWO_PI, res.bins + 1)
    with open(d / "probe_histograms.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", *(f"p_xi={x!r}" for x in res.xi_candidates)])
        for b in range(res.bins):
            w.writerow([_fmt(edges[b]), _fmt(edges[b + 1]), *(_fmt(res.histograms[x][b]) for x in res.xi_candidates)])
    with open(d / "probe_samples.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["xi", "member", "gamma_segment_mod", "gamma_closed_mod"])
        for x in res.xi_candidates:
            for j, (a, b) in enumerate(zip(res.segment_samples[x], res.closed_samples[x])):
                w.writerow([repr(x), j, _fmt(a), _fmt(b)])
    _dump_json(d / "probe_report.json", report)
    return EXIT_OK if report["passed"] else EXIT_CHECKS_FAILED


def build_parser():
    parser = argparse.ArgumentParser(prog="fluxonsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "run one experiment"),
        ("ensemble", "run an experiment over many seeds"),
        ("probe", "run the locality probe"),
        ("validate", "check a config file without running it"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed (u64)")
        sp.add_argument("--out", default=None, metavar="DIR")
        if name in ("ensemble", "probe"):
            sp.add_argument("--parallelism", type=int, default=None, metavar="N")
        if name == "ensemble":
            sp.add_argument("--count", type=int, default=None, metavar="N")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigInvalid("must fit in an unsigned 64-bit integer", "--seed")
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"{args.config}: ok ({cfg.experiment})")
            return EXIT_OK
        if args.command == "run":
            return cmd_run(cfg, args.out, args.seed)
        if args.command == "ensemble":
            return cmd_ensemble(cfg, args.out, args.seed, args.count, args.parallelism)
        return cmd_probe(cfg, args.out, args.seed, args.parallelism)
    except ConfigInvalid as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG_INVALID
    except OSError as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG_INVALID
    except FluxonSimError as exc:
        where = f" at t={exc.t!r}" if getattr(exc, "t", None) is not None else ""
        print(f"simulation failed{where}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SIMULATION_FAILED


if __name__ == "__main__":
    sys.exit(main())
