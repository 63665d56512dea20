"""Scenario builders and analyzers for the fluxon experiments.

Each ``run_*`` function assembles a world, steps it, and reduces the trace
to the closed-loop observable it is about, together with the topological
prediction for that observable.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import itertools
import math

import numpy as np

from . import stats
from .dynamics import StepPolicy, materialize_world, run
from .errors import Coincident, EndpointsMismatch, InsufficientEnsemble
from .geometry import TWO_PI, wrap_positive, wrap_signed
from .model import (
    BathSpec,
    CircleOrbit,
    FixedPoint,
    FluxonSpec,
    Polyline,
    Rect,
    ScalarPotential,
    SourceSpec,
    WorldSpec,
    cyclic_bath,
    uniform_bath,
)

START = (1.0, 0.0)


# -- loop builders ----------------------------------------------------------


def circle_loop(n, radius=1.0, center=(0.0, 0.0), period=1.0):
    """Uniform circle through ``center + (radius, 0)`` wound ``n`` times.

    Negative ``n`` runs clockwise. ``n == 0`` gives a circle of the same
    radius next to the center, which does not enclose it. Returns
    ``(trajectory, duration)``.
    """
    cx, cy = center
    if n == 0:
        return CircleOrbit((cx + 2.0 * radius, cy), radius, TWO_PI / period, math.pi), period
    return CircleOrbit((cx, cy), radius, math.copysign(TWO_PI, n) / period, 0.0), abs(n) * period


def wavy_loop(n, lobes=3, amplitude=0.3, duration=1.0, vertices=96, center=(0.0, 0.0), radius=1.0):
    """Polyline loop r(a) = radius * (1 + amplitude sin(lobes a)) wound n times.

    Starts and ends at ``center + (radius, 0)``; vertices are spread
    uniformly in time over ``duration``.
    """
    if n == 0:
        return FixedPoint((center[0] + radius, center[1]))
    m = vertices * abs(n)
    a = np.linspace(0.0, math.copysign(TWO_PI, n) * abs(n), m + 1)
    r = radius * (1.0 + amplitude * np.sin(lobes * a))
    pts = np.column_stack([center[0] + r * np.cos(a), center[1] + r * np.sin(a)])
    pts[0] = pts[-1] = (center[0] + radius, center[1])
    return Polyline(tuple(np.linspace(0.0, duration, m + 1)), tuple(map(tuple, pts)))


def star_loop(rng, vertices=12, r_range=(0.5, 1.5), start=START, duration=1.0):
    """Random star-shaped polygon around the origin, once counter-clockwise.

    The first and last vertex are ``start``; the others sit at equally
    spaced polar angles with radii drawn uniformly from ``r_range``.
    """
    rng = np.random.default_rng(rng)
    a0 = math.atan2(start[1], start[0])
    a = a0 + TWO_PI * np.arange(1, vertices) / vertices
    r = rng.uniform(*r_range, size=vertices - 1)
    mid = np.column_stack([r * np.cos(a), r * np.sin(a)])
    pts = [tuple(start), *map(tuple, mid), tuple(start)]
    return Polyline(tuple(np.linspace(0.0, duration, vertices + 1)), tuple(pts))


def _resolve_bath(bath, seed, n_fluxons, factory=uniform_bath):
    if bath is None:
        return BathSpec()
    if isinstance(bath, BathSpec):
        return bath if seed is None else replace(bath, master_seed=seed)
    if factory is uniform_bath:
        return uniform_bath(int(bath), 0 if seed is None else seed, n_fluxons)
    return factory(int(bath), 0 if seed is None else seed)


def derive_seed(seed, *keys):
    """Deterministic 64-bit seed for an ensemble member."""
    state = np.random.SeedSequence(int(seed) % 2**64, spawn_key=tuple(int(k) for k in keys))
    lo, hi = state.generate_state(2, np.uint32)
    return int(lo) | (int(hi) << 32)


def map_members(fn, items, parallelism=1):
    """``list(map(fn, items))``, optionally over a process pool.

    Output order follows ``items`` whatever the execution order.
    """
    items = list(items)
    if parallelism <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * parallelism))))


# -- single fluxon -----------------------------------------------------------


@dataclass(frozen=True)
class SingleFluxonResult:
    xi: float
    delta_phi: float
    delta_theta: float
    n: int | None
    trace: object = field(repr=False)


def run_single_fluxon(xi, loop=None, duration=None, policy=StepPolicy(), source=None):
    """One fluxon, no bath: the internal angle tracks xi times the polar angle."""
    if loop is None:
        loop, duration = circle_loop(1)
    if duration is None:
        duration = loop.end_time
    src = SourceSpec(xi, source or FixedPoint())
    spec = WorldSpec(src, (FluxonSpec(0, loop),), duration)
    tr = run(materialize_world(spec, policy), policy)
    st = tr.final
    return SingleFluxonResult(
        xi, float(tr.phi[-1, 0] - tr.phi[0, 0]), float(st.dtheta[0]), tr.loop_windings.get(0), tr
    )


# -- two fluxons -------------------------------------------------------------


@dataclass(frozen=True)
class TwoFluxonResult:
    """Closed-loop outcome for a pair of fluxons that meet at both ends.

    ``closure_residual`` is ((gamma_f - gamma_i) - 2 pi n xi) reduced to
    [-pi, pi); ``bath_offset`` is how far the bath part of gamma_f - gamma_i
    sits from 2 pi N.
    """

    xi: float
    n: int
    N: int
    delta_gamma: float
    bath_contribution: float
    bath_offset: float
    closure_residual: float
    predicted: float
    gamma_mid: float
    tolerance: float
    times: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    trace: object = field(repr=False, default=None)

    @property
    def passed(self):
        return abs(self.closure_residual) < self.tolerance

    def summary(self):
        return {
            "n": self.n,
            "N": self.N,
            "delta_gamma": self.delta_gamma,
            "bath_contribution": self.bath_contribution,
            "closure_residual": self.closure_residual,
            "predicted": self.predicted,
            "gamma_mid_mod": float(wrap_positive(self.gamma_mid)),
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def _two_fluxon_result(tr, xi, policy, mid, keep_trace, extra_phase=0.0):
    if (0, 1) not in tr.closures:
        raise EndpointsMismatch("fluxons do not coincide at both ends of the run")
    c = tr.closures[(0, 1)]
    g = tr.gamma()
    dg = float(g[-1] - g[0])
    predicted = TWO_PI * c.n * xi + extra_phase
    return TwoFluxonResult(
        xi=xi,
        n=c.n,
        N=c.N,
        delta_gamma=dg,
        bath_contribution=c.bath,
        bath_offset=c.bath_offset,
        closure_residual=wrap_signed(dg - predicted),
        predicted=float(wrap_positive(predicted)),
        gamma_mid=float(g[tr.at(mid)]) if mid is not None else math.nan,
        tolerance=policy.closure_tol,
        times=tr.times,
        gamma=g,
        trace=tr if keep_trace else None,
    )


def two_fluxon_loop_world(xi, n=1, bath=200, seed=0, loop=None, duration=None, period=1.0):
    """World for the fixed-reference protocol: fluxon 0 waits at the start,
    fluxon 1 goes round ``n`` times and comes back."""
    if loop is None:
        loop, T = circle_loop(n, period=period)
        duration = T if duration is None else duration
    elif duration is None:
        duration = loop.end_time
    start = tuple(loop.position(0.0))
    return WorldSpec(
        SourceSpec(xi),
        (FluxonSpec(0, FixedPoint(start)), FluxonSpec(1, loop)),
        duration,
        bath=_resolve_bath(bath, seed, 2),
    )


def run_two_fluxon_loop(
    xi, n=1, bath=200, seed=0, policy=StepPolicy(), loop=None, duration=None, mid_fraction=0.5, keep_trace=True
):
    """Reference fluxon fixed, the other winds ``n`` times around the source.

    ``bath`` is a particle count (one species coupled +1 to both fluxons) or
    a full BathSpec. When ``loop`` is given it overrides the default circle
    and ``n`` is then read off the trajectory.
    """
    spec = two_fluxon_loop_world(xi, n, bath, seed, loop, duration)
    mid = mid_fraction * spec.duration if mid_fraction is not None else None
    tr = run(materialize_world(spec, policy), policy, checkpoints=() if mid is None else (mid,))
    res = _two_fluxon_result(tr, xi, policy, mid, keep_trace)
    if loop is None and duration is None and res.n != n:
        raise AssertionError(f"loop wound {res.n} times, expected {n}")
    return res


def run_two_fluxon_open(
    xi, path1, path2, duration, source_path=None, bath=None, seed=0, policy=StepPolicy(), keep_trace=True
):
    """Both fluxons move from a shared start to a shared end.

    Their paths form a closed loop (path2, then path1 reversed); ``n`` is
    the winding of that loop relative to the (possibly moving) source.
    """
    eps = policy.collision_eps
    for t, label in ((0.0, "start"), (duration, "end")):
        a = np.asarray(path1.position(t))
        b = np.asarray(path2.position(t))
        if np.hypot(*(a - b)) > eps:
            raise EndpointsMismatch(f"paths differ at the {label}: {a} vs {b}")
    spec = WorldSpec(
        SourceSpec(xi, source_path or FixedPoint()),
        (FluxonSpec(0, path1), FluxonSpec(1, path2)),
        duration,
        bath=_resolve_bath(bath, seed, 2),
    )
    tr = run(materialize_world(spec, policy), policy, checkpoints=(0.5 * duration,))
    return _two_fluxon_result(tr, xi, policy, 0.5 * duration, keep_trace)


# -- three fluxons -----------------------------------------------------------


@dataclass(frozen=True)
class ThreeFluxonResult:
    xi: float
    windings: tuple
    delta_phi: np.ndarray
    delta_phi_sum: float
    closure_residual: float
    predicted: float
    tolerance: float
    times: np.ndarray = field(repr=False)
    phi_sum: np.ndarray = field(repr=False)
    trace: object = field(repr=False, default=None)

    @property
    def passed(self):
        return abs(self.closure_residual) < self.tolerance

    def summary(self):
        return {
            "n": list(self.windings),
            "delta_phi_sum": self.delta_phi_sum,
            "delta_phi_mod": [float(v) for v in wrap_positive(self.delta_phi)],
            "closure_residual": self.closure_residual,
            "predicted": self.predicted,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def three_fluxon_loops(windings, period=1.0):
    """Three distinct loops through START, fluxon k winding windings[k] times."""
    T = period * max(1, *(abs(n) for n in windings))
    loops = tuple(wavy_loop(n, lobes=2 + k, amplitude=0.15 * k, duration=T) for k, n in enumerate(windings))
    return loops, T


def run_three_fluxon(xi, windings=(1, 0, 0), bath=200, seed=0, policy=StepPolicy(), loops=None, duration=None, keep_trace=True):
    """Three fluxons and the cyclic A/B/C bath; only the sum of the three
    internal angles is protected."""
    if loops is None:
        loops, duration = three_fluxon_loops(windings)
    eps = policy.collision_eps
    for t in (0.0, duration):
        p = np.array([tr.position(t) for tr in loops])
        if np.max(np.hypot(*(p - p[0]).T)) > eps:
            raise EndpointsMismatch(f"fluxons do not share a point at t={t}")
    if isinstance(bath, BathSpec):
        bspec = bath if seed is None else replace(bath, master_seed=seed)
    else:
        bspec = cyclic_bath(int(bath or 0), seed or 0)
    spec = WorldSpec(SourceSpec(xi), tuple(FluxonSpec(k, lp) for k, lp in enumerate(loops)), duration, bath=bspec)
    tr = run(materialize_world(spec, policy), policy)
    ns = tuple(tr.loop_windings[k] for k in range(3))
    dphi = tr.phi[-1] - tr.phi[0]
    psum = tr.phi.sum(axis=1)
    dsum = float(psum[-1] - psum[0])
    predicted = TWO_PI * xi * sum(ns)
    return ThreeFluxonResult(
        xi=xi,
        windings=ns,
        delta_phi=dphi,
        delta_phi_sum=dsum,
        closure_residual=wrap_signed(dsum - predicted),
        predicted=float(wrap_positive(predicted)),
        tolerance=policy.closure_tol,
        times=tr.times,
        phi_sum=psum,
        trace=tr if keep_trace else None,
    )


# -- scalar analog -----------------------------------------------------------


@dataclass(frozen=True)
class DwellSchedule:
    """Out-and-back excursion of the moving fluxon.

    start -> entry (on the region boundary) takes ``approach``; the fluxon
    then spends exactly ``dwell`` inside, going entry -> interior -> entry,
    and returns to start in another ``approach``.
    """

    start: tuple = (1.5, 0.0)
    entry: tuple = (2.0, 0.0)
    interior: tuple = (3.0, 0.0)
    approach: float = 0.5
    dwell: float = 2.0

    @property
    def duration(self):
        return 2.0 * self.approach + self.dwell

    def path(self):
        a, d = self.approach, self.dwell
        return Polyline(
            (0.0, a, a + 0.5 * d, a + d, 2.0 * a + d),
            (self.start, self.entry, self.interior, self.entry, self.start),
        )


def default_region(value):
    return ScalarPotential((Rect(2.0, 4.0, -1.0, 1.0, value),))


@dataclass(frozen=True)
class ScalarResult:
    delta_gamma: float
    target: float
    residual: float
    tolerance: float
    trace: object = field(repr=False, default=None)

    @property
    def passed(self):
        return abs(self.residual) < self.tolerance

    def summary(self):
        return {
            "delta_gamma": self.delta_gamma,
            "target": self.target,
            "closure_residual": self.residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def run_scalar_ab(potential=None, schedule=DwellSchedule(), bath=None, seed=0, policy=StepPolicy(dt=1e-3), xi=0.0, keep_trace=True):
    """Phase from dwelling in a constant potential.

    Fluxon 0 waits at ``schedule.start`` (where V must vanish); fluxon 1
    makes the excursion. The target is V(interior) * dwell mod 2pi, and the
    tolerance 2 |V| dt allows for the midpoint rule at the two crossings.
    """
    if potential is None:
        potential = default_region(1.5)
    v_in = float(potential.value_at(np.array(schedule.interior)))
    if float(potential.value_at(np.array(schedule.start))) != 0.0:
        raise ValueError("the reference fluxon must sit where V = 0")
    spec = WorldSpec(
        SourceSpec(xi),
        (FluxonSpec(0, FixedPoint(schedule.start)), FluxonSpec(1, schedule.path())),
        schedule.duration,
        bath=_resolve_bath(bath, seed, 2),
        potential=potential,
    )
    tr = run(materialize_world(spec, policy), policy)
    g = tr.gamma()
    dg = float(g[-1] - g[0])
    target = v_in * schedule.dwell
    c = tr.closures[(0, 1)]
    expected = target + TWO_PI * c.n * xi
    tol = max(2.0 * abs(v_in) * policy.dt, policy.closure_tol)
    return ScalarResult(dg, float(wrap_positive(target)), wrap_signed(dg - expected), tol, tr if keep_trace else None)


# -- locality probe ----------------------------------------------------------


@dataclass(frozen=True)
class LocalityProbeResult:
    xi_candidates: tuple
    segment_fraction: float
    bins: int
    segment_samples: dict = field(repr=False)
    closed_samples: dict = field(repr=False)
    histograms: dict = field(repr=False)
    pairwise_tv: dict
    null_threshold: float
    resultant_lengths: dict
    closed_separation: dict
    predicted_separation: dict
    failures: int

    @property
    def locally_distinguishable(self):
        return any(v > self.null_threshold for v in self.pairwise_tv.values())

    @property
    def separation_error(self):
        return max(
            (abs(wrap_signed(self.closed_separation[k] - self.predicted_separation[k])) for k in self.closed_separation),
            default=0.0,
        )


_RESEED_ATTEMPTS = 5


def _probe_member(args):
    xi, n, bath, (base, ci, j), fraction, policy = args
    for attempt in range(_RESEED_ATTEMPTS):
        try:
            res = run_two_fluxon_loop(
                xi, n, bath, derive_seed(base, ci, j, attempt), policy, mid_fraction=fraction, keep_trace=False
            )
        except Coincident:
            continue
        return res.gamma_mid, res.delta_gamma, attempt
    raise Coincident(f"probe member {(ci, j)} collided on {_RESEED_ATTEMPTS} seeds")


def run_locality_probe(
    xi_candidates=(0.0, 0.37),
    segment_fraction=0.5,
    ensemble_size=2000,
    bath=500,
    seed=0,
    bins=64,
    n_splits=200,
    n=1,
    policy=StepPolicy(),
    parallelism=1,
    min_ensemble=100,
):
    """Compare ensembles of gamma over part of the loop, for several xi.

    For each candidate, ``ensemble_size`` independent baths are run. The
    partial-loop samples (gamma mod 2pi at ``segment_fraction`` of the run)
    are compared by binned total variation against a null threshold made
    from random same-xi half splits; the closed-loop samples are compared
    by their circular means.
    """
    if ensemble_size < min_ensemble:
        raise InsufficientEnsemble(f"ensemble of {ensemble_size} is below the minimum {min_ensemble}")
    if not 0.0 < segment_fraction <= 1.0:
        raise ValueError("segment_fraction must lie in (0, 1]")
    xis = tuple(float(x) for x in xi_candidates)
    jobs = [
        (xi, n, bath, (seed, ci, j), segment_fraction, policy)
        for ci, xi in enumerate(xis)
        for j in range(ensemble_size)
    ]
    out = map_members(_probe_member, jobs, parallelism)
    failures = sum(r[2] for r in out)
    seg, closed = {}, {}
    for ci, xi in enumerate(xis):
        chunk = out[ci * ensemble_size : (ci + 1) * ensemble_size]
        seg[xi] = stats.circular_sample([r[0] for r in chunk])
        closed[xi] = stats.circular_sample([r[1] for r in chunk])
    threshold, _ = stats.split_null_tv(list(seg.values()), bins, n_splits, rng=derive_seed(seed, 2**31))
    tv, sep, pred = {}, {}, {}
    for a, b in itertools.combinations(xis, 2):
        tv[(a, b)] = stats.tv_distance_binned(seg[a], seg[b], bins)
        sep[(a, b)] = float(wrap_positive(_circ_mean(closed[b]) - _circ_mean(closed[a])))
        pred[(a, b)] = float(wrap_positive(TWO_PI * n * (b - a)))
    return LocalityProbeResult(
        xi_candidates=xis,
        segment_fraction=segment_fraction,
        bins=bins,
        segment_samples=seg,
        closed_samples=closed,
        histograms={xi: stats.histogram(seg[xi], bins) for xi in xis},
        pairwise_tv=tv,
        null_threshold=threshold,
        resultant_lengths={xi: stats.resultant_length(seg[xi]) for xi in xis},
        closed_separation=sep,
        predicted_separation=pred,
        failures=failures,
    )


def _circ_mean(a):
    return math.atan2(np.mean(np.sin(a)), np.mean(np.cos(a)))
