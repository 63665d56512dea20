"""Time stepping: move everything along its prescribed path and accumulate
each fluxon's internal angle.

Per step, fluxon k picks up

    xi * d(theta_k) + sum_i c[k, s(i)] * d(theta_ki) + V(x_k) * dt

where theta_k is its polar angle around the source and theta_ki its polar
angle around bath particle i. The three pieces are kept in separate
ledgers; the internal angle itself is always derived from them.
"""

from dataclasses import dataclass, field, replace
import itertools
import math

import numpy as np

from .errors import Coincident, NotInteger, OutOfDomain, StepTooCoarse
from .geometry import (
    COLLISION_EPS,
    MAX_SUBSTEP_ANGLE,
    TWO_PI,
    winding_of_closed_path,
    wrap_increment,
    wrap_positive,
)
from .model import Polyline, Reversed, materialize_bath, reverse_trajectory

_TIME_SLACK = 1e-12


@dataclass(frozen=True)
class StepPolicy:
    dt: float = 0.01
    max_substep_angle: float = MAX_SUBSTEP_ANGLE
    collision_eps: float = COLLISION_EPS
    closure_tol: float = 1e-9
    max_depth: int = 48

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.max_substep_angle < math.pi:
            raise ValueError("max_substep_angle must lie in (0, pi)")
        if not self.collision_eps > 0:
            raise ValueError("collision_eps must be positive")


class World:
    """A WorldSpec with its bath materialized, ready to step."""

    def __init__(self, spec, policy=StepPolicy(), *, _bath=None, _fluxon_trajs=None, _source_traj=None):
        self.spec = spec
        self.duration = float(spec.duration)
        self.xi = float(spec.source.xi)
        self.fluxon_trajs = _fluxon_trajs or tuple(f.trajectory for f in spec.fluxons)
        self.source_traj = _source_traj or spec.source.trajectory
        self.bath = _bath if _bath is not None else materialize_bath(
            spec.bath, self.duration, policy.collision_eps
        )
        C = spec.bath.coupling_matrix()
        if len(self.bath):
            self.coupling = C[:, self.bath.species_index].astype(float)
        else:
            self.coupling = np.zeros((len(spec.fluxons), 0))
        self.phi0 = np.array([f.phi0 for f in spec.fluxons], dtype=float)
        self.potential = spec.potential if spec.potential.regions else None

    @property
    def n_fluxons(self):
        return len(self.fluxon_trajs)

    def fluxon_positions(self, t):
        return np.array([tr.position(t) for tr in self.fluxon_trajs])

    def source_position(self, t):
        return np.asarray(self.source_traj.position(t), dtype=float)

    def breakpoints(self):
        """Waypoint times of fluxon and source polylines inside (0, T)."""
        out = set()
        for tr in (*self.fluxon_trajs, self.source_traj):
            rev = isinstance(tr, Reversed)
            base = tr.base if rev else tr
            if isinstance(base, Polyline):
                for t in base.times:
                    t = tr.duration - t if rev else t
                    if 0.0 < t < self.duration:
                        out.add(t)
        return sorted(out)

    def reversed(self):
        """The same world with every trajectory run backwards in time."""
        T = self.duration
        return World(
            self.spec,
            _bath=self.bath.reversed(T),
            _fluxon_trajs=tuple(reverse_trajectory(tr, T) for tr in self.fluxon_trajs),
            _source_traj=reverse_trajectory(self.source_traj, T),
        )


def materialize_world(spec, policy=StepPolicy()):
    return World(spec, policy)


@dataclass
class SimState:
    """Ledgers of one run at time ``t``.

    ``theta0``/``theta_bath0`` hold the initial principal angles; ``dtheta``
    and ``dtheta_bath`` the unwrapped change since t=0. ``a_src``/``a_bath``
    are the principal angles at ``t``, kept to form the next increment.
    """

    t: float
    phi0: np.ndarray
    xi: float
    coupling: np.ndarray
    theta0: np.ndarray
    dtheta: np.ndarray
    theta_bath0: np.ndarray
    dtheta_bath: np.ndarray
    scalar: np.ndarray
    a_src: np.ndarray
    a_bath: np.ndarray

    @property
    def theta(self):
        return self.theta0 + self.dtheta

    @property
    def bath_phase(self):
        """Per-fluxon bath contribution sum_i c[k, i] * d(theta_ki)."""
        return np.sum(self.coupling * self.dtheta_bath, axis=1)

    @property
    def phi(self):
        return self.phi0 + self.xi * self.dtheta + self.bath_phase + self.scalar

    def copy(self):
        return replace(
            self,
            **{
                f: getattr(self, f).copy()
                for f in ("dtheta", "dtheta_bath", "scalar", "a_src", "a_bath")
            },
        )


class _Engine:
    def __init__(self, world, policy):
        self.world = world
        self.policy = policy
        self.eps = policy.collision_eps
        self.check_source = world.xi != 0.0
        self.bath_mask = world.coupling != 0.0

    def angles(self, t):
        w = self.world
        fl = w.fluxon_positions(t)
        src = w.source_position(t)
        rel = fl - src
        if self.check_source:
            dist = np.hypot(rel[:, 0], rel[:, 1])
            if np.any(dist <= self.eps):
                k = int(np.argmax(dist <= self.eps))
                raise Coincident(
                    f"fluxon {k} within {self.eps} of the source at t={t!r}", t=t, pair=("source", k)
                )
        a_src = np.arctan2(rel[:, 1], rel[:, 0])
        bath = w.bath.positions(t)
        dx = fl[:, 0, None] - bath[None, :, 0]
        dy = fl[:, 1, None] - bath[None, :, 1]
        if bath.shape[0]:
            close = (np.hypot(dx, dy) <= self.eps) & self.bath_mask
            if close.any():
                k, i = map(int, np.argwhere(close)[0])
                raise Coincident(
                    f"fluxon {k} within {self.eps} of bath particle {i} at t={t!r}",
                    t=t,
                    pair=("bath", k, i),
                )
        return fl, a_src, np.arctan2(dy, dx)

    def initial_state(self):
        w = self.world
        _, a_src, a_bath = self.angles(0.0)
        K = w.n_fluxons
        return SimState(
            t=0.0,
            phi0=w.phi0.copy(),
            xi=w.xi,
            coupling=w.coupling,
            theta0=a_src.copy(),
            dtheta=np.zeros(K),
            theta_bath0=a_bath.copy(),
            dtheta_bath=np.zeros_like(a_bath),
            scalar=np.zeros(K),
            a_src=a_src,
            a_bath=a_bath,
        )

    def advance(self, st, t1, depth=0):
        """Move ``st`` in place from st.t to t1, bisecting coarse steps."""
        t0 = st.t
        _, a_src, a_bath = self.angles(t1)
        ds = wrap_increment(a_src - st.a_src)
        db = wrap_increment(a_bath - st.a_bath)
        # increments that carry zero weight in phi never force a bisection
        worst = np.max(np.abs(ds), initial=0.0) if self.check_source else 0.0
        worst = max(worst, np.max(np.abs(db), where=self.bath_mask, initial=0.0))
        if worst > self.policy.max_substep_angle:
            if depth >= self.policy.max_depth:
                raise StepTooCoarse(
                    f"increment {worst:.3g} still above threshold after {depth} bisections at t={t0!r}"
                )
            tm = 0.5 * (t0 + t1)
            self.advance(st, tm, depth + 1)
            self.advance(st, t1, depth + 1)
            return
        if self.world.potential is not None:
            mid = self.world.fluxon_positions(0.5 * (t0 + t1))
            st.scalar += self.world.potential.value_at(mid) * (t1 - t0)
        st.dtheta += ds
        st.dtheta_bath += db
        st.a_src = a_src
        st.a_bath = a_bath
        st.t = t1


def initial_state(world, policy=StepPolicy()):
    return _Engine(world, policy).initial_state()


def step(state, world, policy=StepPolicy(), dt=None):
    """Return the state advanced by ``dt`` (default ``policy.dt``)."""
    dt = policy.dt if dt is None else dt
    t1 = state.t + dt
    if t1 > world.duration + _TIME_SLACK:
        raise OutOfDomain(f"step to t={t1!r} passes the end of the run at {world.duration!r}")
    new = state.copy()
    _Engine(world, policy).advance(new, min(t1, world.duration))
    return new


@dataclass(frozen=True)
class PairClosure:
    """Closure bookkeeping for fluxons k < l that coincide at both ends.

    ``n`` counts windings of the relative loop around the source, ``N`` the
    net bath winding; ``bath`` is the bath part of gamma_f - gamma_i.
    """

    k: int
    l: int
    n: int
    N: int
    source_angle: float
    bath: float

    @property
    def bath_offset(self):
        """Distance of ``bath`` from 2*pi*N, in radians."""
        return abs(self.bath - TWO_PI * self.N)

    @property
    def source_offset(self):
        return abs(self.source_angle - TWO_PI * self.n)


@dataclass(frozen=True)
class ExperimentTrace:
    times: np.ndarray
    positions: np.ndarray  # (S, K, 2)
    source_positions: np.ndarray  # (S, 2)
    theta: np.ndarray  # (S, K) unwrapped
    phi: np.ndarray  # (S, K) unwrapped
    scalar: np.ndarray  # (S, K)
    bath_phase: np.ndarray  # (S, K)
    final: SimState
    closures: dict = field(default_factory=dict)
    loop_windings: dict = field(default_factory=dict)

    def gamma(self, k=0, l=1):
        """Relative internal angle phi_l - phi_k at every sample."""
        return self.phi[:, l] - self.phi[:, k]

    def at(self, t):
        """Index of the sample recorded at time ``t``."""
        idx = np.flatnonzero(np.abs(self.times - t) <= 1e-12 * max(1.0, abs(t)))
        if not len(idx):
            raise KeyError(f"no sample recorded at t={t!r}")
        return int(idx[0])

    @property
    def phi_mod(self):
        return wrap_positive(self.phi)


def _time_grid(T, dt, extra):
    n = int(math.floor(T / dt + 1e-9))
    grid = [i * dt for i in range(n + 1)]
    if T - grid[-1] > _TIME_SLACK:
        grid.append(T)
    else:
        grid[-1] = T
    for t in extra:
        if 0.0 < t < T and min(abs(g - t) for g in grid) > _TIME_SLACK:
            grid.append(t)
    grid.sort()
    return grid


def run(world, policy=StepPolicy(), stride=1, checkpoints=()):
    """Step ``world`` across [0, T] and record a trace.

    Samples are taken every ``stride`` grid steps, at each time in
    ``checkpoints`` (which are inserted into the grid exactly) and at T.
    """
    eng = _Engine(world, policy)
    T = world.duration
    st = eng.initial_state()
    wanted = {float(c) for c in checkpoints}
    grid = _time_grid(T, policy.dt, itertools.chain(world.breakpoints(), wanted))

    samples = []

    def record():
        samples.append(
            (
                st.t,
                world.fluxon_positions(st.t),
                world.source_position(st.t),
                st.theta,
                st.phi,
                st.scalar.copy(),
                st.bath_phase,
            )
        )

    record()
    for i, t1 in enumerate(grid[1:], start=1):
        try:
            eng.advance(st, t1)
        except Coincident as exc:
            exc.args = (f"{exc.args[0]} (step ending t={t1!r})",)
            raise
        if i % stride == 0 or t1 in wanted or i == len(grid) - 1:
            record()

    cols = list(zip(*samples))
    trace = ExperimentTrace(
        times=np.array(cols[0]),
        positions=np.array(cols[1]),
        source_positions=np.array(cols[2]),
        theta=np.array(cols[3]),
        phi=np.array(cols[4]),
        scalar=np.array(cols[5]),
        bath_phase=np.array(cols[6]),
        final=st,
        closures=_pair_closures(world, st, policy),
        loop_windings=_loop_windings(world, st, policy),
    )
    return trace


def _pair_closures(world, st, policy):
    T = world.duration
    p0 = world.fluxon_positions(0.0)
    p1 = world.fluxon_positions(T)
    out = {}
    for k, l in itertools.combinations(range(world.n_fluxons), 2):
        if np.hypot(*(p0[k] - p0[l])) > policy.collision_eps:
            continue
        if np.hypot(*(p1[k] - p1[l])) > policy.collision_eps:
            continue
        src = st.dtheta[l] - st.dtheta[k]
        bath = float(np.sum(st.coupling[l] * st.dtheta_bath[l] - st.coupling[k] * st.dtheta_bath[k]))
        # rounded, not asserted: callers judge the offsets against their tolerance
        out[(k, l)] = PairClosure(k, l, round(src / TWO_PI), round(bath / TWO_PI), float(src), bath)
    return out


def _loop_windings(world, st, policy):
    """Winding of each fluxon around the source, for fluxons whose
    position relative to the source returns to its start."""
    T = world.duration
    rel0 = world.fluxon_positions(0.0) - world.source_position(0.0)
    rel1 = world.fluxon_positions(T) - world.source_position(T)
    out = {}
    for k in range(world.n_fluxons):
        if np.hypot(*(rel1[k] - rel0[k])) <= policy.collision_eps:
            try:
                out[k] = winding_of_closed_path([st.dtheta[k]], policy.closure_tol)
            except NotInteger:
                pass
    return out
