"""Declarative world description: source, fluxons, bath, scalar potential.

Every trajectory here is prescribed. Nothing in this module integrates
forces; motion is a pure function of time (and, for the bath, a seed).
"""

from dataclasses import dataclass
from functools import cached_property
import math
import zlib

import numpy as np

from .errors import ConfigInvalid, OutOfDomain, RegionTooSmall
from .geometry import COLLISION_EPS, Point2, as_point

_TIME_SLACK = 1e-12


def _check_time(t, duration):
    if t < -_TIME_SLACK or (duration is not None and t > duration + _TIME_SLACK):
        raise OutOfDomain(f"t={t!r} outside [0, {duration!r}]")


# -- trajectories -----------------------------------------------------------


@dataclass(frozen=True)
class FixedPoint:
    point: Point2 = Point2(0.0, 0.0)
    kind = "fixed-point"

    def __post_init__(self):
        object.__setattr__(self, "point", as_point(self.point))

    @cached_property
    def _xy(self):
        return np.array(self.point, dtype=float)

    def position(self, t):
        return self._xy


@dataclass(frozen=True)
class Polyline:
    """Piecewise-linear path through timestamped waypoints, starting at t=0."""

    times: tuple
    points: tuple
    kind = "polyline-waypoints"

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        points = tuple(as_point(p) for p in self.points)
        if len(times) != len(points) or not times:
            raise ValueError("polyline needs one timestamp per waypoint")
        if times[0] != 0.0:
            raise ValueError("polyline must start at t=0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("polyline timestamps must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)

    @cached_property
    def _arrays(self):
        return np.array(self.times), np.array(self.points, dtype=float)

    @property
    def end_time(self):
        return self.times[-1]

    def position(self, t):
        times, pts = self._arrays
        if t > times[-1] + _TIME_SLACK:
            raise OutOfDomain(f"t={t!r} beyond last waypoint at {times[-1]!r}")
        if len(times) == 1:
            return pts[0]
        return np.array([np.interp(t, times, pts[:, 0]), np.interp(t, times, pts[:, 1])])


@dataclass(frozen=True)
class CircleOrbit:
    """Uniform circular motion: center + radius * (cos, sin)(phase0 + omega t)."""

    center: Point2 = Point2(0.0, 0.0)
    radius: float = 1.0
    omega: float = 2.0 * math.pi
    phase0: float = 0.0
    kind = "circle-orbit"

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not self.radius >= 0.0:
            raise ValueError("radius must be non-negative")

    def position(self, t):
        a = self.phase0 + self.omega * t
        return np.array(
            [self.center.x + self.radius * math.cos(a), self.center.y + self.radius * math.sin(a)]
        )


@dataclass(frozen=True)
class RandomWaypoints:
    """Template for seeded bath motion.

    Waypoints are drawn uniformly from the annulus ``r_min <= |x - center|
    <= r_max`` every ``interval`` time units; each leg is shortened so the
    speed never exceeds ``speed_cap`` and rejected if it would cut through
    the inner disk. Only meaningful inside a BathSpec.
    """

    r_min: float = 0.1
    r_max: float = 10.0
    center: Point2 = Point2(0.0, 0.0)
    speed_cap: float = 5.0
    interval: float = 0.25
    kind = "random-waypoints"

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not 0.0 <= self.r_min < self.r_max:
            raise ValueError("need 0 <= r_min < r_max")
        if not (self.speed_cap > 0 and self.interval > 0):
            raise ValueError("speed_cap and interval must be positive")

    def position(self, t):
        raise TypeError("random-waypoints is a template; materialize the bath first")


@dataclass(frozen=True)
class Reversed:
    """``base`` run backwards over [0, duration]."""

    base: object
    duration: float
    kind = "reversed"

    def position(self, t):
        return self.base.position(self.duration - t)


def position_at(traj, t, duration=None):
    """Position of a trajectory at time ``t`` as a Point2.

    Raises OutOfDomain when ``t`` is outside ``[0, duration]`` (or beyond a
    polyline's last waypoint).
    """
    _check_time(t, duration)
    x, y = traj.position(t)
    return Point2(x, y)


def reverse_trajectory(traj, duration):
    if isinstance(traj, FixedPoint):
        return traj
    if isinstance(traj, Reversed) and traj.duration == duration:
        return traj.base
    return Reversed(traj, duration)


_TRAJECTORY_KINDS = {
    "fixed-point": FixedPoint,
    "polyline-waypoints": Polyline,
    "circle-orbit": CircleOrbit,
    "random-waypoints": RandomWaypoints,
}


def trajectory_from_dict(d, field_name="trajectory"):
    """Build a trajectory from its plain-dict form (as found in config files)."""
    if not isinstance(d, dict):
        raise ConfigInvalid("expected a mapping", field_name)
    d = dict(d)
    kind = d.pop("kind", None)
    cls = _TRAJECTORY_KINDS.get(kind)
    if cls is None:
        raise ConfigInvalid(f"unknown trajectory kind {kind!r}", f"{field_name}.kind")
    allowed = set(cls.__dataclass_fields__)
    for key in d:
        if key not in allowed:
            raise ConfigInvalid("unknown field", f"{field_name}.{key}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(str(exc), field_name) from exc


def trajectory_to_dict(traj):
    if isinstance(traj, FixedPoint):
        return {"kind": traj.kind, "point": list(traj.point)}
    if isinstance(traj, Polyline):
        return {"kind": traj.kind, "times": list(traj.times), "points": [list(p) for p in traj.points]}
    if isinstance(traj, CircleOrbit):
        return {
            "kind": traj.kind,
            "center": list(traj.center),
            "radius": traj.radius,
            "omega": traj.omega,
            "phase0": traj.phase0,
        }
    if isinstance(traj, RandomWaypoints):
        return {
            "kind": traj.kind,
            "r_min": traj.r_min,
            "r_max": traj.r_max,
            "center": list(traj.center),
            "speed_cap": traj.speed_cap,
            "interval": traj.interval,
        }
    raise TypeError(f"cannot serialize {type(traj).__name__}")


# -- participants -----------------------------------------------------------


@dataclass(frozen=True)
class FluxonSpec:
    id: int
    trajectory: object
    L: float = 1.0
    phi0: float = 0.0

    def __post_init__(self):
        if self.L == 0 or not math.isfinite(self.L):
            raise ValueError("L must be finite and non-zero")


@dataclass(frozen=True)
class SourceSpec:
    xi: float
    trajectory: object = FixedPoint()

    def __post_init__(self):
        if not math.isfinite(self.xi):
            raise ValueError("xi must be finite")

    @property
    def is_trivial(self):
        return float(self.xi).is_integer()


def _integer_coupling(value, where):
    if isinstance(value, bool):
        raise ConfigInvalid("coupling must be an integer", where)
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise ConfigInvalid(f"coupling {value!r} is not a number", where) from None
    if not f.is_integer():
        raise ConfigInvalid(f"bath coupling {value!r} is not an integer", where)
    return int(f)


@dataclass(frozen=True)
class BathSpecies:
    species_id: str
    count: int
    coupling: tuple
    motion: object = RandomWaypoints()

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 0:
            raise ConfigInvalid("count must be a non-negative integer", f"{self.species_id}.count")
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(
            self,
            "coupling",
            tuple(
                _integer_coupling(c, f"bath.{self.species_id}.coupling[{k}]")
                for k, c in enumerate(self.coupling)
            ),
        )


@dataclass(frozen=True)
class BathSpec:
    species: tuple = ()
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        ids = [s.species_id for s in self.species]
        if len(set(ids)) != len(ids):
            raise ConfigInvalid("duplicate species id", "bath.species")
        widths = {len(s.coupling) for s in self.species}
        if len(widths) > 1:
            raise ConfigInvalid("coupling rows differ in length", "bath.species")
        object.__setattr__(self, "master_seed", int(self.master_seed) % 2**64)

    @property
    def total(self):
        return sum(s.count for s in self.species)

    def coupling_matrix(self):
        """Integer matrix c[k][s]: coupling of fluxon k to species s."""
        if not self.species:
            return np.zeros((0, 0), dtype=int)
        return np.array([s.coupling for s in self.species], dtype=int).T


CYCLIC_ABC = {"A": (1, 0, -1), "B": (-1, 1, 0), "C": (0, -1, 1)}


def uniform_bath(count, seed, n_fluxons=2, motion=RandomWaypoints()):
    """Single species coupled with +1 to every fluxon."""
    return BathSpec((BathSpecies("bath", count, (1,) * n_fluxons, motion),), seed)


def cyclic_bath(count, seed, motion=RandomWaypoints()):
    """Three species A, B, C with the cyclic +/- couplings of the three-fluxon model."""
    return BathSpec(
        tuple(BathSpecies(name, count, row, motion) for name, row in CYCLIC_ABC.items()), seed
    )


@dataclass(frozen=True)
class Rect:
    xmin: float
    xmax: float
    ymin: float
    ymax: float
    value: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError("degenerate rectangle")


@dataclass(frozen=True)
class ScalarPotential:
    """Piecewise-constant V(x): sum of the values of the rectangles containing x."""

    regions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))

    def value_at(self, xy):
        xy = np.asarray(xy, dtype=float)
        v = np.zeros(xy.shape[:-1])
        for r in self.regions:
            inside = (
                (xy[..., 0] >= r.xmin)
                & (xy[..., 0] <= r.xmax)
                & (xy[..., 1] >= r.ymin)
                & (xy[..., 1] <= r.ymax)
            )
            v = v + np.where(inside, r.value, 0.0)
        return v


@dataclass(frozen=True)
class WorldSpec:
    source: SourceSpec
    fluxons: tuple
    duration: float
    bath: BathSpec = BathSpec()
    potential: ScalarPotential = ScalarPotential()

    def __post_init__(self):
        object.__setattr__(self, "fluxons", tuple(self.fluxons))
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise ValueError("duration must be finite and non-negative")
        if not self.fluxons:
            raise ValueError("at least one fluxon is required")
        for s in self.bath.species:
            if len(s.coupling) != len(self.fluxons):
                raise ConfigInvalid(
                    f"coupling row has {len(s.coupling)} entries for {len(self.fluxons)} fluxons",
                    f"bath.{s.species_id}.coupling",
                )


# -- materialized bath ------------------------------------------------------


class _WaypointBlock:
    def __init__(self, times, pts):
        self.times = times
        self.pts = pts  # (m, W, 2)

    def positions(self, t):
        times = self.times
        if t > times[-1] + _TIME_SLACK:
            raise OutOfDomain(f"t={t!r} beyond bath horizon {times[-1]!r}")
        j = min(max(int(np.searchsorted(times, t, side="right")) - 1, 0), len(times) - 2)
        f = (t - times[j]) / (times[j + 1] - times[j])
        if f <= 0.0:
            return self.pts[:, j]
        if f >= 1.0:
            return self.pts[:, j + 1]
        a = self.pts[:, j]
        return a + f * (self.pts[:, j + 1] - a)

    def trajectory(self, i):
        return Polyline(tuple(self.times), tuple(map(tuple, self.pts[i])))


class _OrbitBlock:
    def __init__(self, center, radius, omega, phases):
        self.center = np.asarray(center, dtype=float)
        self.radius = radius
        self.omega = omega
        self.phases = phases

    def positions(self, t):
        a = self.phases + self.omega * t
        return self.center + self.radius * np.column_stack([np.cos(a), np.sin(a)])

    def trajectory(self, i):
        return CircleOrbit(tuple(self.center), self.radius, self.omega, float(self.phases[i]))


class _CopyBlock:
    def __init__(self, traj, count):
        self.traj = traj
        self.count = count

    def positions(self, t):
        return np.broadcast_to(self.traj.position(t), (self.count, 2))

    def trajectory(self, i):
        return self.traj


class MaterializedBath:
    """Concrete bath trajectories, stored in per-species blocks.

    Behaves as a read-only sequence of per-particle trajectories; the
    ``positions`` method evaluates every particle at once.
    """

    def __init__(self, blocks, species_index, reversed_duration=None):
        self._blocks = blocks  # list of (start, stop, block)
        self.species_index = species_index
        self._reversed = reversed_duration

    def __len__(self):
        return len(self.species_index)

    def __getitem__(self, i):
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        i %= len(self)
        for start, stop, block in self._blocks:
            if start <= i < stop:
                traj = block.trajectory(i - start)
                if self._reversed is not None:
                    traj = reverse_trajectory(traj, self._reversed)
                return traj
        raise IndexError(i)

    def positions(self, t):
        if not self._blocks:
            return np.zeros((0, 2))
        if self._reversed is not None:
            t = self._reversed - t
        return np.concatenate([block.positions(t) for _, _, block in self._blocks])

    def reversed(self, duration):
        if self._reversed is not None:
            return MaterializedBath(self._blocks, self.species_index)
        return MaterializedBath(self._blocks, self.species_index, duration)


_ATTEMPTS = 8


def _species_key(species_id):
    return zlib.crc32(str(species_id).encode())


def particle_rng(master_seed, species_id, index):
    """Independent generator for one bath particle."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(_species_key(species_id), int(index)))
    return np.random.default_rng(ss)


def _segment_clear(a, b, center, r_min):
    """Whether segments a->b (broadcast arrays) keep distance >= r_min from center."""
    d = b - a
    rel = center - a
    dd = np.sum(d * d, axis=-1)
    s = np.where(dd > 0, np.sum(rel * d, axis=-1) / np.where(dd > 0, dd, 1.0), 0.0)
    s = np.clip(s, 0.0, 1.0)
    closest = a + s[..., None] * d
    return np.hypot(*np.moveaxis(closest - center, -1, 0)) >= r_min


def _random_waypoint_block(motion, species_id, count, master_seed, duration):
    n_wp = max(2, math.ceil(duration / motion.interval - 1e-9) + 1)
    times = motion.interval * np.arange(n_wp)
    u = np.stack(
        [particle_rng(master_seed, species_id, i).random((n_wp, _ATTEMPTS, 2)) for i in range(count)]
    )
    center = np.array(motion.center)
    r = np.sqrt(motion.r_min**2 + u[..., 0] * (motion.r_max**2 - motion.r_min**2))
    ang = 2.0 * np.pi * u[..., 1]
    cand = center + r[..., None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    reach = motion.speed_cap * motion.interval
    pts = np.empty((count, n_wp, 2))
    pts[:, 0] = cand[:, 0, 0]
    rows = np.arange(count)
    for w in range(1, n_wp):
        prev = pts[:, w - 1][:, None, :]
        step = cand[:, w] - prev
        dist = np.hypot(step[..., 0], step[..., 1])
        scale = np.minimum(1.0, reach / np.where(dist > 0, dist, 1.0))
        new = prev + step * scale[..., None]
        ok = _segment_clear(prev, new, center, motion.r_min)
        first = np.argmax(ok, axis=1)
        pts[:, w] = np.where(ok.any(axis=1)[:, None], new[rows, first], pts[:, w - 1])
    return _WaypointBlock(times, pts)


def materialize_bath(spec, duration, collision_eps=COLLISION_EPS):
    """Turn a BathSpec into concrete trajectories covering [0, duration].

    Each particle draws from its own substream keyed by (master seed,
    species id, particle index), so the result is reproducible and a
    particle's path does not depend on any other particle.
    """
    blocks = []
    species_index = []
    start = 0
    for s_idx, sp in enumerate(spec.species):
        if sp.count == 0:
            continue
        motion = sp.motion
        if isinstance(motion, RandomWaypoints):
            area = math.pi * (motion.r_max**2 - motion.r_min**2)
            if sp.count * math.pi * collision_eps**2 > area:
                raise RegionTooSmall(
                    f"species {sp.species_id!r}: {sp.count} particles do not fit with clearance {collision_eps}"
                )
            block = _random_waypoint_block(motion, sp.species_id, sp.count, spec.master_seed, duration)
        elif isinstance(motion, CircleOrbit):
            phases = np.array(
                [
                    motion.phase0 + 2.0 * np.pi * particle_rng(spec.master_seed, sp.species_id, i).random()
                    for i in range(sp.count)
                ]
            )
            block = _OrbitBlock(motion.center, motion.radius, motion.omega, phases)
        else:
            block = _CopyBlock(motion, sp.count)
        blocks.append((start, start + sp.count, block))
        species_index.extend([s_idx] * sp.count)
        start += sp.count
    return MaterializedBath(blocks, np.array(species_index, dtype=int))
