"""Run configuration: a strict YAML schema mapped onto dataclasses.

Every section rejects unknown keys and every validation error names the
offending field, e.g. ``world.bath[0].coupling[1]``.
"""

from dataclasses import asdict, dataclass, field, fields
import hashlib
import math

import yaml

from .dynamics import StepPolicy
from .errors import ConfigInvalid
from .experiments import DwellSchedule, circle_loop, star_loop, wavy_loop
from .geometry import MAX_SUBSTEP_ANGLE
from .model import (
    BathSpec,
    BathSpecies,
    FixedPoint,
    Rect,
    ScalarPotential,
    trajectory_from_dict,
)

EXPERIMENTS = (
    "single-fluxon",
    "two-fluxon-loop",
    "two-fluxon-open",
    "three-fluxon",
    "scalar-ab",
    "locality-probe",
)


@dataclass
class PolicyConfig:
    dt: float = 0.01
    max_substep_angle: float = MAX_SUBSTEP_ANGLE
    collision_eps: float = 1e-6
    closure_tol: float = 1e-9


@dataclass
class SpeciesConfig:
    id: str = "bath"
    count: int = 200
    coupling: list = field(default_factory=lambda: [1, 1])
    motion: dict = field(default_factory=lambda: {"kind": "random-waypoints"})


@dataclass
class WorldConfig:
    xi: float = 0.37
    # int for one moving fluxon, list of three for three-fluxon
    windings: object = 1
    period: float = 1.0
    duration: object = None
    loop: object = None
    source: object = None
    paths: object = None
    bath: list = field(default_factory=lambda: [SpeciesConfig()])
    potential: list = field(default_factory=list)
    dwell: object = None


@dataclass
class OutputConfig:
    dir: str = "out"
    stride: int = 1


@dataclass
class EnsembleConfig:
    count: int = 100
    parallelism: int = 1
    failure_limit: float = 0.0


@dataclass
class ProbeConfig:
    xi_candidates: list = field(default_factory=lambda: [0.0, 0.37])
    segment_fraction: float = 0.5
    ensemble_size: int = 2000
    bins: int = 64
    n_splits: int = 200


@dataclass
class RunConfig:
    experiment: str = "two-fluxon-loop"
    seed: int = 0
    world: WorldConfig = field(default_factory=WorldConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)


_NESTED = {
    (RunConfig, "world"): WorldConfig,
    (RunConfig, "policy"): PolicyConfig,
    (RunConfig, "output"): OutputConfig,
    (RunConfig, "ensemble"): EnsembleConfig,
    (RunConfig, "probe"): ProbeConfig,
}


def _check_value(value, ftype, where):
    if ftype is object:
        return value
    if isinstance(value, bool):
        raise ConfigInvalid("booleans are not accepted here", where)
    if ftype is float:
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigInvalid(f"expected a finite number, got {value!r}", where)
        return float(value)
    if not isinstance(value, ftype):
        raise ConfigInvalid(f"expected {ftype.__name__}, got {value!r}", where)
    return value


def _build(cls, data, where):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigInvalid("expected a mapping", where or "<root>")
    names = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigInvalid("unknown field", f"{where}.{key}" if where else str(key))
    kwargs = {}
    for name, f in names.items():
        path = f"{where}.{name}" if where else name
        if name not in data:
            continue
        value = data[name]
        sub = _NESTED.get((cls, name))
        if sub is not None:
            kwargs[name] = _build(sub, value, path)
        elif cls is WorldConfig and name == "bath":
            if value is None:
                value = []
            if not isinstance(value, list):
                raise ConfigInvalid("expected a list of species", path)
            kwargs[name] = [_build(SpeciesConfig, v, f"{path}[{i}]") for i, v in enumerate(value)]
        else:
            kwargs[name] = _check_value(value, f.type, path)
    return cls(**kwargs)


def config_from_dict(data):
    cfg = _build(RunConfig, data, "")
    validate(cfg)
    return cfg


def config_to_dict(cfg):
    return asdict(cfg)


def load_config(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"not valid YAML: {exc}", str(path)) from exc
    return config_from_dict(data)


def dump_config(cfg):
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def config_digest(cfg):
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()


# -- semantic validation and world assembly ---------------------------------


def policy_of(cfg):
    p = cfg.policy
    try:
        return StepPolicy(p.dt, p.max_substep_angle, p.collision_eps, p.closure_tol)
    except ValueError as exc:
        raise ConfigInvalid(str(exc), "policy") from exc


def bath_of(cfg, seed=None):
    species = []
    for i, sp in enumerate(cfg.world.bath):
        where = f"world.bath[{i}]"
        if not isinstance(sp.coupling, list):
            raise ConfigInvalid("expected a list", f"{where}.coupling")
        for k, c in enumerate(sp.coupling):
            if isinstance(c, bool) or not isinstance(c, (int, float)) or not float(c).is_integer():
                raise ConfigInvalid(f"bath coupling {c!r} is not an integer", f"{where}.coupling[{k}]")
        if sp.count < 0:
            raise ConfigInvalid("must be non-negative", f"{where}.count")
        motion = trajectory_from_dict(sp.motion, f"{where}.motion")
        species.append(BathSpecies(sp.id, sp.count, tuple(sp.coupling), motion))
    try:
        return BathSpec(tuple(species), cfg.seed if seed is None else seed)
    except ConfigInvalid as exc:
        raise ConfigInvalid(str(exc), "world.bath") from None


def trajectory_preset(d, where, windings, period):
    """Trajectory dict or one of the loop presets."""
    if not isinstance(d, dict):
        raise ConfigInvalid("expected a mapping", where)
    kind = d.get("kind")
    opts = {k: v for k, v in d.items() if k != "kind"}
    try:
        if kind == "circle-loop":
            return circle_loop(opts.pop("windings", windings), period=opts.pop("period", period), **opts)[0]
        if kind == "wavy-loop":
            return wavy_loop(opts.pop("windings", windings), duration=opts.pop("duration", period), **opts)
        if kind == "star-loop":
            return star_loop(opts.pop("seed", 0), duration=opts.pop("duration", period), **opts)
    except TypeError as exc:
        raise ConfigInvalid(str(exc), where) from exc
    return trajectory_from_dict(d, where)


def source_of(cfg):
    w = cfg.world
    if w.source is None:
        return FixedPoint()
    return trajectory_preset(w.source, "world.source", 0, w.period)


def potential_of(cfg):
    regions = []
    for i, r in enumerate(cfg.world.potential):
        where = f"world.potential[{i}]"
        if not isinstance(r, dict):
            raise ConfigInvalid("expected a mapping", where)
        try:
            regions.append(Rect(**r))
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(str(exc), where) from exc
    return ScalarPotential(tuple(regions))


def dwell_of(cfg):
    d = cfg.world.dwell or {}
    if not isinstance(d, dict):
        raise ConfigInvalid("expected a mapping", "world.dwell")
    try:
        return DwellSchedule(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})
    except TypeError as exc:
        raise ConfigInvalid(str(exc), "world.dwell") from exc


def paths_of(cfg, count):
    w = cfg.world
    if not isinstance(w.paths, list) or len(w.paths) != count:
        raise ConfigInvalid(f"expected a list of {count} trajectories", "world.paths")
    return [trajectory_preset(p, f"world.paths[{i}]", 1, w.period) for i, p in enumerate(w.paths)]


def validate(cfg):
    """Check everything that can be checked without running."""
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigInvalid(f"unknown experiment {cfg.experiment!r}", "experiment")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigInvalid("must fit in an unsigned 64-bit integer", "seed")
    w = cfg.world
    if w.duration is not None and (isinstance(w.duration, bool) or not isinstance(w.duration, (int, float)) or w.duration < 0):
        raise ConfigInvalid("must be a non-negative number", "world.duration")
    if cfg.output.stride < 1:
        raise ConfigInvalid("must be >= 1", "output.stride")
    if cfg.ensemble.count < 1:
        raise ConfigInvalid("must be >= 1", "ensemble.count")
    if cfg.ensemble.parallelism < 1:
        raise ConfigInvalid("must be >= 1", "ensemble.parallelism")
    policy_of(cfg)
    bath = bath_of(cfg)
    potential_of(cfg)
    if w.source is not None:
        source_of(cfg)
    kind = cfg.experiment
    n_fluxons = {"single-fluxon": 1, "three-fluxon": 3}.get(kind, 2)
    for s in bath.species:
        if len(s.coupling) != n_fluxons:
            raise ConfigInvalid(
                f"needs {n_fluxons} entries for experiment {kind}", f"world.bath.{s.species_id}.coupling"
            )
    if kind == "three-fluxon":
        if w.paths is not None:
            paths_of(cfg, 3)
        elif not (isinstance(w.windings, list) and len(w.windings) == 3 and all(isinstance(n, int) for n in w.windings)):
            raise ConfigInvalid("expected a list of three integers", "world.windings")
    elif kind == "two-fluxon-open":
        paths_of(cfg, 2)
        if w.duration is None:
            raise ConfigInvalid("required for two-fluxon-open", "world.duration")
    elif kind == "scalar-ab":
        dwell_of(cfg)
    else:
        if isinstance(w.windings, bool) or not isinstance(w.windings, int):
            raise ConfigInvalid("expected an integer", "world.windings")
        if w.loop is not None:
            trajectory_preset(w.loop, "world.loop", w.windings, w.period)
    if kind == "locality-probe":
        p = cfg.probe
        if not isinstance(p.xi_candidates, list) or len(p.xi_candidates) < 2:
            raise ConfigInvalid("needs at least two candidates", "probe.xi_candidates")
        if not 0.0 < p.segment_fraction <= 1.0:
            raise ConfigInvalid("must lie in (0, 1]", "probe.segment_fraction")
        if p.bins < 2:
            raise ConfigInvalid("must be >= 2", "probe.bins")
    return cfg
