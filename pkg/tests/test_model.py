import math

import numpy as np
import pytest

from fluxonsim.errors import ConfigInvalid, OutOfDomain, RegionTooSmall
from fluxonsim.geometry import Point2
from fluxonsim.model import (
    CYCLIC_ABC,
    BathSpec,
    BathSpecies,
    CircleOrbit,
    FixedPoint,
    FluxonSpec,
    Polyline,
    RandomWaypoints,
    Rect,
    ScalarPotential,
    SourceSpec,
    WorldSpec,
    cyclic_bath,
    materialize_bath,
    particle_rng,
    position_at,
    reverse_trajectory,
    trajectory_from_dict,
    trajectory_to_dict,
    uniform_bath,
)


def test_fixed_point_position():
    assert position_at(FixedPoint((3, 4)), 2.5) == Point2(3.0, 4.0)


def test_polyline_interpolates():
    line = Polyline((0, 1, 3), ((0, 0), (1, 0), (1, 2)))
    assert position_at(line, 0.5) == Point2(0.5, 0.0)
    assert position_at(line, 2.0) == Point2(1.0, 1.0)
    assert position_at(line, 3.0) == Point2(1.0, 2.0)
    assert line.end_time == 3.0


def test_polyline_out_of_domain():
    line = Polyline((0, 1), ((0, 0), (1, 0)))
    with pytest.raises(OutOfDomain):
        position_at(line, 1.5)
    with pytest.raises(OutOfDomain):
        position_at(FixedPoint(), -0.1)
    with pytest.raises(OutOfDomain):
        position_at(FixedPoint(), 2.0, duration=1.0)


@pytest.mark.parametrize(
    "times, points",
    [((0, 0), ((0, 0), (1, 1))), ((0.5, 1), ((0, 0), (1, 1))), ((0, 1), ((0, 0),))],
)
def test_polyline_rejects_bad_waypoints(times, points):
    with pytest.raises(ValueError):
        Polyline(times, points)


def test_circle_orbit_quarter():
    orb = CircleOrbit((1, 1), 2.0, math.pi / 2, 0.0)
    x, y = position_at(orb, 1.0)
    assert (x, y) == pytest.approx((1.0, 3.0), abs=1e-15)


def test_reverse_trajectory_roundtrip():
    orb = CircleOrbit((0, 0), 1.0, 1.0, 0.3)
    rev = reverse_trajectory(orb, 2.0)
    assert np.allclose(rev.position(0.5), orb.position(1.5), atol=0)
    assert reverse_trajectory(rev, 2.0) is orb
    assert reverse_trajectory(FixedPoint((1, 2)), 2.0) == FixedPoint((1, 2))


@pytest.mark.parametrize(
    "traj",
    [
        FixedPoint((1.5, -2)),
        Polyline((0, 0.5, 2), ((0, 0), (1, 1), (2, -1))),
        CircleOrbit((0.5, 0), 1.25, -3.0, 0.1),
        RandomWaypoints(0.2, 5.0, (1, 1), 3.0, 0.5),
    ],
)
def test_trajectory_dict_roundtrip(traj):
    assert trajectory_from_dict(trajectory_to_dict(traj)) == traj


def test_trajectory_from_dict_names_field():
    with pytest.raises(ConfigInvalid, match=r"motion\.kind"):
        trajectory_from_dict({"kind": "teleport"}, "motion")
    with pytest.raises(ConfigInvalid, match=r"motion\.speed"):
        trajectory_from_dict({"kind": "random-waypoints", "speed": 2}, "motion")


def test_fluxon_needs_nonzero_L():
    with pytest.raises(ValueError):
        FluxonSpec(0, FixedPoint(), L=0.0)


def test_source_triviality():
    assert SourceSpec(2.0).is_trivial
    assert SourceSpec(-1.0).is_trivial
    assert not SourceSpec(0.37).is_trivial


def test_non_integer_coupling_names_entry():
    with pytest.raises(ConfigInvalid) as info:
        BathSpecies("A", 10, (1, 0.5))
    assert info.value.field == "bath.A.coupling[1]"
    assert "bath.A.coupling[1]" in str(info.value)


def test_integer_valued_float_coupling_accepted():
    assert BathSpecies("A", 1, (1.0, -2.0)).coupling == (1, -2)


def test_coupling_matrix_layout():
    spec = cyclic_bath(5, seed=1)
    c = spec.coupling_matrix()
    assert c.shape == (3, 3)
    assert c[:, 0].tolist() == list(CYCLIC_ABC["A"])
    # the cyclic couplings cancel fluxon by fluxon
    assert c.sum(axis=0).tolist() == [0, 0, 0]
    assert spec.total == 15


def test_world_checks_coupling_width():
    with pytest.raises(ConfigInvalid, match="bath.bath.coupling"):
        WorldSpec(SourceSpec(0.5), [FluxonSpec(0, FixedPoint((1, 0)))], 1.0, uniform_bath(3, 0))


def test_scalar_potential_overlap_adds():
    pot = ScalarPotential((Rect(0, 2, 0, 2, 1.0), Rect(1, 3, 1, 3, 0.5)))
    v = pot.value_at(np.array([[0.5, 0.5], [1.5, 1.5], [2.5, 2.5], [5, 5]]))
    assert v.tolist() == [1.0, 1.5, 0.5, 0.0]


def test_materialize_zero_count():
    bath = materialize_bath(uniform_bath(0, 3), 1.0)
    assert len(bath) == 0
    assert bath.positions(0.5).shape == (0, 2)


def test_materialize_is_deterministic():
    spec = uniform_bath(20, 42)
    a = materialize_bath(spec, 2.0)
    b = materialize_bath(spec, 2.0)
    for t in (0.0, 0.3, 1.0, 2.0):
        assert np.array_equal(a.positions(t), b.positions(t))


def test_different_seeds_differ():
    a = materialize_bath(uniform_bath(20, 1), 1.0).positions(0.5)
    b = materialize_bath(uniform_bath(20, 2), 1.0).positions(0.5)
    assert not np.allclose(a, b)


def test_particle_paths_do_not_depend_on_population():
    small = materialize_bath(uniform_bath(10, 7), 1.0)
    large = materialize_bath(uniform_bath(25, 7), 1.0)
    for t in (0.0, 0.37, 1.0):
        assert np.array_equal(small.positions(t), large.positions(t)[:10])


def test_particle_paths_do_not_depend_on_other_species():
    alone = materialize_bath(BathSpec((BathSpecies("B", 6, (1, 1)),), 3), 1.0)
    mixed = materialize_bath(BathSpec((BathSpecies("A", 4, (1, 1)), BathSpecies("B", 6, (1, 1))), 3), 1.0)
    assert np.array_equal(alone.positions(0.6), mixed.positions(0.6)[4:])


def test_particle_rng_streams_are_distinct():
    a = particle_rng(5, "bath", 0).random(4)
    b = particle_rng(5, "bath", 1).random(4)
    c = particle_rng(5, "other", 0).random(4)
    assert not np.allclose(a, b) and not np.allclose(a, c)
    assert np.array_equal(a, particle_rng(5, "bath", 0).random(4))


def test_random_waypoints_respect_annulus_and_speed():
    motion = RandomWaypoints(r_min=0.5, r_max=4.0, speed_cap=2.0, interval=0.25)
    spec = BathSpec((BathSpecies("s", 50, (1, 1), motion),), 11)
    bath = materialize_bath(spec, 3.0)
    ts = np.linspace(0, 3.0, 301)
    pos = np.stack([bath.positions(t) for t in ts])
    r = np.hypot(pos[..., 0], pos[..., 1])
    assert r.min() >= 0.5 - 1e-12 and r.max() <= 4.0 + 1e-12
    speed = np.hypot(*np.moveaxis(np.diff(pos, axis=0), -1, 0)) / np.diff(ts)[:, None]
    assert speed.max() <= 2.0 + 1e-9


def test_bath_sequence_access_matches_block():
    bath = materialize_bath(uniform_bath(5, 9), 1.0)
    for i in range(5):
        assert np.allclose(bath[i].position(0.4), bath.positions(0.4)[i], atol=1e-15)
    with pytest.raises(IndexError):
        bath[5]


def test_bath_reversed():
    bath = materialize_bath(uniform_bath(5, 9), 2.0)
    rev = bath.reversed(2.0)
    assert np.array_equal(rev.positions(0.5), bath.positions(1.5))
    assert np.array_equal(rev.reversed(2.0).positions(0.5), bath.positions(0.5))


def test_orbit_species_gets_random_phases():
    motion = CircleOrbit((0, 0), 2.0, 1.0, 0.0)
    bath = materialize_bath(BathSpec((BathSpecies("o", 8, (1, 1), motion),), 4), 1.0)
    r = np.hypot(*bath.positions(0.3).T)
    assert np.allclose(r, 2.0)
    assert len(np.unique(np.round(bath.positions(0.0), 9), axis=0)) == 8


def test_region_too_small():
    motion = RandomWaypoints(r_min=0.0, r_max=1e-3)
    with pytest.raises(RegionTooSmall):
        materialize_bath(BathSpec((BathSpecies("s", 10, (1, 1), motion),), 0), 1.0, collision_eps=1e-3)
