"""System construction, validation, decomposition enumeration, config I/O."""

import json
import math

import numpy as np
import pytest

from hvzkit import system as hs


def three_bosons(kind="gaussian-well", strength=-2.0):
    return hs.ParticleSystem(
        particles=tuple(hs.Particle(1.0, 0) for _ in range(3)),
        dimension=1,
        q0=(0.0,),
        potentials={(0, 0): hs.PotentialSpec(kind=kind, strength=strength)},
    )


def test_particle_validation():
    with pytest.raises(hs.ConfigError):
        hs.Particle(-1.0, 0)
    with pytest.raises(hs.ConfigError):
        hs.Particle(float("inf"), 0)
    with pytest.raises(hs.ConfigError):
        hs.Particle(1.0, -2)


def test_potential_spec_validation():
    with pytest.raises(hs.ConfigError):
        hs.PotentialSpec(kind="hard-sphere")
    with pytest.raises(hs.ConfigError):
        hs.PotentialSpec(kind="softened-coulomb", softening=0.0)
    with pytest.raises(hs.ConfigError):
        hs.PotentialSpec(kind="gaussian-well", range=-1.0)
    assert hs.PotentialSpec().is_zero
    assert hs.PotentialSpec(kind="yukawa", strength=0.0).is_zero


def test_potential_values_match_formulas():
    r = np.array([0.0, 0.5, 2.0])
    sc = hs.PotentialSpec(kind="softened-coulomb", strength=-1.0, softening=0.5)
    assert np.allclose(hs.evaluate_potential(sc, r), -1.0 / np.sqrt(r * r + 0.25))
    yk = hs.PotentialSpec(kind="yukawa", strength=2.0, range=3.0, softening=1.0)
    assert np.allclose(
        hs.evaluate_potential(yk, r), 2.0 * np.exp(-r / 3.0) / np.sqrt(r * r + 1.0)
    )
    gw = hs.PotentialSpec(kind="gaussian-well", strength=-2.0, range=1.5)
    assert np.allclose(hs.evaluate_potential(gw, r), -2.0 * np.exp(-(r * r) / 2.25))
    assert np.all(hs.evaluate_potential(hs.PotentialSpec(), r) == 0.0)


def test_species_bookkeeping():
    sys = hs.ParticleSystem(
        particles=(
            hs.Particle(1.0, 1),
            hs.Particle(2.0, 0),
            hs.Particle(1.0, 1),
            hs.Particle(2.0, 0),
        ),
        dimension=1,
        q0=(0.0,),
    )
    assert sys.species_list == (0, 1)
    assert sys.species_members == ((1, 3), (0, 2))
    assert sys.species_sizes == (2, 2)
    assert sys.species_group().order == 4
    assert sys.subset_counts([0, 1]) == (1, 1)
    assert sys.subset_mass([0, 1]) == 3.0
    assert sys.total_mass == 6.0


def test_pair_potential_lookup_is_symmetric_with_zero_default():
    sys = hs.ParticleSystem(
        particles=(hs.Particle(1.0, 0), hs.Particle(2.0, 1), hs.Particle(1.0, 0)),
        dimension=1,
        q0=(0.0,),
        potentials={(1, 0): hs.PotentialSpec(kind="gaussian-well", strength=-1.0)},
    )
    assert sys.pair_potential(0, 1).strength == -1.0
    assert sys.pair_potential(1, 0).strength == -1.0
    assert sys.pair_potential(0, 2).is_zero


def test_decomposition_enumeration_and_orientation():
    sys = three_bosons()
    decs = hs.enumerate_decompositions(sys)
    assert len(decs) == 2 ** (sys.n_particles - 1) - 1 == 3
    for dec in decs:
        assert 0 in dec.members1
        assert set(dec.members1) | set(dec.members2) == {0, 1, 2}
        assert not set(dec.members1) & set(dec.members2)
        assert dec.mass1 + dec.mass2 == pytest.approx(sys.total_mass)
    reps = hs.enumerate_decompositions(sys, dedup_orbits=True)
    assert len(reps) == 1


def test_orbit_dedup_respects_species():
    sys = hs.ParticleSystem(
        particles=(
            hs.Particle(1.0, 0),
            hs.Particle(1.0, 0),
            hs.Particle(3.0, 1),
        ),
        dimension=1,
        q0=(0.0,),
    )
    reps = hs.enumerate_decompositions(sys, dedup_orbits=True)
    # swapping the light particles 0 and 1 maps {0}|{1,2} onto {0,2}|{1};
    # {0,1}|{2} keeps both light particles together and is inequivalent
    assert len(reps) == 2
    full = hs.enumerate_decompositions(sys)
    assert len(full) == 3


def test_validation_flags():
    bad = hs.ParticleSystem(
        particles=(hs.Particle(1.0, 0), hs.Particle(2.0, 0)),
        dimension=1,
        q0=(0.0,),
    )
    rep = hs.validate(bad)
    assert not rep.ok and "unequal masses" in rep.errors[0]

    strong = hs.ParticleSystem(
        particles=(hs.Particle(1.0, 0), hs.Particle(1.0, 0)),
        dimension=1,
        q0=(0.0,),
        potentials={
            (0, 0): hs.PotentialSpec(
                kind="softened-coulomb", strength=-1.0, softening=0.1
            )
        },
    )
    rep = hs.validate(strong)
    assert rep.ok
    assert any("critical coupling" in w for w in rep.warnings)
    assert math.isclose(hs.STABILITY_GUARD, 2.0 / math.pi)

    free = hs.ParticleSystem(
        particles=(hs.Particle(1.0, 0), hs.Particle(1.0, 0)),
        dimension=1,
        q0=(0.0,),
    )
    rep = hs.validate(free)
    assert rep.ok and any("purely kinetic" in w for w in rep.warnings)


def test_config_round_trip(tmp_path):
    sys = three_bosons()
    path = tmp_path / "sys.json"
    hs.save_system(sys, path)
    loaded = hs.load_system(path)
    assert loaded.content_key() == sys.content_key()


def test_yaml_config_with_count_expansion(tmp_path):
    path = tmp_path / "sys.yaml"
    path.write_text(
        "dimension: 1\n"
        "q0: [0.25]\n"
        "particles:\n"
        "  - {mass: 1.0, species: 0, count: 3}\n"
        "potentials:\n"
        "  - {species: [0, 0], kind: gaussian-well, strength: -2.0, range: 1.0}\n"
    )
    sys = hs.load_system(path)
    assert sys.n_particles == 3
    assert sys.q0 == (0.25,)
    assert sys.pair_potential(0, 2).kind == "gaussian-well"


def test_config_errors():
    with pytest.raises(hs.ConfigError):
        hs.load_system("/nonexistent/path.yaml")
    with pytest.raises(hs.ConfigError):
        hs.system_from_dict({"dimension": 1})
    with pytest.raises(hs.ConfigError):
        hs.system_from_dict(
            {
                "dimension": 4,
                "particles": [{"mass": 1.0, "species": 0, "count": 2}],
            }
        )
    with pytest.raises(hs.ConfigError):
        hs.system_from_dict(
            {
                "dimension": 1,
                "q0": [0.0, 0.0],
                "particles": [{"mass": 1.0, "species": 0, "count": 2}],
            }
        )
    with pytest.raises(hs.ConfigError):
        hs.system_from_dict(
            {
                "dimension": 1,
                "particles": [{"mass": 1.0, "species": 0, "count": 2}],
                "potentials": [
                    {"species": [0, 0], "kind": "zero"},
                    {"species": [0, 0], "kind": "zero"},
                ],
            }
        )
    with pytest.raises(hs.ConfigError):
        hs.system_from_dict(
            {
                "dimension": 1,
                "particles": [{"mass": 1.0, "species": 0, "count": 2}],
                "potentials": [{"species": [0, 7], "kind": "zero"}],
            }
        )
