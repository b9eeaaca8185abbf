"""Tests for trial-state bounds, discrete states, limits and collapse."""

import numpy as np
import pytest

from hvzkit import symgroup, threshold, verify
from hvzkit.system import (
    Particle,
    ParticleSystem,
    PotentialSpec,
    enumerate_decompositions,
)
from hvzkit.threshold import FiberCache, ScanConfig


WELL = PotentialSpec("gaussian-well", -0.5, 2.0, 1.0)


def bosons3():
    return ParticleSystem((Particle(1.0, 0),) * 3, 1, (0.0,), {(0, 0): WELL})


CFG = ScanConfig(n=96, box=24.0, refine_rounds=1, qmax=2.0)


@pytest.fixture(scope="module")
def boson_report():
    cache = FiberCache()
    rep = threshold.essential_bottom(bosons3(), symgroup.parse_type("[3]"), CFG, cache)
    return rep, cache


def test_weyl_quotient_upper_bounds_target(boson_report):
    rep, cache = boson_report
    sys = bosons3()
    dec = next(
        d for d in enumerate_decompositions(sys, dedup_orbits=True)
        if d.label == rep.minimizing[0]
    )
    w = verify.weyl_quotient(
        sys, symgroup.parse_type("[3]"), dec, (0.0,), separation=8.0, cfg=CFG
    )
    assert w.pair == ("[2]", "[1]")
    assert w.quotient >= w.target - 1e-10
    assert abs(w.quotient - w.target) < 0.05
    assert w.norm_ratio > 0.01


def test_weyl_quotients_decrease_with_separation(boson_report):
    rep, cache = boson_report
    scan = verify.hvz_scan(bosons3(), symgroup.parse_type("[3]"), CFG, cache, report=rep)
    assert scan.monotone
    assert scan.final_gap_rel < 0.05
    assert all(g > 0 for g in scan.gaps)


def test_antisymmetrizer_kills_coincident_trial():
    fermions = ParticleSystem((Particle(1.0, 0), Particle(1.0, 0)), 1, (0.0,), {})
    dec = next(iter(enumerate_decompositions(fermions, dedup_orbits=True)))
    with pytest.raises(verify.ZeroTrialError):
        verify.weyl_quotient(
            fermions,
            symgroup.parse_type("[1,1]"),
            dec,
            (0.0,),
            separation=0.0,
            cfg=ScanConfig(n=64, box=20.0),
        )


def test_discrete_spectrum_below_finds_bound_states(boson_report):
    rep, cache = boson_report
    ds = verify.discrete_spectrum_below(
        bosons3(), symgroup.parse_type("[3]"), rep.mu,
        ScanConfig(n=64, box=20.0), k=3, refine=True,
    )
    assert ds.count >= 1
    assert ds.below[0] < rep.mu - 0.1
    assert ds.max_shift is not None and ds.max_shift < 1e-3
    assert len(ds.refined_below) == len(ds.below)


def test_repulsive_system_has_no_state_below_zero():
    bump = PotentialSpec("gaussian-well", 0.4, 2.0, 1.0)
    sys = ParticleSystem((Particle(1.0, 0),) * 2, 1, (0.0,), {(0, 0): bump})
    ds = verify.discrete_spectrum_below(
        sys, symgroup.parse_type("[2]"), 0.0, ScanConfig(n=64, box=20.0), k=2
    )
    assert ds.count == 0
    assert all(e >= -1e-6 for e in ds.eigenvalues)


def test_nonrelativistic_limit_shrinks_monotonically():
    pair = ParticleSystem((Particle(1.0, 0),) * 2, 1, (0.0,), {(0, 0): WELL})
    nr = verify.nonrelativistic_crosscheck(
        pair, (0, 1), symgroup.parse_type("[2]"), ScanConfig(n=256, box=20.0)
    )
    assert nr.monotone
    assert nr.final_dev < 0.02
    assert all(a < 0 and b < 0 for a, b in zip(nr.sqrt_energies, nr.quad_energies))


def test_collapse_versus_stable_channel():
    cfg = ScanConfig(n=128, box=20.0)
    soft = [1.0, 0.5, 0.25, 0.125]
    even = verify.stability_probe(-1.0, cfg, softenings=soft)
    odd = verify.stability_probe(
        -1.0, cfg, softenings=soft, beta=symgroup.parse_type("[1,1]")
    )
    assert even.unbounded_trend
    assert not odd.unbounded_trend
    # even drops grow, odd drops shrink
    assert even.drops[-1] > even.drops[0]
    assert odd.drops[-1] < odd.drops[0]
    assert all(d > 0 for d in odd.drops)


def test_scan_results_serialize(boson_report):
    import json

    rep, cache = boson_report
    scan = verify.hvz_scan(bosons3(), symgroup.parse_type("[3]"), CFG, cache, report=rep)
    blob = json.loads(json.dumps(scan.to_dict()))
    assert blob["monotone"] is True
    assert len(blob["levels"]) == 3
