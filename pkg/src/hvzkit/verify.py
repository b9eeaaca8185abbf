"""Independent checks of computed essential-spectrum bottoms.

Trial states built from separated cluster ground states give variational
upper bounds on the full fiber energy that approach the two-cluster sum as
the separation and box grow; eigenvalues found below the bottom are genuine
discrete states; heavy-mass scaling must reproduce quadratic kinetics; and
removing the short-distance softening of an overcritical attraction must
show collapse. Each check exercises a different failure mode of the scans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import eigensolve, symgroup, threshold
from .fourier_grid import (
    GridSpec,
    build_operator,
    build_projector,
    snap_to_dual,
)
from .system import ParticleSystem, PotentialSpec
from .threshold import FiberCache, ScanConfig


class ZeroTrialError(RuntimeError):
    """The symmetrizer annihilated the separated-cluster trial state."""


# ---------------------------------------------------------------------------
# Separated-cluster trial states
# ---------------------------------------------------------------------------


@dataclass
class WeylQuotient:
    separation: float
    box: float
    n: int
    quotient: float
    target: float            # sum of the two cluster energies
    norm_ratio: float        # trial norm after symmetrizing over before
    p1: tuple[float, ...]
    p2: tuple[float, ...]
    pair: tuple[str, str]


def _cluster_factor(
    sys: ParticleSystem,
    members: tuple[int, ...],
    beta: symgroup.SymmetryType,
    momentum: tuple[float, ...],
    cfg: ScanConfig,
    n: int,
    box: float,
):
    """Ground energy and internal wavefunction; singletons are scalar."""
    if len(members) == 1:
        m = sys.particles[members[0]].mass
        return threshold.dispersion(m, momentum), None
    fe, wf = threshold.fiber_ground_state(
        sys, members, beta, momentum, cfg, n=n, box=box
    )
    return fe.energy, wf


def weyl_quotient(
    sys: ParticleSystem,
    alpha: symgroup.SymmetryType,
    dec,
    q: Sequence[float],
    separation: float,
    cfg: ScanConfig = ScanConfig(),
    n: int | None = None,
    box: float | None = None,
    pair: tuple[symgroup.SymmetryType, symgroup.SymmetryType] | None = None,
    width: float | None = None,
) -> WeylQuotient:
    """Energy quotient of a symmetrized product of separated cluster grounds.

    The first cluster sits at the grid origin; the second is localized a
    distance `separation` away along the first axis by a Gaussian envelope
    on its reference coordinate, carrying its fiber momentum as a plane
    wave. The quotient upper-bounds the sector ground energy and tends to
    the two-cluster energy sum from above as separation, width and box grow.
    """
    n = cfg.n if n is None else n
    box = cfg.box if box is None else box
    width = box / 8.0 if width is None else width
    d = sys.dimension

    q0 = snap_to_dual(box, sys.q0)
    p1_raw, p2_raw = threshold.fiber_momenta(dec, q0, snap_to_dual(box, q))
    p2 = snap_to_dual(box, p2_raw)
    p1 = tuple(a - b for a, b in zip(q0, p2))

    if pair is None:
        table = threshold.branching_table(sys, alpha, dec)
        cache = FiberCache()
        best = None
        for beta1, beta2, _m in table.nonzero():
            e1 = threshold.cluster_energy(
                sys, dec.members1, beta1, p1, cfg, cache, n=n, box=box
            )
            e2 = threshold.cluster_energy(
                sys, dec.members2, beta2, p2, cfg, cache, n=n, box=box
            )
            if best is None or e1.energy + e2.energy < best[0]:
                best = (e1.energy + e2.energy, beta1, beta2)
        _, beta1, beta2 = best
    else:
        beta1, beta2 = pair

    e1, phi1 = _cluster_factor(sys, dec.members1, beta1, p1, cfg, n, box)
    e2, phi2 = _cluster_factor(sys, dec.members2, beta2, p2, cfg, n, box)

    spec = GridSpec(d, tuple(range(sys.n_particles)), n, box, q0)
    grids = np.indices(spec.shape)

    def axgrid(member: int, c: int) -> np.ndarray:
        return grids[spec.axis_of(member, c)]

    trial = np.ones(spec.shape, dtype=complex)
    if phi1 is not None:
        shape1 = [1] * spec.n_axes
        for j in phi1.spec.internal:
            for c in range(d):
                shape1[spec.axis_of(j, c)] = n
        trial = trial * phi1.values.reshape(shape1)

    r2 = dec.members2[0]
    if phi2 is not None:
        flat2 = np.zeros(spec.shape, dtype=np.int64)
        for j in phi2.spec.internal:
            for c in range(d):
                rel = (axgrid(j, c) - axgrid(r2, c)) % n
                flat2 = flat2 * n + rel
        trial = trial * phi2.values.reshape(-1)[flat2]

    dx = spec.dx
    angle = np.zeros(spec.shape)
    for c in range(d):
        angle = angle + p2[c] * (axgrid(r2, c) * dx)
    zeta = spec.wrap(axgrid(r2, 0) * dx - separation)
    envelope = np.exp(-(zeta**2) / (2.0 * width**2))
    for c in range(1, d):
        zc = spec.wrap(axgrid(r2, c) * dx)
        envelope = envelope * np.exp(-(zc**2) / (2.0 * width**2))
    trial = trial * np.exp(1j * angle) * envelope

    raw_norm = float(np.linalg.norm(trial))
    coeffs = symgroup.projector_coefficients(alpha, sys.species_group())
    proj = build_projector(spec, coeffs, sys.species_members, label=alpha.label)
    trial = proj.apply(trial)
    sym_norm = float(np.linalg.norm(trial))
    if sym_norm < 1e-12 * max(raw_norm, 1e-300):
        raise ZeroTrialError(
            f"type {alpha.label} annihilates the {dec.label} product trial"
        )

    op = build_operator(sys, spec)
    num = float(np.real(np.vdot(trial, op.apply(trial))))
    quotient = num / (sym_norm**2)
    return WeylQuotient(
        separation=float(separation),
        box=float(box),
        n=int(n),
        quotient=quotient,
        target=e1 + e2,
        norm_ratio=sym_norm / raw_norm if raw_norm > 0 else 0.0,
        p1=p1,
        p2=p2,
        pair=(beta1.label, beta2.label),
    )


@dataclass
class HvzScan:
    levels: list[WeylQuotient]
    reference: float          # scan bottom the quotients should approach
    gaps: list[float]         # quotient minus reference, per level
    monotone: bool
    final_gap_rel: float

    def to_dict(self) -> dict:
        return {
            "reference": self.reference,
            "monotone": self.monotone,
            "final_gap_rel": self.final_gap_rel,
            "levels": [
                {
                    "separation": w.separation,
                    "box": w.box,
                    "n": w.n,
                    "quotient": w.quotient,
                    "target": w.target,
                    "gap": g,
                    "pair": list(w.pair),
                }
                for w, g in zip(self.levels, self.gaps)
            ],
        }


def hvz_scan(
    sys: ParticleSystem,
    alpha: symgroup.SymmetryType,
    cfg: ScanConfig = ScanConfig(),
    cache: FiberCache | None = None,
    report: threshold.ThresholdReport | None = None,
    levels: Sequence[tuple[float, float, int]] | None = None,
) -> HvzScan:
    """Trial-state quotients at growing separation and box against the scan
    bottom; the sequence should decrease toward it from above."""
    if cache is None:
        cache = FiberCache()
    if report is None:
        report = threshold.essential_bottom(sys, alpha, cfg, cache)
    from .system import enumerate_decompositions

    label = report.minimizing[0]
    dec = next(
        d
        for d in enumerate_decompositions(sys, dedup_orbits=True)
        if d.label == label
    )
    scan = next(s for s in report.scans if s.decomposition == label)
    q_star = scan.min_q

    if levels is None:
        # grow the box at fixed grid spacing so only the separation physics
        # changes from level to level
        dx = cfg.box / cfg.n
        levels = []
        for k in range(3):
            box_k = cfg.box * (2 + k) / 2.0
            n_k = int(round(box_k / dx))
            levels.append((box_k / 3.0, box_k, n_k))

    quotients = [
        weyl_quotient(sys, alpha, dec, q_star, s_k, cfg, n=n_k, box=box_k)
        for (s_k, box_k, n_k) in levels
    ]
    gaps = [w.quotient - report.mu for w in quotients]
    monotone = all(
        quotients[i + 1].quotient <= quotients[i].quotient + 1e-12
        for i in range(len(quotients) - 1)
    )
    scale = max(abs(report.mu), 0.01)
    return HvzScan(
        levels=quotients,
        reference=report.mu,
        gaps=gaps,
        monotone=monotone,
        final_gap_rel=abs(gaps[-1]) / scale,
    )


# ---------------------------------------------------------------------------
# Discrete spectrum below the bottom
# ---------------------------------------------------------------------------


@dataclass
class DiscreteSpectrum:
    eigenvalues: list[float]
    below: list[float]
    mu: float
    atol: float
    refined_below: list[float] | None
    max_shift: float | None

    @property
    def count(self) -> int:
        return len(self.below)

    def to_dict(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues,
            "below": self.below,
            "mu": self.mu,
            "atol": self.atol,
            "refined_below": self.refined_below,
            "max_shift": self.max_shift,
        }


def _fiber_eigenvalues(
    sys: ParticleSystem,
    alpha: symgroup.SymmetryType,
    k: int,
    cfg: ScanConfig,
    n: int,
    box: float,
) -> list[float]:
    q0 = snap_to_dual(box, sys.q0)
    spec = GridSpec(sys.dimension, tuple(range(sys.n_particles)), n, box, q0)
    op = build_operator(sys, spec)
    coeffs = symgroup.projector_coefficients(alpha, sys.species_group())
    proj = build_projector(spec, coeffs, sys.species_members, label=alpha.label)
    seed = threshold.stable_seed(cfg.seed, f"fiber:{alpha.label}:{n}:{box}")
    result = eigensolve.lowest_eigenpairs(
        op.apply,
        spec.shape,
        k=k,
        projector=proj.apply,
        tol=cfg.eig_tol,
        seed=seed,
        max_apply=cfg.max_apply,
    )
    return [float(e) for e in result.eigenvalues]


def discrete_spectrum_below(
    sys: ParticleSystem,
    alpha: symgroup.SymmetryType,
    mu: float,
    cfg: ScanConfig = ScanConfig(),
    k: int = 4,
    n: int | None = None,
    box: float | None = None,
    atol: float | None = None,
    refine: bool = False,
) -> DiscreteSpectrum:
    """Lowest sector eigenvalues of the full fiber operator, filtered below
    the essential bottom; optionally re-solved at doubled resolution."""
    n = cfg.n if n is None else n
    box = cfg.box if box is None else box
    atol = cfg.atol if atol is None else atol
    evs = _fiber_eigenvalues(sys, alpha, k, cfg, n, box)
    below = [e for e in evs if e < mu - atol]
    refined_below = None
    max_shift = None
    if refine:
        evs2 = _fiber_eigenvalues(sys, alpha, k, cfg, 2 * n, box)
        refined_below = [e for e in evs2 if e < mu - atol]
        pairs = zip(below, refined_below)
        shifts = [abs(a - b) for a, b in pairs]
        max_shift = max(shifts) if shifts else 0.0
    return DiscreteSpectrum(
        eigenvalues=evs,
        below=below,
        mu=mu,
        atol=atol,
        refined_below=refined_below,
        max_shift=max_shift,
    )


# ---------------------------------------------------------------------------
# Nonrelativistic limit
# ---------------------------------------------------------------------------


@dataclass
class NRCheck:
    sigmas: list[float]
    sqrt_energies: list[float]
    quad_energies: list[float]
    rel_devs: list[float]
    monotone: bool
    final_dev: float

    def to_dict(self) -> dict:
        return {
            "sigmas": self.sigmas,
            "sqrt_energies": self.sqrt_energies,
            "quad_energies": self.quad_energies,
            "rel_devs": self.rel_devs,
            "monotone": self.monotone,
            "final_dev": self.final_dev,
        }


def _scaled_system(sys: ParticleSystem, sigma: float) -> ParticleSystem:
    from .system import Particle

    particles = tuple(
        Particle(p.mass * sigma, p.species) for p in sys.particles
    )
    return ParticleSystem(particles, sys.dimension, sys.q0, dict(sys.potentials))


def nonrelativistic_crosscheck(
    sys: ParticleSystem,
    members: Sequence[int],
    beta: symgroup.SymmetryType,
    cfg: ScanConfig = ScanConfig(),
    sigmas: Sequence[float] = (10.0, 30.0, 100.0),
    n: int | None = None,
    box: float | None = None,
) -> NRCheck:
    """Binding energies under mass scaling, square-root versus quadratic
    kinetic energy; the relative deviation must shrink as masses grow."""
    n = cfg.n if n is None else n
    box = cfg.box if box is None else box
    members = tuple(sorted(members))
    sqrt_es: list[float] = []
    quad_es: list[float] = []
    for sigma in sigmas:
        scaled = _scaled_system(sys, sigma)
        spec = GridSpec(scaled.dimension, members, n, box, (0.0,) * scaled.dimension)
        group = symgroup.SpeciesGroup(tuple(scaled.subset_counts(members)))
        coeffs = symgroup.projector_coefficients(beta, group)
        proj = build_projector(
            spec, coeffs, threshold.cluster_species_members(scaled, members)
        )
        for kinetic, sink in (("sqrt", sqrt_es), ("quadratic", quad_es)):
            op = build_operator(scaled, spec, kinetic=kinetic)
            seed = threshold.stable_seed(cfg.seed, f"nr:{sigma}:{kinetic}")
            res = eigensolve.lowest_eigenpairs(
                op.apply,
                spec.shape,
                k=1,
                projector=proj.apply,
                tol=cfg.eig_tol,
                seed=seed,
                max_apply=cfg.max_apply,
            )
            sink.append(float(res.eigenvalues[0]))
    devs = [
        abs(a - b) / max(abs(b), 1e-300) for a, b in zip(sqrt_es, quad_es)
    ]
    monotone = all(devs[i + 1] <= devs[i] + 1e-12 for i in range(len(devs) - 1))
    return NRCheck(
        sigmas=[float(s) for s in sigmas],
        sqrt_energies=sqrt_es,
        quad_energies=quad_es,
        rel_devs=devs,
        monotone=monotone,
        final_dev=devs[-1],
    )


# ---------------------------------------------------------------------------
# Collapse without softening
# ---------------------------------------------------------------------------


@dataclass
class StabilityProbe:
    strength: float
    softenings: list[float]
    energies: list[float]
    drops: list[float]        # successive energy decreases
    unbounded_trend: bool     # drops keep growing as softening shrinks

    def to_dict(self) -> dict:
        return {
            "strength": self.strength,
            "softenings": self.softenings,
            "energies": self.energies,
            "drops": self.drops,
            "unbounded_trend": self.unbounded_trend,
        }


def stability_probe(
    strength: float,
    cfg: ScanConfig = ScanConfig(),
    softenings: Sequence[float] | None = None,
    mass: float = 1.0,
    n: int | None = None,
    box: float | None = None,
    beta: symgroup.SymmetryType | None = None,
) -> StabilityProbe:
    """Pair ground energy as the short-distance softening is removed.

    A collapsing channel shows ever larger energy drops per halving; a
    stable one settles. In one dimension the node of the odd pair sector
    tames the unsoftened attraction that sinks the even sector. The grid
    is refined together with the softening so the singular region stays
    resolved.
    """
    from .system import Particle

    n = cfg.n if n is None else n
    box = cfg.box if box is None else box
    if softenings is None:
        softenings = [1.0, 0.5, 0.25, 0.125]
    energies: list[float] = []
    beta = symgroup.parse_type("[2]") if beta is None else beta
    for i, a in enumerate(softenings):
        pot = PotentialSpec("softened-coulomb", strength, 1.0, float(a))
        pair = ParticleSystem(
            (Particle(mass, 0), Particle(mass, 0)), 1, (0.0,), {(0, 0): pot}
        )
        n_i = n * (2**i)  # halving the softening needs twice the resolution
        spec = GridSpec(1, (0, 1), n_i, box, (0.0,))
        op = build_operator(pair, spec)
        coeffs = symgroup.projector_coefficients(beta, pair.species_group())
        proj = build_projector(spec, coeffs, pair.species_members)
        seed = threshold.stable_seed(cfg.seed, f"probe:{beta.label}:{a}:{n_i}")
        res = eigensolve.lowest_eigenpairs(
            op.apply,
            spec.shape,
            k=1,
            projector=proj.apply,
            tol=cfg.eig_tol,
            seed=seed,
            max_apply=cfg.max_apply,
        )
        energies.append(float(res.eigenvalues[0]))
    drops = [energies[i] - energies[i + 1] for i in range(len(energies) - 1)]
    growing = all(drops[i + 1] >= drops[i] for i in range(len(drops) - 1))
    return StabilityProbe(
        strength=float(strength),
        softenings=[float(a) for a in softenings],
        energies=energies,
        drops=drops,
        unbounded_trend=bool(growing and drops and drops[-1] > 0),
    )
