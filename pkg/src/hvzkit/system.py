"""Particle systems: masses, species, pair potentials, cluster splits.

A system holds n+1 particles indexed 0..n, a spatial dimension, a total
momentum, and a species-pair potential table. Identical particles (same
species) must share masses and potentials; that is what makes the
permutation group act by symmetries later on.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from . import symgroup

POTENTIAL_KINDS = ("zero", "softened-coulomb", "yukawa", "gaussian-well")

# Attractive softened-Coulomb strengths beyond this make the continuum limit
# collapse for light particles; flag them during validation.
STABILITY_GUARD = 2.0 / math.pi


class ConfigError(ValueError):
    """Malformed system description."""


@dataclass(frozen=True)
class Particle:
    mass: float
    species: int

    def __post_init__(self) -> None:
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ConfigError(f"mass must be positive and finite, got {self.mass}")
        if self.species < 0:
            raise ConfigError(f"species must be a nonnegative integer, got {self.species}")


@dataclass(frozen=True)
class PotentialSpec:
    """One pair interaction. Which fields matter depends on the kind:

    zero              no parameters
    softened-coulomb  strength / sqrt(r^2 + softening^2)
    yukawa            strength * exp(-r/range) / sqrt(r^2 + softening^2)
    gaussian-well     strength * exp(-r^2 / range^2)
    """

    kind: str = "zero"
    strength: float = 0.0
    range: float = 1.0
    softening: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in POTENTIAL_KINDS:
            raise ConfigError(f"unknown potential kind {self.kind!r}")
        if self.kind in ("softened-coulomb", "yukawa") and not self.softening > 0:
            raise ConfigError(f"{self.kind} needs softening > 0")
        if self.kind in ("yukawa", "gaussian-well") and not self.range > 0:
            raise ConfigError(f"{self.kind} needs range > 0")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.strength == 0.0


def evaluate_potential(spec: PotentialSpec, r):
    """Potential value at separation r (scalar or array, elementwise)."""
    r = np.asarray(r, dtype=float)
    if spec.is_zero:
        return np.zeros_like(r)
    if spec.kind == "softened-coulomb":
        return spec.strength / np.sqrt(r * r + spec.softening**2)
    if spec.kind == "yukawa":
        return spec.strength * np.exp(-r / spec.range) / np.sqrt(r * r + spec.softening**2)
    if spec.kind == "gaussian-well":
        return spec.strength * np.exp(-(r * r) / spec.range**2)
    raise ConfigError(f"unknown potential kind {spec.kind!r}")


@dataclass
class ParticleSystem:
    """Immutable by convention; treat instances as values."""

    particles: tuple[Particle, ...]
    dimension: int
    q0: tuple[float, ...]
    potentials: dict[tuple[int, int], PotentialSpec] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.particles = tuple(self.particles)
        self.q0 = tuple(float(c) for c in self.q0)
        if self.dimension not in (1, 2, 3):
            raise ConfigError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if len(self.q0) != self.dimension:
            raise ConfigError(
                f"total momentum has {len(self.q0)} components, dimension is {self.dimension}"
            )
        if len(self.particles) < 2:
            raise ConfigError("need at least two particles")
        self.potentials = {
            (min(a, b), max(a, b)): spec for (a, b), spec in self.potentials.items()
        }
        present = set(self.species_list)
        for a, b in self.potentials:
            if a not in present or b not in present:
                raise ConfigError(f"potential references unknown species pair ({a},{b})")

    # -- species bookkeeping -------------------------------------------------

    @property
    def n_particles(self) -> int:
        return len(self.particles)

    @property
    def masses(self) -> tuple[float, ...]:
        return tuple(p.mass for p in self.particles)

    @property
    def total_mass(self) -> float:
        return float(sum(self.masses))

    @property
    def species_list(self) -> tuple[int, ...]:
        return tuple(sorted({p.species for p in self.particles}))

    @property
    def species_members(self) -> tuple[tuple[int, ...], ...]:
        return tuple(
            tuple(i for i, p in enumerate(self.particles) if p.species == s)
            for s in self.species_list
        )

    @property
    def species_sizes(self) -> tuple[int, ...]:
        return tuple(len(m) for m in self.species_members)

    def species_group(self) -> symgroup.SpeciesGroup:
        return symgroup.SpeciesGroup(self.species_sizes)

    def subset_counts(self, members: Sequence[int]) -> tuple[int, ...]:
        """Species signature of a particle subset, aligned with species_list."""
        mset = set(members)
        return tuple(
            sum(1 for i in sm if i in mset) for sm in self.species_members
        )

    def subset_mass(self, members: Sequence[int]) -> float:
        return float(sum(self.particles[i].mass for i in members))

    def pair_potential(self, i: int, j: int) -> PotentialSpec:
        a, b = self.particles[i].species, self.particles[j].species
        return self.potentials.get((min(a, b), max(a, b)), PotentialSpec())

    def content_key(self) -> str:
        """Canonical JSON snapshot; used for cache keys and manifests."""
        return json.dumps(system_to_dict(self), sort_keys=True)


@dataclass(frozen=True)
class ClusterDecomposition:
    """Unordered split into two clusters; the one holding particle 0 is first."""

    members1: tuple[int, ...]
    members2: tuple[int, ...]
    mass1: float
    mass2: float
    counts1: tuple[int, ...]
    counts2: tuple[int, ...]

    @classmethod
    def from_subsets(
        cls, sys: ParticleSystem, part2: Sequence[int]
    ) -> "ClusterDecomposition":
        part2 = tuple(sorted(part2))
        all_idx = set(range(sys.n_particles))
        if not part2 or not set(part2) < all_idx or 0 in part2:
            raise ConfigError(f"invalid second cluster {part2}")
        part1 = tuple(sorted(all_idx - set(part2)))
        return cls(
            part1,
            part2,
            sys.subset_mass(part1),
            sys.subset_mass(part2),
            sys.subset_counts(part1),
            sys.subset_counts(part2),
        )

    @property
    def label(self) -> str:
        fmt = lambda m: "{" + ",".join(str(i) for i in m) + "}"
        return fmt(self.members1) + "|" + fmt(self.members2)

    @property
    def orbit_key(self) -> tuple:
        """Splits with the same unordered species signature are permutation
        images of each other and share the same breakup curve up to Q -> -Q."""
        return tuple(sorted((self.counts1, self.counts2)))


def enumerate_decompositions(
    sys: ParticleSystem, dedup_orbits: bool = False
) -> list[ClusterDecomposition]:
    """All 2^n - 1 splits of n+1 particles, particle 0 kept in cluster one.

    With dedup_orbits, keep one representative per permutation orbit.
    """
    out = []
    seen: set[tuple] = set()
    rest = list(range(1, sys.n_particles))
    for r in range(1, len(rest) + 1):
        for combo in itertools.combinations(rest, r):
            dec = ClusterDecomposition.from_subsets(sys, combo)
            if dedup_orbits:
                if dec.orbit_key in seen:
                    continue
                seen.add(dec.orbit_key)
            out.append(dec)
    return out


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass
class ValidationReport:
    ok: bool
    errors: list[str]
    warnings: list[str]


def validate(sys: ParticleSystem) -> ValidationReport:
    """Check physical consistency; collect hard errors and soft warnings."""
    errors: list[str] = []
    warnings: list[str] = []

    by_species: dict[int, set[float]] = {}
    for p in sys.particles:
        by_species.setdefault(p.species, set()).add(p.mass)
    for s, masses in by_species.items():
        if len(masses) > 1:
            errors.append(f"species {s} has unequal masses {sorted(masses)}")

    for (a, b), spec in sys.potentials.items():
        if spec.kind == "softened-coulomb" and spec.strength < -STABILITY_GUARD:
            lightest = min(
                p.mass for p in sys.particles if p.species in (a, b)
            )
            warnings.append(
                f"softened-coulomb ({a},{b}) strength {spec.strength:g} exceeds the "
                f"critical coupling {-STABILITY_GUARD:.6f}; grid refinement can "
                f"collapse (lightest affected mass {lightest:g})"
            )

    if all(spec.is_zero for spec in sys.potentials.values()):
        warnings.append("all pair potentials vanish; spectra are purely kinetic")

    return ValidationReport(not errors, errors, warnings)


# ---------------------------------------------------------------------------
# Config ingestion and round trips
# ---------------------------------------------------------------------------


def system_from_dict(data: Mapping) -> ParticleSystem:
    try:
        dimension = int(data["dimension"])
        raw_particles = data["particles"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"config missing required field: {exc}") from exc

    particles: list[Particle] = []
    for entry in raw_particles:
        try:
            count = int(entry.get("count", 1))
            p = Particle(float(entry["mass"]), int(entry["species"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad particle entry {entry!r}: {exc}") from exc
        particles.extend([p] * count)

    q0 = data.get("q0", [0.0] * dimension)
    if isinstance(q0, (int, float)):
        q0 = [float(q0)]

    potentials: dict[tuple[int, int], PotentialSpec] = {}
    for entry in data.get("potentials", []):
        try:
            a, b = (int(s) for s in entry["species"])
            spec = PotentialSpec(
                kind=str(entry.get("kind", "zero")),
                strength=float(entry.get("strength", 0.0)),
                range=float(entry.get("range", 1.0)),
                softening=float(entry.get("softening", 1.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad potential entry {entry!r}: {exc}") from exc
        key = (min(a, b), max(a, b))
        if key in potentials:
            raise ConfigError(f"duplicate potential for species pair {key}")
        potentials[key] = spec

    return ParticleSystem(tuple(particles), dimension, tuple(q0), potentials)


def system_to_dict(sys: ParticleSystem) -> dict:
    return {
        "dimension": sys.dimension,
        "q0": list(sys.q0),
        "particles": [
            {"mass": p.mass, "species": p.species} for p in sys.particles
        ],
        "potentials": [
            {
                "species": list(pair),
                "kind": spec.kind,
                "strength": spec.strength,
                "range": spec.range,
                "softening": spec.softening,
            }
            for pair, spec in sorted(sys.potentials.items())
        ],
    }


def load_system(path: str | Path) -> ParticleSystem:
    """Read a YAML or JSON system description."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        data = yaml.safe_load(text)  # YAML is a JSON superset
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, Mapping):
        raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
    return system_from_dict(data)


def save_system(sys: ParticleSystem, path: str | Path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(sys), indent=2) + "\n")
