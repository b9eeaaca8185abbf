"""Bottom of the essential spectrum via two-cluster fiber decompositions.

For a symmetry type alpha, the essential bottom is the minimum over
two-cluster splits, over the relative fiber momentum Q, and over the pairs
of cluster types alpha restricts to, of the sum of the two cluster ground
energies at their fiber momenta. This module evaluates those cluster
energies (analytically where free, by projected iteration otherwise),
scans and refines the Q lattice, and reports minimizing decompositions
and minimizer sets, plus pointwise diagnostics for minimizer finiteness.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import eigensolve, symgroup
from .fourier_grid import (
    COORD,
    MOMENTUM,
    GridSpec,
    WaveFunction,
    build_operator,
    build_projector,
    kinetic_multiplier,
    permutation_operator,
    potential_multiplier,
    snap_to_dual,
)
from .system import ClusterDecomposition, ParticleSystem, enumerate_decompositions


@dataclass(frozen=True)
class ScanConfig:
    """Knobs for grids, scans and solves; defaults suit desk-scale systems."""

    n: int = 256
    box: float = 40.0
    qmax: float | None = None
    coarse_step: int = 4       # coarse Q spacing in reciprocal-lattice units
    refine_rounds: int = 2     # each round halves the Q spacing (doubling L)
    atol: float = 1e-6         # epsilon for collecting near-minimizers
    gap_tol: float = 1e-3      # discreteness margin for diagnostics
    eig_tol: float = 1e-9
    seed: int = 42
    threads: int = 1
    max_apply: int = 10000
    free_fast_path: bool = True

    def resolved_qmax(self, sys: ParticleSystem) -> float:
        if self.qmax is not None:
            return self.qmax
        return 5.0 * max(p.mass for p in sys.particles)


def stable_seed(base: int, key: str) -> int:
    """Mix a base seed with a content hash; reproducible across processes."""
    digest = hashlib.sha256(key.encode()).digest()
    return (base ^ int.from_bytes(digest[:4], "big")) & 0x7FFFFFFF


# ---------------------------------------------------------------------------
# Cluster energies
# ---------------------------------------------------------------------------


@dataclass
class FiberEnergy:
    """Ground energy of one cluster at one fiber momentum."""

    members: tuple[int, ...]
    beta: str
    momentum: tuple[float, ...]     # value actually used (lattice-snapped)
    requested: tuple[float, ...]
    energy: float
    residual: float
    method: str                     # dispersion | free-orbit | iterative
    n_apply: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "members": list(self.members),
            "beta": self.beta,
            "momentum": list(self.momentum),
            "requested": list(self.requested),
            "energy": self.energy,
            "residual": self.residual,
            "method": self.method,
            "n_apply": self.n_apply,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FiberEnergy":
        return cls(
            tuple(d["members"]),
            d["beta"],
            tuple(d["momentum"]),
            tuple(d["requested"]),
            d["energy"],
            d["residual"],
            d["method"],
            d["n_apply"],
            d["converged"],
        )


class FiberCache:
    """Exact-hit memo for cluster energies, optionally persisted to disk."""

    def __init__(self, directory: str | Path | None = None):
        self._mem: dict[str, FiberEnergy] = {}
        self._lock = threading.Lock()
        self._dir = Path(directory) if directory else None
        if self._dir:
            self._dir.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self._dir / (hashlib.sha256(key.encode()).hexdigest() + ".json")

    def get_or_compute(self, key: str, fn) -> FiberEnergy:
        with self._lock:
            if key in self._mem:
                return self._mem[key]
            if self._dir:
                p = self._path(key)
                if p.exists():
                    hit = FiberEnergy.from_dict(json.loads(p.read_text()))
                    self._mem[key] = hit
                    return hit
        value = fn()
        with self._lock:
            self._mem.setdefault(key, value)
            if self._dir:
                self._path(key).write_text(json.dumps(value.to_dict()))
        return value

    def __len__(self) -> int:
        return len(self._mem)


def dispersion(mass: float, momentum: Sequence[float]) -> float:
    """Single-particle mass-subtracted energy; exact in floating point."""
    acc = float(mass)
    for c in momentum:
        acc = math.hypot(acc, float(c))
    return acc - float(mass)


def _cluster_signature(
    sys: ParticleSystem, members: tuple[int, ...]
) -> tuple:
    """Cache identity of a cluster problem: species content, masses and
    intracluster potentials; permutation-equivalent clusters coincide."""
    kinds = sorted((sys.particles[i].species, sys.particles[i].mass) for i in members)
    pots = set()
    for a in range(len(members)):
        for b in range(a + 1, len(members)):
            i, j = members[a], members[b]
            spec = sys.pair_potential(i, j)
            if not spec.is_zero:
                si, sj = sys.particles[i].species, sys.particles[j].species
                pots.add(
                    (min(si, sj), max(si, sj), spec.kind, spec.strength,
                     spec.range, spec.softening)
                )
    return (tuple(kinds), tuple(sorted(pots)), sys.dimension)


def _cluster_is_free(sys: ParticleSystem, members: Sequence[int]) -> bool:
    for a in range(len(members)):
        for b in range(a + 1, len(members)):
            if not sys.pair_potential(members[a], members[b]).is_zero:
                return False
    return True


def cluster_species_members(
    sys: ParticleSystem, members: Sequence[int]
) -> list[list[int]]:
    """Cluster members per system species slot (possibly empty lists)."""
    mset = set(members)
    return [[i for i in sm if i in mset] for sm in sys.species_members]


def cluster_type_of(
    sys: ParticleSystem, members: Sequence[int], beta: symgroup.SymmetryType
) -> symgroup.SpeciesGroup:
    group = symgroup.SpeciesGroup(tuple(sys.subset_counts(members)))
    symgroup.check_type(beta, group)
    return group


def _free_sector_minimum(
    spec: GridSpec,
    sys: ParticleSystem,
    members: Sequence[int],
    beta: symgroup.SymmetryType,
) -> float:
    """Exact minimum of the free fiber multiplier over the beta sector.

    The permutation action permutes momentum lattice orbits; the sector is
    nonempty on an orbit exactly when beta occurs in the orbit's permutation
    module, with multiplicity given by a character inner product. The lowest
    admissible orbit value is the sector minimum, with no iteration error.
    """
    masses = {i: sys.particles[i].mass for i in members}
    tmult = kinetic_multiplier(spec, masses).reshape(-1)
    group = cluster_type_of(sys, members, beta)
    sp_members = cluster_species_members(sys, members)

    elements = list(group.elements())
    chars = [
        symgroup.type_character(beta, group.cycle_type(g)) for g in elements
    ]
    maps = []
    for g in elements:
        perm = symgroup.assemble_permutation(g, sp_members)
        maps.append(permutation_operator(spec, perm).index_map(MOMENTUM))

    # orbit labels as min index over the orbit; the map set is closed under
    # inverses, so gather-min sweeps converge to the orbit-wise minimum
    labels = np.arange(spec.size, dtype=np.int64)
    changed = True
    while changed:
        changed = False
        for gather in maps:
            relabeled = labels[gather]
            if np.any(relabeled < labels):
                labels = np.minimum(labels, relabeled)
                changed = True
    # orbit-wise fixed-point counts per group element
    mult = np.zeros(spec.size)
    for chi, gather in zip(chars, maps):
        if chi == 0:
            continue
        fixed = gather == np.arange(spec.size)
        counts = np.bincount(labels[fixed], minlength=spec.size)
        mult = mult + chi * counts
    mult = mult / group.order
    roots = labels == np.arange(spec.size)
    admissible = roots & (mult > 0.5)
    if not np.any(admissible):
        raise eigensolve.EmptySectorError(
            f"sector {beta.label} is empty on the free momentum lattice"
        )
    return float(np.min(tmult[admissible]))


def _solve_cluster(
    sys: ParticleSystem,
    members: tuple[int, ...],
    beta: symgroup.SymmetryType,
    momentum: tuple[float, ...],
    requested: tuple[float, ...],
    n: int,
    box: float,
    cfg: ScanConfig,
    want_vector: bool = False,
):
    """Iterative path: projected ground solve on the cluster fiber grid."""
    spec = GridSpec(sys.dimension, members, n, box, momentum)
    op = build_operator(sys, spec)
    group = cluster_type_of(sys, members, beta)
    coeffs = symgroup.projector_coefficients(beta, group)
    proj = build_projector(
        spec, coeffs, cluster_species_members(sys, members), label=beta.label
    )
    seed = stable_seed(
        cfg.seed,
        json.dumps(
            [_cluster_signature(sys, members), beta.label, list(momentum), n, box]
        ),
    )
    result = eigensolve.lowest_eigenpairs(
        op.apply,
        spec.shape,
        k=1,
        projector=proj.apply,
        tol=cfg.eig_tol,
        seed=seed,
        max_apply=cfg.max_apply,
    )
    fe = FiberEnergy(
        members=members,
        beta=beta.label,
        momentum=momentum,
        requested=requested,
        energy=float(result.eigenvalues[0]),
        residual=float(result.residuals[0]),
        method="iterative",
        n_apply=result.n_apply,
        converged=result.converged,
    )
    if want_vector:
        return fe, WaveFunction(result.vector(0), COORD, spec)
    return fe


def cluster_energy(
    sys: ParticleSystem,
    members: Sequence[int],
    beta: symgroup.SymmetryType,
    momentum: Sequence[float],
    cfg: ScanConfig,
    cache: FiberCache | None = None,
    n: int | None = None,
    box: float | None = None,
) -> FiberEnergy:
    """Ground energy of a cluster in sector beta at a fiber momentum.

    Singletons are exact dispersions at the requested momentum. Clusters on
    grids have their momentum snapped to the grid's reciprocal lattice so
    the symmetrization is exact; the snapped value is recorded.
    """
    members = tuple(sorted(members))
    requested = tuple(float(c) for c in momentum)
    n = cfg.n if n is None else n
    box = cfg.box if box is None else box

    if len(members) == 1:
        m = sys.particles[members[0]].mass
        return FiberEnergy(
            members=members,
            beta=beta.label,
            momentum=requested,
            requested=requested,
            energy=dispersion(m, requested),
            residual=0.0,
            method="dispersion",
            n_apply=0,
            converged=True,
        )

    snapped = snap_to_dual(box, requested)
    free = cfg.free_fast_path and _cluster_is_free(sys, members)
    key = json.dumps(
        {
            "sig": _cluster_signature(sys, members),
            "beta": beta.label,
            "p": [round(c, 12) for c in snapped],
            "n": n,
            "box": box,
            "free": free,
            "tol": cfg.eig_tol,
            "seed": cfg.seed,
        },
        sort_keys=True,
        default=list,
    )

    def compute() -> FiberEnergy:
        if free:
            spec = GridSpec(sys.dimension, members, n, box, snapped)
            value = _free_sector_minimum(spec, sys, members, beta)
            return FiberEnergy(
                members=members,
                beta=beta.label,
                momentum=snapped,
                requested=requested,
                energy=value,
                residual=0.0,
                method="free-orbit",
                n_apply=0,
                converged=True,
            )
        return _solve_cluster(
            sys, members, beta, snapped, requested, n, box, cfg
        )

    if cache is None:
        return compute()
    return cache.get_or_compute(key, compute)


def fiber_ground_state(
    sys: ParticleSystem,
    members: Sequence[int],
    beta: symgroup.SymmetryType,
    momentum: Sequence[float],
    cfg: ScanConfig,
    n: int | None = None,
    box: float | None = None,
):
    """Cluster ground energy together with its grid eigenvector (uncached)."""
    members = tuple(sorted(members))
    if len(members) == 1:
        raise ValueError("singletons have no internal state")
    n = cfg.n if n is None else n
    box = cfg.box if box is None else box
    requested = tuple(float(c) for c in momentum)
    snapped = snap_to_dual(box, requested)
    return _solve_cluster(
        sys, members, beta, snapped, requested, n, box, cfg, want_vector=True
    )


# ---------------------------------------------------------------------------
# Fiber momenta and branching
# ---------------------------------------------------------------------------


def fiber_momenta(
    dec: ClusterDecomposition, q0: Sequence[float], q: Sequence[float]
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Cluster momenta for total momentum q0 and relative fiber momentum q.

    P1 + P2 = q0 and the mass-weighted relative combination equals q; the
    unique solution is P1 = (M1/M) q0 - q, P2 = (M2/M) q0 + q.
    """
    mtot = dec.mass1 + dec.mass2
    p1 = tuple(dec.mass1 / mtot * c0 - c for c0, c in zip(q0, q))
    p2 = tuple(dec.mass2 / mtot * c0 + c for c0, c in zip(q0, q))
    return p1, p2


def branching_table(
    sys: ParticleSystem, alpha: symgroup.SymmetryType, dec: ClusterDecomposition
) -> symgroup.BranchingTable:
    symgroup.check_type(alpha, sys.species_group())
    return symgroup.branch(alpha, dec.counts1, dec.counts2)


# ---------------------------------------------------------------------------
# Breakup curves
# ---------------------------------------------------------------------------


@dataclass
class LambdaPoint:
    q: tuple[float, ...]
    value: float
    pair: tuple[str, str]          # minimizing branching pair labels
    e1: float
    e2: float
    p1: tuple[float, ...]
    p2: tuple[float, ...]


@dataclass
class LambdaCurve:
    decomposition: str
    alpha: str
    points: list[LambdaPoint] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.points])

    @property
    def q_array(self) -> np.ndarray:
        return np.array([p.q for p in self.points])

    def min_point(self) -> LambdaPoint:
        return min(self.points, key=lambda p: p.value)


def lambda_at(
    sys: ParticleSystem,
    alpha: symgroup.SymmetryType,
    dec: ClusterDecomposition,
    table: symgroup.BranchingTable,
    q: Sequence[float],
    cfg: ScanConfig,
    cache: FiberCache | None,
    n: int | None = None,
    box: float | None = None,
) -> LambdaPoint:
    """Two-cluster energy sum at fiber momentum q, minimized over branchings."""
    p1, p2 = fiber_momenta(dec, sys.q0, q)
    best: LambdaPoint | None = None
    for beta1, beta2, _mult in table.nonzero():
        e1 = cluster_energy(sys, dec.members1, beta1, p1, cfg, cache, n, box)
        e2 = cluster_energy(sys, dec.members2, beta2, p2, cfg, cache, n, box)
        value = e1.energy + e2.energy
        if best is None or value < best.value:
            best = LambdaPoint(
                q=tuple(float(c) for c in q),
                value=value,
                pair=(beta1.label, beta2.label),
                e1=e1.energy,
                e2=e2.energy,
                p1=e1.momentum,
                p2=e2.momentum,
            )
    if best is None:
        raise ValueError("branching table is empty")
    return best


def breakup_curve(
    sys: ParticleSystem,
    alpha: symgroup.SymmetryType,
    dec: ClusterDecomposition,
    q_list: Sequence[Sequence[float]],
    cfg: ScanConfig,
    cache: FiberCache | None = None,
    n: int | None = None,
    box: float | None = None,
) -> LambdaCurve:
    table = branching_table(sys, alpha, dec)
    curve = LambdaCurve(decomposition=dec.label, alpha=alpha.label)
    worker = lambda q: lambda_at(sys, alpha, dec, table, q, cfg, cache, n, box)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            curve.points = list(pool.map(worker, q_list))
    else:
        curve.points = [worker(q) for q in q_list]
    return curve


# ---------------------------------------------------------------------------
# Q lattices
# ---------------------------------------------------------------------------


def q_lattice(
    box: float, step: int, qmax: float, dimension: int,
    center: Sequence[float] | None = None,
) -> list[tuple[float, ...]]:
    """Reciprocal-lattice Q samples: multiples of step*(2 pi / box) covering
    [-qmax, qmax]^d around an optional center, always including the center."""
    unit = 2.0 * np.pi / box * step
    jmax = max(1, int(math.floor(qmax / unit + 1e-9)))
    c = [0.0] * dimension if center is None else list(center)
    cj = [round(ci / unit) for ci in c]
    axes = [
        [unit * (cj[a] + j) for j in range(-jmax, jmax + 1)]
        for a in range(dimension)
    ]
    out = [()]
    for axis in axes:
        out = [prev + (v,) for prev in out for v in axis]
    return out


def _lattice_clusters(
    points: list[tuple[float, ...]], values: np.ndarray, eps: float, unit: float
) -> list[list[int]]:
    """Group epsilon-minimizers into connected lattice clusters."""
    lo = float(np.min(values))
    idx = [i for i, v in enumerate(values) if v <= lo + eps]
    coords = {i: tuple(round(c / unit) for c in points[i]) for i in idx}
    remaining = set(idx)
    clusters = []
    while remaining:
        seed_i = min(remaining)
        stack = [seed_i]
        remaining.discard(seed_i)
        comp = [seed_i]
        while stack:
            cur = stack.pop()
            cc = coords[cur]
            for other in list(remaining):
                oc = coords[other]
                if all(abs(a - b) <= 1 for a, b in zip(cc, oc)):
                    remaining.discard(other)
                    stack.append(other)
                    comp.append(other)
        clusters.append(comp)
    return clusters


# ---------------------------------------------------------------------------
# Essential bottom
# ---------------------------------------------------------------------------


@dataclass
class DecompositionScan:
    decomposition: str
    members1: tuple[int, ...]
    members2: tuple[int, ...]
    branching: list[tuple[str, str, int]]
    coarse: LambdaCurve
    refined: list[LambdaCurve]
    min_value: float
    min_q: tuple[float, ...]
    min_pair: tuple[str, str]
    gamma: list[tuple[float, ...]]
    coarse_minimizer_count: int
    boundary_close: bool


@dataclass
class ThresholdReport:
    alpha: str
    mu: float
    scans: list[DecompositionScan]
    minimizing: list[str]            # decomposition labels within atol of mu
    warnings: list[str]
    config: dict

    def gamma_of(self, label: str) -> list[tuple[float, ...]]:
        for s in self.scans:
            if s.decomposition == label:
                return s.gamma
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "mu": self.mu,
            "minimizing": self.minimizing,
            "warnings": self.warnings,
            "config": self.config,
            "scans": [
                {
                    "decomposition": s.decomposition,
                    "members1": list(s.members1),
                    "members2": list(s.members2),
                    "branching": [
                        {"beta1": b1, "beta2": b2, "multiplicity": m}
                        for b1, b2, m in s.branching
                    ],
                    "min_value": s.min_value,
                    "min_q": list(s.min_q),
                    "min_pair": list(s.min_pair),
                    "gamma": [list(q) for q in s.gamma],
                    "coarse_minimizer_count": s.coarse_minimizer_count,
                    "boundary_close": s.boundary_close,
                    "coarse": _curve_rows(s.coarse),
                    "refined": [_curve_rows(c) for c in s.refined],
                }
                for s in self.scans
            ],
        }


def _curve_rows(curve: LambdaCurve) -> list[dict]:
    return [
        {
            "q": list(p.q),
            "value": p.value,
            "beta1": p.pair[0],
            "beta2": p.pair[1],
            "e1": p.e1,
            "e2": p.e2,
        }
        for p in curve.points
    ]


def scan_decomposition(
    sys: ParticleSystem,
    alpha: symgroup.SymmetryType,
    dec: ClusterDecomposition,
    cfg: ScanConfig,
    cache: FiberCache | None,
) -> DecompositionScan:
    """Coarse lattice scan plus local refinements around minimizer clusters."""
    qmax = cfg.resolved_qmax(sys)
    d = sys.dimension
    table = branching_table(sys, alpha, dec)

    coarse_pts = q_lattice(cfg.box, cfg.coarse_step, qmax, d)
    coarse = breakup_curve(sys, alpha, dec, coarse_pts, cfg, cache)
    unit0 = 2.0 * np.pi / cfg.box * cfg.coarse_step

    values = coarse.values
    clusters = _lattice_clusters(coarse_pts, values, cfg.atol, unit0)
    reps = [
        coarse_pts[min(comp, key=lambda i: values[i])] for comp in clusters
    ]
    coarse_count = len(clusters)

    # boundary proximity: compactness of the minimizer set fails when the
    # scan edge competes with the interior minimum
    jmax_coord = max(abs(c) for q in coarse_pts for c in q)
    boundary_vals = [
        v for q, v in zip(coarse_pts, values)
        if max(abs(c) for c in q) >= jmax_coord - 1e-12
    ]
    boundary_close = bool(
        boundary_vals
        and min(boundary_vals) <= float(np.min(values)) + max(cfg.gap_tol, cfg.atol)
    )

    refined: list[LambdaCurve] = []
    for r in range(1, cfg.refine_rounds + 1):
        box_r = cfg.box * (2**r)
        n_r = cfg.n * (2**r)
        unit_r = 2.0 * np.pi / box_r * cfg.coarse_step
        pts: list[tuple[float, ...]] = []
        for rep in reps:
            local = q_lattice(box_r, cfg.coarse_step, 2.5 * unit_r, d, center=rep)
            pts.extend(p for p in local if p not in pts)
        curve = breakup_curve(sys, alpha, dec, pts, cfg, cache, n=n_r, box=box_r)
        refined.append(curve)
        vals_r = curve.values
        clusters_r = _lattice_clusters(pts, vals_r, cfg.atol, unit_r)
        reps = [pts[min(comp, key=lambda i: vals_r[i])] for comp in clusters_r]

    # the finest sweep is authoritative: refinement re-evaluates on larger
    # boxes, so values drift by discretization between rounds and mixing
    # levels would make the epsilon filter meaningless
    final_curve = refined[-1] if refined else coarse
    best = final_curve.min_point()
    fv = final_curve.values
    final_unit = 2.0 * np.pi / (cfg.box * (2**cfg.refine_rounds)) * cfg.coarse_step \
        if refined else unit0
    final_pts = [p.q for p in final_curve.points]
    final_clusters = _lattice_clusters(final_pts, fv, cfg.atol, final_unit)
    gamma_reps = [
        final_pts[min(comp, key=lambda i: fv[i])] for comp in final_clusters
    ]

    return DecompositionScan(
        decomposition=dec.label,
        members1=dec.members1,
        members2=dec.members2,
        branching=[(b1.label, b2.label, m) for b1, b2, m in table.nonzero()],
        coarse=coarse,
        refined=refined,
        min_value=best.value,
        min_q=best.q,
        min_pair=best.pair,
        gamma=gamma_reps,
        coarse_minimizer_count=coarse_count,
        boundary_close=boundary_close,
    )


def essential_bottom(
    sys: ParticleSystem,
    alpha: symgroup.SymmetryType,
    cfg: ScanConfig = ScanConfig(),
    cache: FiberCache | None = None,
) -> ThresholdReport:
    """Essential-spectrum bottom for symmetry type alpha, with minimizing
    decompositions and minimizer-set estimates."""
    symgroup.check_type(alpha, sys.species_group())
    if cache is None:
        cache = FiberCache()
    decs = enumerate_decompositions(sys, dedup_orbits=True)
    scans = [scan_decomposition(sys, alpha, dec, cfg, cache) for dec in decs]
    mu = min(s.min_value for s in scans)
    minimizing = [s.decomposition for s in scans if s.min_value <= mu + cfg.atol]
    warnings = []
    for s in scans:
        if s.boundary_close:
            warnings.append(
                f"scan boundary competes with the minimum for {s.decomposition}; "
                "increase qmax"
            )
    return ThresholdReport(
        alpha=alpha.label,
        mu=mu,
        scans=scans,
        minimizing=minimizing,
        warnings=warnings,
        config={
            "n": cfg.n,
            "box": cfg.box,
            "qmax": cfg.resolved_qmax(sys),
            "coarse_step": cfg.coarse_step,
            "refine_rounds": cfg.refine_rounds,
            "atol": cfg.atol,
            "gap_tol": cfg.gap_tol,
            "eig_tol": cfg.eig_tol,
            "seed": cfg.seed,
        },
    )


# ---------------------------------------------------------------------------
# Breakup thresholds (further splitting of a two-cluster channel)
# ---------------------------------------------------------------------------


def subsystem(
    sys: ParticleSystem, members: Sequence[int], momentum: Sequence[float]
) -> ParticleSystem:
    """Standalone system made of a cluster's particles at a total momentum.

    Particle order follows sorted member indices; potentials are inherited
    for the species still present. Cross-cluster statistics do not affect
    breakup energies, so the subsystem is self-contained.
    """
    members = tuple(sorted(members))
    particles = tuple(sys.particles[i] for i in members)
    present = {p.species for p in particles}
    pots = {
        key: spec
        for key, spec in sys.potentials.items()
        if key[0] in present and key[1] in present
    }
    return ParticleSystem(particles, sys.dimension, tuple(momentum), pots)


def restrict_type(
    sys: ParticleSystem, members: Sequence[int], beta: symgroup.SymmetryType
) -> symgroup.SymmetryType:
    """Drop the empty species slots of a cluster type for subsystem use."""
    counts = sys.subset_counts(members)
    comps = tuple(c for c, k in zip(beta.components, counts) if k > 0)
    return symgroup.SymmetryType(comps)


def _sub_config(cfg: ScanConfig, sub: ParticleSystem) -> ScanConfig:
    # two-particle breakups cost nothing (pure dispersions), so scan densely
    if sub.n_particles == 2:
        return replace(
            cfg, coarse_step=1, refine_rounds=max(cfg.refine_rounds, 4), threads=1
        )
    return replace(cfg, threads=1)


def breakup_threshold(
    sys: ParticleSystem,
    alpha: symgroup.SymmetryType,
    dec: ClusterDecomposition,
    q: Sequence[float],
    cfg: ScanConfig,
    cache: FiberCache | None = None,
) -> float:
    """Bottom of the essential spectrum of the two-cluster channel at q.

    The channel operator's essential spectrum starts where one of the two
    clusters breaks up further while the other stays in its ground state;
    cluster breakup bottoms recurse through subsystem scans. Below this
    value, channel eigenvalues at q are genuinely discrete.
    """
    table = branching_table(sys, alpha, dec)
    p1, p2 = fiber_momenta(dec, sys.q0, q)
    best = math.inf
    sides = (
        (dec.members1, dec.members2, p1, p2, 0),
        (dec.members2, dec.members1, p2, p1, 1),
    )
    for split_members, intact_members, p_split, p_intact, side in sides:
        if len(split_members) < 2:
            continue
        sub = subsystem(sys, split_members, p_split)
        sub_cfg = _sub_config(cfg, sub)
        seen: dict[str, float] = {}
        for beta1, beta2, _m in table.nonzero():
            beta_split = beta1 if side == 0 else beta2
            beta_intact = beta2 if side == 0 else beta1
            sub_type = restrict_type(sys, split_members, beta_split)
            if sub_type.label not in seen:
                rep = essential_bottom(sub, sub_type, sub_cfg, cache)
                seen[sub_type.label] = rep.mu
            e_int = cluster_energy(
                sys, intact_members, beta_intact, p_intact, cfg, cache
            )
            best = min(best, seen[sub_type.label] + e_int.energy)
    return best


# ---------------------------------------------------------------------------
# Compound two-cluster fiber operator
# ---------------------------------------------------------------------------


def _factor_arrays(
    sys: ParticleSystem,
    members: tuple[int, ...],
    momentum: tuple[float, ...],
    n: int,
    box: float,
):
    """Flat kinetic/potential multipliers, shape, and per-element gather and
    phase tables for one cluster factor; singletons collapse to scalars."""
    if len(members) == 1:
        m = sys.particles[members[0]].mass
        t = np.array([dispersion(m, momentum)])
        v = np.zeros(1)
        ident = symgroup.SpeciesGroup(
            tuple(sys.subset_counts(members))
        ).identity
        tables = {ident: (np.zeros(1, dtype=np.int64), None)}
        return t, v, (), tables

    spec = GridSpec(sys.dimension, members, n, box, momentum)
    masses = {i: sys.particles[i].mass for i in members}
    t = kinetic_multiplier(spec, masses).reshape(-1)
    v = potential_multiplier(sys, spec).reshape(-1)
    group = symgroup.SpeciesGroup(tuple(sys.subset_counts(members)))
    sp_members = cluster_species_members(sys, members)
    tables = {}
    for g in group.elements():
        perm = symgroup.assemble_permutation(g, sp_members)
        op = permutation_operator(spec, perm)
        tables[g] = (op.index_map(COORD), op.phase(COORD))
    return t, v, spec.shape, tables


def _combine_term(entry1, entry2, size2: int):
    g1, ph1 = entry1
    g2, ph2 = entry2
    gather = (g1[:, None] * size2 + g2[None, :]).reshape(-1)
    if ph1 is None and ph2 is None:
        phase = None
    else:
        a = np.ones(len(g1)) if ph1 is None else ph1
        b = np.ones(len(g2)) if ph2 is None else ph2
        phase = (np.asarray(a)[:, None] * np.asarray(b)[None, :]).reshape(-1)
    return gather, phase


class CompoundFiber:
    """Two non-interacting clusters on a product grid, restricted to the
    subspace carrying the admissible pairs of cluster symmetry types."""

    def __init__(
        self,
        sys: ParticleSystem,
        dec: ClusterDecomposition,
        table: symgroup.BranchingTable,
        q: Sequence[float],
        n: int,
        box: float,
    ):
        self.decomposition = dec
        self.pairs = list(table.nonzero())
        if not self.pairs:
            raise ValueError("branching table is empty")
        p1_req, p2_req = fiber_momenta(dec, sys.q0, q)
        p1 = snap_to_dual(box, p1_req) if len(dec.members1) > 1 else p1_req
        p2 = snap_to_dual(box, p2_req) if len(dec.members2) > 1 else p2_req
        self.p1, self.p2 = p1, p2
        t1, v1, shape1, tab1 = _factor_arrays(sys, dec.members1, p1, n, box)
        t2, v2, shape2, tab2 = _factor_arrays(sys, dec.members2, p2, n, box)
        self.size1, self.size2 = len(t1), len(t2)
        self.shape = (shape1 + shape2) if (shape1 + shape2) else (1,)
        self.tmult = (t1[:, None] + t2[None, :]).reshape(self.shape)
        self.vmult = (v1[:, None] + v2[None, :]).reshape(self.shape)

        group1 = symgroup.SpeciesGroup(tuple(sys.subset_counts(dec.members1)))
        group2 = symgroup.SpeciesGroup(tuple(sys.subset_counts(dec.members2)))
        self._pair_terms: dict[tuple[str, str], list] = {}
        combined: dict[tuple, float] = {}
        cache_terms: dict[tuple, tuple] = {}
        for beta1, beta2, _m in self.pairs:
            c1 = symgroup.projector_coefficients(beta1, group1)
            c2 = symgroup.projector_coefficients(beta2, group2)
            terms = []
            for g1, a in c1.items():
                fa = float(a)
                if fa == 0.0:
                    continue
                for g2, b in c2.items():
                    fb = float(b)
                    if fb == 0.0:
                        continue
                    key = (g1, g2)
                    if key not in cache_terms:
                        cache_terms[key] = _combine_term(
                            tab1[g1], tab2[g2], self.size2
                        )
                    combined[key] = combined.get(key, 0.0) + fa * fb
                    terms.append((fa * fb,) + cache_terms[key])
            self._pair_terms[(beta1.label, beta2.label)] = terms
        self._proj_terms = [
            (c,) + cache_terms[key] for key, c in combined.items() if c != 0.0
        ]

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = np.fft.ifftn(self.tmult * np.fft.fftn(psi, norm="ortho"), norm="ortho")
        return out + self.vmult * psi

    def project(self, psi: np.ndarray) -> np.ndarray:
        flat = psi.reshape(-1)
        out = None
        for coeff, gather, phase in self._proj_terms:
            term = coeff * flat[gather]
            if phase is not None:
                term = term * phase
            out = term if out is None else out + term
        return out.reshape(psi.shape)

    def pair_trace(self, vectors: np.ndarray, pair: tuple[str, str]) -> float:
        """Sum of <v, P_pair v> over orthonormal columns; equals multiplicity
        times the pair dimension on any invariant subspace."""
        total = 0.0
        for i in range(vectors.shape[1]):
            v = vectors[:, i]
            pv = np.zeros_like(v)
            for coeff, gather, phase in self._pair_terms[pair]:
                term = coeff * v[gather]
                if phase is not None:
                    term = term * phase
                pv = pv + term
            total += float(np.real(np.vdot(v, pv)))
        return total


# ---------------------------------------------------------------------------
# Minimizer diagnostics
# ---------------------------------------------------------------------------


@dataclass
class QDiagnostic:
    q: tuple[float, ...]
    value: float
    threshold: float
    is_discrete: bool
    eigenspace_dim: int
    components: dict[str, int]       # "beta1|beta2" -> multiplicity
    lowest_pair: str | None          # set when exactly one component
    trace_defect: float              # worst distance of a trace to an integer


@dataclass
class MinimizerDiagnostics:
    alpha: str
    decomposition: str
    center: tuple[float, ...]
    halfwidth: float
    spacing: float
    points: list[QDiagnostic]
    all_discrete: bool
    single_component: bool
    lowest_pair: str | None          # common pair label when constant
    pair_constant: bool
    second_difference_ratio: float   # max |second difference| over median
    smooth: bool
    count_coarse: int
    count_fine: int
    counts_match: bool
    warnings: list[str]

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "decomposition": self.decomposition,
            "center": list(self.center),
            "halfwidth": self.halfwidth,
            "spacing": self.spacing,
            "all_discrete": self.all_discrete,
            "single_component": self.single_component,
            "lowest_pair": self.lowest_pair,
            "pair_constant": self.pair_constant,
            "second_difference_ratio": self.second_difference_ratio,
            "smooth": self.smooth,
            "count_coarse": self.count_coarse,
            "count_fine": self.count_fine,
            "counts_match": self.counts_match,
            "warnings": self.warnings,
            "points": [
                {
                    "q": list(p.q),
                    "value": p.value,
                    "threshold": p.threshold,
                    "is_discrete": p.is_discrete,
                    "eigenspace_dim": p.eigenspace_dim,
                    "components": p.components,
                    "lowest_pair": p.lowest_pair,
                    "trace_defect": p.trace_defect,
                }
                for p in self.points
            ],
        }


def _second_difference_ratio(
    points: list[tuple[float, ...]], values: np.ndarray, unit: float
) -> float:
    """Largest second difference along lattice lines over the median one."""
    coords = [tuple(round(c / unit) for c in q) for q in points]
    index = {c: i for c, i in zip(coords, range(len(points)))}
    diffs: list[float] = []
    d = len(points[0])
    for c in coords:
        for axis in range(d):
            lo = tuple(x - (1 if a == axis else 0) for a, x in enumerate(c))
            hi = tuple(x + (1 if a == axis else 0) for a, x in enumerate(c))
            if lo in index and hi in index:
                diffs.append(
                    abs(
                        values[index[hi]]
                        - 2.0 * values[index[c]]
                        + values[index[lo]]
                    )
                )
    if not diffs:
        return 0.0
    med = float(np.median(diffs))
    top = float(np.max(diffs))
    if med <= 0.0:
        return 0.0 if top <= 0.0 else math.inf
    return top / med


def diagnose_point(
    sys: ParticleSystem,
    alpha: symgroup.SymmetryType,
    dec: ClusterDecomposition,
    q: Sequence[float],
    cfg: ScanConfig,
    cache: FiberCache | None = None,
    n: int | None = None,
    box: float | None = None,
) -> QDiagnostic:
    """Full channel diagnosis at one fiber momentum: value, discreteness,
    and the symmetry decomposition of the lowest compound eigenspace."""
    n = cfg.n if n is None else n
    box = cfg.box if box is None else box
    table = branching_table(sys, alpha, dec)
    compound = CompoundFiber(sys, dec, table, q, n, box)
    thr = breakup_threshold(sys, alpha, dec, q, cfg, cache)

    k = sum(b1.dim * b2.dim for b1, b2, _ in compound.pairs) + 1
    seed = stable_seed(
        cfg.seed, json.dumps(["compound", dec.label, [round(c, 12) for c in q]])
    )
    result = eigensolve.lowest_eigenpairs(
        compound.apply,
        compound.shape,
        k=k,
        projector=compound.project,
        tol=cfg.eig_tol,
        seed=seed,
        max_apply=cfg.max_apply,
    )
    groups = eigensolve.degeneracy_clusters(result.eigenvalues)
    bottom = groups[0]
    vectors = result.eigenvectors[:, bottom]
    value = float(result.eigenvalues[bottom[0]])

    components: dict[str, int] = {}
    defect = 0.0
    for beta1, beta2, _m in compound.pairs:
        dim_pair = beta1.dim * beta2.dim
        tr = compound.pair_trace(vectors, (beta1.label, beta2.label))
        mult = tr / dim_pair
        defect = max(defect, abs(mult - round(mult)))
        m_int = int(round(mult))
        if m_int > 0:
            components[f"{beta1.label}|{beta2.label}"] = m_int
    n_comp = sum(components.values())
    lowest = next(iter(components)) if n_comp == 1 else None
    return QDiagnostic(
        q=tuple(float(c) for c in q),
        value=value,
        threshold=thr,
        is_discrete=bool(value < thr - cfg.gap_tol),
        eigenspace_dim=len(bottom),
        components=components,
        lowest_pair=lowest,
        trace_defect=float(defect),
    )


def minimizer_diagnostics(
    sys: ParticleSystem,
    alpha: symgroup.SymmetryType,
    cfg: ScanConfig = ScanConfig(),
    cache: FiberCache | None = None,
    report: ThresholdReport | None = None,
    dec_label: str | None = None,
    center: Sequence[float] | None = None,
    halfwidth: float | None = None,
) -> MinimizerDiagnostics:
    """Examine the minimizer region of a minimizing decomposition.

    Checks the hypotheses under which the minimizer set stays finite:
    every sampled channel value is a discrete eigenvalue of its fiber
    operator, the lowest eigenspace carries exactly one pair of cluster
    types that stays constant over the region, the curve is smooth (no
    second-difference spikes), and halving the scan spacing does not
    change the number of distinct minimizers.
    """
    if cache is None:
        cache = FiberCache()
    if report is None and (dec_label is None or center is None):
        report = essential_bottom(sys, alpha, cfg, cache)
    if dec_label is None:
        dec_label = report.minimizing[0]
    dec = next(
        d
        for d in enumerate_decompositions(sys, dedup_orbits=True)
        if d.label == dec_label
    )
    if center is None:
        scan = next(s for s in report.scans if s.decomposition == dec_label)
        center = scan.min_q
    unit = 2.0 * np.pi / cfg.box * cfg.coarse_step
    if halfwidth is None:
        halfwidth = 3.0 * unit

    pts = q_lattice(cfg.box, cfg.coarse_step, halfwidth, sys.dimension, center)
    diags = [
        diagnose_point(sys, alpha, dec, q, cfg, cache) for q in pts
    ]
    values = np.array([p.value for p in diags])

    # same window at half the spacing; values only, for counting and curvature
    fine_pts = q_lattice(
        2.0 * cfg.box, cfg.coarse_step, halfwidth, sys.dimension, center
    )
    fine_curve = breakup_curve(
        sys, alpha, dec, fine_pts, cfg, cache, n=2 * cfg.n, box=2.0 * cfg.box
    )
    fine_vals = fine_curve.values

    count_coarse = len(_lattice_clusters(pts, values, cfg.atol, unit))
    count_fine = len(
        _lattice_clusters(fine_pts, fine_vals, cfg.atol, unit / 2.0)
    )
    ratio = _second_difference_ratio(fine_pts, fine_vals, unit / 2.0)

    all_discrete = all(p.is_discrete for p in diags)
    single = all(sum(p.components.values()) == 1 for p in diags)
    labels = {p.lowest_pair for p in diags}
    pair_constant = single and len(labels) == 1
    lowest = labels.pop() if pair_constant else None

    warnings: list[str] = []
    if not all_discrete:
        bad = [p.q for p in diags if not p.is_discrete]
        warnings.append(
            f"channel value is not below the breakup threshold at {bad}"
        )
    if not single:
        warnings.append("lowest eigenspace carries more than one type pair")
    elif not pair_constant:
        warnings.append(f"lowest type pair varies over the region: {labels}")
    if any(p.trace_defect > 1e-3 for p in diags):
        warnings.append("projector traces are far from integers; eigenspace unresolved")
    if count_coarse != count_fine:
        warnings.append(
            f"minimizer count changed under refinement: {count_coarse} -> {count_fine}"
        )
    smooth = bool(ratio <= 10.0)
    if not smooth:
        warnings.append(f"second differences spike (ratio {ratio:.1f})")

    return MinimizerDiagnostics(
        alpha=alpha.label,
        decomposition=dec.label,
        center=tuple(float(c) for c in center),
        halfwidth=float(halfwidth),
        spacing=unit,
        points=diags,
        all_discrete=all_discrete,
        single_component=single,
        lowest_pair=lowest,
        pair_constant=pair_constant,
        second_difference_ratio=float(ratio),
        smooth=smooth,
        count_coarse=count_coarse,
        count_fine=count_fine,
        counts_match=bool(count_coarse == count_fine),
        warnings=warnings,
    )
