"""Exact representation theory for products of symmetric groups.

Identical particles of one species carry a symmetric-group factor; a system
with several species is symmetrized under the direct product of those
factors.  Everything here is integer or rational arithmetic: characters via
the Murnaghan-Nakayama recursion, dimensions via the hook length formula,
projector coefficients as exact fractions, and restriction multiplicities
to two-cluster subgroups via character inner products.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Mapping, Sequence

# Factorial growth makes brute enumeration past this size pointless at desk scale.
PARTITION_CAP = 12
GROUP_ORDER_CAP = math.factorial(10)


class CapExceededError(ValueError):
    """Requested size exceeds the exact-arithmetic safety cap."""


class ShapeError(ValueError):
    """Partition or symmetry type does not match the group it is used with."""


# ---------------------------------------------------------------------------
# Partitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Partition:
    """Integer partition in weakly decreasing order; the empty tuple is allowed
    and labels the unique symmetry type of a zero-particle factor."""

    parts: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(p < 1 for p in self.parts):
            raise ShapeError(f"parts must be positive: {self.parts}")
        if any(self.parts[i] < self.parts[i + 1] for i in range(len(self.parts) - 1)):
            raise ShapeError(f"parts must be weakly decreasing: {self.parts}")

    @property
    def n(self) -> int:
        return sum(self.parts)

    @property
    def label(self) -> str:
        return "[" + ",".join(str(p) for p in self.parts) + "]"

    def __str__(self) -> str:
        return self.label


def partition(*parts: int) -> Partition:
    return Partition(tuple(parts))


def partitions_of(n: int, cap: int = PARTITION_CAP) -> list[Partition]:
    """All partitions of n in reverse lexicographic order, [n] first.

    n = 0 yields the single empty partition.
    """
    if n < 0:
        raise ShapeError(f"cannot partition {n}")
    if n > cap:
        raise CapExceededError(f"n={n} exceeds cap {cap}")

    out: list[Partition] = []

    def descend(remaining: int, largest: int, prefix: tuple[int, ...]) -> None:
        if remaining == 0:
            out.append(Partition(prefix))
            return
        for p in range(min(largest, remaining), 0, -1):
            descend(remaining - p, p, prefix + (p,))

    descend(n, n, ())
    return out


def transpose(p: Partition) -> Partition:
    if not p.parts:
        return p
    cols = tuple(sum(1 for q in p.parts if q > i) for i in range(p.parts[0]))
    return Partition(cols)


def hook_dimension(p: Partition) -> int:
    """Dimension of the irreducible representation labeled by p, by hooks."""
    if not p.parts:
        return 1
    tp = transpose(p)
    prod = 1
    for i, row in enumerate(p.parts):
        for j in range(row):
            prod *= row - j + tp.parts[j] - i - 1
    return math.factorial(p.n) // prod


# ---------------------------------------------------------------------------
# Characters (Murnaghan-Nakayama)
# ---------------------------------------------------------------------------


def _beta_set(parts: tuple[int, ...]) -> list[int]:
    # First-column hook lengths; strictly decreasing.
    r = len(parts)
    return [parts[i] + (r - 1 - i) for i in range(r)]


def _parts_from_beta(beta: Sequence[int]) -> tuple[int, ...]:
    ordered = sorted(beta, reverse=True)
    parts = tuple(b - (len(ordered) - 1 - i) for i, b in enumerate(ordered))
    return tuple(p for p in parts if p > 0)


@lru_cache(maxsize=None)
def _mn_character(parts: tuple[int, ...], cycles: tuple[int, ...]) -> int:
    if sum(parts) != sum(cycles):
        raise ShapeError(f"size mismatch: {parts} vs cycles {cycles}")
    if not cycles:
        return 1
    t, rest = cycles[0], cycles[1:]
    beta = _beta_set(parts)
    bset = set(beta)
    total = 0
    for b in beta:
        nb = b - t
        if nb < 0 or nb in bset:
            continue
        height = sum(1 for c in beta if nb < c < b)
        newbeta = [c for c in beta if c != b] + [nb]
        term = _mn_character(_parts_from_beta(newbeta), rest)
        total += -term if height % 2 else term
    return total


def character(p: Partition, cycle_type: Partition) -> int:
    """Irreducible character chi^p evaluated on the class of cycle_type."""
    if p.n != cycle_type.n:
        raise ShapeError(f"{p} is a type for S_{p.n}, class {cycle_type} is not")
    return _mn_character(p.parts, cycle_type.parts)


def dimension(p: Partition) -> int:
    """Dimension via the character at the identity, cross-checked by hooks."""
    d = character(p, Partition((1,) * p.n)) if p.n else 1
    h = hook_dimension(p)
    if d != h:
        raise AssertionError(f"dimension mismatch for {p}: recursion {d}, hooks {h}")
    return d


def class_size(cycle_type: Partition) -> int:
    """Number of elements of S_n with the given cycle type."""
    z = 1
    for j, group in itertools.groupby(cycle_type.parts):
        a = len(list(group))
        z *= j**a * math.factorial(a)
    return math.factorial(cycle_type.n) // z


# ---------------------------------------------------------------------------
# Species groups and their symmetry types
# ---------------------------------------------------------------------------

Element = tuple[tuple[int, ...], ...]  # one-line permutation per species factor


@dataclass(frozen=True)
class SpeciesGroup:
    """Direct product of symmetric groups, one factor per species.

    Zero-size factors are legal and contribute a trivial factor; they keep
    cluster groups aligned with the parent system's species list.
    """

    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(s < 0 for s in self.sizes):
            raise ShapeError(f"negative species size: {self.sizes}")
        if self.order > GROUP_ORDER_CAP:
            raise CapExceededError(f"group order {self.order} exceeds cap")

    @property
    def order(self) -> int:
        return math.prod(math.factorial(s) for s in self.sizes)

    @property
    def identity(self) -> Element:
        return tuple(tuple(range(s)) for s in self.sizes)

    def elements(self) -> Iterator[Element]:
        pools = [list(itertools.permutations(range(s))) for s in self.sizes]
        return iter(itertools.product(*pools))

    def cycle_type(self, g: Element) -> "CycleType":
        return CycleType(tuple(one_line_cycle_type(pi) for pi in g))

    def compose(self, a: Element, b: Element) -> Element:
        # b acts first: (a o b)(i) = a(b(i)) in each factor.
        return tuple(
            tuple(pa[pb[i]] for i in range(len(pa))) for pa, pb in zip(a, b)
        )

    def inverse(self, g: Element) -> Element:
        out = []
        for pi in g:
            inv = [0] * len(pi)
            for i, j in enumerate(pi):
                inv[j] = i
            out.append(tuple(inv))
        return tuple(out)


def one_line_cycle_type(pi: Sequence[int]) -> Partition:
    seen = [False] * len(pi)
    lengths = []
    for start in range(len(pi)):
        if seen[start]:
            continue
        length, i = 0, start
        while not seen[i]:
            seen[i] = True
            i = pi[i]
            length += 1
        lengths.append(length)
    return Partition(tuple(sorted(lengths, reverse=True)))


@dataclass(frozen=True, order=True)
class CycleType:
    """Conjugacy class of a SpeciesGroup: one cycle type per factor."""

    per_species: tuple[Partition, ...]

    @property
    def label(self) -> str:
        return "x".join(p.label for p in self.per_species)

    @property
    def size(self) -> int:
        return math.prod(class_size(p) for p in self.per_species)


@dataclass(frozen=True, order=True)
class SymmetryType:
    """Irreducible type of a SpeciesGroup: one partition per species factor."""

    components: tuple[Partition, ...]

    @property
    def label(self) -> str:
        return "x".join(p.label for p in self.components)

    @property
    def dim(self) -> int:
        return math.prod(dimension(p) for p in self.components)

    def __str__(self) -> str:
        return self.label


def symmetry_types(group: SpeciesGroup) -> list[SymmetryType]:
    """All irreducible types, reverse lexicographic within each factor."""
    pools = [partitions_of(s) for s in group.sizes]
    return [SymmetryType(tuple(c)) for c in itertools.product(*pools)]


def conjugacy_classes(group: SpeciesGroup) -> list[CycleType]:
    pools = [partitions_of(s) for s in group.sizes]
    return [CycleType(tuple(c)) for c in itertools.product(*pools)]


def check_type(alpha: SymmetryType, group: SpeciesGroup) -> None:
    if tuple(p.n for p in alpha.components) != group.sizes:
        raise ShapeError(f"type {alpha.label} does not fit species sizes {group.sizes}")


def type_character(alpha: SymmetryType, rho: CycleType) -> int:
    return math.prod(character(p, c) for p, c in zip(alpha.components, rho.per_species))


def character_table(group: SpeciesGroup) -> dict[str, dict[str, int]]:
    """Full table as nested mapping: type label -> class label -> value."""
    types = symmetry_types(group)
    classes = conjugacy_classes(group)
    table = {
        a.label: {r.label: type_character(a, r) for r in classes} for a in types
    }
    # Column orthogonality at the identity: sum of squared dimensions.
    ident = CycleType(tuple(Partition((1,) * s) for s in group.sizes))
    total = sum(table[a.label][ident.label] ** 2 for a in types)
    if total != group.order:
        raise AssertionError("character table failed the dimension sum check")
    return table


def character_table_json(group: SpeciesGroup) -> str:
    return json.dumps(character_table(group), indent=2)


# ---------------------------------------------------------------------------
# Isotypic projector coefficients
# ---------------------------------------------------------------------------


def projector_coefficients(
    alpha: SymmetryType, group: SpeciesGroup
) -> dict[Element, Fraction]:
    """Group-algebra coefficients of the isotypic projector for alpha.

    The projector is sum_g c(g) T(g) with c(g) = dim(alpha) chi(g) / |G|.
    Coefficients are exact rationals; idempotency and the trace identity
    hold exactly in the group algebra.
    """
    check_type(alpha, group)
    d = alpha.dim
    order = group.order
    coeffs: dict[Element, Fraction] = {}
    for g in group.elements():
        chi = type_character(alpha, group.cycle_type(g))
        coeffs[g] = Fraction(d * chi, order)
    return coeffs


def assemble_permutation(
    g: Element, species_members: Sequence[Sequence[int]]
) -> dict[int, int]:
    """Turn a group element into a particle-index map.

    species_members lists, per species factor, the sorted particle indices
    that factor permutes; slot i of factor k is particle species_members[k][i].
    """
    if len(g) != len(species_members):
        raise ShapeError("element and species lists differ in factor count")
    out: dict[int, int] = {}
    for pi, members in zip(g, species_members):
        if len(pi) != len(members):
            raise ShapeError("factor degree does not match member count")
        for i, j in enumerate(pi):
            out[members[i]] = members[j]
    return out


# ---------------------------------------------------------------------------
# Restriction to a two-cluster subgroup
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BranchingTable:
    """Multiplicities of pair types (beta1, beta2) in alpha restricted to the
    subgroup preserving a two-cluster split."""

    alpha: SymmetryType
    sizes1: tuple[int, ...]
    sizes2: tuple[int, ...]
    pairs: tuple[tuple[SymmetryType, SymmetryType, int], ...]

    def multiplicity(self, beta1: SymmetryType, beta2: SymmetryType) -> int:
        for b1, b2, m in self.pairs:
            if b1 == beta1 and b2 == beta2:
                return m
        return 0

    def nonzero(self) -> tuple[tuple[SymmetryType, SymmetryType, int], ...]:
        return self.pairs


@lru_cache(maxsize=None)
def _restriction_multiplicity(
    alpha: tuple[int, ...], beta1: tuple[int, ...], beta2: tuple[int, ...]
) -> int:
    """Multiplicity of chi^beta1 x chi^beta2 in chi^alpha on S_a x S_b."""
    a, b = sum(beta1), sum(beta2)
    if a + b != sum(alpha):
        raise ShapeError("cluster sizes do not add up to the parent size")
    acc = 0
    for rho1 in partitions_of(a):
        s1 = class_size(rho1)
        x1 = _mn_character(beta1, rho1.parts)
        for rho2 in partitions_of(b):
            merged = tuple(sorted(rho1.parts + rho2.parts, reverse=True))
            x = _mn_character(alpha, merged)
            if x == 0:
                continue
            acc += s1 * class_size(rho2) * x * x1 * _mn_character(beta2, rho2.parts)
    q, r = divmod(acc, math.factorial(a) * math.factorial(b))
    if r:
        raise AssertionError("inner product did not divide the subgroup order")
    return q


def branch(
    alpha: SymmetryType,
    sizes1: Sequence[int],
    sizes2: Sequence[int],
) -> BranchingTable:
    """Restrict alpha to the subgroup fixing a split with per-species counts
    sizes1 and sizes2 (aligned with alpha's species factors).

    Returns every pair (beta1, beta2) with nonzero multiplicity, checked
    against the dimension identity sum m * dim(beta1) * dim(beta2) = dim(alpha).
    """
    sizes1, sizes2 = tuple(sizes1), tuple(sizes2)
    if len(sizes1) != len(alpha.components) or len(sizes2) != len(alpha.components):
        raise ShapeError("split species counts must align with the type's factors")
    for p, a, b in zip(alpha.components, sizes1, sizes2):
        if p.n != a + b:
            raise ShapeError(
                f"component {p.label} has {p.n} boxes, split gives {a}+{b}"
            )

    # Per species factor, all (beta1, beta2, m) with m > 0.
    per_factor: list[list[tuple[Partition, Partition, int]]] = []
    for p, a, b in zip(alpha.components, sizes1, sizes2):
        rows = []
        for q1 in partitions_of(a):
            for q2 in partitions_of(b):
                m = _restriction_multiplicity(p.parts, q1.parts, q2.parts)
                if m:
                    rows.append((q1, q2, m))
        per_factor.append(rows)

    pairs = []
    for combo in itertools.product(*per_factor):
        b1 = SymmetryType(tuple(row[0] for row in combo))
        b2 = SymmetryType(tuple(row[1] for row in combo))
        m = math.prod(row[2] for row in combo)
        pairs.append((b1, b2, m))
    pairs.sort(key=lambda row: (row[0], row[1]))

    total = sum(m * b1.dim * b2.dim for b1, b2, m in pairs)
    if total != alpha.dim:
        raise AssertionError(
            f"branching of {alpha.label} violates the dimension identity"
        )
    return BranchingTable(alpha, sizes1, sizes2, tuple(pairs))


def parse_type(text: str, group: SpeciesGroup | None = None) -> SymmetryType:
    """Parse '[2,1]' or '[2,1]x[1,1]' into a SymmetryType."""
    chunks = text.replace(" ", "").split("x")
    comps = []
    for chunk in chunks:
        if not (chunk.startswith("[") and chunk.endswith("]")):
            raise ShapeError(f"cannot parse partition {chunk!r}")
        inner = chunk[1:-1]
        parts = tuple(int(tok) for tok in inner.split(",") if tok) if inner else ()
        comps.append(Partition(parts))
    alpha = SymmetryType(tuple(comps))
    if group is not None:
        check_type(alpha, group)
    return alpha
