"""Exact-arithmetic checks of the symmetric-group layer against brute force."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from hvzkit import symgroup as sg

import oracles


def test_partition_enumeration_matches_brute_force():
    for n in range(0, 9):
        got = [p.parts for p in sg.partitions_of(n)]
        assert got == oracles.brute_partitions(n)


def test_partition_validation():
    with pytest.raises(sg.ShapeError):
        sg.Partition((1, 2))
    with pytest.raises(sg.ShapeError):
        sg.Partition((2, 0))
    with pytest.raises(sg.CapExceededError):
        sg.partitions_of(sg.PARTITION_CAP + 1)


def test_dimensions_match_hand_table():
    for parts, dim in oracles.HAND_DIMENSIONS.items():
        assert sg.dimension(sg.Partition(parts)) == dim


def test_characters_match_frozen_s4_table():
    for alpha, row in oracles.S4_CHARACTERS.items():
        for rho, value in row.items():
            got = sg.character(sg.Partition(alpha), sg.Partition(rho))
            assert got == value, (alpha, rho)


def test_standard_rep_traces_give_the_21_character_row():
    mats = oracles.s3_standard_matrices()
    assert len(mats) == 6
    # homomorphism of the explicit matrices themselves
    for a in mats:
        for b in mats:
            ab = oracles.compose(a, b)
            assert np.allclose(mats[a] @ mats[b], mats[ab], atol=1e-12)
    for pi, mat in mats.items():
        rho = sg.Partition(oracles.perm_cycle_type(pi))
        expected = sg.character(sg.partition(2, 1), rho)
        assert abs(np.trace(mat) - expected) < 1e-12


def test_natural_rep_decomposes_as_trivial_plus_standard():
    for n in (3, 4, 5):
        for pi in itertools.permutations(range(n)):
            fixed = sum(1 for i in range(n) if pi[i] == i)
            rho = sg.Partition(oracles.perm_cycle_type(pi))
            chi = sg.character(sg.Partition((n,)), rho) + sg.character(
                sg.Partition((n - 1, 1)), rho
            )
            assert chi == fixed


def test_class_sizes_match_brute_conjugation():
    for n in (2, 3, 4, 5):
        brute = oracles.brute_conjugacy_classes(n)
        for rho, size in brute.items():
            assert sg.class_size(sg.Partition(rho)) == size
        assert sum(brute.values()) == math.factorial(n)


def test_row_orthogonality_up_to_s6():
    for n in range(1, 7):
        types = sg.partitions_of(n)
        classes = sg.partitions_of(n)
        for a in types:
            for b in types:
                acc = sum(
                    sg.class_size(r) * sg.character(a, r) * sg.character(b, r)
                    for r in classes
                )
                assert acc == (math.factorial(n) if a == b else 0)


def test_species_group_basics():
    g = sg.SpeciesGroup((2, 1))
    assert g.order == 2
    elems = list(g.elements())
    assert len(elems) == 2
    assert g.identity in elems
    for a in elems:
        assert g.compose(a, g.inverse(a)) == g.identity
    types = sg.symmetry_types(g)
    assert [t.label for t in types] == ["[2]x[1]", "[1,1]x[1]"]


def test_degenerate_zero_size_factor():
    g = sg.SpeciesGroup((2, 0))
    assert g.order == 2
    types = sg.symmetry_types(g)
    assert [t.label for t in types] == ["[2]x[]", "[1,1]x[]"]
    for t in types:
        assert t.dim == 1


def test_character_table_schema_and_values():
    g = sg.SpeciesGroup((4,))
    table = sg.character_table(g)
    for alpha, row in oracles.S4_CHARACTERS.items():
        label = sg.Partition(alpha).label
        for rho, value in row.items():
            assert table[label][sg.Partition(rho).label] == value
    for tl, row in table.items():
        assert isinstance(tl, str)
        for cl, v in row.items():
            assert isinstance(cl, str) and isinstance(v, int)


@pytest.mark.parametrize("sizes", [(3,), (4,), (2, 2), (3, 1), (2, 1, 1)])
def test_projectors_idempotent_in_regular_representation(sizes):
    g = sg.SpeciesGroup(sizes)
    elems = list(g.elements())
    mats = {}
    for alpha in sg.symmetry_types(g):
        coeffs = sg.projector_coefficients(alpha, g)
        mats[alpha] = oracles.regular_projector(elems, g.compose, coeffs)
    for alpha, mat in mats.items():
        sq = oracles.frac_matmul(mat, mat)
        assert sq == mat, f"projector for {alpha.label} is not idempotent"
        assert oracles.frac_trace(mat) == Fraction(alpha.dim**2)
    pairs = list(mats)
    for a, b in itertools.combinations(pairs, 2):
        prod = oracles.frac_matmul(mats[a], mats[b])
        assert all(x == 0 for row in prod for x in row)
    # resolution of the identity
    total = [row[:] for row in mats[pairs[0]]]
    for alpha in pairs[1:]:
        for i, row in enumerate(mats[alpha]):
            for j, x in enumerate(row):
                total[i][j] += x
    for i in range(len(elems)):
        for j in range(len(elems)):
            assert total[i][j] == (1 if i == j else 0)


def test_branchings_match_hand_tables():
    for (alpha, sizes), table in oracles.HAND_BRANCHINGS.items():
        a = sg.SymmetryType((sg.Partition(alpha),))
        got = sg.branch(a, (sizes[0],), (sizes[1],))
        expect = {
            (sg.SymmetryType((sg.Partition(b1),)), sg.SymmetryType((sg.Partition(b2),))): m
            for (b1, b2), m in table.items()
        }
        assert {(b1, b2): m for b1, b2, m in got.pairs} == expect


def test_branching_dimension_identity_exhaustive():
    for n in range(2, 7):
        for alpha in sg.partitions_of(n):
            a = sg.SymmetryType((alpha,))
            for k in range(1, n):
                table = sg.branch(a, (k,), (n - k,))
                assert table.pairs, "restriction is never empty"
                total = sum(m * b1.dim * b2.dim for b1, b2, m in table.pairs)
                assert total == a.dim


def test_branching_multispecies_factorizes():
    alpha = sg.parse_type("[2,1]x[2]")
    table = sg.branch(alpha, (2, 1), (1, 1))
    got = {(b1.label, b2.label): m for b1, b2, m in table.pairs}
    assert got == {
        ("[2]x[1]", "[1]x[1]"): 1,
        ("[1,1]x[1]", "[1]x[1]"): 1,
    }


def test_assemble_permutation_homomorphism():
    g = sg.SpeciesGroup((3, 2))
    members = [[0, 2, 4], [1, 3]]
    elems = list(g.elements())
    for a in elems[:6]:
        for b in elems[:6]:
            pa = sg.assemble_permutation(a, members)
            pb = sg.assemble_permutation(b, members)
            pab = sg.assemble_permutation(g.compose(a, b), members)
            composed = {i: pa[pb[i]] for i in pb}
            assert composed == pab


def test_parse_type_round_trip():
    for text in ("[3]", "[2,1]x[1,1]", "[]x[2]"):
        assert sg.parse_type(text).label == text
    with pytest.raises(sg.ShapeError):
        sg.parse_type("2,1")
    g = sg.SpeciesGroup((3,))
    with pytest.raises(sg.ShapeError):
        sg.parse_type("[2,1]x[1]", g)


def test_group_order_cap():
    with pytest.raises(sg.CapExceededError):
        sg.SpeciesGroup((11,))
