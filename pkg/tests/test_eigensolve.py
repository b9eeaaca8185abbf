"""Projected block solver against dense diagonalization."""

import numpy as np
import pytest

from hvzkit import eigensolve as es
from hvzkit import fourier_grid as fg
from hvzkit import system as hs

import oracles


def dense_apply(mat):
    return lambda v: mat @ v


def test_diagonal_operator_exact():
    diag = np.array([5.0, -3.0, 2.0, 0.5, 11.0, -3.0])
    mat = np.diag(diag).astype(complex)
    res = es.lowest_eigenpairs(dense_apply(mat), (6,), k=3, tol=1e-12, seed=1)
    assert res.converged
    assert np.allclose(res.eigenvalues, [-3.0, -3.0, 0.5], atol=1e-10)
    for i in range(3):
        v = res.eigenvectors[:, i]
        assert np.linalg.norm(mat @ v - res.eigenvalues[i] * v) < 1e-10


def test_random_hermitian_matches_dense():
    rng = np.random.default_rng(42)
    a = rng.standard_normal((120, 120)) + 1j * rng.standard_normal((120, 120))
    mat = (a + a.conj().T) / 2.0
    res = es.lowest_eigenpairs(dense_apply(mat), (120,), k=4, tol=1e-10, seed=7)
    expect = np.linalg.eigvalsh(mat)[:4]
    assert np.allclose(res.eigenvalues, expect, atol=1e-8)


def test_projected_sector_matches_dense_restriction():
    rng = np.random.default_rng(3)
    n = 64
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = (a + a.conj().T) / 2.0
    # parity-symmetrize so the flip v[i] -> v[n-1-i] commutes with h
    flip = np.eye(n)[::-1]
    h = (h + flip @ h @ flip) / 2.0
    proj = (np.eye(n) + flip) / 2.0
    res = es.lowest_eigenpairs(
        dense_apply(h), (n,), k=2, projector=dense_apply(proj), tol=1e-10, seed=5
    )
    lo, _ = oracles.dense_sector_minimum(h, proj)
    assert abs(res.eigenvalues[0] - lo) < 1e-8
    # eigenvectors stay in the sector
    v = res.eigenvectors[:, 0]
    assert np.linalg.norm(proj @ v - v) < 1e-8


def test_grid_ground_state_matches_dense_oracle():
    sys = hs.ParticleSystem(
        particles=(hs.Particle(1.0, 0), hs.Particle(1.0, 1)),
        dimension=1,
        q0=(0.0,),
        potentials={(0, 1): hs.PotentialSpec(kind="gaussian-well", strength=-2.0)},
    )
    spec = fg.GridSpec(1, (0, 1), 32, 20.0, (0.0,))
    op = fg.build_operator(sys, spec)
    res = es.lowest_eigenpairs(op.apply, spec.shape, k=2, tol=1e-10, seed=11)
    dense = oracles.dense_mixed_operator(op.tmult, op.vmult)
    expect = np.linalg.eigvalsh(dense)[:2]
    assert np.allclose(res.eigenvalues, expect, atol=1e-9)
    assert expect[0] < 0.0  # the well binds


def test_determinism_same_seed_same_bits():
    rng = np.random.default_rng(9)
    a = rng.standard_normal((50, 50))
    mat = ((a + a.T) / 2.0).astype(complex)
    r1 = es.lowest_eigenpairs(dense_apply(mat), (50,), k=2, tol=1e-10, seed=123)
    r2 = es.lowest_eigenpairs(dense_apply(mat), (50,), k=2, tol=1e-10, seed=123)
    assert np.array_equal(r1.eigenvalues, r2.eigenvalues)
    assert np.array_equal(r1.eigenvectors, r2.eigenvectors)
    assert r1.n_apply == r2.n_apply


def test_empty_sector_raises():
    mat = np.eye(8, dtype=complex)
    zero = lambda v: np.zeros_like(v)
    with pytest.raises(es.EmptySectorError):
        es.lowest_eigenpairs(dense_apply(mat), (8,), k=1, projector=zero, seed=2)


def test_budget_exhaustion_carries_partial_result():
    rng = np.random.default_rng(21)
    a = rng.standard_normal((300, 300))
    mat = ((a + a.T) / 2.0).astype(complex)
    with pytest.raises(es.ConvergenceError) as err:
        es.lowest_eigenpairs(
            dense_apply(mat), (300,), k=3, tol=1e-14, seed=3, max_apply=30,
            check_operator=False,
        )
    partial = err.value.result
    assert not partial.converged
    assert partial.eigenvalues.shape == (3,)
    assert partial.n_apply >= 30


def test_non_hermitian_rejected():
    rng = np.random.default_rng(33)
    mat = rng.standard_normal((40, 40)) + 1j * rng.standard_normal((40, 40))
    with pytest.raises(ValueError, match="Hermiticity"):
        es.lowest_eigenpairs(dense_apply(mat), (40,), k=1, seed=4)


def test_sector_smaller_than_block():
    # rank-2 projector: ask for 4 pairs, get the 2 the sector holds
    rng = np.random.default_rng(17)
    n = 30
    a = rng.standard_normal((n, n))
    basis, _ = np.linalg.qr(rng.standard_normal((n, 2)))
    proj_mat = basis @ basis.T
    h = proj_mat @ ((a + a.T) / 2.0) @ proj_mat
    res = es.lowest_eigenpairs(
        dense_apply(h.astype(complex)),
        (n,),
        k=4,
        projector=dense_apply(proj_mat.astype(complex)),
        tol=1e-10,
        seed=19,
    )
    assert res.eigenvalues.shape[0] == 2


def test_degeneracy_clusters():
    vals = np.array([1.0, 1.0 + 1e-12, 2.0, 2.0 + 1e-3, 5.0])
    groups = es.degeneracy_clusters(vals, rel_tol=1e-8)
    assert groups == [[0, 1], [2], [3], [4]]
    loose = es.degeneracy_clusters(vals, rel_tol=1e-2)
    assert loose == [[0, 1], [2, 3], [4]]
