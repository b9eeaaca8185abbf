"""Deterministic projected block eigensolver.

Locally optimal block preconditioned conjugate gradient without the
preconditioner: the iteration subspace is [X, residuals, previous step],
fully reorthogonalized each sweep, with the symmetry projector applied to
every basis vector so the Ritz problem never leaves the sector. Seeded
random starts make runs bit-reproducible for a fixed seed and problem.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

MAX_APPLY_DEFAULT = 10000
RANK_CUT = 1e-10


class EmptySectorError(RuntimeError):
    """The projector annihilates every probe vector: empty symmetry sector."""


class ConvergenceError(RuntimeError):
    """Iteration budget exhausted before reaching tolerance; carries the
    best result so far in .result."""

    def __init__(self, message: str, result: "EigenResult"):
        super().__init__(message)
        self.result = result


@dataclass
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, shape (size, k)
    residuals: np.ndarray
    iterations: int
    n_apply: int
    converged: bool
    shape: tuple[int, ...]

    def vector(self, i: int) -> np.ndarray:
        return self.eigenvectors[:, i].reshape(self.shape)


def _orthonormalize(block: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the column span, rank-truncated by SVD."""
    if block.shape[1] == 0:
        return block
    u, s, _ = np.linalg.svd(block, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return u[:, :0]
    return u[:, s > RANK_CUT * s[0]]


def _stochastic_checks(apply_h, projector, shape, rng, count):
    """One-probe Hermiticity, idempotency and commutation verification."""
    size = int(np.prod(shape))
    u = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    v = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    hu = apply_h(u.reshape(shape)).reshape(-1)
    hv = apply_h(v.reshape(shape)).reshape(-1)
    count[0] += 2
    scale = max(np.linalg.norm(hu) * np.linalg.norm(v), 1e-30)
    herm = abs(np.vdot(u, hv) - np.vdot(hu, v)) / scale
    if herm > 1e-8:
        raise ValueError(f"operator failed the Hermiticity probe ({herm:.2e})")
    if projector is None:
        return
    pv = projector(v.reshape(shape)).reshape(-1)
    ppv = projector(pv.reshape(shape)).reshape(-1)
    if np.linalg.norm(ppv - pv) > 1e-8 * max(np.linalg.norm(pv), 1e-30):
        raise ValueError("projector failed the idempotency probe")
    sym = abs(np.vdot(u, pv) - np.vdot(projector(u.reshape(shape)).reshape(-1), v))
    if sym > 1e-8 * max(np.linalg.norm(u) * np.linalg.norm(pv), 1e-30):
        raise ValueError("projector failed the Hermiticity probe")
    hpv = apply_h(pv.reshape(shape)).reshape(-1)
    phpv = projector(hpv.reshape(shape)).reshape(-1)
    count[0] += 1
    comm = np.linalg.norm(hpv - phpv)
    # [H, P] = 0 on the sector: H maps range(P) into itself
    if comm > 1e-7 * max(np.linalg.norm(hpv), 1e-30):
        raise ValueError(f"operator does not preserve the sector ({comm:.2e})")


def lowest_eigenpairs(
    apply_h: Callable[[np.ndarray], np.ndarray],
    shape: tuple[int, ...],
    k: int = 1,
    projector: Callable[[np.ndarray], np.ndarray] | None = None,
    tol: float = 1e-9,
    seed: int = 0,
    max_apply: int = MAX_APPLY_DEFAULT,
    block_extra: int = 2,
    check_operator: bool = True,
) -> EigenResult:
    """Lowest k eigenpairs of a Hermitian operator, optionally in a sector.

    apply_h acts on arrays of the given shape; projector (if any) must be an
    orthogonal projection commuting with the operator. Convergence is
    declared when each of the k wanted residuals satisfies
    ||H v - lambda v|| <= tol * max(1, |lambda|).

    Raises EmptySectorError when the projector has trivial range and
    ConvergenceError (carrying the partial result) on budget exhaustion.
    If the sector dimension is positive but below k, the result simply
    holds every pair the sector has.
    """
    size = int(np.prod(shape))
    if not (1 <= k <= size):
        raise ValueError(f"need 1 <= k <= {size}, got {k}")
    rng = np.random.default_rng(seed)
    count = [0]

    def apply_flat(vec: np.ndarray) -> np.ndarray:
        count[0] += 1
        return apply_h(vec.reshape(shape)).reshape(-1)

    def apply_block(block: np.ndarray) -> np.ndarray:
        out = np.empty_like(block)
        for j in range(block.shape[1]):
            out[:, j] = apply_flat(block[:, j])
        return out

    def project_block(block: np.ndarray) -> np.ndarray:
        if projector is None:
            return block
        out = np.empty_like(block)
        for j in range(block.shape[1]):
            out[:, j] = projector(block[:, j].reshape(shape)).reshape(-1)
        return out

    if check_operator:
        _stochastic_checks(apply_h, projector, shape, rng, count)

    b = min(max(k + block_extra, k), size)
    x = rng.standard_normal((size, b)) + 1j * rng.standard_normal((size, b))
    x = _orthonormalize(project_block(x))
    if x.shape[1] == 0:
        raise EmptySectorError("projector annihilated the starting block")
    b = min(b, x.shape[1])
    k_eff = min(k, b)

    prev_step: np.ndarray | None = None
    best: EigenResult | None = None
    iteration = 0
    stall_best = np.inf
    stall_count = 0

    while True:
        iteration += 1
        hx = apply_block(x)
        gram = x.conj().T @ hx
        gram = (gram + gram.conj().T) / 2.0
        theta, w = np.linalg.eigh(gram)
        x = x @ w
        hx = hx @ w
        resid = hx - x * theta[None, :]
        resid = project_block(resid)
        rnorms = np.linalg.norm(resid, axis=0)

        best = EigenResult(
            eigenvalues=theta[:k_eff].copy(),
            eigenvectors=x[:, :k_eff].copy(),
            residuals=rnorms[:k_eff].copy(),
            iterations=iteration,
            n_apply=count[0],
            converged=bool(
                np.all(rnorms[:k_eff] <= tol * np.maximum(1.0, np.abs(theta[:k_eff])))
            ),
            shape=shape,
        )
        if best.converged:
            return best
        if count[0] >= max_apply:
            raise ConvergenceError(
                f"stopped after {count[0]} operator applications with residuals "
                f"{rnorms[:k_eff]}",
                best,
            )

        # stagnation restart: inject a fresh random projected direction
        current = float(np.max(rnorms[:k_eff]))
        if current < stall_best * 0.995:
            stall_best = current
            stall_count = 0
        else:
            stall_count += 1
        extra = None
        if stall_count >= 40:
            extra = project_block(
                rng.standard_normal((size, 1)) + 1j * rng.standard_normal((size, 1))
            )
            stall_count = 0

        blocks = [x, resid]
        if prev_step is not None:
            blocks.append(prev_step)
        if extra is not None:
            blocks.append(extra)
        s = _orthonormalize(np.hstack(blocks))
        # numerical drift can leak out of the sector; pull back and re-clean
        s = _orthonormalize(project_block(s))
        if s.shape[1] == 0:
            raise EmptySectorError("sector collapsed during iteration")
        hs = apply_block(s)
        a = s.conj().T @ hs
        a = (a + a.conj().T) / 2.0
        vals, vecs = np.linalg.eigh(a)
        keep = min(b, s.shape[1])
        y = vecs[:, :keep]
        x_new = s @ y
        # direction block: component of the step orthogonal to the old X
        overlap = x.conj().T @ x_new
        prev_step = _orthonormalize(x_new - x @ overlap)
        x = x_new
        k_eff = min(k, x.shape[1])


def degeneracy_clusters(
    eigenvalues: np.ndarray, rel_tol: float = 1e-8, abs_tol: float = 1e-12
) -> list[list[int]]:
    """Group sorted eigenvalues into near-degenerate clusters."""
    order = np.argsort(eigenvalues)
    groups: list[list[int]] = []
    for idx in order:
        v = eigenvalues[idx]
        if groups:
            anchor = eigenvalues[groups[-1][0]]
            if abs(v - anchor) <= abs_tol + rel_tol * max(1.0, abs(anchor)):
                groups[-1].append(int(idx))
                continue
        groups.append([int(idx)])
    return groups
