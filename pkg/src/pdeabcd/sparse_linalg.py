"""Sparse direct solves, the augmented saddle-point solver, and eigenvalue
estimates.

Storage and factorizations are backed by scipy.sparse (CSR matrices, SuperLU
factorizations); this module pins down the contracts the solver relies on:
definiteness checking for symmetric positive definite factorizations, a
cached solver for systems of the form ``(K M^{-1} K + (1/alpha) M) p = b``
that never forms ``M^{-1}`` explicitly, and deterministic power iteration
for extreme eigenvalues.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

SOLVER_TOL = 1e-12


class DefinitenessError(ValueError):
    """Matrix handed to an SPD factorization is not positive definite."""


def canonicalize(matrix) -> sp.csr_matrix:
    """Return a CSR copy with sorted indices, summed duplicates, no stored zeros."""
    out = sp.csr_matrix(matrix)
    out.sum_duplicates()
    out.eliminate_zeros()
    out.sort_indices()
    return out


@dataclass
class Factorization:
    """Direct factorization handle with a triangular-solve entry point."""

    kind: str
    n: int
    fill_nnz: int
    _lu: object

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self._lu.solve(np.asarray(b, dtype=float))


def factorize_spd(matrix) -> Factorization:
    """Factor a symmetric positive definite sparse matrix.

    Pivoting is suppressed (symmetric mode) so the returned pivots expose the
    inertia; a non-positive pivot raises :class:`DefinitenessError`.
    """
    csc = sp.csc_matrix(matrix)
    if csc.shape[0] != csc.shape[1]:
        raise ValueError(f"matrix is {csc.shape}, expected square")
    lu = spla.splu(
        csc,
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options={"SymmetricMode": True},
    )
    pivots = lu.U.diagonal()
    if not np.all(np.isfinite(pivots)) or pivots.min() <= 0.0:
        raise DefinitenessError(
            f"matrix is not positive definite (smallest pivot {pivots.min():.3e})"
        )
    return Factorization("spd", csc.shape[0], lu.L.nnz + lu.U.nnz, lu)


def factorize_indefinite(matrix) -> Factorization:
    """Factor a general sparse matrix with partial pivoting."""
    csc = sp.csc_matrix(matrix)
    lu = spla.splu(csc)
    return Factorization("indefinite", csc.shape[0], lu.L.nnz + lu.U.nnz, lu)


class AugmentedSolver:
    """Cached direct solver for ``(K M^{-1} K + (1/alpha) M) p = b``.

    The normal-equation operator is never formed.  Instead the equivalent
    symmetric saddle system

        [ (1/alpha) M   K ] [p]   [b]
        [      K      - M ] [w] = [0]

    is factored once per ``(K, M, alpha)``; the second block row enforces
    ``w = M^{-1} K p`` exactly, so eliminating ``w`` recovers the original
    equation.
    """

    def __init__(self, K, M, alpha: float):
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        self.n = K.shape[0]
        self.alpha = float(alpha)
        aug = sp.bmat([[M / alpha, K], [K, -M]], format="csc")
        self._fact = factorize_indefinite(aug)

    def solve(self, b: np.ndarray) -> np.ndarray:
        p, _ = self.solve_with_multiplier(b)
        return p

    def solve_with_multiplier(self, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        b = np.asarray(b, dtype=float)
        if b.shape != (self.n,):
            raise ValueError(f"rhs has shape {b.shape}, expected ({self.n},)")
        rhs = np.concatenate([b, np.zeros(self.n)])
        x = self._fact.solve(rhs)
        return x[: self.n], x[self.n :]


class FactorizationCache:
    """Cache of factorizations keyed by matrix identity (and alpha).

    Entries are evicted when the keyed matrices are garbage collected, so a
    recycled ``id()`` can never alias a dead key.  Repeated lookups return
    the same handle.
    """

    def __init__(self):
        self._spd: dict[int, Factorization] = {}
        self._aug: dict[tuple[int, int, float], AugmentedSolver] = {}

    def spd(self, matrix) -> Factorization:
        key = id(matrix)
        hit = self._spd.get(key)
        if hit is None:
            hit = factorize_spd(matrix)
            self._spd[key] = hit
            weakref.finalize(matrix, self._spd.pop, key, None)
        return hit

    def augmented(self, K, M, alpha: float) -> AugmentedSolver:
        key = (id(K), id(M), float(alpha))
        hit = self._aug.get(key)
        if hit is None:
            hit = AugmentedSolver(K, M, alpha)
            self._aug[key] = hit
            weakref.finalize(K, self._aug.pop, key, None)
        return hit


DEFAULT_CACHE = FactorizationCache()


def solve_augmented(K, M, alpha: float, b: np.ndarray,
                    cache: FactorizationCache = DEFAULT_CACHE) -> np.ndarray:
    """Solve ``(K M^{-1} K + (1/alpha) M) p = b`` via the cached saddle solver."""
    return cache.augmented(K, M, alpha).solve(b)


def power_iteration_extremes(apply, n: int, iters: int = 2000,
                             tol: float = 1e-13) -> tuple[float, bool]:
    """Estimate the largest eigenvalue of a symmetric positive operator.

    ``apply`` maps a vector of length ``n`` to the operator image.  The
    starting vector is drawn from a fixed seed, so estimates are
    deterministic.  Returns ``(estimate, converged)``; ``converged`` is False
    when the Rayleigh quotient has not stabilized within ``iters`` steps.
    """
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = apply(v)
        lam_new = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0, True
        v = w / norm_w
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new, True
        lam = lam_new
    return lam, False
