"""Factorization wrappers and the coupled augmented solver."""

import numpy as np
import pytest
import scipy.sparse as sp

from pdeabcd.assembly import assemble
from pdeabcd.mesh import build_unit_square_mesh
from pdeabcd.sparse_linalg import (
    AugmentedSolver,
    DefinitenessError,
    FactorizationCache,
    canonicalize,
    factorize_indefinite,
    factorize_spd,
    power_iteration_extremes,
    solve_augmented,
)


def _random_spd(rng, n=30, density=0.2):
    B = sp.random(n, n, density=density, random_state=np.random.RandomState(7))
    A = (B.T @ B + sp.identity(n)).tocsc()
    return A


def test_canonicalize_formats():
    A = sp.random(10, 10, density=0.3, random_state=np.random.RandomState(1))
    C = canonicalize(A.tolil())
    assert sp.issparse(C)
    assert C.format == "csr"
    assert C.dtype == np.float64
    assert C.has_sorted_indices
    # idempotent up to storage
    assert (canonicalize(C) != C).nnz == 0


def test_factorize_spd_matches_dense(rng):
    A = _random_spd(rng)
    fact = factorize_spd(A)
    b = rng.standard_normal(A.shape[0])
    x = fact.solve(b)
    assert np.allclose(A @ x, b, atol=1e-10)
    x_dense = np.linalg.solve(A.toarray(), b)
    assert np.allclose(x, x_dense, atol=1e-9)


def test_factorize_spd_multiple_rhs(rng):
    A = _random_spd(rng)
    fact = factorize_spd(A)
    B = rng.standard_normal((A.shape[0], 3))
    X = fact.solve(B)
    assert X.shape == B.shape
    assert np.allclose(A @ X, B, atol=1e-9)


def test_factorize_spd_rejects_indefinite():
    A = sp.diags([1.0, -1.0, 2.0]).tocsc()
    with pytest.raises(DefinitenessError):
        factorize_spd(A)


def test_factorize_spd_rejects_singular():
    A = sp.diags([1.0, 0.0, 2.0]).tocsc()
    with pytest.raises((DefinitenessError, RuntimeError)):
        factorize_spd(A)


def test_factorize_indefinite_saddle(rng):
    # KKT-style saddle matrix: SPD block plus a constraint row
    n = 12
    A = _random_spd(rng, n=n)
    c = sp.csc_matrix(np.ones((1, n)))
    S = sp.bmat([[A, c.T], [c, None]], format="csc")
    fact = factorize_indefinite(S)
    b = rng.standard_normal(n + 1)
    x = fact.solve(b)
    assert np.allclose(S @ x, b, atol=1e-9)


def test_augmented_solver_identity(rng):
    """x = AugmentedSolver(K, M, alpha).solve(b) solves (K M^-1 K + M/alpha) x = b."""
    ops = assemble(build_unit_square_mesh(3))
    alpha = 1e-2
    aug = AugmentedSolver(ops.K, ops.M, alpha)
    b = rng.standard_normal(ops.n_interior)
    x = aug.solve(b)
    lhs = ops.K @ ops.mass_factor().solve(ops.K @ x) + (ops.M @ x) / alpha
    assert np.allclose(lhs, b, atol=1e-9 * (1.0 + np.abs(b).max()))


def test_augmented_solver_with_multiplier(rng):
    ops = assemble(build_unit_square_mesh(2))
    alpha = 0.05
    aug = AugmentedSolver(ops.K, ops.M, alpha)
    b = rng.standard_normal(ops.n_interior)
    x, y = aug.solve_with_multiplier(b)
    # block equations of the symmetric coupled form
    r1 = (ops.M @ x) / alpha + ops.K @ y - b
    r2 = ops.K @ x - ops.M @ y
    assert np.abs(r1).max() < 1e-10 * (1.0 + np.abs(b).max())
    assert np.abs(r2).max() < 1e-10 * (1.0 + np.abs(b).max())
    assert np.allclose(x, aug.solve(b), atol=1e-12)


def test_solve_augmented_helper(rng):
    ops = assemble(build_unit_square_mesh(2))
    b = rng.standard_normal(ops.n_interior)
    x = solve_augmented(ops.K, ops.M, 1e-2, b)
    aug = AugmentedSolver(ops.K, ops.M, 1e-2)
    assert np.array_equal(x, aug.solve(b))


def test_factorization_cache_reuses_by_identity(rng):
    cache = FactorizationCache()
    A = _random_spd(rng)
    f1 = cache.spd(A)
    f2 = cache.spd(A)
    assert f1 is f2
    # a structurally identical copy is a different key
    f3 = cache.spd(A.copy())
    assert f3 is not f1
    ops = assemble(build_unit_square_mesh(2))
    g1 = cache.augmented(ops.K, ops.M, 1e-2)
    g2 = cache.augmented(ops.K, ops.M, 1e-2)
    assert g1 is g2
    g3 = cache.augmented(ops.K, ops.M, 2e-2)
    assert g3 is not g1


def test_power_iteration_diagonal():
    d = np.array([0.5, 1.0, 2.0, 3.0, 7.0])
    lam, converged = power_iteration_extremes(lambda v: d * v, d.size)
    assert converged
    assert lam == pytest.approx(7.0, rel=1e-9)


def test_power_iteration_matches_dense_eigvalsh(rng):
    n = 25
    Q = np.linalg.qr(rng.standard_normal((n, n)))[0]
    ev = np.sort(rng.uniform(0.1, 5.0, n))
    A = Q @ np.diag(ev) @ Q.T
    lam, converged = power_iteration_extremes(lambda v: A @ v, n)
    assert converged
    assert lam == pytest.approx(ev[-1], rel=1e-7)
    # smallest eigenvalue through the inverse
    Ainv = np.linalg.inv(A)
    lam_inv, _ = power_iteration_extremes(lambda v: Ainv @ v, n)
    assert 1.0 / lam_inv == pytest.approx(ev[0], rel=1e-6)


def test_power_iteration_zero_operator():
    lam, converged = power_iteration_extremes(lambda v: 0.0 * v, 8)
    assert lam == 0.0
    assert converged


def test_power_iteration_deterministic():
    d = np.linspace(0.2, 4.0, 40)
    a = power_iteration_extremes(lambda v: d * v, d.size)
    b = power_iteration_extremes(lambda v: d * v, d.size)
    assert a == b
