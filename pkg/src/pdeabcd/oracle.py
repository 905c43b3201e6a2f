"""Independent reference solvers for the discretized primal problem.

Two primal routes validate the dual scheme, and neither shares algorithmic
structure with it (no majorized sweep, no momentum, no dual blocks):

* :func:`admm_reference` is the certifying oracle.  It minimizes the same
  functional the dual targets,

      min_{a<=u<=b}  1/2 ||S u + s0 - y_d||_M^2 + alpha/2 ||u||_M^2
                     + beta sum_i |(M_full u)_i|,

  by consensus operator splitting: copies s = M_full u and w = u decouple
  the L1 term from the box, so every subproblem is exact -- one sparse
  symmetric indefinite solve, a componentwise soft threshold, a clip.
  The consistent-mass L1 term keeps this primal an exact conjugate of the
  dual function, which is what makes machine-accuracy cross-checks of the
  optimal values possible.

* :func:`fista_reference` is accelerated proximal gradient on the variant
  with the lumped penalty beta ||W u||_1, taken in the W-weighted inner
  product where that penalty's proximal map separates into soft
  thresholding followed by clipping.  Lumped and consistent-mass costs
  agree on sign-separated controls and differ by an O(h) boundary layer
  otherwise, so this route serves as a cheap approximate reference and a
  testbed for the scalar prox formulas, not as the certifying oracle.

:func:`certified_optimum` runs the certifying oracle and a long dual solve
and accepts only when the two optimal values agree to 1e-7 relative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import dual_solver
from .dual_solver import DualIterate, ProblemInstance, SolverConfig
from .sparse_linalg import factorize_indefinite


class OracleError(RuntimeError):
    """Reference solve failed to converge within its iteration cap."""


class OracleInconsistencyError(RuntimeError):
    """Reference optimum and long dual run disagree beyond tolerance."""


@dataclass
class PrimalSolution:
    """Output of a reference primal solve."""

    u: np.ndarray
    y: np.ndarray
    J: float
    iterations: int
    residual: float


@dataclass
class CertifiedOptimum:
    """Optimal values agreed on by the primal oracle and a long dual run."""

    j_star: float
    phi_star: float
    u_star: np.ndarray
    z_star: DualIterate
    kkt_star: float
    cross_phi: float
    oracle: PrimalSolution


def primal_objective(prob: ProblemInstance, u: np.ndarray) -> float:
    """Objective value of a feasible control, with the exact discrete state.

    J(u) = 1/2 ||y - y_d||_M^2 + alpha/2 ||u||_M^2 + beta sum_i |(M u)_i|
    with K y = M (u + y_r) on interior rows.  Raises ``ValueError`` when
    ``u`` leaves the box beyond roundoff.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (prob.n_full,):
        raise ValueError(
            f"control has shape {u.shape}, expected ({prob.n_full},)")
    a, b = prob.box
    slack = 1e-12 * (1.0 + max(abs(a), abs(b)))
    if u.size and (u.min() < a - slack or u.max() > b + slack):
        raise ValueError("control violates the box constraints")
    return dual_solver.primal_value(prob, np.clip(u, a, b))


def _prox(g: np.ndarray, thresh: float, a: float, b: float) -> np.ndarray:
    """Soft threshold then clip; exact prox of beta||W u||_1 + box indicator
    in the W-weighted metric."""
    return np.clip(np.sign(g) * np.maximum(np.abs(g) - thresh, 0.0), a, b)


def fista_reference(prob: ProblemInstance, tol: float = 1e-10,
                    max_iters: int = 500_000,
                    u0: np.ndarray | None = None) -> PrimalSolution:
    """Solve the lumped-penalty primal by accelerated proximal gradient.

    Minimizes the variant with control cost alpha/2 ||u||_M^2
    + beta ||W u||_1.  The step size is half the inverse of a
    power-iteration estimate of the W-metric Lipschitz constant of the
    smooth part.  Runs until the fixed-point residual ||u - T(u)||_2 / step
    falls below ``tol``; raises :class:`OracleError` when the cap is hit
    first.  The reported ``J`` is this variant's own objective, not the
    consistent-mass one.
    """
    from .sparse_linalg import power_iteration_extremes

    ops = prob.ops
    K_fact = ops.stiffness_factor()
    M = ops.M
    W = ops.W_full
    alpha, beta = prob.alpha, prob.beta
    a, b = prob.box
    n = prob.n_full
    s0 = K_fact.solve(ops.mass_interior_rows(prob.y_r))

    def grad(u):
        y = K_fact.solve(ops.mass_interior_rows(u)) + s0
        adj = K_fact.solve(M @ (y - prob.y_d))
        return ops.M_full @ (ops.pad(adj) + alpha * u)

    sqrt_w = np.sqrt(W)

    def sym_hessian(v):
        x = v / sqrt_w
        sx = K_fact.solve(ops.mass_interior_rows(x))
        hx = ops.M_full @ (ops.pad(K_fact.solve(M @ sx)) + alpha * x)
        return hx / sqrt_w

    lip, _ = power_iteration_extremes(sym_hessian, n, iters=5000)
    step = 0.5 / max(lip, np.finfo(float).tiny)
    thresh = beta * step

    def forward(u, gu=None):
        gu = grad(u) if gu is None else gu
        return _prox(u - step * (gu / W), thresh, a, b)

    u = np.zeros(n) if u0 is None else np.clip(np.asarray(u0, float), a, b)
    v = u.copy()
    u_prev = u.copy()
    t = 1.0
    residual = float("inf")
    iterations = 0
    check_every = 5

    for it in range(1, max_iters + 1):
        u = forward(v)
        if it % check_every == 0 or it == max_iters:
            residual = float(np.linalg.norm(u - forward(u)) / step)
            if residual <= tol:
                iterations = it
                break
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        v = u + ((t - 1.0) / t_next) * (u - u_prev)
        u_prev = u
        t = t_next
        iterations = it

    if residual > tol:
        raise OracleError(
            f"reference solve stalled at residual {residual:.3e} "
            f"after {iterations} iterations (tol {tol:.1e})"
        )
    y = K_fact.solve(ops.mass_interior_rows(u + prob.y_r))
    diff = y - prob.y_d
    J = 0.5 * float(diff @ (M @ diff))
    J += 0.5 * alpha * float(u @ (ops.M_full @ u))
    J += beta * float(np.abs(W * u).sum())
    return PrimalSolution(u=u, y=y, J=J, iterations=iterations,
                          residual=residual)


def _splitting_factorization(prob: ProblemInstance, rho1: float,
                             rho2: float):
    """Factorize the coupled stationarity system of the u-subproblem.

    Solving (S'MS + alpha M_f + rho1 M_f^2 + rho2 I) u = r without ever
    forming the dense S'MS: with auxiliary y = S u and q = K^{-1} M y the
    same u solves the sparse symmetric block system

        [ C       0    B' ] [u]   [r]
        [ 0       M   -K  ] [y] = [0],   C = alpha M_f + rho1 M_f^2
        [ B      -K    0  ] [q]   [0]        + rho2 I,  B = E' M_f.
    """
    ops = prob.ops
    Mf = ops.M_full.tocsr()
    n = Mf.shape[0]
    C = prob.alpha * Mf + rho1 * (Mf @ Mf) + rho2 * sp.identity(n)
    B = Mf[ops.interior]
    A = sp.bmat([[C, None, B.T],
                 [None, ops.M, -ops.K],
                 [B, -ops.K, None]], format="csc")
    return factorize_indefinite(A)


def admm_reference(prob: ProblemInstance, tol: float = 1e-10,
                   max_iters: int = 200_000,
                   u0: np.ndarray | None = None,
                   relax: float = 1.7,
                   freeze_at: int = 3000) -> PrimalSolution:
    """Solve the consistent-mass primal by consensus operator splitting.

    Copies s = M_full u and w = u carry the L1 term and the box indicator;
    the u-subproblem is a single sparse factorized solve, s and w have
    closed-form proximal updates.  Penalty weights adapt by residual
    balancing for the first ``freeze_at`` iterations and are then frozen so
    the tail contracts linearly.  Runs until the worst relative primal or
    dual residual falls below ``tol``; raises :class:`OracleError` when the
    cap is hit first.  The returned control is the box copy ``w``, feasible
    to the letter.
    """
    ops = prob.ops
    Mf = ops.M_full
    alpha, beta = prob.alpha, prob.beta
    a, b = prob.box
    n = prob.n_full
    n_int = prob.n

    K_fact = ops.stiffness_factor()
    s0 = K_fact.solve(ops.mass_interior_rows(prob.y_r))
    # q = S' M (y_d - s0), the constant gradient shift of the smooth part
    p0 = K_fact.solve(ops.M @ (prob.y_d - s0))
    q = (Mf @ ops.pad(p0))

    mbar = float(Mf.diagonal().mean())
    rho1 = alpha / mbar
    rho2 = alpha * mbar
    fact = _splitting_factorization(prob, rho1, rho2)

    if u0 is None:
        u = np.zeros(n)
    else:
        u = np.clip(np.asarray(u0, dtype=float), a, b)
    s = Mf @ u
    w = u.copy()
    z1 = np.zeros(n)
    z2 = np.zeros(n)
    rhs = np.zeros(n + 2 * n_int)
    g_scale = 1.0 + float(np.abs(q).max(initial=0.0))

    residual = float("inf")
    iterations = 0
    for it in range(1, max_iters + 1):
        rhs[:n] = q + rho1 * (Mf @ (s - z1)) + rho2 * (w - z2)
        u = fact.solve(rhs)[:n]
        mu_u = Mf @ u

        h1 = relax * mu_u + (1.0 - relax) * s
        h2 = relax * u + (1.0 - relax) * w
        s_old = s
        w_old = w
        g1 = h1 + z1
        thresh = beta / rho1
        s = np.sign(g1) * np.maximum(np.abs(g1) - thresh, 0.0)
        w = np.clip(h2 + z2, a, b)
        z1 = z1 + h1 - s
        z2 = z2 + h2 - w

        pri1 = float(np.abs(mu_u - s).max(initial=0.0)) \
            / (1.0 + float(np.abs(mu_u).max(initial=0.0)))
        pri2 = float(np.abs(u - w).max(initial=0.0)) \
            / (1.0 + float(np.abs(u).max(initial=0.0)))
        dua1 = rho1 * float(np.abs(Mf @ (s - s_old)).max(initial=0.0)) \
            / g_scale
        dua2 = rho2 * float(np.abs(w - w_old).max(initial=0.0)) / g_scale
        residual = max(pri1, pri2, dua1, dua2)
        iterations = it
        if residual <= tol:
            break

        if it < freeze_at and it % 25 == 0:
            changed = False
            if pri1 > 10.0 * dua1 and rho1 < 1e12:
                rho1 *= 2.0
                z1 = z1 / 2.0
                changed = True
            elif dua1 > 10.0 * pri1 and rho1 > 1e-12:
                rho1 /= 2.0
                z1 = z1 * 2.0
                changed = True
            if pri2 > 10.0 * dua2 and rho2 < 1e12:
                rho2 *= 2.0
                z2 = z2 / 2.0
                changed = True
            elif dua2 > 10.0 * pri2 and rho2 > 1e-12:
                rho2 /= 2.0
                z2 = z2 * 2.0
                changed = True
            if changed:
                fact = _splitting_factorization(prob, rho1, rho2)

    if residual > tol:
        raise OracleError(
            f"splitting solve stalled at residual {residual:.3e} "
            f"after {iterations} iterations (tol {tol:.1e})"
        )
    y = K_fact.solve(ops.mass_interior_rows(w + prob.y_r))
    return PrimalSolution(u=w, y=y, J=primal_objective(prob, w),
                          iterations=iterations, residual=residual)


def certified_optimum(prob: ProblemInstance, tol: float = 1e-10,
                      cross_tol: float = 1e-9,
                      cross_max_iters: int = 100_000,
                      z0: DualIterate | None = None) -> CertifiedOptimum:
    """Optimal value certified by two independent routes.

    Runs the splitting oracle to ``tol``, then a long dual run, and demands
    ``|Phi(z_final) + J*| <= 1e-7 (1 + |J*|)``; disagreement raises
    :class:`OracleInconsistencyError` and blocks anything built on top.
    ``z0`` optionally warm starts the dual cross run (its verdict only
    depends on the reached residual, not the path).
    """
    sol = admm_reference(prob, tol=tol)
    j_star = sol.J
    config = SolverConfig(max_iters=cross_max_iters, tol=cross_tol,
                          log_every=0, check_every=5)
    run = dual_solver.solve(prob, config, z0=z0)
    cross_phi = dual_solver.dual_objective(prob, *run.final.blocks())
    gap = abs(cross_phi + j_star)
    if gap > 1e-7 * (1.0 + abs(j_star)):
        raise OracleInconsistencyError(
            f"dual value {cross_phi:.12e} and reference -J* {-j_star:.12e} "
            f"disagree by {gap:.3e}"
        )
    return CertifiedOptimum(
        j_star=j_star,
        phi_star=-j_star,
        u_star=sol.u,
        z_star=run.final,
        kkt_star=float(run.kkt[-1]),
        cross_phi=cross_phi,
        oracle=sol,
    )
