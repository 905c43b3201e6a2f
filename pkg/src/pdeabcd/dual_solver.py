"""Accelerated block coordinate descent on the dual of the sparse control
problem.

The primal problem is

    min  1/2 ||y - y_d||_M^2 + alpha/2 ||u||_M^2 + beta sum_i |(M u)_i|
    s.t. K y = M (u + y_r),   a <= u <= b componentwise,

the L1 control cost discretized through the consistent mass matrix (it
equals the lumped penalty beta ||W u||_1 whenever no node star of u mixes
signs, and undercuts it otherwise).  State and adjoint carry homogeneous
Dirichlet values and live on interior nodes (K, M interior); the control
and the multipliers carry no boundary condition and live on the full node
set (M_full, W_full).  The solver minimizes the dual function

    Phi(lam, p, mu) = 1/2 ||K p - M y_d||_{M^{-1}}^2
                      + 1/(2 alpha) ||lam + mu - E p||_{M_full}^2
                      + <M_full y_r, E p> + delta_box(lam)
                      + support_box(M_full mu) - 1/2 ||y_d||_M^2

(E pads with zero boundary values) by a majorized block scheme: one
symmetrized sweep over the (lam, p) block (p-solve at the extrapolated lam,
closed-form lam update, p-solve again), a closed-form mu update in a lumped
metric, and extrapolation with the classic accelerated t-sequence.  The
value gap decays like 4 tau / (k+1)^2 with tau the weighted squared
distance from the start to an optimum (analysis.compute_tau_h).

Phi is the exact Fenchel dual of the primal above: delta_box(lam) with the
componentwise bound beta is the conjugate constraint of the consistent-mass
L1 term, and support_box(M_full mu) that of the box indicator, both under
the M_full pairing that also weights the coupling term.  primal_value uses
the matching discretization, so phi + primal_value is a genuine duality
gap, certified against an independent primal solver (oracle module).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .assembly import FemOperators


class DivergenceError(RuntimeError):
    """Iterates left the finite range; carries the offending state."""

    def __init__(self, message: str, k: int, iterate: "DualIterate | None" = None):
        super().__init__(message)
        self.k = k
        self.iterate = iterate


@dataclass
class ProblemInstance:
    """One discretized control problem: operators, data, and parameters.

    ``y_d`` is an interior nodal vector (tracking target for the Dirichlet
    state); ``y_r`` is a full nodal vector (source shift, control-like).
    ``gamma`` is the lumped-mass comparison constant of the mesh family
    (4 for triangles in the plane).
    """

    ops: FemOperators
    alpha: float
    beta: float
    box: tuple[float, float]
    y_d: np.ndarray
    y_r: np.ndarray
    gamma: float = 4.0
    name: str = "custom"

    def __post_init__(self):
        a, b = self.box
        if not (a <= 0.0 <= b):
            raise ValueError(f"box [{a}, {b}] must contain 0")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.gamma <= 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        self.y_d = np.asarray(self.y_d, dtype=float)
        self.y_r = np.asarray(self.y_r, dtype=float)
        if self.y_d.shape != (self.ops.n_interior,):
            raise ValueError("y_d must be an interior nodal vector")
        if self.y_r.shape != (self.ops.mesh.n_nodes,):
            raise ValueError("y_r must be a full nodal vector")

    @property
    def n(self) -> int:
        """Interior dimension (state and adjoint block)."""
        return self.ops.n_interior

    @property
    def n_full(self) -> int:
        """Full node count (control and multiplier blocks)."""
        return self.ops.mesh.n_nodes


@dataclass
class DualIterate:
    """Dual variables plus the extrapolation state of the accelerated loop.

    ``lam`` and ``mu`` are full nodal vectors, ``p`` is interior.
    """

    lam: np.ndarray
    p: np.ndarray
    mu: np.ndarray
    lam_t: np.ndarray
    p_t: np.ndarray
    mu_t: np.ndarray
    t: float = 1.0
    k: int = 0

    @classmethod
    def zeros(cls, n_full: int, n_interior: int) -> "DualIterate":
        return cls(np.zeros(n_full), np.zeros(n_interior), np.zeros(n_full),
                   np.zeros(n_full), np.zeros(n_interior), np.zeros(n_full))

    @classmethod
    def for_instance(cls, prob: "ProblemInstance") -> "DualIterate":
        return cls.zeros(prob.n_full, prob.n)

    @classmethod
    def from_blocks(cls, lam, p, mu) -> "DualIterate":
        lam = np.asarray(lam, dtype=float).copy()
        p = np.asarray(p, dtype=float).copy()
        mu = np.asarray(mu, dtype=float).copy()
        return cls(lam, p, mu, lam.copy(), p.copy(), mu.copy())

    def blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.lam, self.p, self.mu


@dataclass
class SolverConfig:
    """Iteration controls.

    ``tol`` bounds the relative KKT residual at termination.  ``phi_target``,
    when set, additionally stops the run once the dual objective falls to
    that value (used by the iterations-to-accuracy experiments).  With
    ``timing`` off (the default) recorded times are zero so that records and
    serialized outputs are bitwise reproducible.
    """

    max_iters: int = 10000
    tol: float = 1e-6
    log_every: int = 1
    check_every: int = 1
    timing: bool = False
    phi_target: float | None = None
    solver_tol: float = 1e-12

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")
        if self.log_every < 0 or self.check_every < 1:
            raise ValueError("bad logging or checking cadence")


@dataclass
class RunRecord:
    """Per-iteration log of one solver run plus the final state."""

    ks: np.ndarray
    phi: np.ndarray
    kkt: np.ndarray
    gap: np.ndarray
    time_s: np.ndarray
    final: DualIterate
    u: np.ndarray
    y: np.ndarray
    converged: bool
    iterations: int
    stop_reason: str
    tau_h: float | None = None

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("k,phi,kkt,gap,time_s\n")
            for k, phi, kkt, gap, ts in zip(
                    self.ks, self.phi, self.kkt, self.gap, self.time_s):
                fh.write(f"{int(k)},{float(phi)!r},{float(kkt)!r},"
                         f"{float(gap)!r},{float(ts)!r}\n")

    def summary(self, prob: ProblemInstance) -> dict:
        u_l2m = float(np.sqrt(self.u @ (prob.ops.M_full @ self.u)))
        y_l2m = float(np.sqrt(self.y @ (prob.ops.M @ self.y)))
        out = {
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "stop_reason": self.stop_reason,
            "kkt": float(self.kkt[-1]) if self.kkt.size else None,
            "phi": float(self.phi[-1]) if self.phi.size else None,
            "gap": float(self.gap[-1]) if self.gap.size else None,
            "u_l2M": u_l2m,
            "u_linf": float(np.abs(self.u).max()) if self.u.size else 0.0,
            "y_l2M": y_l2m,
            "y_linf": float(np.abs(self.y).max()) if self.y.size else 0.0,
        }
        if self.tau_h is not None:
            out["tau_h"] = float(self.tau_h)
        return out


def support_box(s: np.ndarray, a: float, b: float) -> float:
    """Support function of the box [a, b]^n at s."""
    s = np.asarray(s, dtype=float)
    return float(b * np.maximum(s, 0.0).sum() + a * np.minimum(s, 0.0).sum())


_BOX_SLACK = 1e-12


def dual_objective(prob: ProblemInstance, lam, p, mu) -> float:
    """Dual objective value; +inf when lam violates the [-beta, beta] box."""
    lam = np.asarray(lam, dtype=float)
    p = np.asarray(p, dtype=float)
    mu = np.asarray(mu, dtype=float)
    beta = prob.beta
    if np.abs(lam).max(initial=0.0) > beta + _BOX_SLACK * (1.0 + beta):
        return float("inf")
    ops = prob.ops
    r = ops.K @ p - ops.M @ prob.y_d
    minv_r = ops.mass_factor().solve(r)
    coupling = lam + mu - ops.pad(p)
    val = 0.5 * float(r @ minv_r)
    val += 0.5 / prob.alpha * float(coupling @ (ops.M_full @ coupling))
    val += float(ops.mass_interior_rows(prob.y_r) @ p)
    val += support_box(ops.M_full @ mu, *prob.box)
    val -= 0.5 * float(prob.y_d @ (ops.M @ prob.y_d))
    return val


def primal_value(prob: ProblemInstance, u: np.ndarray) -> float:
    """Tracking plus control cost of ``u`` with the exact discrete state.

    The L1 control cost is discretized as ``sum_i |(M u)_i|``, through the
    same consistent mass matrix that weights the coupling term of
    :func:`dual_objective`.  With matching pairings the two functionals are
    exact conjugates, so ``dual_objective(z) + primal_value(u)`` is a true
    duality gap: nonnegative, and zero only at the optimal pair.
    """
    u = np.asarray(u, dtype=float)
    ops = prob.ops
    y = ops.stiffness_factor().solve(ops.mass_interior_rows(u + prob.y_r))
    diff = y - prob.y_d
    val = 0.5 * float(diff @ (ops.M @ diff))
    val += 0.5 * prob.alpha * float(u @ (ops.M_full @ u))
    val += prob.beta * float(np.abs(ops.M_full @ u).sum())
    return val


def step_phat(prob: ProblemInstance, lam_t: np.ndarray,
              mu_t: np.ndarray) -> np.ndarray:
    """First p-solve of the sweep, at the extrapolated lam."""
    ops = prob.ops
    rhs = ops.K @ prob.y_d - ops.mass_interior_rows(prob.y_r) \
        + ops.mass_interior_rows(lam_t + mu_t) / prob.alpha
    return ops.augmented(prob.alpha).solve(rhs)


def lambda_kernel(lam_t, coupled, W, beta: float) -> np.ndarray:
    """Componentwise lam update: clip(lam_t + coupled / W, -beta, beta).

    ``coupled`` is M (p_hat - mu_t - lam_t); the kernel exactly minimizes
    the box-constrained quadratic with an added (W - M)-weighted proximal
    term, which makes the metric diagonal.
    """
    return np.clip(np.asarray(lam_t, float)
                   + np.asarray(coupled, float) / np.asarray(W, float),
                   -beta, beta)


def step_lambda(prob: ProblemInstance, lam_t: np.ndarray, mu_t: np.ndarray,
                p_hat: np.ndarray) -> np.ndarray:
    """Closed-form lam update: lumped-metric projection onto the box."""
    ops = prob.ops
    coupled = ops.M_full @ (ops.pad(p_hat) - mu_t - lam_t)
    return lambda_kernel(lam_t, coupled, ops.W_full, prob.beta)


def step_p(prob: ProblemInstance, lam_new: np.ndarray,
           mu_t: np.ndarray) -> np.ndarray:
    """Second p-solve of the sweep, at the updated lam."""
    return step_phat(prob, lam_new, mu_t)


def mu_xi_kernel(v, W, a: float, b: float, alpha: float,
                 gamma: float) -> np.ndarray:
    """Componentwise optimality map of the mu subproblem in xi = M mu:

    xi = v - (alpha/gamma) W clip((gamma/alpha) v / W, a, b).
    """
    v = np.asarray(v, dtype=float)
    W = np.asarray(W, dtype=float)
    proj = np.clip((gamma / alpha) * v / W, a, b)
    return v - (alpha / gamma) * W * proj


def step_mu(prob: ProblemInstance, lam_new: np.ndarray, p_new: np.ndarray,
            mu_t: np.ndarray) -> np.ndarray:
    """Closed-form mu update via the lumped-metric proximal map.

    The subproblem is a proximal step on the box support function composed
    with M; in the variable xi = M mu it separates componentwise, so xi
    follows from one projection and mu from one mass solve.
    """
    ops = prob.ops
    v = ops.M_full @ mu_t \
        + (ops.W_full * (ops.pad(p_new) - lam_new - mu_t)) / prob.gamma
    xi = mu_xi_kernel(v, ops.W_full, *prob.box, prob.alpha, prob.gamma)
    return ops.mass_full_factor().solve(xi)


def momentum(t: float) -> tuple[float, float]:
    """Accelerated step-size recurrence: returns (t_next, beta_k)."""
    t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
    return float(t_next), float((t - 1.0) / t_next)


def recover_primal(prob: ProblemInstance, lam, p, mu) -> tuple[np.ndarray, np.ndarray]:
    """Control and state recovered from dual variables.

    ``u = (E p - lam - mu) / alpha`` (unclipped; at an optimum it is
    feasible), ``y`` solves the state equation for that control, so the
    state residual vanishes by construction.
    """
    ops = prob.ops
    u = (ops.pad(p) - np.asarray(lam, float)
         - np.asarray(mu, float)) / prob.alpha
    y = ops.stiffness_factor().solve(ops.mass_interior_rows(u + prob.y_r))
    return u, y


def kkt_residual(prob: ProblemInstance, lam, p, mu, u, y) -> float:
    """Relative first-order residual: max of adjoint and two complementarity
    residuals, each normalized by 1 + the scale of its anchor vector."""
    ops = prob.ops
    a, b = prob.box
    beta = prob.beta

    r_adj = np.linalg.norm(ops.K @ p - ops.M @ (prob.y_d - y))
    r_adj /= 1.0 + np.linalg.norm(ops.M @ prob.y_d)

    lam_prox = np.clip(lam + (ops.M_full @ u) / ops.W_full, -beta, beta)
    r_lam = np.linalg.norm(lam - lam_prox) / (1.0 + np.linalg.norm(lam))

    u_prox = np.clip(u + (ops.M_full @ mu) / ops.W_full, a, b)
    r_mu = np.linalg.norm(u - u_prox) / (1.0 + np.linalg.norm(u))

    return float(max(r_adj, r_lam, r_mu))


def solve(prob: ProblemInstance, config: SolverConfig | None = None,
          z0: DualIterate | None = None) -> RunRecord:
    """Run the accelerated dual scheme from ``z0`` (zeros by default).

    Logs the dual objective, the KKT residual, and the duality gap at the
    configured cadence; stops on the KKT tolerance, on ``phi_target`` when
    set, or at ``max_iters``.  Raises :class:`DivergenceError` when iterates
    become non-finite.
    """
    config = config or SolverConfig()
    if z0 is None:
        z0 = DualIterate.for_instance(prob)
    lam_prev = np.asarray(z0.lam, dtype=float).copy()
    p_prev = np.asarray(z0.p, dtype=float).copy()
    mu_prev = np.asarray(z0.mu, dtype=float).copy()
    if lam_prev.shape != (prob.n_full,) or mu_prev.shape != (prob.n_full,) \
            or p_prev.shape != (prob.n,):
        raise ValueError("start has wrong block sizes: expected "
                         f"lam/mu ({prob.n_full},), p ({prob.n},)")
    viol = np.abs(lam_prev).max(initial=0.0) - prob.beta
    if viol > 1e-9 * (1.0 + prob.beta):
        raise ValueError(f"initial lam violates the box by {viol:.3e}")
    np.clip(lam_prev, -prob.beta, prob.beta, out=lam_prev)

    lam_t, p_t, mu_t = lam_prev.copy(), p_prev.copy(), mu_prev.copy()
    t = 1.0
    t0 = time.perf_counter()

    ks: list[int] = []
    phis: list[float] = []
    kkts: list[float] = []
    gaps: list[float] = []
    times: list[float] = []

    a, b = prob.box
    converged = False
    stop_reason = "max_iters"
    lam = lam_prev
    p = p_prev
    mu = mu_prev
    res = float("inf")
    k = 0

    for k in range(1, config.max_iters + 1):
        p_hat = step_phat(prob, lam_t, mu_t)
        lam = step_lambda(prob, lam_t, mu_t, p_hat)
        p = step_p(prob, lam, mu_t)
        mu = step_mu(prob, lam, p, mu_t)

        if not (np.isfinite(lam).all() and np.isfinite(p).all()
                and np.isfinite(mu).all()):
            state = DualIterate(lam, p, mu, lam_t, p_t, mu_t, t, k)
            raise DivergenceError(f"non-finite iterate at k={k}", k, state)

        check_now = (k % config.check_every == 0) or (k == config.max_iters)
        log_now = config.log_every > 0 and (k % config.log_every == 0)
        want_phi = log_now or config.phi_target is not None

        u = y = None
        if check_now or log_now:
            u, y = recover_primal(prob, lam, p, mu)
            res = kkt_residual(prob, lam, p, mu, u, y)
        phi = None
        if want_phi:
            phi = dual_objective(prob, lam, p, mu)
        if log_now:
            ks.append(k)
            phis.append(phi)
            kkts.append(res)
            gaps.append(phi + primal_value(prob, np.clip(u, a, b)))
            times.append(time.perf_counter() - t0 if config.timing else 0.0)

        if check_now and res <= config.tol:
            converged = True
            stop_reason = "kkt"
            break
        if config.phi_target is not None and phi is not None \
                and phi <= config.phi_target:
            converged = True
            stop_reason = "phi_target"
            break

        t_next, beta_k = momentum(t)
        lam_t = lam + beta_k * (lam - lam_prev)
        p_t = p + beta_k * (p - p_prev)
        mu_t = mu + beta_k * (mu - mu_prev)
        lam_prev, p_prev, mu_prev = lam, p, mu
        t = t_next

    if u is None:
        u, y = recover_primal(prob, lam, p, mu)
        res = kkt_residual(prob, lam, p, mu, u, y)
    if not ks or ks[-1] != k:
        phi = dual_objective(prob, lam, p, mu)
        ks.append(k)
        phis.append(phi)
        kkts.append(res)
        gaps.append(phi + primal_value(prob, np.clip(u, a, b)))
        times.append(time.perf_counter() - t0 if config.timing else 0.0)

    final = DualIterate(lam, p, mu, lam_t, p_t, mu_t, t, k)
    return RunRecord(
        ks=np.asarray(ks, dtype=np.int64),
        phi=np.asarray(phis, dtype=float),
        kkt=np.asarray(kkts, dtype=float),
        gap=np.asarray(gaps, dtype=float),
        time_s=np.asarray(times, dtype=float),
        final=final,
        u=u,
        y=y,
        converged=converged,
        iterations=k,
        stop_reason=stop_reason,
    )
