"""Convergence constants, bound verification, and mesh-robustness
experiments.

``compute_tau_h`` evaluates the weighted squared distance

    tau_h = 1/(2 alpha) [ d' (M G^{-1} M + W - M) d + gamma e' M W^{-1} M e ],
    G = M + alpha K M^{-1} K,  d = lam0 - lam*,  e = mu0 - mu*,

which controls the accelerated value gap through 4 tau_h / (k+1)^2.  The
mesh-independence experiment runs the solver on a level hierarchy from one
prolongated starting point and records iterations to a relative accuracy;
the spectral report tracks how the extreme eigenvalues of the operators and
of the majorization metric scale with the mesh size.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import dual_solver, oracle
from .assembly import FemOperators, l1h_norm, l1_norm_exact, norms
from .dual_solver import DualIterate, ProblemInstance, RunRecord, SolverConfig
from .mesh import Mesh, build_unit_square_mesh, prolongate_nodal
from .presets import PRESETS, make_instance
from .sparse_linalg import power_iteration_extremes

ORACLE_CAP = 4000


def apply_g_inverse(prob: ProblemInstance, b: np.ndarray) -> np.ndarray:
    """Solve ``(M + alpha K M^{-1} K) x = b`` via the cached saddle solver."""
    return prob.ops.augmented(prob.alpha).solve(
        np.asarray(b, dtype=float) / prob.alpha)


def compute_tau_h(prob: ProblemInstance, z0, z_star) -> float:
    """Weighted squared distance between a start and an optimum.

    ``z0`` and ``z_star`` are :class:`DualIterate` objects or (lam, p, mu)
    triples; the p block does not enter.  The lam part is measured in
    (M E G^{-1} E' M + W - M)/alpha with E the zero-boundary embedding of
    the adjoint block, the mu part in gamma M W^{-1} M / alpha.
    """
    lam0, _, mu0 = z0.blocks() if hasattr(z0, "blocks") else z0
    lam_s, _, mu_s = z_star.blocks() if hasattr(z_star, "blocks") else z_star
    ops = prob.ops
    d = np.asarray(lam0, float) - np.asarray(lam_s, float)
    e = np.asarray(mu0, float) - np.asarray(mu_s, float)
    md = ops.M_full @ d
    md_int = ops.restrict(md)
    term = float(md_int @ apply_g_inverse(prob, md_int))
    term += float(d @ (ops.W_full * d)) - float(d @ md)
    me = ops.M_full @ e
    term += prob.gamma * float((me / ops.W_full) @ me)
    return max(term, 0.0) / (2.0 * prob.alpha)


def verify_complexity_bound(record: RunRecord, tau_h: float, phi_star: float,
                            slack_rel: float = 1e-10) -> tuple[bool, float]:
    """Check the accelerated value bound along a logged run.

    Requires ``Phi(z_k) - Phi* <= 4 tau_h / (k+1)^2 + slack`` at every logged
    iteration, with ``slack = slack_rel * (1 + |Phi*|)``.  Returns the
    verdict and the smallest slack-free margin ``bound - gap`` over the run.
    """
    ks = np.asarray(record.ks, dtype=float)
    gaps = np.asarray(record.phi, dtype=float) - phi_star
    bounds = 4.0 * tau_h / (ks + 1.0) ** 2
    slack = slack_rel * (1.0 + abs(phi_star))
    margins = bounds - gaps
    return bool(np.all(gaps <= bounds + slack)), float(margins.min())


def lam_max_majorizer(prob: ProblemInstance, iters: int = 400) -> float:
    """Largest eigenvalue of the block-diagonal majorization metric."""
    ops = prob.ops
    alpha, gamma = prob.alpha, prob.gamma
    n = prob.n_full

    def lam_block(v):
        mv = ops.M_full @ v
        ginv = apply_g_inverse(prob, ops.restrict(mv))
        return (ops.M_full @ ops.pad(ginv) + ops.W_full * v - mv) / alpha

    def mu_block(v):
        mv = ops.M_full @ v
        return (gamma / alpha) * (ops.M_full @ (mv / ops.W_full))

    top_lam, _ = power_iteration_extremes(lam_block, n, iters=iters)
    top_mu, _ = power_iteration_extremes(mu_block, n, iters=iters)
    return float(max(top_lam, top_mu))


def prolongated_start(coarse_inst: ProblemInstance,
                      prob: ProblemInstance) -> DualIterate:
    """One dual sweep from rest on the coarse level, prolongated.

    The sweep output is a P1 triple on the coarse mesh: data adapted (zero
    data keeps the start at the origin, so those runs finish in one
    iteration everywhere), dual feasible by construction, and with
    level-independent norms.  Its prolongation equals nodal interpolation
    of the same functions on every finer nested mesh, so the start
    represents one fixed function triple across the whole hierarchy.
    """
    run = dual_solver.solve(
        coarse_inst,
        SolverConfig(max_iters=1, tol=0.0, log_every=0, check_every=1))
    zc = run.final
    coarse = coarse_inst.ops.mesh
    fine = prob.ops.mesh
    lam0 = prolongate_nodal(coarse, fine, zc.lam)
    p_full = coarse_inst.ops.pad(zc.p)
    p0 = prob.ops.restrict(prolongate_nodal(coarse, fine, p_full))
    mu0 = prolongate_nodal(coarse, fine, zc.mu)
    z0 = DualIterate.from_blocks(lam0, p0, mu0)
    np.clip(z0.lam, -prob.beta, prob.beta, out=z0.lam)
    np.clip(z0.lam_t, -prob.beta, prob.beta, out=z0.lam_t)
    return z0


def prolongate_iterate(src_mesh: Mesh, src_ops: FemOperators,
                       dst: ProblemInstance,
                       z: DualIterate) -> DualIterate:
    """Carry a dual iterate to a finer mesh by blockwise interpolation."""
    lam = prolongate_nodal(src_mesh, dst.ops.mesh, z.lam)
    p = dst.ops.restrict(
        prolongate_nodal(src_mesh, dst.ops.mesh, src_ops.pad(z.p)))
    mu = prolongate_nodal(src_mesh, dst.ops.mesh, z.mu)
    out = DualIterate.from_blocks(lam, p, mu)
    np.clip(out.lam, -dst.beta, dst.beta, out=out.lam)
    np.clip(out.lam_t, -dst.beta, dst.beta, out=out.lam_t)
    return out


def _warm_iterate(warm: tuple | None,
                  inst: ProblemInstance) -> DualIterate | None:
    """Rebuild a warm start from ``(source_level, full nodal blocks)``.

    The stored blocks are all full-size; the p block is restricted back to
    the interior after interpolation.
    """
    if warm is None:
        return None
    src_level, blocks = warm
    if src_level > inst.ops.mesh.level:
        return None
    src_mesh = build_unit_square_mesh(src_level)
    lam, p_full, mu = (prolongate_nodal(src_mesh, inst.ops.mesh,
                                        np.asarray(v)) for v in blocks)
    out = DualIterate.from_blocks(lam, inst.ops.restrict(p_full), mu)
    np.clip(out.lam, -inst.beta, inst.beta, out=out.lam)
    np.clip(out.lam_t, -inst.beta, inst.beta, out=out.lam_t)
    return out


def reference_solution(prob: ProblemInstance, kkt_tol: float = 1e-8,
                       max_iters: int = 200_000,
                       z0: DualIterate | None = None) -> tuple[DualIterate, float, float]:
    """High-accuracy dual solve; returns (z_star, phi_star, kkt)."""
    config = SolverConfig(max_iters=max_iters, tol=kkt_tol, log_every=0,
                          check_every=5)
    run = dual_solver.solve(prob, config, z0=z0)
    phi = dual_solver.dual_objective(prob, *run.final.blocks())
    return run.final, phi, float(run.kkt[-1])


_CERT_MEMO: dict = {}


def certified_preset_optimum(preset: str, level: int, *, alpha=None,
                             beta=None, box=None,
                             z0: DualIterate | None = None,
                             inst: ProblemInstance | None = None):
    """Memoized certified optimum for a named preset at one level."""
    key = (preset, level, alpha, beta, box)
    hit = _CERT_MEMO.get(key)
    if hit is None:
        if inst is None:
            inst = make_instance(preset, level, alpha=alpha, beta=beta,
                                 box=box)
        cert = oracle.certified_optimum(inst, z0=z0)
        hit = (inst, cert)
        _CERT_MEMO[key] = hit
    return hit


@dataclass
class LevelResult:
    """One row of the mesh-independence report."""

    level: int
    h: float
    n_interior: int
    iters_to_eps: int
    tau_h: float
    lam_max_sh: float
    phi_star: float
    seconds: float

    @property
    def saturated(self) -> bool:
        return self.iters_to_eps < 0


@dataclass
class MeshIndependenceReport:
    """Iterations-to-accuracy across a level hierarchy."""

    preset: str
    epsilon: float
    rows: list[LevelResult]
    median_iters: float
    passed: bool
    fitted_c: float | None = None
    tau_proxy: float | None = None

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("level,h,n_interior,iters_to_eps,tau_h,lam_max_Sh,"
                     "phi_star,seconds\n")
            for r in self.rows:
                fh.write(f"{r.level},{float(r.h)!r},{r.n_interior},"
                         f"{r.iters_to_eps},{float(r.tau_h)!r},"
                         f"{float(r.lam_max_sh)!r},{float(r.phi_star)!r},"
                         f"{float(r.seconds)!r}\n")

    def to_json_dict(self) -> dict:
        return {
            "preset": self.preset,
            "epsilon": self.epsilon,
            "median_iters": self.median_iters,
            "passed": bool(self.passed),
            "fitted_C": self.fitted_c,
            "tau_proxy": self.tau_proxy,
            "rows": [
                {
                    "level": r.level,
                    "h": r.h,
                    "n_interior": r.n_interior,
                    "iters_to_eps": r.iters_to_eps,
                    "tau_h": r.tau_h,
                    "lam_max_Sh": r.lam_max_sh,
                    "phi_star": r.phi_star,
                    "seconds": r.seconds,
                }
                for r in self.rows
            ],
        }


def _level_result(preset: str, level: int, epsilon: float, coarse_level: int,
                  *, oracle_cap: int = ORACLE_CAP, run_max_iters: int = 50_000,
                  ref_kkt: float = 1e-8, timing: bool = False,
                  warm: tuple | None = None,
                  alpha=None, beta=None, box=None) -> tuple[LevelResult, tuple]:
    """Compute one report row; ``warm`` optionally seeds the reference run."""
    t0 = time.perf_counter()
    use_memo = alpha is None and beta is None and box is None
    inst = None
    if use_memo:
        hit = _CERT_MEMO.get((preset, level, None, None, None))
        if hit is not None:
            inst = hit[0]
    if inst is None:
        inst = make_instance(preset, level, alpha=alpha, beta=beta, box=box)
    coarse_inst = make_instance(preset, coarse_level, alpha=alpha, beta=beta,
                                box=box)
    z0 = prolongated_start(coarse_inst, inst)

    warm_start = _warm_iterate(warm, inst)

    if inst.n <= oracle_cap:
        if use_memo:
            inst, cert = certified_preset_optimum(preset, level,
                                                  z0=warm_start, inst=inst)
        else:
            cert = oracle.certified_optimum(inst, z0=warm_start)
        phi_star = cert.phi_star
        z_star = cert.z_star
    else:
        z_star, phi_star, _ = reference_solution(
            inst, kkt_tol=ref_kkt, max_iters=10 * run_max_iters,
            z0=warm_start)

    tau_h = compute_tau_h(inst, z0, z_star)
    lam_max_sh = lam_max_majorizer(inst)

    target = phi_star + epsilon * (1.0 + abs(phi_star))
    config = SolverConfig(max_iters=run_max_iters, tol=0.0, log_every=1,
                          check_every=5, phi_target=target)
    run = dual_solver.solve(inst, config, z0=z0)
    reached = run.converged
    iters = run.iterations if reached else -1

    seconds = time.perf_counter() - t0 if timing else 0.0
    row = LevelResult(
        level=level,
        h=inst.ops.mesh.h,
        n_interior=inst.n,
        iters_to_eps=iters,
        tau_h=tau_h,
        lam_max_sh=lam_max_sh,
        phi_star=phi_star,
        seconds=seconds,
    )
    warm_out = (level, (z_star.lam, inst.ops.pad(z_star.p), z_star.mu))
    return row, warm_out


def _level_result_args(args: tuple) -> LevelResult:
    preset, level, epsilon, coarse_level, kwargs = args
    row, _ = _level_result(preset, level, epsilon, coarse_level, **kwargs)
    return row


def mesh_independence_experiment(preset: str, levels, epsilon: float = 1e-6,
                                 *, jobs: int = 1,
                                 run_max_iters: int = 50_000,
                                 oracle_cap: int = ORACLE_CAP,
                                 timing: bool = False,
                                 tau_proxy_level: int | None = None,
                                 alpha=None, beta=None,
                                 box=None) -> MeshIndependenceReport:
    """Iterations to relative accuracy ``epsilon`` across mesh levels.

    Every level starts from the same prolongated point; a level passes when
    the dual objective reaches ``Phi* + epsilon (1 + |Phi*|)``.  The report
    passes when no level saturates and all counts lie within 20 percent of
    their median.  With ``jobs > 1`` levels run in separate processes
    (independent, no warm-start chaining); results are ordered by level
    either way.
    """
    levels = sorted(int(l) for l in levels)
    if len(levels) < 2:
        raise ValueError("need at least two levels to compare")
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    coarse_level = levels[0]
    kwargs = dict(oracle_cap=oracle_cap, run_max_iters=run_max_iters,
                  timing=timing, alpha=alpha, beta=beta, box=box)

    rows: list[LevelResult] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            args = [(preset, lvl, epsilon, coarse_level, kwargs)
                    for lvl in levels]
            rows = list(pool.map(_level_result_args, args))
    else:
        warm = None
        for lvl in levels:
            row, warm = _level_result(preset, lvl, epsilon, coarse_level,
                                      warm=warm, **kwargs)
            rows.append(row)

    counts = [r.iters_to_eps for r in rows if not r.saturated]
    median = float(np.median(counts)) if counts else float("nan")
    passed = len(counts) == len(rows) and all(
        abs(c - median) <= 0.2 * median for c in counts)

    report = MeshIndependenceReport(
        preset=preset, epsilon=epsilon, rows=rows,
        median_iters=median, passed=passed,
    )
    if tau_proxy_level is not None:
        proxy = tau_h_at_level(preset, tau_proxy_level, coarse_level,
                               alpha=alpha, beta=beta, box=box,
                               warm=warm if jobs == 1 else None)
        c, ok = fit_tau_constant(rows, proxy)
        report.fitted_c = c
        report.tau_proxy = proxy
        report.passed = report.passed and ok
    return report


def tau_h_at_level(preset: str, level: int, coarse_level: int, *,
                   alpha=None, beta=None, box=None,
                   warm: tuple | None = None,
                   kkt_tol: float = 1e-8) -> float:
    """tau_h for the standard prolongated start at one level.

    ``warm`` is an optional ``(source_level, full nodal blocks)`` seed for
    the reference solve, carried over from a coarser level.
    """
    use_memo = alpha is None and beta is None and box is None
    inst = None
    if use_memo:
        hit = _CERT_MEMO.get((preset, level, None, None, None))
        if hit is not None:
            inst = hit[0]
    if inst is None:
        inst = make_instance(preset, level, alpha=alpha, beta=beta, box=box)
    coarse_inst = make_instance(preset, coarse_level, alpha=alpha, beta=beta,
                                box=box)
    z0 = prolongated_start(coarse_inst, inst)
    warm_start = _warm_iterate(warm, inst)
    if inst.n <= ORACLE_CAP:
        if use_memo:
            inst, cert = certified_preset_optimum(preset, level,
                                                  z0=warm_start, inst=inst)
        else:
            cert = oracle.certified_optimum(inst, z0=warm_start)
        z_star = cert.z_star
    else:
        z_star, _, _ = reference_solution(inst, kkt_tol=kkt_tol,
                                          z0=warm_start)
    return compute_tau_h(inst, z0, z_star)


def fit_tau_constant(rows: list[LevelResult],
                     tau_proxy: float) -> tuple[float, bool]:
    """Smallest nonnegative C with ``tau_h <= tau_proxy + C h`` on all rows."""
    c = 0.0
    for r in rows:
        c = max(c, (r.tau_h - tau_proxy) / r.h)
    c = max(c, 0.0)
    ok = all(r.tau_h <= tau_proxy + c * r.h + 1e-12 * (1.0 + abs(tau_proxy))
             for r in rows)
    return c, ok


def approximate_continuous_tau(preset: str, fine_level: int, *,
                               coarse_start_level: int = 3,
                               kkt_tol: float = 1e-8,
                               warm: tuple | None = None,
                               alpha=None, beta=None, box=None) -> float:
    """Continuum limit of the distance constant, sampled on a fine mesh.

    Approximates 1/(2 alpha) [ <d, (alpha A*A + I)^{-1} d> + ||e||^2 ] by its
    mass-matrix discretization: the inverse is applied through the same
    coupled solve as G^{-1}, and the mu term carries a plain mass norm.
    """
    use_memo = alpha is None and beta is None and box is None
    inst = None
    if use_memo:
        hit = _CERT_MEMO.get((preset, fine_level, None, None, None))
        if hit is not None:
            inst = hit[0]
    if inst is None:
        inst = make_instance(preset, fine_level, alpha=alpha, beta=beta,
                             box=box)
    coarse_inst = make_instance(preset, coarse_start_level, alpha=alpha,
                                beta=beta, box=box)
    z0 = prolongated_start(coarse_inst, inst)
    warm_start = _warm_iterate(warm, inst)
    if inst.n <= ORACLE_CAP:
        if use_memo:
            inst, cert = certified_preset_optimum(preset, fine_level,
                                                  z0=warm_start, inst=inst)
        else:
            cert = oracle.certified_optimum(inst, z0=warm_start)
        z_star = cert.z_star
    else:
        z_star, _, _ = reference_solution(inst, kkt_tol=kkt_tol,
                                          z0=warm_start)
    d = z0.lam - z_star.lam
    e = z0.mu - z_star.mu
    ops = inst.ops
    md_int = ops.restrict(ops.M_full @ d)
    term = float(md_int @ apply_g_inverse(inst, md_int))
    term += float(e @ (ops.M_full @ e))
    return max(term, 0.0) / (2.0 * inst.alpha)


@dataclass
class SpectralRow:
    level: int
    h: float
    lam_max_m: float
    lam_min_m: float
    lam_max_k: float
    lam_min_k: float
    lam_max_sh: float


@dataclass
class SpectralScalingReport:
    """Extreme-eigenvalue scaling of M, K, and the majorization metric."""

    alpha: float
    gamma: float
    rows: list[SpectralRow]

    def window(self, values) -> tuple[float, float]:
        arr = np.asarray(values, dtype=float)
        return float(arr.min()), float(arr.max())

    def checks(self) -> dict[str, bool]:
        rows = self.rows
        h2 = np.array([r.h**2 for r in rows])
        max_m = np.array([r.lam_max_m for r in rows]) / h2
        min_m = np.array([r.lam_min_m for r in rows]) / h2
        min_k = np.array([r.lam_min_k for r in rows]) / h2
        max_k = np.array([r.lam_max_k for r in rows])
        max_sh = np.array([r.lam_max_sh for r in rows]) / h2
        sh_raw = np.array([r.lam_max_sh for r in rows])
        out = {
            "mass_max_window2": max_m.max() <= 2.0 * max_m.min(),
            "mass_min_window2": min_m.max() <= 2.0 * min_m.min(),
            "stiffness_min_window2": min_k.max() <= 2.0 * min_k.min(),
            "stiffness_max_stable": abs(max_k[-1] - max_k[-2])
            <= 0.10 * max_k[-2] if len(rows) >= 2 else True,
            "majorizer_window2": max_sh.max() <= 2.0 * max_sh.min(),
            "majorizer_decreasing": bool(np.all(np.diff(sh_raw) < 0.0)),
        }
        out["all"] = all(out.values())
        return out


def spectral_scaling_report(levels, alpha: float = 1e-2,
                            gamma: float = 4.0,
                            preset: str = "sine") -> SpectralScalingReport:
    """Estimate extreme eigenvalues of M, K, and the majorizer per level."""
    rows = []
    for level in sorted(int(l) for l in levels):
        inst = make_instance(preset, level, alpha=alpha, gamma=gamma)
        ops = inst.ops
        n = inst.n
        m_fact = ops.mass_factor()
        k_fact = ops.stiffness_factor()
        lam_max_m, _ = power_iteration_extremes(lambda v: ops.M @ v, n)
        inv_max, _ = power_iteration_extremes(m_fact.solve, n)
        lam_max_k, _ = power_iteration_extremes(lambda v: ops.K @ v, n)
        kinv_max, _ = power_iteration_extremes(k_fact.solve, n)
        rows.append(SpectralRow(
            level=level,
            h=ops.mesh.h,
            lam_max_m=lam_max_m,
            lam_min_m=1.0 / inv_max,
            lam_max_k=lam_max_k,
            lam_min_k=1.0 / kinv_max,
            lam_max_sh=lam_max_majorizer(inst),
        ))
    return SpectralScalingReport(alpha=alpha, gamma=gamma, rows=rows)


def lumped_mass_comparison_check(levels, samples: int = 1000,
                                 gamma: float = 4.0,
                                 seed: int = 0) -> dict:
    """Sandwich check ``||z||_M^2 <= ||z||_W^2 <= gamma ||z||_M^2``.

    Runs on random full nodal vectors; counts violations beyond a relative
    roundoff slack of 1e-12.
    """
    rng = np.random.default_rng(seed)
    out = {"gamma": gamma, "levels": {}, "violations": 0}
    for level in levels:
        ops = _plain_operators(level)
        nviol = 0
        for _ in range(samples):
            z = rng.standard_normal(ops.mesh.n_nodes)
            zm = float(z @ (ops.M_full @ z))
            zw = float(z @ (ops.W_full * z))
            slack = 1e-12 * max(zm, zw)
            if zw < zm - slack or zw > gamma * zm + slack:
                nviol += 1
        out["levels"][int(level)] = nviol
        out["violations"] += nviol
    out["passed"] = out["violations"] == 0
    return out


def l1_gap_check(levels, samples: int = 1000, seed: int = 0,
                 fit_margin: float = 1.0) -> dict:
    """Two-sided check of the lumped-l1 overshoot.

    For random nodal vectors the gap ``||z||_{l1,W} - ||z||_{L1}`` must be
    nonnegative (up to roundoff) and bounded by ``C h ||z||_{H1}`` with C
    fitted at the coarsest level and reused at finer ones.
    """
    levels = sorted(int(l) for l in levels)
    rng = np.random.default_rng(seed)
    out = {"levels": {}, "fit_level": levels[0]}
    c_fit = 0.0
    passed = True
    for idx, level in enumerate(levels):
        ops = _plain_operators(level)
        h = ops.mesh.h
        worst_ratio = 0.0
        nviol_lower = 0
        nviol_upper = 0
        for _ in range(samples):
            z = rng.standard_normal(ops.mesh.n_nodes)
            gap = l1h_norm(ops.W_full, z) - l1_norm_exact(ops.mesh, z)
            _, h1 = norms(ops, z)
            if gap < -1e-12 * (1.0 + h1):
                nviol_lower += 1
            ratio = gap / (h * h1)
            worst_ratio = max(worst_ratio, ratio)
            if idx > 0 and gap > c_fit * h * h1 + 1e-12 * (1.0 + h1):
                nviol_upper += 1
        if idx == 0:
            c_fit = worst_ratio * fit_margin
        out["levels"][level] = {
            "worst_ratio": worst_ratio,
            "lower_violations": nviol_lower,
            "upper_violations": nviol_upper if idx > 0 else 0,
        }
        passed = passed and nviol_lower == 0 and \
            (idx == 0 or nviol_upper == 0)
    out["fitted_C"] = c_fit
    out["passed"] = passed
    return out


_PLAIN_OPS: dict[int, FemOperators] = {}


def _plain_operators(level: int) -> FemOperators:
    ops = _PLAIN_OPS.get(level)
    if ops is None:
        from .assembly import assemble

        ops = assemble(build_unit_square_mesh(level))
        _PLAIN_OPS[level] = ops
    return ops


def operator_bound_check(levels, alpha: float = 1e-2) -> dict:
    """Scaling windows for ``G = M + alpha K M^{-1} K``.

    The smallest eigenvalue scales like h^2 and the largest like 1/h^2;
    windows are fitted on the coarsest pair of levels with a 25 percent
    margin and checked on the rest.
    """
    levels = sorted(int(l) for l in levels)
    rows = []
    for level in levels:
        ops = _plain_operators(level)
        n = ops.n_interior
        aug = ops.augmented(alpha)

        def g_apply(v):
            mv = ops.mass_factor().solve(ops.K @ v)
            return ops.M @ v + alpha * (ops.K @ mv)

        def g_inv(v):
            return aug.solve(v / alpha)

        g_max, _ = power_iteration_extremes(g_apply, n)
        ginv_max, _ = power_iteration_extremes(g_inv, n)
        h = ops.mesh.h
        rows.append({
            "level": level,
            "h": h,
            "lam_max_G_times_h2": g_max * h * h,
            "lam_min_G_over_h2": (1.0 / ginv_max) / (h * h),
        })
    passed = True
    windows = {}
    for key in ("lam_max_G_times_h2", "lam_min_G_over_h2"):
        fit = [r[key] for r in rows[:2]]
        lo, hi = min(fit) / 1.25, max(fit) * 1.25
        windows[key] = (lo, hi)
        for r in rows[2:]:
            passed = passed and (lo <= r[key] <= hi)
    return {"alpha": alpha, "rows": rows, "windows": windows,
            "passed": passed}
