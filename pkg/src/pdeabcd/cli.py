"""Command-line entry point.

Three subcommands: ``solve`` runs the accelerated dual solver on one
preset instance and writes a per-iteration CSV plus a JSON summary;
``mesh-indep`` measures iterations-to-accuracy across a mesh hierarchy;
``checks`` runs the randomized matrix and norm property suites.

Exit codes: 0 all good, 2 usage error, 3 solver divergence, 4 a checked
criterion failed.  Output files are byte-identical across repeated runs
with the same flags; wall-clock columns are only filled under --timing.
The PDEABCD_SEED environment variable fixes the seed of the randomized
check suites.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analysis, dual_solver, oracle
from .assembly import dump_operators
from .dual_solver import DivergenceError, SolverConfig
from .mesh import MeshSizeError, dump_mesh
from .presets import make_instance, preset_names

_BOOL_KEYS = {"check-bound", "dump-mesh", "dump-matrices", "timing"}
_SUBCOMMANDS = ("solve", "mesh-indep", "checks")


class UsageError(ValueError):
    """Bad flag values detected after parsing."""


def _parse_box(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(
            f"box must be 'a,b', got {text!r}")
    try:
        a, b = float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"box must be two floats, got {text!r}") from None
    return a, b


def _parse_levels(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"levels must be comma-separated integers, got {text!r}"
        ) from None


def _env_seed() -> int:
    raw = os.environ.get("PDEABCD_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"PDEABCD_SEED must be an integer, got {raw!r}")


def load_config_tokens(path: str) -> list[str]:
    """Read a plain key=value config file into flag tokens.

    Keys mirror the long flags one to one (dashes or underscores); lines
    starting with '#' and blank lines are skipped.  Boolean keys accept
    true/false style values.  Command-line flags override the file because
    file tokens are injected before them.
    """
    tokens: list[str] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(
                    f"{path}:{lineno}: expected key=value, got {line!r}")
            key, val = line.split("=", 1)
            key = key.strip().replace("_", "-")
            val = val.strip()
            if key == "config":
                raise UsageError(f"{path}:{lineno}: config cannot nest")
            if key in _BOOL_KEYS:
                low = val.lower()
                if low in ("1", "true", "yes", "on"):
                    tokens.append(f"--{key}")
                elif low in ("0", "false", "no", "off"):
                    pass
                else:
                    raise UsageError(
                        f"{path}:{lineno}: boolean key {key} got {val!r}")
            else:
                tokens.extend([f"--{key}", val])
    return tokens


def _inject_config(argv: list[str]) -> list[str]:
    """Splice config-file tokens after the subcommand; flags win."""
    path = None
    rest: list[str] = []
    skip = False
    for i, tok in enumerate(argv):
        if skip:
            skip = False
            continue
        if tok == "--config":
            if i + 1 >= len(argv):
                raise UsageError("--config needs a file argument")
            path = argv[i + 1]
            skip = True
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
        else:
            rest.append(tok)
    if path is None:
        return argv
    if not rest or rest[0] not in _SUBCOMMANDS:
        return argv
    return [rest[0]] + load_config_tokens(path) + rest[1:]


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key=value file mirroring the flags; "
                     "explicit flags win")
    sub.add_argument("--out", help="directory for output files")
    sub.add_argument("--timing", action="store_true",
                     help="fill wall-clock columns (breaks byte-for-byte "
                     "determinism of outputs)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdeabcd",
        description="Accelerated dual solver for L1-sparse elliptic "
        "optimal control, with mesh experiments and property checks.",
        epilog="Environment: PDEABCD_SEED fixes the seed of the "
        "randomized check suites (default 0).")
    subs = parser.add_subparsers(dest="command", required=True)

    sv = subs.add_parser("solve", help="run the solver on one instance")
    sv.add_argument("--preset", required=True, choices=preset_names())
    sv.add_argument("--level", type=int, default=4,
                    help="dyadic mesh level (default 4)")
    sv.add_argument("--alpha", type=float, default=None)
    sv.add_argument("--beta", type=float, default=None)
    sv.add_argument("--box", type=_parse_box, default=None,
                    metavar="A,B", help="control bounds a,b")
    sv.add_argument("--tol", type=float, default=1e-6,
                    help="KKT residual stop (default 1e-6)")
    sv.add_argument("--max-iters", type=int, default=10_000)
    sv.add_argument("--check-bound", action="store_true",
                    help="verify the accelerated value bound along the run "
                    "against a certified optimum")
    sv.add_argument("--dump-mesh", action="store_true",
                    help="write mesh.json next to the run outputs")
    sv.add_argument("--dump-matrices", action="store_true",
                    help="write K.mtx, M.mtx, W.txt next to the run outputs")
    sv.add_argument("--gamma-override", type=float, default=None,
                    help=argparse.SUPPRESS)
    _add_common(sv)
    sv.set_defaults(func=run_solve)

    mi = subs.add_parser("mesh-indep",
                         help="iterations-to-accuracy across mesh levels")
    mi.add_argument("--preset", required=True, choices=preset_names())
    mi.add_argument("--levels", type=_parse_levels, default=[3, 4, 5, 6],
                    metavar="L1,L2,...", help="mesh levels (default 3,4,5,6)")
    mi.add_argument("--eps", type=float, default=1e-6,
                    help="relative objective accuracy (default 1e-6)")
    mi.add_argument("--alpha", type=float, default=None)
    mi.add_argument("--beta", type=float, default=None)
    mi.add_argument("--box", type=_parse_box, default=None, metavar="A,B")
    mi.add_argument("--max-iters", type=int, default=50_000,
                    help="per-level iteration cap (default 50000)")
    mi.add_argument("--jobs", type=int, default=1,
                    help="levels to run in parallel (default 1)")
    mi.add_argument("--tau-proxy-level", type=int, default=None,
                    help="also fit tau_h <= tau_proxy + C h with the proxy "
                    "taken at this level")
    _add_common(mi)
    mi.set_defaults(func=run_mesh_independence)

    ck = subs.add_parser("checks",
                         help="randomized matrix/norm/spectral properties")
    ck.add_argument("--levels", type=_parse_levels, default=[2, 3, 4],
                    metavar="L1,L2,...", help="mesh levels (default 2,3,4)")
    ck.add_argument("--samples", type=int, default=1000,
                    help="random vectors per level (default 1000)")
    ck.add_argument("--alpha", type=float, default=1e-2)
    ck.add_argument("--gamma-override", type=float, default=None,
                    help=argparse.SUPPRESS)
    _add_common(ck)
    ck.set_defaults(func=run_checks)

    return parser


def _jsonable(obj):
    """numpy scalars leak into report dicts; json refuses them"""
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _write_json(path: str, obj: dict) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _dump_divergence(err: DivergenceError, outdir: str | None) -> str:
    outdir = outdir or "."
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "divergence.npz")
    if err.iterate is not None:
        lam, p, mu = err.iterate.blocks()
    else:
        lam = p = mu = np.zeros(0)
    np.savez(path, k=np.array([err.k]), lam=lam, p=p, mu=mu)
    return path


def run_solve(args) -> int:
    gamma = 4.0 if args.gamma_override is None else args.gamma_override
    inst = make_instance(args.preset, args.level, alpha=args.alpha,
                         beta=args.beta, box=args.box, gamma=gamma)
    config = SolverConfig(max_iters=args.max_iters, tol=args.tol,
                          timing=args.timing)
    try:
        record = dual_solver.solve(inst, config)
    except DivergenceError as err:
        path = _dump_divergence(err, args.out)
        print(f"divergence at iteration {err.k}: {err}", file=sys.stderr)
        print(f"wrote {path}", file=sys.stderr)
        return 3

    print(f"preset={inst.name} level={args.level} n={inst.n} "
          f"alpha={inst.alpha!r} beta={inst.beta!r} "
          f"box=[{inst.box[0]!r},{inst.box[1]!r}] gamma={inst.gamma!r}")
    summary = record.summary(inst)

    bound_ok = True
    if args.check_bound:
        if inst.n <= analysis.ORACLE_CAP:
            if (args.alpha, args.beta, args.box) == (None, None, None) \
                    and gamma == 4.0:
                _, cert = analysis.certified_preset_optimum(
                    args.preset, args.level)
            else:
                cert = oracle.certified_optimum(inst)
            phi_star = cert.phi_star
            z_star = cert.z_star
        else:
            z_star, phi_star, _ = analysis.reference_solution(inst)
        z0 = dual_solver.DualIterate.for_instance(inst)
        tau_h = analysis.compute_tau_h(inst, z0, z_star)
        record.tau_h = tau_h
        bound_ok, margin = analysis.verify_complexity_bound(
            record, tau_h, phi_star)
        summary = record.summary(inst)
        summary["phi_star"] = phi_star
        summary["bound_ok"] = bool(bound_ok)
        summary["bound_min_margin"] = margin
        verdict = "PASS" if bound_ok else "FAIL"
        print(f"bound check: {verdict} tau_h={tau_h!r} "
              f"min_margin={margin!r}")

    print(f"converged={summary['converged']} "
          f"iterations={summary['iterations']} "
          f"stop_reason={summary['stop_reason']}")
    print(f"kkt={summary['kkt']!r} phi={summary['phi']!r} "
          f"gap={summary['gap']!r}")

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        record_path = os.path.join(args.out, "record.csv")
        record.to_csv(record_path)
        summary["preset"] = inst.name
        summary["level"] = int(args.level)
        summary["n_interior"] = int(inst.n)
        summary["alpha"] = inst.alpha
        summary["beta"] = inst.beta
        summary["box"] = list(inst.box)
        summary["gamma"] = inst.gamma
        summary["tol"] = args.tol
        summary["max_iters"] = int(args.max_iters)
        summary_path = os.path.join(args.out, "summary.json")
        _write_json(summary_path, summary)
        print(f"wrote {record_path}")
        print(f"wrote {summary_path}")
        if args.dump_mesh:
            mesh_path = os.path.join(args.out, "mesh.json")
            dump_mesh(inst.ops.mesh, mesh_path)
            print(f"wrote {mesh_path}")
        if args.dump_matrices:
            for path in dump_operators(inst.ops, args.out):
                print(f"wrote {path}")

    return 0 if bound_ok else 4


def run_mesh_independence(args) -> int:
    if args.eps is None or not args.eps > 0.0:
        raise UsageError(f"--eps must be positive, got {args.eps}")
    if len(args.levels) < 3:
        raise UsageError("--levels needs at least three levels")
    if args.jobs < 1:
        raise UsageError(f"--jobs must be >= 1, got {args.jobs}")

    try:
        report = analysis.mesh_independence_experiment(
            args.preset, args.levels, args.eps, jobs=args.jobs,
            run_max_iters=args.max_iters, timing=args.timing,
            tau_proxy_level=args.tau_proxy_level, alpha=args.alpha,
            beta=args.beta, box=args.box)
    except DivergenceError as err:
        path = _dump_divergence(err, args.out)
        print(f"divergence at iteration {err.k}: {err}", file=sys.stderr)
        print(f"wrote {path}", file=sys.stderr)
        return 3

    print("level,h,n_interior,iters_to_eps,tau_h,lam_max_Sh,"
          "phi_star,seconds")
    for r in report.rows:
        print(f"{r.level},{r.h!r},{r.n_interior},{r.iters_to_eps},"
              f"{r.tau_h!r},{r.lam_max_sh!r},{r.phi_star!r},{r.seconds!r}")
    print(f"median_iters={report.median_iters!r} passed={report.passed}")
    if report.fitted_c is not None:
        print(f"tau_proxy={report.tau_proxy!r} fitted_C={report.fitted_c!r}")

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        csv_path = os.path.join(args.out, "mesh_indep.csv")
        report.to_csv(csv_path)
        json_path = os.path.join(args.out, "mesh_indep.json")
        _write_json(json_path, report.to_json_dict())
        print(f"wrote {csv_path}")
        print(f"wrote {json_path}")

    return 0 if report.passed else 4


def run_checks(args) -> int:
    if len(args.levels) < 2:
        raise UsageError("--levels needs at least two levels")
    seed = _env_seed()
    gamma = 4.0 if args.gamma_override is None else args.gamma_override

    sandwich = analysis.lumped_mass_comparison_check(
        args.levels, samples=args.samples, gamma=gamma, seed=seed)
    l1 = analysis.l1_gap_check(args.levels, samples=args.samples, seed=seed)
    spectral = analysis.spectral_scaling_report(args.levels, alpha=args.alpha)
    spect = spectral.checks()
    opb = analysis.operator_bound_check(args.levels, alpha=args.alpha)

    rows = [
        ("norm-sandwich", sandwich["passed"],
         f"violations={sandwich['violations']} gamma={gamma!r}"),
        ("l1-overshoot", l1["passed"],
         f"fitted_C={l1['fitted_C']!r}"),
        ("mass-spectrum", spect["mass_max_window2"]
         and spect["mass_min_window2"], "factor-2 window on lam(M)/h^2"),
        ("stiffness-spectrum", spect["stiffness_min_window2"]
         and spect["stiffness_max_stable"],
         "lam_min(K)/h^2 window, lam_max(K) stable"),
        ("majorizer-spectrum", spect["majorizer_window2"]
         and spect["majorizer_decreasing"],
         "factor-2 window on lam_max(Sh)/h^2, decreasing in h"),
        ("coupled-operator", opb["passed"],
         "h^2 scaling windows for M + alpha K M^-1 K"),
    ]
    all_ok = True
    for name, ok, detail in rows:
        verdict = "PASS" if ok else "FAIL"
        all_ok = all_ok and bool(ok)
        print(f"{name:20s} {verdict}  {detail}")
    print(f"checks={'PASS' if all_ok else 'FAIL'} levels={args.levels} "
          f"samples={args.samples} seed={seed}")

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        payload = {
            "levels": list(args.levels),
            "samples": int(args.samples),
            "seed": int(seed),
            "gamma": gamma,
            "alpha": args.alpha,
            "norm_sandwich": sandwich,
            "l1_overshoot": l1,
            "spectral": {
                "checks": spect,
                "rows": [vars(r) for r in spectral.rows],
            },
            "coupled_operator": opb,
            "passed": bool(all_ok),
        }
        path = os.path.join(args.out, "checks.json")
        _write_json(path, payload)
        print(f"wrote {path}")

    return 0 if all_ok else 4


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        argv = _inject_config(argv)
    except (UsageError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, MeshSizeError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
