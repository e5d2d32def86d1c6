"""Command-line front end.

Each invocation runs one command and writes its data files plus a
``manifest.json`` into a fresh run directory ``<command>-<timestamp>-seed<seed>``
under the output root (``--out-dir``, else ``$GIVERSCHEME_OUTPUT_DIR``, else
``./runs``).

Exit codes: 0 success, 1 numerical failure, 2 usage or parameter error.
"""

import argparse
import datetime as dt
import json
import math
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, figures, inversion, simulate, solver
from .exceptions import NumericalError
from .io import read_csv, sha256_file, write_csv, write_json

OUTPUT_ENV = "GIVERSCHEME_OUTPUT_DIR"
DEFAULT_OUTPUT = "runs"
MANIFEST_NAME = "manifest.json"
REPLAY_RTOL = 1e-12

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2


# --- run directories and manifests ---------------------------------------------

def output_root(out_dir=None):
    return Path(out_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


def _now():
    return dt.datetime.now(dt.timezone.utc)


def make_run_dir(root, command, seed, when=None):
    """Create ``root/<command>-<UTC timestamp>-seed<seed>``, suffixing on collision."""
    stamp = (when or _now()).strftime("%Y%m%dT%H%M%S%fZ")
    base = Path(root) / f"{command}-{stamp}-seed{seed}"
    path, n = base, 1
    while True:
        try:
            path.mkdir(parents=True)
            return path
        except FileExistsError:
            path = base.with_name(f"{base.name}-{n}")
            n += 1


def versions():
    import numba
    import scipy
    import sklearn
    return {"giverscheme": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "scikit-learn": sklearn.__version__,
            "platform": platform.platform()}


def build_manifest(command, argv, config, seed, run_dir, outputs, started,
                   finished, status="ok", error=None):
    run_dir = Path(run_dir)
    files = [{"path": str(Path(p).relative_to(run_dir)), "sha256": sha256_file(p),
              "bytes": Path(p).stat().st_size} for p in outputs]
    return {"command": command, "argv": list(argv), "config": config, "seed": seed,
            "versions": versions(),
            "timestamps": {"started": started.isoformat(), "finished": finished.isoformat()},
            "outputs": files, "status": status, "error": error}


# --- commands ------------------------------------------------------------------

def _solver_config(args):
    return solver.SolverConfig(
        tolerance=args.tolerance, max_iterations=args.max_iterations,
        nodes_per_decade=args.nodes_per_decade, initial_guess=args.initial_guess,
        rtol=args.rtol, staged=args.staged)


def cmd_solve(args, run_dir):
    """Solve along one ray and export the grid and its convergence header."""
    z_max = args.zmax * np.exp(1j * math.radians(args.angle))
    config = _solver_config(args)
    try:
        grid = solver.solve_ray(args.f, z_max, config)
    except NumericalError as exc:
        profile = getattr(exc, "residual_profile", None)
        if profile is not None:
            exc.outputs = [write_csv(run_dir / "residual_profile.csv",
                                     {"node": np.arange(len(profile)), "change": profile})]
        raise
    return [grid.to_csv(run_dir / "ray.csv"), grid.to_json(run_dir / "ray.json")]


def _wealth_grid(args):
    if args.w_min is None and args.w_max is None and args.points is None:
        return None
    lo = args.w_min if args.w_min is not None else 1e-2
    hi = args.w_max if args.w_max is not None else 20.0
    if not 0.0 < lo < hi:
        raise ValueError(f"need 0 < w_min < w_max, got {lo}, {hi}")
    return np.geomspace(lo, hi, args.points or 200)


def cmd_invert(args, run_dir):
    """Invert the transform on a wealth grid, with a cross-check inversion."""
    g = inversion.GiverTransform(args.f, backend=args.backend)
    cross = None if args.crosscheck == "none" else args.crosscheck
    dist = inversion.invert_distribution(g, _wealth_grid(args), method=args.method,
                                         cross_check=cross, trust_floor=args.trust_floor)
    return [dist.to_csv(run_dir / "distribution.csv"),
            dist.to_json(run_dir / "distribution.json")]


def cmd_simulate(args, run_dir):
    """Run the agent model; export the trajectory and the final histogram."""
    spec = simulate.parse_init_spec(args.init)
    n_agents = args.agents
    if n_agents is None and spec.kind not in ("eq13", "list"):
        n_agents = 10_000
    pop = simulate.init_population(n_agents, spec, args.seed)
    traj = simulate.run(pop, args.f, args.steps, entropy=not args.no_entropy,
                        gini=not args.no_gini)
    hist = simulate.histogram(pop, args.bin_width)
    return [traj.to_csv(run_dir / "trajectory.csv"), hist.to_csv(run_dir / "histogram.csv")]


def cmd_figures(args, run_dir):
    """Write every data table needed to re-plot one figure."""
    return [Path(p) for p in figures.FIGURES[args.figure_id](run_dir, seed=args.seed)]


COMMANDS = {"solve": cmd_solve, "invert": cmd_invert, "simulate": cmd_simulate,
            "figures": cmd_figures}


# --- replay --------------------------------------------------------------------

def _numeric(values):
    out = np.full(len(values), np.nan)
    for i, v in enumerate(values):
        try:
            out[i] = float(v)
        except ValueError:
            pass
    return out


def compare_csv(a, b):
    """Largest relative difference between two CSVs; non-numeric cells must match.

    Returns ``inf`` when the headers, shapes or any text cell differ.
    """
    ca, cb = read_csv(a), read_csv(b)
    if list(ca) != list(cb):
        return math.inf
    worst = 0.0
    for name in ca:
        if len(ca[name]) != len(cb[name]):
            return math.inf
        x, y = _numeric(ca[name]), _numeric(cb[name])
        text = np.isnan(x) | np.isnan(y)
        if any(ca[name][i] != cb[name][i] for i in np.flatnonzero(text)):
            return math.inf
        num = ~text
        if num.any():
            scale = np.maximum(np.abs(x[num]), np.abs(y[num]))
            diff = np.abs(x[num] - y[num])
            rel = np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), 0.0)
            worst = max(worst, float(rel.max()))
    return worst


def compare_outputs(manifest, old_dir, new_dir, rtol=REPLAY_RTOL):
    """Per-file comparison of a replay against the recorded outputs."""
    report = []
    for entry in manifest["outputs"]:
        rel = entry["path"]
        new = Path(new_dir) / rel
        row = {"path": rel, "identical": new.exists() and sha256_file(new) == entry["sha256"]}
        if not row["identical"] and new.exists() and rel.endswith(".csv") \
                and (Path(old_dir) / rel).exists():
            row["max_rel_diff"] = compare_csv(Path(old_dir) / rel, new)
        row["ok"] = row["identical"] or row.get("max_rel_diff", math.inf) <= rtol
        report.append(row)
    return report


def cmd_replay(args, run_dir):
    """Re-run a recorded command into ``run_dir`` and compare outputs."""
    path = Path(args.manifest)
    manifest = json.loads(path.read_text())
    sub = build_parser().parse_args(manifest["argv"])
    if sub.command == "replay":
        raise ValueError("cannot replay a replay manifest")
    outputs = COMMANDS[sub.command](sub, run_dir)
    report = compare_outputs(manifest, path.parent, run_dir)
    report_path = write_json(run_dir / "replay_report.json",
                             {"replay_of": str(path), "rtol": REPLAY_RTOL, "files": report})
    bad = [r["path"] for r in report if not r["ok"]]
    for r in report:
        print(f"{'MATCH' if r['ok'] else 'DIFFER'} {r['path']}"
              + ("" if r["identical"] else f" (max rel diff {r.get('max_rel_diff', 'n/a')})"))
    if bad:
        err = NumericalError(f"replay differs in {len(bad)} file(s): {', '.join(bad)}")
        err.outputs = [*outputs, report_path]
        raise err
    return [*outputs, report_path]


# --- parser --------------------------------------------------------------------

def _fraction(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"f must lie in (0, 1), got {text}")
    return value


def _positive(text):
    value = float(text)
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", help=f"output root (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    common.add_argument("--seed", type=int, default=0, help="RNG seed, also used in the run name")

    parser = argparse.ArgumentParser(
        prog="giverscheme",
        description="Steady state and dynamics of the giver-scheme wealth-transfer model.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve for g(z) along a ray")
    p.add_argument("--f", type=_fraction, required=True)
    p.add_argument("--zmax", type=_positive, default=1e4, help="|z| at the far end of the ray")
    p.add_argument("--angle", type=float, default=0.0, help="ray argument in degrees")
    p.add_argument("--tolerance", type=_positive, default=solver.DEFAULT_CONFIG.tolerance)
    p.add_argument("--max-iterations", type=int, default=solver.DEFAULT_CONFIG.max_iterations)
    p.add_argument("--nodes-per-decade", type=int,
                   default=solver.DEFAULT_CONFIG.nodes_per_decade)
    p.add_argument("--initial-guess", choices=[g.value for g in solver.InitialGuess],
                   default=solver.DEFAULT_CONFIG.initial_guess.value)
    p.add_argument("--rtol", type=float, default=0.0)
    p.add_argument("--staged", action="store_true", help="extend the ray one decade at a time")

    p = sub.add_parser("invert", parents=[common], help="invert to the steady-state density")
    p.add_argument("--f", type=_fraction, required=True)
    p.add_argument("--w-min", type=_positive)
    p.add_argument("--w-max", type=_positive)
    p.add_argument("--points", type=int, help="log-spaced grid size (default 200 when a range is given)")
    methods = [inversion.AUTO, *inversion.METHODS]
    p.add_argument("--method", choices=methods, default=inversion.AUTO)
    p.add_argument("--crosscheck", choices=[*methods, "none"], default=inversion.AUTO)
    p.add_argument("--backend", choices=["invariant", "ray"], default="invariant")
    p.add_argument("--trust-floor", type=_positive, default=inversion.TRUST_FLOOR)

    p = sub.add_parser("simulate", parents=[common], help="run the agent-based model")
    p.add_argument("--f", type=_fraction, required=True)
    p.add_argument("--agents", type=int,
                   help="population size (default 10000; eq13 defaults to its integer lattice)")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--init", default="uniform:0:100",
                   help="uniform:lo:hi, delta:w0, eq13[:p1:p2:w2] or list:w1,w2,...")
    p.add_argument("--bin-width", type=_positive, default=1.0)
    p.add_argument("--no-entropy", action="store_true")
    p.add_argument("--no-gini", action="store_true")

    p = sub.add_parser("figures", parents=[common], help="data tables for one figure")
    p.add_argument("figure_id", choices=sorted(figures.FIGURES))

    p = sub.add_parser("replay", parents=[common], help="re-run a manifest and compare outputs")
    p.add_argument("manifest")
    return parser


def _config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out_dir",)}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    started = _now()
    run_dir = make_run_dir(output_root(args.out_dir), args.command, args.seed, started)
    handler = cmd_replay if args.command == "replay" else COMMANDS[args.command]
    outputs, status, error, code = [], "ok", None, EXIT_OK
    try:
        outputs = handler(args, run_dir)
    except NumericalError as exc:
        outputs, status, error, code = getattr(exc, "outputs", []), "numerical_error", str(exc), EXIT_NUMERICAL
    except ValueError as exc:
        status, error, code = "usage_error", str(exc), EXIT_USAGE
    manifest = build_manifest(args.command, argv, _config(args), args.seed, run_dir,
                              outputs, started, _now(), status, error)
    write_json(run_dir / MANIFEST_NAME, manifest)
    if error:
        print(f"giverscheme {args.command}: {error}", file=sys.stderr)
    print(run_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
