"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 bad input, 3 solver did not
converge, 4 a rerun did not reproduce its manifest.
"""

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bench import ANGLES, BenchConfig, format_table, mean_table, run_bench
from .cost import pairwise_cost
from .data import (
    TwoMoonsSpec,
    load_labeled,
    load_matrix,
    save_matrix,
    two_moons,
)
from .errors import ConvergenceError, DataFormatError
from .exact import solve_exact
from .gcg import GcgConfig, solve_gcg
from .mapping import barycentric_map
from .measures import uniform_measure
from .pipeline import (
    METHODS,
    LOG_GRID,
    AdaptConfig,
    canonical_method,
    evaluate,
    fit,
    grid_validate,
    method_grid,
)
from .regularizers import GroupLasso, Laplacian, build_source_graph, build_target_graph
from .sinkhorn import SinkhornOptions, solve_entropic

EXIT_USAGE, EXIT_INPUT, EXIT_SOLVER, EXIT_MISMATCH = 1, 2, 3, 4
JOBS_ENV = "OTDA_JOBS"
# source samples kept per class for file inputs; 0 keeps them all
SOURCE_PER_CLASS = 20

# built-in values for options left unset by both flags and --config
DEFAULTS = {
    "method": "gl",
    "lam": 1.0,
    "eta": 0.1,
    "alpha": 0.5,
    "knn_k": 8,
    "metric": "squared-euclidean",
    "normalize_costs": False,
    "seed": 0,
    "grid": None,
    "eta_grid": None,
    "semi_supervised": False,
    "labels_per_class": 3,
    "source_per_class": None,
    "angle": 10.0,
    "angles": ",".join(str(a) for a in ANGLES),
    "methods": ",".join(METHODS),
    "realizations": 10,
    "n_per_class": 150,
    "n_test": 1000,
    "noise_std": 0.1,
    "header": False,
    "no_timing": False,
}
# keys accepted in a --config file; dashes and underscores are interchangeable
CONFIG_KEYS = set(DEFAULTS) | {"lambda", "jobs"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    if str(text).strip().lower() == "full":
        return LOG_GRID
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise UsageError(f"not a comma-separated list of numbers: {text!r}") from None


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {v!r}")


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FileNotFoundError(f"config file {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out["lam" if key == "lambda" else key] = value
    return out


def _common(p):
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--method", help="exact, sinkhorn, gl or laplace")
    p.add_argument("--lambda", dest="lam", type=float, help="entropic weight")
    p.add_argument("--eta", type=float, help="class-regularizer weight")
    p.add_argument("--alpha", type=float, help="Laplacian source/target balance")
    p.add_argument("--knn-k", type=int, help="neighbors in the Laplacian graphs")
    p.add_argument("--metric", help="squared-euclidean, euclidean or manhattan")
    p.add_argument("--normalize-costs", action="store_const", const=True, default=None)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")


def build_parser():
    parser = _Parser(prog="otda", description="Optimal transport for domain adaptation.")
    parser.add_argument("--version", action="version", version=f"otda {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("transport", help="solve one transport problem between two files")
    _common(p)
    p.add_argument("--source", required=True,
                   help="source features; last column holds labels for gl/laplace")
    p.add_argument("--target", required=True, help="target features")
    p.add_argument("--header", action="store_const", const=True, default=None)

    p = sub.add_parser("adapt", help="adapt, classify with 1-NN and score")
    _common(p)
    p.add_argument("--source", help="labelled source file")
    p.add_argument("--target", help="labelled target file (labels used for scoring)")
    p.add_argument("--header", action="store_const", const=True, default=None)
    p.add_argument("--two-moons", action="store_true", help="use the two-moons generator")
    p.add_argument("--angle", type=float, help="two-moons rotation in degrees")
    p.add_argument("--grid", help="lambda grid: comma list or 'full'")
    p.add_argument("--eta-grid", help="eta grid (defaults to --grid)")
    p.add_argument("--semi-supervised", action="store_const", const=True, default=None)
    p.add_argument("--labels-per-class", type=int,
                   help="target labels revealed per class with --semi-supervised")
    p.add_argument("--source-per-class", type=int,
                   help="random source samples kept per class for file inputs (default 20, 0 keeps all)")
    p.add_argument("--jobs", type=int)
    p.add_argument("--no-timing", action="store_const", const=True, default=None,
                   help="write time_ms as 0 for byte-reproducible output")

    p = sub.add_parser("bench-twomoons", help="mean error per method and rotation angle")
    _common(p)
    p.add_argument("--angles")
    p.add_argument("--methods")
    p.add_argument("--realizations", type=int)
    p.add_argument("--n-per-class", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--noise-std", type=float)
    p.add_argument("--grid", help="lambda grid: comma list or 'full' (default)")
    p.add_argument("--eta-grid")
    p.add_argument("--jobs", type=int)
    p.add_argument("--no-timing", action="store_const", const=True, default=None)

    p = sub.add_parser("rerun", help="re-run a manifest and compare its metrics")
    p.add_argument("manifest")
    p.add_argument("--out", help="output directory (default: a fresh one next to the manifest)")
    return parser


def resolve(args):
    """Merge flags over the config file over built-in defaults."""
    cfg_file = read_config(args.config) if getattr(args, "config", None) else {}
    opts = {}
    for key, value in vars(args).items():
        if key in ("config", "command"):
            continue
        if value is None:
            value = cfg_file.get(key, DEFAULTS.get(key))
        opts[key] = value
    if opts.get("jobs") is None:
        opts["jobs"] = cfg_file.get("jobs") or os.environ.get(JOBS_ENV) or 1
    for key, cast in (("lam", float), ("eta", float), ("alpha", float), ("knn_k", int),
                      ("seed", int), ("jobs", int), ("labels_per_class", int),
                      ("realizations", int), ("n_per_class", int), ("n_test", int),
                      ("noise_std", float), ("angle", float)):
        if opts.get(key) is not None:
            try:
                opts[key] = cast(opts[key])
            except (TypeError, ValueError):
                raise UsageError(f"bad value for {key}: {opts[key]!r}") from None
    if opts.get("source_per_class") is not None:
        opts["source_per_class"] = int(opts["source_per_class"])
    for key in ("normalize_costs", "semi_supervised", "header", "no_timing"):
        if key in opts:
            opts[key] = _bool(opts[key])
    if "method" in opts:
        try:
            opts["method"] = canonical_method(opts["method"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if opts.get("jobs", 1) < 1:
        opts["jobs"] = os.cpu_count() or 1
    return opts


def _adapt_config(opts):
    return AdaptConfig(lam=opts["lam"], eta=opts["eta"], alpha=opts["alpha"],
                       knn_k=opts["knn_k"], metric=opts["metric"],
                       normalize_costs=opts["normalize_costs"],
                       semi_supervised=opts.get("semi_supervised", False))


def _out_dir(opts, default):
    out = Path(opts.get("out") or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out, command, opts, metrics, seconds):
    manifest = {"command": command, "version": __version__, "seed": opts.get("seed"),
                "config": opts, "metrics": metrics, "timings": {"seconds": seconds}}
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, Path):
        return str(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _write_results(path, rows, columns):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def _warn_ignored(opts, given):
    method = opts["method"]
    if method in ("ot-exact", "ot-it") and "eta" in given:
        _warn(f"--eta is ignored by {method}")
    if method == "ot-exact" and "lam" in given:
        _warn("--lambda is ignored by ot-exact")
    if method != "ot-laplace" and ("alpha" in given or "knn_k" in given):
        _warn(f"--alpha/--knn-k are ignored by {method}")


# --------------------------------------------------------------------------
# commands

def _features(path, header):
    """Numeric matrix; a trailing label column is dropped when present."""
    try:
        return load_matrix(path, header=header)
    except DataFormatError as first:
        try:
            return load_labeled(path, header=header).X
        except DataFormatError:
            raise first from None


def cmd_transport(opts, given=()):
    t0 = time.perf_counter()
    _warn_ignored(opts, given)
    method = opts["method"]
    if method in ("ot-gl", "ot-laplace"):
        source = load_labeled(opts["source"], header=opts["header"])
        Xs = source.X
    else:
        Xs = _features(opts["source"], opts["header"])
    Xt = _features(opts["target"], opts["header"])
    C = pairwise_cost(Xs, Xt, opts["metric"], normalize=opts["normalize_costs"])
    mu_s, mu_t = uniform_measure(Xs), uniform_measure(Xt)
    sk = SinkhornOptions(lam=opts["lam"])
    trace = None
    if method == "ot-exact":
        coupling = solve_exact(mu_s, mu_t, C)
    elif method == "ot-it":
        coupling = solve_entropic(mu_s, mu_t, C, sk)
    else:
        if method == "ot-gl":
            reg = GroupLasso(source.groups)
        else:
            reg = Laplacian(Xs, Xt, build_source_graph(Xs, source.y, opts["knn_k"]),
                            build_target_graph(Xt, opts["knn_k"]) if opts["alpha"] > 0 else None,
                            alpha=opts["alpha"])
        gcfg = GcgConfig(lam=opts["lam"], eta=opts["eta"], sinkhorn=sk, regularizer=reg.name)
        coupling, trace = solve_gcg(mu_s, mu_t, C, gcfg, reg)
    mapped = barycentric_map(coupling, Xt, C.metric_tag)
    cost = coupling.cost(C)
    out = _out_dir(opts, "otda-transport")
    save_matrix(out / "coupling.csv", coupling.plan)
    save_matrix(out / "mapped.csv", mapped)
    metrics = {"transport_cost": cost, "marginal_residual": coupling.residual(),
               "support_size": coupling.support_size()}
    if trace is not None:
        metrics["outer_iterations"] = trace.n_iter
    print(f"method            {method}")
    print(f"transport cost    {cost!r}")
    print(f"marginal residual {metrics['marginal_residual']:.3e}")
    print(f"support size      {metrics['support_size']}")
    print(f"outputs           {out}/coupling.csv, {out}/mapped.csv")
    _write_manifest(out, "transport", opts, metrics, time.perf_counter() - t0)
    return 0


def _subsample_per_class(ds, per_class, rng):
    keep = []
    for c in np.unique(ds.y):
        idx = np.flatnonzero(ds.y == c)
        keep.extend(np.sort(rng.choice(idx, min(per_class, idx.size), replace=False)))
    return ds.subset(np.sort(np.array(keep)))


def _reveal_labels(ds, per_class, rng):
    keep = []
    for c in np.unique(ds.y[ds.known]):
        idx = np.flatnonzero(ds.y == c)
        keep.extend(rng.choice(idx, min(per_class, idx.size), replace=False))
    return ds.hide_labels(np.sort(np.array(keep, dtype=np.int64)))


def _adapt_data(opts, rng):
    """source, unlabeled-or-partial target, validation set, test set, tag."""
    if opts["two_moons"]:
        spec = TwoMoonsSpec(rotation_degrees=opts["angle"], seed=opts["seed"])
        source, target, test = two_moons(spec)
        # validation on the labelled target training draw, scoring on the test draw
        return source, target, target, test, ("angle", opts["angle"])
    if not opts.get("source") or not opts.get("target"):
        raise UsageError("adapt needs --source and --target, or --two-moons")
    source = load_labeled(opts["source"], header=opts["header"])
    if not source.fully_labeled:
        raise DataFormatError("source file has unknown labels")
    target = load_labeled(opts["target"], header=opts["header"], classes=source.classes)
    if not target.fully_labeled:
        raise DataFormatError("target file needs every label for scoring")
    # target split in halves: validation and test
    perm = rng.permutation(target.n)
    half = target.n // 2
    validation = target.subset(np.sort(perm[:half]))
    test = target.subset(np.sort(perm[half:]))
    pair = f"{Path(opts['source']).stem}->{Path(opts['target']).stem}"
    return source, target, validation, test, ("pair", pair)


def cmd_adapt(opts, given=()):
    t0 = time.perf_counter()
    _warn_ignored(opts, given)
    rng = np.random.default_rng(opts["seed"])
    source, target, validation, test, (key_name, key) = _adapt_data(opts, rng)
    per_class = opts["source_per_class"]
    if per_class is None and not opts["two_moons"]:
        per_class = SOURCE_PER_CLASS
    if per_class:
        source = _subsample_per_class(source, per_class, rng)
    if opts["semi_supervised"]:
        unlabeled = _reveal_labels(target, opts["labels_per_class"], rng)
    else:
        unlabeled = target.hide_labels()
    cfg = _adapt_config(opts)
    method = opts["method"]
    grid = _floats(opts["grid"])
    chosen = {}
    if grid:
        candidates = method_grid(method, grid, _floats(opts["eta_grid"]))
        cfg, results = grid_validate(method, source, unlabeled, validation, candidates,
                                     cfg, jobs=opts["jobs"])
        failed = sum(not r.ok for r in results)
        chosen = {"grid_points": len(results), "grid_failures": failed}
    model = fit(method, source, unlabeled, cfg)
    scores = evaluate(model.predict(test.X), test.y)
    elapsed = time.perf_counter() - t0
    classes = test.classes
    metrics = {
        "accuracy": scores["accuracy"], "error_rate": scores["error_rate"],
        "per_class_accuracy": {str(classes[k]): v for k, v in scores["per_class_accuracy"].items()},
        "lambda": cfg.lam if method != "ot-exact" else None,
        "eta": cfg.eta if method in ("ot-gl", "ot-laplace") else None,
        "transport_cost": model.transport_cost, **chosen,
    }
    print(f"method      {method}{' (semi-supervised)' if opts['semi_supervised'] else ''}")
    print(f"{key_name:<11} {key}")
    if metrics["lambda"] is not None:
        print(f"lambda      {metrics['lambda']:g}")
    if metrics["eta"] is not None:
        print(f"eta         {metrics['eta']:g}")
    print(f"accuracy    {scores['accuracy']:.4f}")
    print(f"error rate  {scores['error_rate']:.4f}")
    print("per class:")
    for name, acc in metrics["per_class_accuracy"].items():
        print(f"  {name:<10} {acc:.4f}")
    out = _out_dir(opts, "otda-adapt")
    row = {"method": method, key_name: key, "seed": opts["seed"],
           "error": scores["error_rate"],
           "time_ms": 0.0 if opts["no_timing"] else round(1000 * elapsed, 3)}
    _write_results(out / "results.csv", [row], ("method", key_name, "seed", "error", "time_ms"))
    _write_manifest(out, "adapt", opts, metrics, elapsed)
    return 0


def cmd_bench_twomoons(opts, given=()):
    t0 = time.perf_counter()
    angles = _floats(opts["angles"])
    methods = tuple(canonical_method(m) for m in str(opts["methods"]).split(",") if m.strip())
    grid = _floats(opts["grid"]) or LOG_GRID
    cfg = BenchConfig(angles=tuple(a if a != int(a) else int(a) for a in angles),
                      methods=methods, n_realizations=opts["realizations"],
                      seed=opts["seed"], n_per_class=opts["n_per_class"],
                      n_test=opts["n_test"], noise_std=opts["noise_std"], grid=grid,
                      eta_grid=_floats(opts["eta_grid"]), adapt=_adapt_config(opts))
    rows = run_bench(cfg, jobs=opts["jobs"])
    if opts["no_timing"]:
        for row in rows:
            row["time_ms"] = 0.0
    table = mean_table(rows)
    print("mean 1-NN test error over", cfg.n_realizations, "realizations")
    print(format_table(table))
    out = _out_dir(opts, "otda-bench")
    _write_results(out / "results.csv", rows, ("method", "angle", "seed", "error", "time_ms"))
    metrics = {"mean_error": {m: {str(a): v for a, v in by.items()} for m, by in table.items()}}
    _write_manifest(out, "bench-twomoons", opts, metrics, time.perf_counter() - t0)
    return 0


COMMANDS = {"transport": cmd_transport, "adapt": cmd_adapt,
            "bench-twomoons": cmd_bench_twomoons}


def cmd_rerun(manifest_path, out=None):
    try:
        manifest = json.loads(Path(manifest_path).read_text())
        command, opts, expected = manifest["command"], manifest["config"], manifest["metrics"]
    except OSError as exc:
        raise FileNotFoundError(f"{manifest_path}: {exc.strerror}") from None
    except (ValueError, KeyError) as exc:
        raise DataFormatError(f"not a manifest: {exc}") from None
    if command not in COMMANDS:
        raise DataFormatError(f"manifest names unknown command {command!r}")
    if manifest.get("version") != __version__:
        _warn(f"manifest written by version {manifest.get('version')}, "
                      f"running {__version__}")
    opts = dict(opts)
    opts["out"] = out or str(Path(manifest_path).resolve().parent / "rerun")
    COMMANDS[command](opts)
    got = json.loads((Path(opts["out"]) / "manifest.json").read_text())["metrics"]
    if got != expected:
        print("metrics differ from the manifest", file=sys.stderr)
        return EXIT_MISMATCH
    print("metrics reproduced")
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "rerun":
            return cmd_rerun(args.manifest, args.out)
        given = {k for k, v in vars(args).items() if v is not None}
        opts = resolve(args)
        return COMMANDS[args.command](opts, given)
    except UsageError as exc:
        print(f"otda: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"otda: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DataFormatError as exc:
        print(f"otda: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, FloatingPointError) as exc:
        print(f"otda: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"otda: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
