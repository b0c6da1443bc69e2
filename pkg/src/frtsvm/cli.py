"""Command-line entry point: ``frtsvm <command> ...``.

Every command prints a one-line JSON run manifest first (``manifest: {...}``).
Feeding that JSON to ``frtsvm replay`` reruns the command with identical
settings.  Option precedence is flags, then ``--config`` file, then defaults.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    DataError,
    Dataset,
    add_gaussian_noise,
    gen_ripley_mixture,
    gen_sine_band,
    load_csv,
    save_csv,
    train_test_split,
)
from .evaluation import GridSpec, cross_validate, grid_search, timing_compare
from .kernels import FactorizationError, KernelSpec
from .membership import MembershipParams
from .model import ConvergenceError, ModelError, TrainConfig, load_model, save_model, train
from .solver import SolverConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3

DEFAULTS = {
    "kernel": "gaussian",
    "g": 1.0,
    "c1": 1.0,
    "c2": 1.0,
    "c3": 1.0,
    "c4": 1.0,
    "mu": 0.1,
    "delta": 1e-3,
    "eps": 1e-4,
    "max_epochs": 1000,
    "shrinking": True,
    "seed": 0,
    "mode": "frtsvm",
    "folds": 10,
    "scale": True,
}
_CASTS = {"kernel": str, "mode": str, "max_epochs": int, "seed": int, "folds": int}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; keys match the long flags."""
    out = {}
    for no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{no}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{no}: unknown key {key!r}")
        out[key] = value
    return out


def write_config_file(config: TrainConfig, path, extra=None) -> None:
    lines = [
        f"kernel = {config.kernel.kind}",
        f"g = {config.kernel.g!r}",
        f"c1 = {config.c1!r}",
        f"c2 = {config.c2!r}",
        f"c3 = {config.c3!r}",
        f"c4 = {config.c4!r}",
        f"mu = {config.membership.mu!r}",
        f"delta = {config.membership.delta!r}",
        f"eps = {config.solver.epsilon!r}",
        f"max_epochs = {config.solver.max_epochs}",
        f"shrinking = {str(config.solver.shrinking).lower()}",
        f"seed = {config.solver.seed}",
        f"mode = {config.mode}",
        f"scale = {str(config.scale).lower()}",
    ]
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    Path(path).write_text("\n".join(lines) + "\n")


def resolve(args) -> dict:
    """Merge flags > config file > defaults into plain values."""
    from_file = read_config_file(args.config) if getattr(args, "config", None) else {}
    out = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        raw = flag if flag is not None else from_file.get(key, default)
        if isinstance(default, bool):
            out[key] = _bool(raw)
        else:
            out[key] = _CASTS.get(key, float)(raw)
    return out


def train_config(values: dict) -> TrainConfig:
    try:
        return TrainConfig(
            c1=values["c1"], c2=values["c2"], c3=values["c3"], c4=values["c4"],
            kernel=KernelSpec(values["kernel"], values["g"]),
            membership=MembershipParams(values["mu"], values["delta"]),
            solver=SolverConfig(epsilon=values["eps"], max_epochs=values["max_epochs"],
                                seed=values["seed"], shrinking=values["shrinking"]),
            mode=values["mode"],
            scale=values["scale"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load(path, args) -> Dataset:
    return load_csv(path, label_column=args.label_column, skip_header=args.skip_header,
                    binarize=args.binarize)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def _sibling(path, suffix) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix)


# ---------------------------------------------------------------- commands

def cmd_gen(args, values):
    seed = values["seed"]
    out = Path(args.out)
    written = []
    if args.kind == "sine":
        data = gen_sine_band(args.count, seed)
        if args.train_count:
            tr, te = train_test_split(data, args.train_count, seed)
            tr = add_gaussian_noise(tr, args.noise, seed + 1)
            parts = {"_train.csv": tr, "_test.csv": te}
        else:
            parts = {".csv": add_gaussian_noise(data, args.noise, seed + 1)}
    else:
        tr, te = gen_ripley_mixture(args.count_train, args.count_test, seed)
        parts = {"_train.csv": add_gaussian_noise(tr, args.noise, seed + 1), "_test.csv": te}
    for suffix, ds in parts.items():
        path = out if len(parts) == 1 else _sibling(out, suffix)
        save_csv(ds, path)
        written.append(str(path))
        print(f"wrote {path} ({ds.n_samples} rows)")
        if args.plot:
            from .plotting import plot_dataset
            fig = _sibling(path, ".png")
            plot_dataset(ds, fig, title=Path(path).stem)
            print(f"wrote {fig}")
    return EXIT_OK


def cmd_train(args, values):
    data = _load(args.data, args)
    config = train_config(values)
    trace = bool(args.trace_out)
    if trace:
        config = replace(config, solver=replace(config.solver, trace=True))
    model, diag = train(data, config, strict=False)
    acc = float(np.mean(model.predict(data.features) == data.labels))
    print(json.dumps({"training_accuracy": 100.0 * acc, "planes": diag.summary()}, indent=1))
    if args.membership_out:
        _write_rows(args.membership_out, ("index", "label", "s"),
                    [(i, int(y), float(s)) for i, (y, s) in
                     enumerate(zip(data.labels, diag.memberships))])
        print(f"wrote {args.membership_out}")
    if trace:
        rows = [("plus",) + r for r in diag.plus.report.trace]
        rows += [("minus",) + r for r in diag.minus.report.trace]
        _write_rows(args.trace_out, ("plane", "epoch", "objective", "kkt_gap", "active_set_size"),
                    rows)
        print(f"wrote {args.trace_out}")
        if args.plot:
            from .plotting import plot_trace
            fig = _sibling(args.trace_out, ".png")
            plot_trace({"plus": [r[1:] for r in rows if r[0] == "plus"],
                        "minus": [r[1:] for r in rows if r[0] == "minus"]}, fig)
            print(f"wrote {fig}")
    if args.plot and args.membership_out and data.n_features == 2:
        from .plotting import plot_memberships
        fig = _sibling(args.membership_out, ".png")
        plot_memberships(data, diag.memberships, fig)
        print(f"wrote {fig}")
    save_model(model, args.out)
    print(f"wrote {args.out}")
    if not diag.converged:
        print("error: dual solver did not reach the KKT tolerance", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_predict(args, values):
    model = load_model(args.model)
    if args.no_labels:
        X = np.loadtxt(args.data, delimiter=",", ndmin=2, skiprows=int(args.skip_header))
        y = None
    else:
        data = _load(args.data, args)
        X, y = data.features, data.labels
    pred = model.predict(X)
    dp, dm = model.distances(X)
    if args.out:
        rows = [(i, float(a), float(b), int(p)) + (() if y is None else (int(t),))
                for i, (a, b, p, t) in enumerate(zip(dp, dm, pred, y if y is not None else pred))]
        header = ("index", "dist_plus", "dist_minus", "predicted") + (() if y is None else ("label",))
        _write_rows(args.out, header, rows)
        print(f"wrote {args.out}")
    if y is not None:
        print(f"accuracy: {100.0 * float(np.mean(pred == y)):.4f}%")
    return EXIT_OK


def _selected(data, config, args, values):
    """With --grid, replace the c/g values by a grid search on a subsample."""
    if not args.grid:
        return config
    grid = GridSpec(_parse_range(args.c_range), _parse_range(args.g_range))
    best = grid_search(data, grid, k=values["folds"], seed=values["seed"], base=config,
                       fraction=args.fraction).best
    g = f" g={best.kernel.g!r}" if best.kernel.kind == "gaussian" else ""
    print(f"selected {best.mode}: c1=c2={best.c1!r} c3=c4={best.c3!r}{g}")
    return best


def cmd_cv(args, values):
    data = _load(args.data, args)
    config = _selected(data, train_config(values), args, values)
    res = cross_validate(data, config, k=values["folds"], seed=values["seed"])
    print(f"accuracy: {res.mean_accuracy:.2f} +/- {res.std_accuracy:.2f} "
          f"({values['folds']}-fold, mean train time {res.mean_train_time:.4f} s)")
    if args.baseline:
        base_cfg = _selected(data, replace(train_config(values), mode="tsvm"), args, values)
        base = cross_validate(data, base_cfg, k=values["folds"], seed=values["seed"])
        print(f"baseline tsvm: {base.mean_accuracy:.2f} +/- {base.std_accuracy:.2f}")
    if args.out:
        _write_rows(args.out, ("fold", "accuracy"),
                    [(i, float(a)) for i, a in enumerate(res.per_fold)])
        print(f"wrote {args.out}")
    return EXIT_OK if res.converged else EXIT_SOLVER


def _parse_range(text) -> tuple:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"range must look like LO:HI, got {text!r}") from None
    if hi < lo:
        raise UsageError(f"empty range {text!r}")
    return tuple(range(lo, hi + 1))


def cmd_grid(args, values):
    data = _load(args.data, args)
    base = train_config(values)
    grid = GridSpec(_parse_range(args.c_range), _parse_range(args.g_range))
    res = grid_search(data, grid, k=values["folds"], seed=values["seed"], base=base,
                      fraction=args.fraction)
    Path(args.out).write_text(res.to_csv())
    print(f"wrote {args.out} ({len(res.rows)} cells)")
    b = res.best
    best_row = max(res.rows, key=lambda r: r["mean_accuracy"])
    print(f"best: c1=c2={b.c1!r} c3=c4={b.c3!r} g={b.kernel.g!r} "
          f"accuracy={best_row['mean_accuracy']:.2f}")
    best_out = args.best_out or _sibling(args.out, "_best.cfg")
    write_config_file(b, best_out)
    print(f"wrote {best_out}")
    print("best-manifest: " + json.dumps({"command": "train", "config": b.to_dict()},
                                         sort_keys=True))
    if args.plot:
        from .plotting import plot_grid_heatmap
        fig = _sibling(args.out, ".png")
        plot_grid_heatmap(res.rows, fig)
        print(f"wrote {fig}")
    return EXIT_OK


def cmd_time(args, values):
    data = _load(args.data, args)
    config = train_config(values)
    table, raw = timing_compare(data, config, repetitions=args.repetitions)
    width = max(len(m) for m, _ in table)
    for m, t in table:
        print(f"{m:<{width}}  {t:.6f} s")
    if args.out:
        _write_rows(args.out, ("method", "mean_seconds", "repetitions"),
                    [(m, t, len(raw[m])) for m, t in table])
        print(f"wrote {args.out}")
    if args.plot:
        from .plotting import plot_timing
        fig = _sibling(args.out or "timing.csv", ".png")
        plot_timing(table, fig)
        print(f"wrote {fig}")
    return EXIT_OK


def boundary_grid(model, bounds, resolution):
    """Rows of (x1, x2, dist_plus, dist_minus, label) over a regular grid, x1 fastest."""
    x1min, x1max, x2min, x2max = bounds
    g1 = np.linspace(x1min, x1max, resolution)
    g2 = np.linspace(x2min, x2max, resolution)
    A, B = np.meshgrid(g1, g2)
    P = np.column_stack([A.ravel(), B.ravel()])
    sp, sm = model.signed_distances(P)
    labels = model.predict(P)
    return P, sp, sm, labels


def cmd_boundary(args, values):
    model = load_model(args.model)
    if model.n_features != 2:
        raise UsageError("boundary export needs a 2-D model")
    if args.bounds:
        try:
            bounds = tuple(float(v) for v in args.bounds.split(","))
        except ValueError:
            bounds = ()
        if len(bounds) != 4:
            raise UsageError("--bounds takes x1min,x1max,x2min,x2max")
    else:
        lo, rng = model.scaler.minimum, model.scaler.range
        pad = 0.05 * np.where(rng > 0, rng, 1.0)
        bounds = (lo[0] - pad[0], lo[0] + rng[0] + pad[0], lo[1] - pad[1], lo[1] + rng[1] + pad[1])
    res = args.resolution
    P, sp, sm, labels = boundary_grid(model, bounds, res)
    _write_rows(args.out, ("x1", "x2", "dist_plus", "dist_minus", "label"),
                [(float(a), float(b), float(abs(c)), float(abs(d)), int(e))
                 for (a, b), c, d, e in zip(P, sp, sm, labels)])
    print(f"wrote {args.out} ({len(labels)} rows)")
    if args.plot:
        from .plotting import plot_boundary
        overlay = _load(args.data, args) if args.data else None
        fig = _sibling(args.out, ".png")
        shape = (res, res)
        plot_boundary(P[:, 0].reshape(shape), P[:, 1].reshape(shape), sp.reshape(shape),
                      sm.reshape(shape), labels.reshape(shape), fig, data=overlay)
        print(f"wrote {fig}")
    return EXIT_OK


def cmd_replay(args, values):
    text = Path(args.manifest).read_text().strip()
    if text.startswith("manifest:"):
        text = text[len("manifest:"):]
    manifest = json.loads(text)
    argv = manifest.get("argv")
    if not argv:
        raise UsageError("manifest has no argv")
    return main(argv)


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "predict": cmd_predict,
    "cv": cmd_cv,
    "grid": cmd_grid,
    "time": cmd_time,
    "boundary": cmd_boundary,
    "replay": cmd_replay,
}


# ---------------------------------------------------------------- parser

def _model_flags(p):
    g = p.add_argument_group("model options (defaults shown; flags > --config > defaults)")
    g.add_argument("--config", help="flat key = value file with any of the options below")
    g.add_argument("--kernel", choices=("linear", "gaussian"), help="kernel (default gaussian)")
    g.add_argument("--g", type=float, help="gaussian width g in exp(-|x-y|^2/g^2) (default 1)")
    for i in (1, 2):
        g.add_argument(f"--c{i}", type=float, help=f"ridge weight of plane {'+-'[i - 1]} (default 1)")
    for i in (3, 4):
        g.add_argument(f"--c{i}", type=float,
                       help=f"slack penalty of plane {'+-'[i - 3]} (default 1)")
    g.add_argument("--mu", type=float, help="outlier-branch membership factor (default 0.1)")
    g.add_argument("--delta", type=float, help="radius offset in memberships (default 1e-3)")
    g.add_argument("--eps", type=float, help="solver KKT tolerance (default 1e-4)")
    g.add_argument("--max-epochs", dest="max_epochs", type=int, help="solver epoch cap (default 1000)")
    g.add_argument("--shrinking", help="true/false: use active-set shrinking (default true)")
    g.add_argument("--mode", choices=("frtsvm", "tsvm"), help="frtsvm or baseline tsvm (default frtsvm)")
    g.add_argument("--scale", help="true/false: min-max scale features to [0,1] (default true)")
    g.add_argument("--folds", type=int, help="cross-validation folds (default 10)")


def _data_flags(p):
    p.add_argument("--label-column", type=int, default=-1, help="label column index (default: last)")
    p.add_argument("--skip-header", action="store_true", help="skip one header row")
    p.add_argument("--binarize", action="store_true",
                   help="map the majority class to +1 and all others to -1")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="frtsvm", description="Fuzzy robust twin SVM toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("gen", help="generate a synthetic dataset")
    s.add_argument("kind", choices=("sine", "ripley"))
    s.add_argument("--count", type=int, default=3000, help="sine: total rows (default 3000)")
    s.add_argument("--train-count", type=int, default=0,
                   help="sine: also split into _train/_test files with this many training rows")
    s.add_argument("--count-train", type=int, default=250, help="ripley: training rows (default 250)")
    s.add_argument("--count-test", type=int, default=1000, help="ripley: test rows (default 1000)")
    s.add_argument("--noise", type=float, default=0.0,
                   help="std of gaussian feature noise, applied to training rows only (default 0)")
    s.add_argument("--out", required=True, help="output CSV (split outputs get _train/_test suffixes)")
    s.add_argument("--plot", action="store_true", help="also write a scatter PNG per file")

    s = sub.add_parser("train", help="train a model")
    s.add_argument("data")
    s.add_argument("--out", required=True, help="model file (JSON)")
    s.add_argument("--membership-out", help="CSV of (index, label, s)")
    s.add_argument("--trace-out", help="per-epoch solver trace CSV")
    s.add_argument("--plot", action="store_true", help="render PNGs next to the trace/membership CSVs")
    _data_flags(s)
    _model_flags(s)

    s = sub.add_parser("predict", help="predict with a saved model")
    s.add_argument("model")
    s.add_argument("data")
    s.add_argument("--out", help="CSV of (index, dist_plus, dist_minus, predicted[, label])")
    s.add_argument("--no-labels", action="store_true", help="input has feature columns only")
    _data_flags(s)

    s = sub.add_parser("cv", help="k-fold cross-validation")
    s.add_argument("data")
    s.add_argument("--out", help="per-fold accuracy CSV")
    s.add_argument("--baseline", action="store_true", help="also cross-validate the TSVM baseline")
    s.add_argument("--grid", action="store_true",
                   help="pick c (and g) by grid search first, separately for each model")
    s.add_argument("--c-range", default="-8:8", help="grid exponents for c, as --c-range=LO:HI")
    s.add_argument("--g-range", default="-4:4", help="grid exponents for g, as --g-range=LO:HI")
    s.add_argument("--fraction", type=float, default=0.3,
                   help="fraction of rows used for the grid search (default 0.3)")
    _data_flags(s)
    _model_flags(s)

    s = sub.add_parser("grid", help="grid search over c1=c2, c3=c4 and g")
    s.add_argument("data")
    s.add_argument("--out", required=True, help="result table CSV")
    s.add_argument("--best-out", help="best config file (default <out>_best.cfg)")
    s.add_argument("--c-range", default="-8:8",
                   help="exponent range LO:HI for c; write negative starts as --c-range=-8:8")
    s.add_argument("--g-range", default="-4:4",
                   help="exponent range LO:HI for g (default -4:4)")
    s.add_argument("--fraction", type=float, default=0.3,
                   help="fraction of rows used for the search (default 0.3)")
    s.add_argument("--plot", action="store_true", help="write an accuracy heatmap PNG")
    _data_flags(s)
    _model_flags(s)

    s = sub.add_parser("time", help="compare solver wall times on the training duals")
    s.add_argument("data")
    s.add_argument("--repetitions", type=int, default=3)
    s.add_argument("--out", help="timing table CSV")
    s.add_argument("--plot", action="store_true", help="write a bar chart PNG")
    _data_flags(s)
    _model_flags(s)

    s = sub.add_parser("boundary", help="export a decision-boundary grid for a 2-D model")
    s.add_argument("model")
    s.add_argument("--bounds", help="x1min,x1max,x2min,x2max, written as --bounds=... when negative "
                   "(default: training range + 5%%)")
    s.add_argument("--resolution", type=int, default=100)
    s.add_argument("--out", required=True, help="grid CSV")
    s.add_argument("--plot", action="store_true", help="write a boundary PNG")
    s.add_argument("--data", help="CSV of points to overlay on the plot")
    _data_flags(s)

    s = sub.add_parser("replay", help="rerun a command from its manifest JSON")
    s.add_argument("manifest")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        values = resolve(args)
        if args.command != "replay":
            manifest = {"command": args.command, "argv": argv, "resolved": values,
                        "paths": {k: v for k, v in vars(args).items()
                                  if k in ("data", "model", "out", "config") and v}}
            print("manifest: " + json.dumps(manifest, sort_keys=True), flush=True)
        return COMMANDS[args.command](args, values)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelError, OSError, KeyError, json.JSONDecodeError) as exc:
        if isinstance(exc, ConvergenceError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_SOLVER
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FactorizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
