"""Cross-validation, exhaustive grid search and solver timing.

Grid search evaluates every cell on one random 30% subsample of the data.
Within a fold the Gram matrix and memberships are shared by all cells with
the same kernel width, and each ridge value is factored once and reused for
every box value.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import DataError, Dataset, fit_scaler, make_folds
from .kernels import KernelSpec, build_augmented, gram
from .membership import membership_kernel, membership_linear
from .model import (
    TrainConfig,
    _identity_scaler,
    plane_factors,
    plane_predict,
    solve_planes,
    train,
)
from .solver import DualProblem, brute_force_oracle, solve_plain, solve_shrinking

GRID_COLUMNS = ("c1", "c2", "c3", "c4", "g", "mean_accuracy", "std_accuracy", "converged")


@dataclass(frozen=True)
class GridSpec:
    c_exponents: tuple = tuple(range(-8, 9))
    g_exponents: tuple = tuple(range(-4, 5))

    def __post_init__(self):
        if not self.c_exponents or not self.g_exponents:
            raise ValueError("grid ranges must be nonempty")

    @property
    def c_values(self):
        return [2.0**i for i in self.c_exponents]

    @property
    def g_values(self):
        return [2.0**i for i in self.g_exponents]


@dataclass(frozen=True)
class CvResult:
    mean_accuracy: float
    std_accuracy: float
    per_fold: np.ndarray
    mean_train_time: float
    converged: bool = True

    def __str__(self):
        return f"{self.mean_accuracy:.2f} +/- {self.std_accuracy:.2f}"


def accuracy_stats(per_fold) -> tuple[float, float]:
    """Mean and sample (n-1) standard deviation."""
    a = np.asarray(per_fold, dtype=float)
    std = float(np.std(a, ddof=1)) if a.size > 1 else 0.0
    return float(a.mean()), std


def _class_safe_folds(labels, k, seed, attempts=10):
    for attempt in range(attempts):
        plan = make_folds(len(labels), k, seed + attempt)
        if all(len(np.unique(labels[plan.train_indices(f)])) == 2 for f in range(k)):
            return plan
    raise DataError(f"could not build {k} folds with both classes in every training fold")


def cross_validate(data: Dataset, config: TrainConfig, k: int = 10, seed: int = 0) -> CvResult:
    plan = _class_safe_folds(data.labels, k, seed)
    accs, times, converged = [], [], True
    for f in range(k):
        tr = data.subset(plan.train_indices(f))
        te = data.subset(plan.test_indices(f))
        t0 = time.perf_counter()
        model, diag = train(tr, config, strict=False)
        times.append(time.perf_counter() - t0)
        converged &= diag.converged
        accs.append(100.0 * float(np.mean(model.predict(te.features) == te.labels)))
    mean, std = accuracy_stats(accs)
    return CvResult(mean, std, np.array(accs), float(np.mean(times)), converged)


def subsample(data: Dataset, fraction: float, seed: int, min_size: int = 2) -> Dataset:
    """Random subset of ``fraction`` of the rows (at least ``min_size``), original order kept."""
    n = max(int(round(fraction * data.n_samples)), min_size)
    n = min(n, data.n_samples)
    rng = np.random.default_rng(seed)
    for _ in range(10):
        idx = np.sort(rng.permutation(data.n_samples)[:n])
        if len(np.unique(data.labels[idx])) == 2:
            return data.subset(idx)
    raise DataError("subsample lost a class; use a larger fraction")


@dataclass
class GridResult:
    best: TrainConfig
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(GRID_COLUMNS)
        for r in self.rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in GRID_COLUMNS])
        return buf.getvalue()


def _fold_blocks(data, plan, f, base, kernel):
    tr_idx, te_idx = plan.train_indices(f), plan.test_indices(f)
    Xtr = data.features[tr_idx]
    ytr = data.labels[tr_idx]
    scaler = fit_scaler(Xtr) if base.scale else _identity_scaler(data.n_features)
    Ztr = scaler.transform(Xtr)
    Zte = scaler.transform(data.features[te_idx])
    train_ds = Dataset(Ztr, ytr)
    if kernel.kind == "linear":
        base_tr, base_te, K = Ztr, Zte, None
        mv = membership_linear(train_ds, base.membership)
    else:
        K = gram(Ztr, Ztr, kernel)
        base_tr, base_te = K, gram(Zte, Ztr, kernel)
        mv = membership_kernel(train_ds, kernel, base.membership, K=K)
    pos = ytr == 1
    G_plus = build_augmented(base_tr[pos])
    G_minus = build_augmented(base_tr[~pos])
    return G_plus, G_minus, mv, base_te, K, data.labels[te_idx]


def grid_search(data: Dataset, grid: GridSpec = GridSpec(), k: int = 10, seed: int = 0,
                base: TrainConfig = TrainConfig(), fraction: float = 0.3) -> GridResult:
    """Exhaustive search with c1=c2 and c3=c4 tied (c1=c2 only for the baseline).

    The best cell maximizes mean CV accuracy; ties go to the smaller c3,
    then the smaller c1, then the smaller g.
    """
    sub = subsample(data, fraction, seed, min_size=k) if fraction < 1 else data
    plan = _class_safe_folds(sub.labels, k, seed)
    tsvm = base.mode == "tsvm"
    c_vals = grid.c_values
    c3_vals = [None] if tsvm else c_vals
    g_vals = [None] if base.kernel.kind == "linear" else grid.g_values

    # correct[g][c1][c3] -> per-fold accuracy
    acc = np.zeros((len(g_vals), len(c_vals), len(c3_vals), k))
    ok = np.ones((len(g_vals), len(c_vals), len(c3_vals)), dtype=bool)
    for gi, g in enumerate(g_vals):
        kernel = KernelSpec("linear") if g is None else KernelSpec("gaussian", g)
        for f in range(k):
            G_plus, G_minus, mv, B_te, K, y_te = _fold_blocks(sub, plan, f, base, kernel)
            if tsvm:
                s_p, s_m = np.ones(len(mv.s_plus)), np.ones(len(mv.s_minus))
                shared = plane_factors(G_plus, G_minus, 0.01, 0.01, reg_bias=True)
            else:
                s_p, s_m = mv.s_plus, mv.s_minus
            for ci, c1 in enumerate(c_vals):
                qf_p, qf_m = shared if tsvm else plane_factors(G_plus, G_minus, c1, c1)
                for bi, c3 in enumerate(c3_vals):
                    box = c1 if tsvm else c3
                    v_p, v_m, rp, rm = solve_planes(qf_p, qf_m, box * s_m, box * s_p, base.solver)
                    pred = plane_predict(B_te, v_p, v_m, K)
                    acc[gi, ci, bi, f] = 100.0 * np.mean(pred == y_te)
                    ok[gi, ci, bi] &= rp.converged and rm.converged

    rows, best_key, best_cfg = [], None, None
    for gi, g in enumerate(g_vals):
        for ci, c1 in enumerate(c_vals):
            for bi, c3 in enumerate(c3_vals):
                c3v = c1 if c3 is None else c3
                mean, std = accuracy_stats(acc[gi, ci, bi])
                rows.append(dict(c1=c1, c2=c1, c3=c3v, c4=c3v, g=g if g is not None else "",
                                 mean_accuracy=mean, std_accuracy=std,
                                 converged=bool(ok[gi, ci, bi])))
                key = (mean, -c3v, -c1, -(g or 0.0))
                if best_key is None or key > best_key:
                    best_key = key
                    kernel = base.kernel if g is None else KernelSpec("gaussian", g)
                    best_cfg = replace(base, c1=c1, c2=c1, c3=c3v, c4=c3v, kernel=kernel)
    return GridResult(best_cfg, rows)


def fit_with_grid(train_data: Dataset, grid: GridSpec = GridSpec(), k: int = 10, seed: int = 0,
                  base: TrainConfig = TrainConfig(), fraction: float = 0.3):
    """Two-stage protocol: grid search on a subsample, then refit on all of ``train_data``."""
    result = grid_search(train_data, grid, k, seed, base, fraction)
    model, diag = train(train_data, result.best, strict=False)
    return model, diag, result


def build_duals(data: Dataset, config: TrainConfig) -> list[DualProblem]:
    """The two dual problems a training run with ``config`` would solve."""
    scaler = fit_scaler(data) if config.scale else _identity_scaler(data.n_features)
    Z = scaler.transform(data.features)
    ds = Dataset(Z, data.labels)
    pos = data.labels == 1
    if config.kernel.kind == "linear":
        M, K = Z, None
        mv = membership_linear(ds, config.membership)
    else:
        K = gram(Z, Z, config.kernel)
        M = K
        mv = membership_kernel(ds, config.kernel, config.membership, K=K)
    ridge_p, ridge_m, box_p, box_m, reg_bias = config.plane_params()
    if config.mode == "tsvm":
        mv = type(mv)(np.ones(pos.sum()), np.ones((~pos).sum()))
    qf_p, qf_m = plane_factors(build_augmented(M[pos]), build_augmented(M[~pos]),
                               ridge_p, ridge_m, reg_bias)
    return [DualProblem(qf_p, box_p * mv.s_minus), DualProblem(qf_m, box_m * mv.s_plus)]


TIMING_METHODS = ("solve_shrinking", "solve_plain", "brute_force_oracle")


def timing_compare(data: Dataset, config: TrainConfig, repetitions: int = 3,
                   oracle_tol: float = 1e-8):
    """Mean wall time per method over both duals; one warm-up run is discarded.

    Returns a list of ``(method, mean_seconds)`` rows and the raw timings.
    """
    if repetitions < 3:
        raise ValueError("repetitions must be >= 3")
    duals = build_duals(data, config)
    dense = [p.dense_qbar() for p in duals]

    def run(method):
        t0 = time.perf_counter()
        for p, Qb in zip(duals, dense):
            if method == "solve_shrinking":
                solve_shrinking(p, config.solver)
            elif method == "solve_plain":
                solve_plain(p, config.solver)
            else:
                brute_force_oracle(Qb, None, p.upper, tol=oracle_tol, raise_on_failure=False)
        return time.perf_counter() - t0

    raw = {}
    for method in TIMING_METHODS:
        run(method)
        raw[method] = [run(method) for _ in range(repetitions)]
    return [(m, float(np.mean(raw[m]))) for m in TIMING_METHODS], raw
