"""Training and prediction for linear and kernel FR-TSVM plus the TSVM baseline.

Plane "+" is fit to the positive class and kept at distance from the
negatives, so its dual variables live on the negative rows (box
``c3 * s_minus``); plane "-" mirrors this with ``c4 * s_plus``.  Throughout,
``own`` names the class a plane is fit to and ``other`` the class that
constrains it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import Dataset, MinMaxScaler, fit_scaler, split_by_class
from .kernels import (
    JITTER_SCHEDULE,
    KernelSpec,
    QFactor,
    build_augmented,
    gram,
    q_factor_from,
    spd_solve_factor,
)
from .membership import MembershipParams, MembershipVector, membership_kernel, membership_linear
from .solver import DualProblem, SolverConfig, SolverReport, solve

TSVM_RIDGE = 0.01
MODEL_FORMAT = "frtsvm-model"
MODEL_VERSION = 1


class ModelError(RuntimeError):
    pass


class ConvergenceError(ModelError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    c4: float = 1.0
    kernel: KernelSpec = KernelSpec("gaussian", 1.0)
    membership: MembershipParams = MembershipParams()
    solver: SolverConfig = SolverConfig()
    mode: str = "frtsvm"
    scale: bool = True

    def __post_init__(self):
        if min(self.c1, self.c2, self.c3, self.c4) <= 0:
            raise ValueError("c1..c4 must be > 0")
        if self.mode not in ("frtsvm", "tsvm"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["kernel"] = KernelSpec(**d["kernel"])
        d["membership"] = MembershipParams(**d["membership"])
        d["solver"] = SolverConfig(**d["solver"])
        return cls(**d)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def plane_params(self):
        """(ridge_plus, ridge_minus, box_plus, box_minus, reg_bias)."""
        if self.mode == "tsvm":
            return TSVM_RIDGE, TSVM_RIDGE, self.c1, self.c2, True
        return self.c1, self.c2, self.c3, self.c4, False


@dataclass(frozen=True)
class PlaneFit:
    """Diagnostics for one of the twin problems."""

    report: SolverReport
    jitter: float
    stationarity: float


@dataclass(frozen=True)
class TrainDiagnostics:
    plus: PlaneFit
    minus: PlaneFit
    memberships: np.ndarray

    @property
    def converged(self) -> bool:
        return self.plus.report.converged and self.minus.report.converged

    def summary(self) -> dict:
        out = {}
        for name, p in (("plus", self.plus), ("minus", self.minus)):
            r = p.report
            out[name] = dict(kkt_gap=r.kkt_gap, epochs=r.epochs, updates=r.updates,
                             shrink_events=r.shrink_events, wall_time=r.wall_time,
                             converged=r.converged, jitter=p.jitter,
                             stationarity=p.stationarity)
        return out


def _identity_scaler(n: int) -> MinMaxScaler:
    return MinMaxScaler(np.zeros(n), np.ones(n))


@dataclass(frozen=True)
class LinearModel:
    w_plus: np.ndarray
    w_minus: np.ndarray
    b_plus: float
    b_minus: float
    scaler: MinMaxScaler
    config: TrainConfig = field(default_factory=TrainConfig)

    kind = "linear"

    def __post_init__(self):
        for w in (self.w_plus, self.w_minus):
            if np.linalg.norm(w) < 1e-12:
                raise ModelError("degenerate hyperplane: ||w|| < 1e-12")

    @property
    def n_features(self) -> int:
        return self.w_plus.shape[0]

    def signed_distances(self, X) -> tuple[np.ndarray, np.ndarray]:
        Z = self.scaler.transform(_as_rows(X, self.n_features))
        dp = (Z @ self.w_plus + self.b_plus) / np.linalg.norm(self.w_plus)
        dm = (Z @ self.w_minus + self.b_minus) / np.linalg.norm(self.w_minus)
        return dp, dm

    def distances(self, X) -> tuple[np.ndarray, np.ndarray]:
        dp, dm = self.signed_distances(X)
        return np.abs(dp), np.abs(dm)

    def predict(self, X) -> np.ndarray:
        return _nearer_plane(*self.distances(X))


@dataclass(frozen=True)
class KernelModel:
    support_matrix: np.ndarray
    coeff_plus: np.ndarray
    coeff_minus: np.ndarray
    b_plus: float
    b_minus: float
    kernel: KernelSpec
    scaler: MinMaxScaler
    config: TrainConfig = field(default_factory=TrainConfig)
    gram_xx: np.ndarray | None = None

    kind = "kernel"

    def __post_init__(self):
        K = self.gram_xx
        if K is None:
            K = gram(self.support_matrix, self.support_matrix, self.kernel)
            object.__setattr__(self, "gram_xx", K)
        norms = []
        for w in (self.coeff_plus, self.coeff_minus):
            q = float(w @ K @ w)
            if not q > 0:
                raise ModelError("degenerate kernel hyperplane: w'Kw <= 0")
            norms.append(max(np.sqrt(q), 1e-12))
        object.__setattr__(self, "_norms", tuple(norms))

    @property
    def n_features(self) -> int:
        return self.support_matrix.shape[1]

    def signed_distances(self, X) -> tuple[np.ndarray, np.ndarray]:
        Z = self.scaler.transform(_as_rows(X, self.n_features))
        Kx = gram(Z, self.support_matrix, self.kernel)
        dp = (Kx @ self.coeff_plus + self.b_plus) / self._norms[0]
        dm = (Kx @ self.coeff_minus + self.b_minus) / self._norms[1]
        return dp, dm

    def distances(self, X) -> tuple[np.ndarray, np.ndarray]:
        dp, dm = self.signed_distances(X)
        return np.abs(dp), np.abs(dm)

    def predict(self, X) -> np.ndarray:
        return _nearer_plane(*self.distances(X))


def kernel_distances(Kx, w_plus, b_plus, w_minus, b_minus, norms):
    dp = np.abs(Kx @ w_plus + b_plus) / norms[0]
    dm = np.abs(Kx @ w_minus + b_minus) / norms[1]
    return dp, dm


def plane_predict(B, v_plus, v_minus, K=None) -> np.ndarray:
    """Labels from raw ``[w; b]`` plane vectors.

    ``B`` holds test rows in the planes' input space (scaled features, or the
    kernel block against the training set, in which case ``K`` is the
    training Gram used for the norms).  Norms are clamped at 1e-12.
    """
    norms = []
    for v in (v_plus, v_minus):
        w = v[:-1]
        q = float(w @ w) if K is None else float(w @ K @ w)
        norms.append(np.sqrt(max(q, 1e-24)))
    dp, dm = kernel_distances(B, v_plus[:-1], v_plus[-1], v_minus[:-1], v_minus[-1], norms)
    return _nearer_plane(dp, dm)


def _as_rows(X, n: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != n:
        raise ValueError(f"dimension mismatch: model has {n} features, input has {X.shape[1]}")
    return X


def _nearer_plane(dp: np.ndarray, dm: np.ndarray) -> np.ndarray:
    # ties (within 1e-12) go to +1
    return np.where(dp <= dm + 1e-12, 1.0, -1.0)


def predict_linear(model: LinearModel, x) -> np.ndarray:
    return model.predict(x)


def predict_kernel(model: KernelModel, x) -> np.ndarray:
    return model.predict(x)


def accuracy(model, data: Dataset) -> float:
    return float(np.mean(model.predict(data.features) == data.labels))


# ------------------------------------------------------------------ training

def plane_factors(G_plus, G_minus, ridge_plus, ridge_minus, reg_bias=False,
                  jitter_schedule=JITTER_SCHEDULE) -> tuple[QFactor, QFactor]:
    """Q factors for plane + (variables on negatives) and plane - (on positives)."""
    f_plus = spd_solve_factor(G_plus.T @ G_plus, ridge_plus, jitter_schedule, reg_bias)
    f_minus = spd_solve_factor(G_minus.T @ G_minus, ridge_minus, jitter_schedule, reg_bias)
    return q_factor_from(f_plus, G_minus), q_factor_from(f_minus, G_plus)


def stationarity_residual(qf: QFactor, v: np.ndarray, alpha: np.ndarray, sign: float) -> float:
    """Relative residual of ``inner v + sign * G_other' alpha = 0``."""
    rhs = qf.g_other.T @ alpha
    res = qf.factor.matrix @ v + sign * rhs
    return float(np.linalg.norm(res) / max(np.linalg.norm(rhs), 1e-300))


def solve_planes(qf_plus: QFactor, qf_minus: QFactor, box_plus, box_minus,
                 solver: SolverConfig):
    """Solve both duals and recover ``v = [w; b]`` for each plane."""
    rep_p = solve(DualProblem(qf_plus, box_plus), solver)
    rep_m = solve(DualProblem(qf_minus, box_minus), solver)
    # u_aux = -Q alpha; plane + takes it as is, plane - flips the sign
    v_plus = qf_plus.Q @ -rep_p.alpha_final
    v_minus = qf_minus.Q @ rep_m.alpha_final
    return v_plus, v_minus, rep_p, rep_m


def _memberships(data: Dataset, config: TrainConfig, K, memberships) -> MembershipVector:
    if memberships is not None:
        if isinstance(memberships, MembershipVector):
            return memberships
        s = np.asarray(memberships, dtype=float)
        pos = data.labels == 1
        return MembershipVector(s[pos], s[~pos])
    if config.mode == "tsvm":
        pos = data.labels == 1
        return MembershipVector(np.ones(pos.sum()), np.ones((~pos).sum()))
    if config.kernel.kind == "linear" or K is None:
        return membership_linear(data, config.membership)
    return membership_kernel(data, config.kernel, config.membership, K=K)


def _fit(train: Dataset, config: TrainConfig, kernelized: bool, memberships, strict=True):
    split_by_class(train)
    scaler = fit_scaler(train) if config.scale else _identity_scaler(train.n_features)
    Z = scaler.transform(train.features)
    scaled = Dataset(Z, train.labels)
    K = gram(Z, Z, config.kernel) if kernelized else None
    mv = _memberships(scaled, config, K, memberships)

    ridge_p, ridge_m, box_p, box_m, reg_bias = config.plane_params()
    G_plus, G_minus = (build_augmented(M) for M in _split_rows(K if kernelized else Z, train.labels))
    qf_p, qf_m = plane_factors(G_plus, G_minus, ridge_p, ridge_m, reg_bias)
    v_p, v_m, rep_p, rep_m = solve_planes(qf_p, qf_m, box_p * mv.s_minus, box_m * mv.s_plus,
                                          config.solver)
    diag = TrainDiagnostics(
        plus=PlaneFit(rep_p, qf_p.jitter, stationarity_residual(qf_p, v_p, rep_p.alpha_final, 1.0)),
        minus=PlaneFit(rep_m, qf_m.jitter, stationarity_residual(qf_m, v_m, rep_m.alpha_final, -1.0)),
        memberships=mv.for_labels(train.labels),
    )
    if strict and not diag.converged:
        raise ConvergenceError(
            f"dual solver did not converge within {config.solver.max_epochs} epochs "
            f"(kkt gaps {rep_p.kkt_gap:.3e}, {rep_m.kkt_gap:.3e})"
        )
    return scaler, Z, K, v_p, v_m, diag


def _split_rows(M, labels):
    pos = labels == 1
    return M[pos], M[~pos]


def train_linear(train: Dataset, config: TrainConfig, memberships=None, strict=True):
    """Fit the linear twin planes.

    ``memberships`` overrides the computed fuzzy weights (dataset row order).
    With ``strict`` a dual that misses its KKT tolerance raises
    ConvergenceError; otherwise the diagnostics record it.
    """
    config = replace(config, kernel=KernelSpec("linear"))
    scaler, _, _, v_p, v_m, diag = _fit(train, config, False, memberships, strict)
    model = LinearModel(v_p[:-1], v_m[:-1], float(v_p[-1]), float(v_m[-1]), scaler, config)
    return model, diag


def train_kernel(train: Dataset, config: TrainConfig, memberships=None, strict=True):
    if config.kernel.kind != "gaussian":
        raise ValueError("train_kernel needs a gaussian kernel spec")
    scaler, Z, K, v_p, v_m, diag = _fit(train, config, True, memberships, strict)
    model = KernelModel(Z, v_p[:-1], v_m[:-1], float(v_p[-1]), float(v_m[-1]),
                        config.kernel, scaler, config, gram_xx=K)
    return model, diag


def train(train: Dataset, config: TrainConfig, memberships=None, strict=True):
    if config.kernel.kind == "linear":
        return train_linear(train, config, memberships, strict)
    return train_kernel(train, config, memberships, strict)


def train_tsvm_baseline(train_data: Dataset, config: TrainConfig, strict=True):
    return train(train_data, replace(config, mode="tsvm"), strict=strict)


# ------------------------------------------------------------ serialization

def _arr(a) -> list:
    return [float(v) for v in np.asarray(a).ravel()]


def model_to_dict(model) -> dict:
    d = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "config": model.config.to_dict(),
        "fingerprint": model.config.fingerprint(),
        "scaler": {"minimum": _arr(model.scaler.minimum), "range": _arr(model.scaler.range)},
        "b_plus": float(model.b_plus),
        "b_minus": float(model.b_minus),
    }
    if model.kind == "linear":
        d["w_plus"] = _arr(model.w_plus)
        d["w_minus"] = _arr(model.w_minus)
    else:
        d["kernel"] = asdict(model.kernel)
        d["support_shape"] = list(model.support_matrix.shape)
        d["support_matrix"] = _arr(model.support_matrix)
        d["coeff_plus"] = _arr(model.coeff_plus)
        d["coeff_minus"] = _arr(model.coeff_minus)
    return d


def model_from_dict(d: dict):
    if d.get("format") != MODEL_FORMAT:
        raise ModelError("not a model file")
    if d.get("version") != MODEL_VERSION:
        raise ModelError(f"unsupported model version {d.get('version')}")
    config = TrainConfig.from_dict(d["config"])
    scaler = MinMaxScaler(np.array(d["scaler"]["minimum"]), np.array(d["scaler"]["range"]))
    if d["kind"] == "linear":
        return LinearModel(np.array(d["w_plus"]), np.array(d["w_minus"]),
                           d["b_plus"], d["b_minus"], scaler, config)
    X = np.array(d["support_matrix"]).reshape(d["support_shape"])
    return KernelModel(X, np.array(d["coeff_plus"]), np.array(d["coeff_minus"]),
                       d["b_plus"], d["b_minus"], KernelSpec(**d["kernel"]), scaler, config)


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
