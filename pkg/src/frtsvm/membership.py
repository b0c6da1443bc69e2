"""Fuzzy membership weights from class centers and hypersphere radii.

An instance close to its own class center gets a weight near ``1 - mu``;
one that sits closer to the opposite center is treated as a suspected
outlier and scaled by ``mu`` instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, split_by_class
from .kernels import KernelSpec, gram


@dataclass(frozen=True)
class MembershipParams:
    mu: float = 0.1
    delta: float = 1e-3

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")
        if not self.delta > 0:
            raise ValueError("delta must be > 0")


@dataclass(frozen=True)
class MembershipVector:
    s_plus: np.ndarray
    s_minus: np.ndarray

    def for_labels(self, labels) -> np.ndarray:
        """Scatter back into dataset row order."""
        labels = np.asarray(labels)
        out = np.empty(labels.shape[0])
        out[labels == 1] = self.s_plus
        out[labels != 1] = self.s_minus
        return out


def class_centers_input(X_plus, X_minus):
    X_plus = np.atleast_2d(np.asarray(X_plus, dtype=float))
    X_minus = np.atleast_2d(np.asarray(X_minus, dtype=float))
    if X_plus.shape[0] == 0 or X_minus.shape[0] == 0:
        raise ValueError("empty class")
    return X_plus.mean(axis=0), X_minus.mean(axis=0)


def class_radii_input(X, center) -> float:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return float(np.max(np.linalg.norm(X - center, axis=1)))


def _weights(d_own, d_other, ratio, mu):
    # ">=" puts equidistant instances in the outlier branch
    branch = np.where(d_own >= d_other, mu, 1.0 - mu)
    return branch * (1.0 - ratio)


def membership_linear(data: Dataset, params: MembershipParams = MembershipParams()) -> MembershipVector:
    Xp, Xm = split_by_class(data)
    cp, cm = class_centers_input(Xp, Xm)
    out = []
    for X, own, other in ((Xp, cp, cm), (Xm, cm, cp)):
        d_own = np.linalg.norm(X - own, axis=1)
        d_other = np.linalg.norm(X - other, axis=1)
        r = float(d_own.max())
        out.append(_weights(d_own, d_other, d_own / (r + params.delta), params.mu))
    return MembershipVector(*out)


def kernel_sq_dist_to_center(x_index: int, class_rows, K: np.ndarray) -> float:
    """||phi(x_i) - mean_{j in class} phi(x_j)||^2 expanded through the Gram matrix."""
    rows = np.asarray(class_rows, dtype=int)
    if rows.size == 0:
        raise ValueError("empty class")
    lc = rows.size
    val = (K[x_index, x_index]
           - 2.0 / lc * K[x_index, rows].sum()
           + K[np.ix_(rows, rows)].sum() / lc**2)
    return max(float(val), 0.0)


def kernel_sq_dists(K: np.ndarray, class_rows) -> np.ndarray:
    """Vectorized kernel_sq_dist_to_center for every row of ``K``."""
    rows = np.asarray(class_rows, dtype=int)
    if rows.size == 0:
        raise ValueError("empty class")
    lc = rows.size
    center_norm = K[np.ix_(rows, rows)].sum() / lc**2
    d2 = np.diag(K) - 2.0 / lc * K[:, rows].sum(axis=1) + center_norm
    return np.maximum(d2, 0.0)


def membership_kernel(data: Dataset, kernel: KernelSpec,
                      params: MembershipParams = MembershipParams(),
                      K: np.ndarray | None = None) -> MembershipVector:
    """Feature-space memberships; ``K`` may pass a precomputed training Gram."""
    split_by_class(data)
    if K is None:
        K = gram(data.features, data.features, kernel)
    pos = np.flatnonzero(data.labels == 1)
    neg = np.flatnonzero(data.labels != 1)
    d2_to_pos = kernel_sq_dists(K, pos)
    d2_to_neg = kernel_sq_dists(K, neg)
    out = []
    for rows, d2_own, d2_other in ((pos, d2_to_pos, d2_to_neg), (neg, d2_to_neg, d2_to_pos)):
        own = d2_own[rows]
        r2 = float(own.max())
        ratio = np.sqrt(own / (r2 + params.delta))
        out.append(_weights(own, d2_other[rows], ratio, params.mu))
    return MembershipVector(*out)
