"""Kernel evaluation, Gram blocks and the factored solves behind the duals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

JITTER_SCHEDULE = (0.0, 1e-8, 1e-6, 1e-4, 1e-2)


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "gaussian"
    g: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "gaussian"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian" and not self.g > 0:
            raise ValueError("gaussian kernel width g must be > 0")


LINEAR = KernelSpec("linear")


def gaussian_kernel(x1, x2, g: float) -> float:
    """exp(-||x1 - x2||^2 / g^2)"""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x1.shape} vs {x2.shape}")
    d = x1 - x2
    return float(np.exp(-np.dot(d, d) / g**2))


def sq_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, clamped at 0."""
    aa = np.einsum("ij,ij->i", A, A)
    bb = np.einsum("ij,ij->i", B, B)
    d2 = aa[:, None] + bb[None, :] - 2.0 * (A @ B.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def gram(A, B, kernel: KernelSpec) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]} features")
    if kernel.kind == "linear":
        return A @ B.T
    K = np.exp(-sq_distances(A, B) / kernel.g**2)
    if A is B or (A.shape == B.shape and np.array_equal(A, B)):
        K = 0.5 * (K + K.T)
        np.fill_diagonal(K, 1.0)
    return K


def build_augmented(M: np.ndarray) -> np.ndarray:
    """Append a column of ones (the bias coordinate)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return np.hstack([M, np.ones((M.shape[0], 1))])


class FactorizationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SPDFactor:
    """Cholesky factor of ``MtM + c_reg * E + jitter * I``."""

    cho: tuple
    jitter: float
    matrix: np.ndarray

    def solve(self, rhs) -> np.ndarray:
        return linalg.cho_solve(self.cho, rhs, check_finite=False)


def regularizer_diag(dim: int, reg_bias: bool = False) -> np.ndarray:
    """Diagonal of E: ones on the weight block, 0 on the trailing bias slot."""
    e = np.ones(dim)
    if not reg_bias:
        e[-1] = 0.0
    return e


def spd_solve_factor(MtM, c_reg: float, jitter_schedule=JITTER_SCHEDULE,
                     reg_bias: bool = False) -> SPDFactor:
    """Factor ``MtM + c_reg*E`` escalating diagonal jitter on failure.

    A factorization counts as failed when LAPACK rejects it or when a pivot
    is negligible relative to the largest diagonal entry.
    """
    MtM = np.asarray(MtM, dtype=float)
    dim = MtM.shape[0]
    base = MtM + np.diag(c_reg * regularizer_diag(dim, reg_bias))
    scale = max(float(np.max(np.abs(np.diag(base)))), 1.0)
    tiny = dim * np.finfo(float).eps * scale
    for jitter in jitter_schedule:
        A = base + jitter * np.eye(dim) if jitter else base
        try:
            c, low = linalg.cho_factor(A, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        if np.min(np.diag(c)) ** 2 <= tiny:
            continue
        return SPDFactor((c, low), float(jitter), A)
    raise FactorizationError(
        f"matrix not factorizable at any jitter level in {tuple(jitter_schedule)}"
    )


@dataclass(frozen=True)
class QFactor:
    """Solver-facing pieces of one dual.

    ``Q`` is ``inner^{-1} G_other^T`` with one column per dual variable,
    ``g_other`` holds the rows used for gradients, and ``qbar_diag`` the
    diagonal of ``G_other Q``.
    """

    Q: np.ndarray
    g_other: np.ndarray
    qbar_diag: np.ndarray
    factor: SPDFactor

    @property
    def jitter(self) -> float:
        return self.factor.jitter

    def dense_qbar(self) -> np.ndarray:
        Qb = self.g_other @ self.Q
        return 0.5 * (Qb + Qb.T)


def q_factor_from(factor: SPDFactor, G_other) -> QFactor:
    G_other = np.ascontiguousarray(G_other, dtype=float)
    Q = np.ascontiguousarray(factor.solve(G_other.T))
    qbar = np.einsum("ij,ji->i", G_other, Q)
    return QFactor(Q, G_other, qbar, factor)


def build_q_factor(G_own, G_other, c_reg: float, jitter_schedule=JITTER_SCHEDULE,
                   reg_bias: bool = False) -> QFactor:
    G_own = np.asarray(G_own, dtype=float)
    G_other = np.asarray(G_other, dtype=float)
    if G_own.shape[1] != G_other.shape[1]:
        raise ValueError("own and other blocks must have the same column count")
    factor = spd_solve_factor(G_own.T @ G_own, c_reg, jitter_schedule, reg_bias)
    return q_factor_from(factor, G_other)
