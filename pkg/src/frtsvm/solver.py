"""Dual coordinate descent for box-constrained QPs of the form

    min_a  0.5 * a' Qbar a - sum(a)   s.t.  0 <= a <= upper

where ``Qbar = G Q`` is never formed.  The solver keeps ``u = -Q a`` up to
date so each coordinate gradient costs one row product, ``-G[i] . u - 1``.

``solve_plain`` sweeps coordinates in order; ``solve_shrinking`` visits the
active set in random order and drops bound-pinned coordinates, then
re-checks the full set before stopping.  ``brute_force_oracle`` is an
unrelated projected-gradient solver used to cross-check both.

Sweep order randomness uses xorshift64* seeded through splitmix64, so runs
are reproducible from the integer seed alone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numba
import numpy as np

from .kernels import QFactor

_PG_ZERO = 1e-12


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class DualProblem:
    qfactor: QFactor
    upper: np.ndarray

    def __post_init__(self):
        upper = np.ascontiguousarray(self.upper, dtype=float)
        if upper.ndim != 1 or upper.shape[0] != self.qfactor.g_other.shape[0]:
            raise ValueError("upper must have one entry per dual variable")
        if self.qfactor.Q.shape != self.qfactor.g_other.shape[::-1]:
            raise ValueError("Q and g_other shapes disagree")
        if np.any(upper < 0):
            raise ValueError("upper bounds must be >= 0")
        object.__setattr__(self, "upper", upper)

    @property
    def size(self) -> int:
        return self.upper.shape[0]

    @classmethod
    def from_dense(cls, qbar, upper) -> "DualProblem":
        """Wrap an explicit PSD matrix as ``Qbar = R R'``."""
        qbar = np.asarray(qbar, dtype=float)
        w, V = np.linalg.eigh(0.5 * (qbar + qbar.T))
        R = V * np.sqrt(np.clip(w, 0.0, None))
        G = np.ascontiguousarray(R)
        Q = np.ascontiguousarray(R.T)
        qf = QFactor(Q=Q, g_other=G, qbar_diag=np.einsum("ij,ji->i", G, Q), factor=None)
        return cls(qf, upper)

    def dense_qbar(self) -> np.ndarray:
        return self.qfactor.dense_qbar()

    def objective(self, alpha) -> float:
        alpha = np.asarray(alpha, dtype=float)
        qa = self.qfactor.g_other @ (self.qfactor.Q @ alpha)
        return float(0.5 * alpha @ qa - alpha.sum())

    def gradient(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        return self.qfactor.g_other @ (self.qfactor.Q @ alpha) - 1.0


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 1e-4
    max_epochs: int = 1000
    seed: int = 0
    shrinking: bool = True
    trace: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass(frozen=True)
class SolverState:
    alpha: np.ndarray
    u_aux: np.ndarray
    active: np.ndarray
    mbar: float = np.inf
    mbar_low: float = -np.inf

    @classmethod
    def initial(cls, problem: DualProblem) -> "SolverState":
        return cls(np.zeros(problem.size), np.zeros(problem.qfactor.Q.shape[0]),
                   np.arange(problem.size))


@dataclass(frozen=True)
class SolverReport:
    alpha_final: np.ndarray
    objective: float
    kkt_gap: float
    epochs: int
    updates: int
    shrink_events: int
    wall_time: float
    converged: bool
    u_aux: np.ndarray
    skipped: int = 0
    trace: list = field(default_factory=list)


def projected_gradient(alpha_i: float, grad_i: float, upper_i: float) -> float:
    if alpha_i < 0 or alpha_i > upper_i:
        raise ValueError(f"alpha {alpha_i} outside [0, {upper_i}]")
    if upper_i == 0:
        return 0.0
    if alpha_i == 0:
        return min(0.0, grad_i)
    if alpha_i == upper_i:
        return max(0.0, grad_i)
    return grad_i


def projected_gradients(alpha, grad, upper) -> np.ndarray:
    pg = np.where(alpha <= 0, np.minimum(grad, 0.0), grad)
    pg = np.where(alpha >= upper, np.maximum(grad, 0.0), pg)
    return np.where(upper <= 0, 0.0, pg)


def kkt_gap(problem: DualProblem, alpha) -> float:
    """max - min of the projected gradient over all coordinates (0 when all vanish)."""
    pg = projected_gradients(alpha, problem.gradient(alpha), problem.upper)
    return float(max(pg.max(), 0.0) - min(pg.min(), 0.0))


def cd_update(state: SolverState, i: int, problem: DualProblem) -> SolverState:
    """Exact minimization over coordinate ``i``; returns a new state."""
    qf = problem.qfactor
    grad = -qf.g_other[i] @ state.u_aux - 1.0
    pg = projected_gradient(state.alpha[i], grad, problem.upper[i])
    if pg == 0.0 or qf.qbar_diag[i] <= 0:
        return state
    old = state.alpha[i]
    new = min(max(old - grad / qf.qbar_diag[i], 0.0), problem.upper[i])
    alpha = state.alpha.copy()
    alpha[i] = new
    u = state.u_aux - qf.Q[:, i] * (new - old)
    return SolverState(alpha, u, state.active, state.mbar, state.mbar_low)


# ---------------------------------------------------------------- numba core

@numba.njit(cache=True)
def _splitmix64(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15))
    z = x
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _xorshift(state):
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return x * np.uint64(0x2545F4914F6CDD1D)


@numba.njit(cache=True)
def _shuffle(idx, n, rng):
    for j in range(n - 1, 0, -1):
        k = np.int64(_xorshift(rng) % np.uint64(j + 1))
        t = idx[j]
        idx[j] = idx[k]
        idx[k] = t


@numba.njit(cache=True)
def _coord_grad(G, u, i):
    s = 0.0
    for k in range(u.shape[0]):
        s += G[i, k] * u[k]
    return -s - 1.0


@numba.njit(cache=True)
def _apply_step(Qt, u, alpha, upper, qbar, i, grad):
    old = alpha[i]
    new = old - grad / qbar[i]
    if new < 0.0:
        new = 0.0
    elif new > upper[i]:
        new = upper[i]
    d = new - old
    if d != 0.0:
        alpha[i] = new
        for k in range(u.shape[0]):
            u[k] -= Qt[i, k] * d
        return True
    return False


@numba.njit(cache=True)
def _objective(G, u, alpha):
    # f = 0.5 a'Qbar a - sum(a) with Qbar a = -G u
    f = 0.0
    for i in range(alpha.shape[0]):
        if alpha[i] != 0.0:
            f += alpha[i] * (0.5 * (_coord_grad(G, u, i) + 1.0) - 1.0)
    return f


@numba.njit(cache=True)
def _exact_gap(G, Qt, alpha, upper):
    d = Qt.shape[1]
    u = np.zeros(d)
    for i in range(alpha.shape[0]):
        if alpha[i] != 0.0:
            for k in range(d):
                u[k] -= Qt[i, k] * alpha[i]
    M = 0.0
    m = 0.0
    for i in range(alpha.shape[0]):
        if upper[i] <= 0.0:
            continue
        g = _coord_grad(G, u, i)
        if alpha[i] <= 0.0:
            pg = min(g, 0.0)
        elif alpha[i] >= upper[i]:
            pg = max(g, 0.0)
        else:
            pg = g
        M = max(M, pg)
        m = min(m, pg)
    return M - m, u


@numba.njit(cache=True)
def _cd_plain(G, Qt, qbar, upper, alpha, u, eps, max_epochs, record, trace):
    l = alpha.shape[0]
    updates = 0
    skipped = 0
    epochs = 0
    converged = False
    while epochs < max_epochs:
        worst = 0.0
        for i in range(l):
            if upper[i] <= 0.0:
                continue
            g = _coord_grad(G, u, i)
            if alpha[i] <= 0.0:
                pg = min(g, 0.0)
            elif alpha[i] >= upper[i]:
                pg = max(g, 0.0)
            else:
                pg = g
            if abs(pg) > worst:
                worst = abs(pg)
            if abs(pg) > _PG_ZERO:
                if qbar[i] <= 0.0:
                    skipped += 1
                    continue
                if _apply_step(Qt, u, alpha, upper, qbar, i, g):
                    updates += 1
        epochs += 1
        if record:
            trace[epochs - 1, 0] = _objective(G, u, alpha)
            trace[epochs - 1, 1] = _exact_gap(G, Qt, alpha, upper)[0]
            trace[epochs - 1, 2] = l
        if worst < eps:
            gap, _ = _exact_gap(G, Qt, alpha, upper)
            if gap < eps:
                converged = True
                break
    return epochs, updates, skipped, converged


@numba.njit(cache=True)
def _cd_shrinking(G, Qt, qbar, upper, alpha, u, eps, max_epochs, seed, record, trace):
    l = alpha.shape[0]
    active = np.arange(l)
    active_size = l
    Mbar = np.inf
    mbar = -np.inf
    rng = np.empty(1, dtype=np.uint64)
    rng[0] = _splitmix64(np.uint64(seed))
    if rng[0] == 0:
        rng[0] = np.uint64(1)
    updates = 0
    shrinks = 0
    skipped = 0
    epochs = 0
    converged = False
    while epochs < max_epochs:
        M = -np.inf
        m = np.inf
        full = active_size == l
        _shuffle(active, active_size, rng)
        s = 0
        while s < active_size:
            i = active[s]
            if upper[i] <= 0.0:
                # collapsed box: fixed at 0 for good
                active_size -= 1
                active[s] = active[active_size]
                active[active_size] = i
                continue
            g = _coord_grad(G, u, i)
            pg = 0.0
            if alpha[i] <= 0.0:
                if g > Mbar:
                    active_size -= 1
                    active[s] = active[active_size]
                    active[active_size] = i
                    shrinks += 1
                    continue
                elif g < 0.0:
                    pg = g
            elif alpha[i] >= upper[i]:
                if g < mbar:
                    active_size -= 1
                    active[s] = active[active_size]
                    active[active_size] = i
                    shrinks += 1
                    continue
                elif g > 0.0:
                    pg = g
            else:
                pg = g
            if pg > M:
                M = pg
            if pg < m:
                m = pg
            if abs(pg) > _PG_ZERO:
                if qbar[i] <= 0.0:
                    skipped += 1
                else:
                    if _apply_step(Qt, u, alpha, upper, qbar, i, g):
                        updates += 1
            s += 1
        epochs += 1
        if active_size == 0:
            M = 0.0
            m = 0.0
        if record:
            trace[epochs - 1, 0] = _objective(G, u, alpha)
            trace[epochs - 1, 1] = _exact_gap(G, Qt, alpha, upper)[0]
            trace[epochs - 1, 2] = active_size
        if M - m < eps:
            if full:
                gap, _ = _exact_gap(G, Qt, alpha, upper)
                if gap < eps:
                    converged = True
                    break
            # final pass over the full set before stopping
            active_size = l
            Mbar = np.inf
            mbar = -np.inf
            continue
        Mbar = M if M > 0.0 else np.inf
        mbar = m if m < 0.0 else -np.inf
    return epochs, updates, shrinks, skipped, converged


def _run(problem: DualProblem, config: SolverConfig, shrinking: bool) -> SolverReport:
    qf = problem.qfactor
    G = np.ascontiguousarray(qf.g_other, dtype=float)
    Qt = np.ascontiguousarray(qf.Q.T, dtype=float)
    qbar = np.ascontiguousarray(qf.qbar_diag, dtype=float)
    upper = problem.upper
    alpha = np.zeros(problem.size)
    u = np.zeros(Qt.shape[1])
    trace = np.zeros((config.max_epochs if config.trace else 1, 3))
    start = time.perf_counter()
    if shrinking:
        epochs, updates, shrinks, skipped, converged = _cd_shrinking(
            G, Qt, qbar, upper, alpha, u, config.epsilon, config.max_epochs,
            np.uint64(config.seed & 0xFFFFFFFFFFFFFFFF), config.trace, trace)
    else:
        epochs, updates, skipped, converged = _cd_plain(
            G, Qt, qbar, upper, alpha, u, config.epsilon, config.max_epochs,
            config.trace, trace)
        shrinks = 0
    wall = time.perf_counter() - start
    gap, _ = _exact_gap(G, Qt, alpha, upper)
    rows = []
    if config.trace:
        rows = [(k + 1, float(t[0]), float(t[1]), int(t[2])) for k, t in enumerate(trace[:epochs])]
    return SolverReport(
        alpha_final=alpha,
        objective=float(_objective(G, u, alpha)),
        kkt_gap=float(gap),
        epochs=int(epochs),
        updates=int(updates),
        shrink_events=int(shrinks),
        wall_time=wall,
        converged=bool(converged),
        u_aux=u,
        skipped=int(skipped),
        trace=rows,
    )


def solve_plain(problem: DualProblem, config: SolverConfig = SolverConfig()) -> SolverReport:
    return _run(problem, config, shrinking=False)


def solve_shrinking(problem: DualProblem, config: SolverConfig = SolverConfig()) -> SolverReport:
    return _run(problem, config, shrinking=True)


def solve(problem: DualProblem, config: SolverConfig = SolverConfig()) -> SolverReport:
    return _run(problem, config, shrinking=config.shrinking)


# ---------------------------------------------------------------- oracle

class OracleError(SolverError):
    pass


def _dense_gap(qbar, alpha, upper):
    pg = projected_gradients(alpha, qbar @ alpha - 1.0, upper)
    return float(max(pg.max(), 0.0) - min(pg.min(), 0.0))


def brute_force_oracle(qbar, e=None, upper=None, tol: float = 1e-8,
                       max_iter: int = 200_000, polish_every: int = 50,
                       raise_on_failure: bool = True):
    """Box QP by projected gradient with periodic active-set polishing.

    Each step is ``a <- clip(a - grad / L, 0, upper)`` with ``L`` the largest
    eigenvalue.  Every ``polish_every`` steps the coordinates strictly inside
    the box are re-solved exactly with the others held fixed; the polished
    point is kept only if it is feasible and improves the KKT gap.
    """
    qbar = np.asarray(qbar, dtype=float)
    qbar = 0.5 * (qbar + qbar.T)
    l = qbar.shape[0]
    e = np.ones(l) if e is None else np.asarray(e, dtype=float)
    upper = np.asarray(upper, dtype=float)
    L = float(np.linalg.eigvalsh(qbar)[-1])
    if L <= 0:
        alpha = np.where(e > 0, upper, 0.0)
        return alpha, float(0.5 * alpha @ qbar @ alpha - e @ alpha)

    def grad(a):
        return qbar @ a - e

    def gap(a):
        pg = projected_gradients(a, grad(a), upper)
        return float(max(pg.max(), 0.0) - min(pg.min(), 0.0))

    alpha = np.zeros(l)
    best_gap = gap(alpha)
    for it in range(1, max_iter + 1):
        alpha = np.clip(alpha - grad(alpha) / L, 0.0, upper)
        if it % polish_every:
            continue
        free = (alpha > 0) & (alpha < upper)
        cand = alpha.copy()
        if free.any():
            fixed = ~free
            rhs = e[free] - qbar[np.ix_(free, fixed)] @ alpha[fixed]
            try:
                cand[free] = np.linalg.solve(qbar[np.ix_(free, free)], rhs)
            except np.linalg.LinAlgError:
                cand = alpha
        if np.all(cand >= 0) and np.all(cand <= upper):
            g_c = gap(cand)
            if g_c < gap(alpha):
                alpha = cand
        best_gap = gap(alpha)
        if best_gap < tol:
            break
    if best_gap >= tol and raise_on_failure:
        raise OracleError(f"oracle KKT gap {best_gap:.3e} after {max_iter} iterations")
    return alpha, float(0.5 * alpha @ qbar @ alpha - e @ alpha)
