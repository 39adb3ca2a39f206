"""Alternating optimizer for clustering-result re-guided incomplete multi-view
spectral clustering.

The model couples, per view ``v``,

* a self-representation residual ``||X - X ((M^T U^T U M) * A)||_F^2``,
* a spectral term ``alpha * tr(U_v L_v U_v^T)``,
* a consistency term ``beta * ||M^T U^T U M - U_v^T U_v||_F^2``,

with orthonormal view embeddings ``U_v`` (k x n_v) and a nonnegative common
representation ``U`` (k x n) whose column-wise argmax is the clustering.

``U_v`` is updated in closed form by a symmetric eigendecomposition; ``U`` by
a fourth-root multiplicative rule that never increases the reduced objective.

Throughout, ``U M`` is realised as ``U[:, idx]`` with ``idx`` the global
indices of the view's samples, and right-multiplication by ``M^T`` as a
column scatter back into a k x n array.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dataset import MultiViewDataset
from .graph import GraphSet


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Hyper-parameters and iteration policy.

    ``alpha`` weights the Laplacian term, ``beta`` the consistency term.
    Iteration stops when the relative change of the full objective drops
    below ``rel_tol`` or after ``max_iters`` sweeps.
    """

    k: int
    alpha: float = 10.0
    beta: float = 0.1
    max_iters: int = 300
    rel_tol: float = 1e-6
    eps_floor: float = 1e-10
    nmf_iters: int = 200
    seed: int = 0

    def validate(self, view_sizes=None):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if view_sizes is not None and self.k >= min(view_sizes):
            raise ValueError(f"k={self.k} must be smaller than every view size (smallest {min(view_sizes)})")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rel_tol <= 0 or self.eps_floor <= 0:
            raise ValueError("rel_tol and eps_floor must be positive")
        if self.nmf_iters < 0:
            raise ValueError("nmf_iters must be >= 0")


@dataclass
class SolverState:
    U: np.ndarray
    U_views: list
    iteration: int = 0
    objective_trace: list = field(default_factory=list)


@dataclass
class SolverWorkspace:
    """Per-view quantities reused across iterations.

    ``P[v] = X_v^T X_v``; ``A[v]`` is the all-ones matrix with a zero
    diagonal; ``Q[v] = U[:, idx]^T U[:, idx]`` for the current ``U``;
    ``pos[v]`` / ``neg[v]`` split ``U_v^T U_v`` into nonnegative parts.
    """

    X: list
    index: list
    P: list
    A: list
    Q: list
    pos: list
    neg: list

    @property
    def V(self):
        return len(self.X)


@dataclass
class ConvergenceTrace:
    objective: list
    nmi: list
    converged: bool
    iterations: int


# ------------------------------------------------------------------ helpers


def split_pos_neg(M: np.ndarray):
    """Elementwise split ``M = M_plus - M_minus`` into nonnegative parts."""
    M = np.asarray(M, dtype=np.float64)
    absM = np.abs(M)
    return (absM + M) / 2, (absM - M) / 2


def nmf(X: np.ndarray, k: int, n_iter: int, rng: np.random.Generator, eps: float = 1e-10):
    """Rank-``k`` Frobenius NMF ``X ~ W Z`` by Lee-Seung multiplicative updates.

    Factors start from uniform(0.1, 1.1) draws of ``rng``. Returns ``(W, Z)``
    with ``W`` of shape (d, k) and ``Z`` of shape (k, n).
    """
    d, n = X.shape
    W = rng.uniform(0.1, 1.1, size=(d, k))
    Z = rng.uniform(0.1, 1.1, size=(k, n))
    for _ in range(n_iter):
        Z *= (W.T @ X) / np.maximum(W.T @ W @ Z, eps)
        W *= (X @ Z.T) / np.maximum(W @ (Z @ Z.T), eps)
    if not (np.isfinite(W).all() and np.isfinite(Z).all()):
        raise SolverError("NMF produced non-finite factors; check input scaling")
    return W, Z


def make_workspace(dataset: MultiViewDataset, U: np.ndarray | None = None) -> SolverWorkspace:
    X = [np.asarray(x, dtype=np.float64) for x in dataset.views]
    index = [dataset.indices(v) for v in range(dataset.V)]
    P = []
    A = []
    for x in X:
        G = x.T @ x
        P.append((G + G.T) / 2)
        a = np.ones((x.shape[1], x.shape[1]))
        np.fill_diagonal(a, 0.0)
        A.append(a)
    ws = SolverWorkspace(X=X, index=index, P=P, A=A, Q=[None] * len(X), pos=[None] * len(X), neg=[None] * len(X))
    if U is not None:
        refresh_Q(ws, U)
    return ws


def refresh_Q(ws: SolverWorkspace, U: np.ndarray):
    for v, idx in enumerate(ws.index):
        Um = U[:, idx]
        ws.Q[v] = Um.T @ Um


def refresh_pos_neg(ws: SolverWorkspace, U_views):
    for v, Uv in enumerate(U_views):
        ws.pos[v], ws.neg[v] = split_pos_neg(Uv.T @ Uv)


# ------------------------------------------------------------------ steps


def init_U(dataset: MultiViewDataset, config: SolverConfig) -> np.ndarray:
    """NMF-based start: average of per-view coefficient matrices plus 0.1.

    Views are factorised in order from a single generator seeded with
    ``config.seed``; a sample missing from a view receives no contribution
    from it.
    """
    rng = np.random.default_rng(config.seed)
    U = np.zeros((config.k, dataset.n))
    for v, X in enumerate(dataset.views):
        _, Z = nmf(np.asarray(X, dtype=np.float64), config.k, config.nmf_iters, rng, config.eps_floor)
        U[:, dataset.indices(v)] += Z
    return U / dataset.V + 0.1


def update_view_embeddings(state: SolverState, ws: SolverWorkspace, graphs: GraphSet, config: SolverConfig):
    """Set each ``U_v`` to the ``k`` bottom eigenvectors of ``alpha L_v - 2 beta Q_v``."""
    U_views = []
    for v in range(ws.V):
        C = config.alpha * graphs.laplacian[v] - 2 * config.beta * ws.Q[v]
        C = (C + C.T) / 2
        try:
            _, vecs = scipy.linalg.eigh(C, subset_by_index=[0, config.k - 1])
        except (np.linalg.LinAlgError, ValueError) as e:
            raise SolverError(f"eigendecomposition failed for view {v}: {e}") from e
        U_views.append(np.ascontiguousarray(vecs.T))
    state.U_views = U_views
    refresh_pos_neg(ws, U_views)
    return U_views


def multiplicative_terms(U: np.ndarray, ws: SolverWorkspace, beta: float):
    """Numerator and denominator (both k x n) of the fourth-root update for ``U``.

    Uses the workspace ``Q``/``pos``/``neg``, which must match ``U`` and the
    current view embeddings.
    """
    num = np.zeros_like(U)
    den = np.zeros_like(U)
    for v, idx in enumerate(ws.index):
        Um = U[:, idx]
        P, A, Q = ws.P[v], ws.A[v], ws.Q[v]
        R = P @ (Q * A)
        num[:, idx] += 2 * Um @ (P * A) + 2 * beta * (Um @ ws.pos[v])
        den[:, idx] += (
            Um @ (R * A)
            + Um @ (R.T * A)
            + 2 * beta * (Um @ Q)
            + 2 * beta * (Um @ ws.neg[v])
        )
    return num, den


def update_common_representation(state: SolverState, ws: SolverWorkspace, config: SolverConfig) -> np.ndarray:
    """One multiplicative step ``U <- U * (num / den) ** (1/4)``.

    The denominator and the result are floored at ``config.eps_floor`` so
    entries never reach the absorbing value 0. ``Q`` is recomputed afterwards.
    """
    num, den = multiplicative_terms(state.U, ws, config.beta)
    U = state.U * np.sqrt(np.sqrt(num / np.maximum(den, config.eps_floor)))
    U = np.maximum(U, config.eps_floor)
    if not np.isfinite(U).all():
        raise SolverError("common representation became non-finite")
    state.U = U
    refresh_Q(ws, U)
    return U


def objective_terms(state: SolverState, ws: SolverWorkspace, graphs: GraphSet, config: SolverConfig) -> np.ndarray:
    """Per-view ``[residual, alpha*spectral, beta*consistency]``, shape (V, 3)."""
    out = np.zeros((ws.V, 3))
    for v in range(ws.V):
        X, Q, A = ws.X[v], ws.Q[v], ws.A[v]
        Uv = state.U_views[v]
        out[v, 0] = np.sum((X - X @ (Q * A)) ** 2)
        out[v, 1] = config.alpha * np.trace(Uv @ graphs.laplacian[v] @ Uv.T)
        out[v, 2] = config.beta * np.sum((Q - Uv.T @ Uv) ** 2)
    return out


def objective(state: SolverState, ws: SolverWorkspace, graphs: GraphSet, config: SolverConfig) -> float:
    return float(objective_terms(state, ws, graphs, config).sum())


def reduced_objective(state: SolverState, ws: SolverWorkspace, config: SolverConfig) -> float:
    """The part of the objective that depends on ``U`` for fixed ``U_v``."""
    total = 0.0
    for v in range(ws.V):
        P, Q, A = ws.P[v], ws.Q[v], ws.A[v]
        QA = Q * A
        UvtUv = state.U_views[v].T @ state.U_views[v]
        total += (
            np.sum(QA * (P @ QA))
            - 2 * np.sum(P * QA)
            + config.beta * np.sum(Q * Q)
            - 2 * config.beta * np.sum(Q * UvtUv)
        )
    return float(total)


def assign_clusters(U: np.ndarray) -> np.ndarray:
    """Cluster of each sample = row index of its column maximum (lowest on ties)."""
    return np.argmax(np.asarray(U), axis=0)


def fit(dataset: MultiViewDataset, graphs: GraphSet, config: SolverConfig, labels=None):
    """Run the alternating optimisation from the NMF start.

    Each iteration updates every ``U_v`` and then ``U`` once, and records the
    full objective. When ``labels`` are given the NMI of the current
    assignment is recorded as well.

    Returns
    -------
    state : SolverState
    trace : ConvergenceTrace
        ``converged`` is False when ``max_iters`` was exhausted first.
    """
    config.validate(dataset.view_sizes)
    if labels is not None:
        from .evaluation import nmi as _nmi

    U = init_U(dataset, config)
    ws = make_workspace(dataset, U)
    state = SolverState(U=U, U_views=[])
    nmi_trace = []
    converged = False
    prev = None
    for it in range(1, config.max_iters + 1):
        update_view_embeddings(state, ws, graphs, config)
        update_common_representation(state, ws, config)
        value = objective(state, ws, graphs, config)
        state.objective_trace.append(value)
        state.iteration = it
        if labels is not None:
            nmi_trace.append(_nmi(labels, assign_clusters(state.U)))
        if prev is not None and abs(value - prev) / max(abs(prev), config.eps_floor) < config.rel_tol:
            converged = True
            break
        prev = value
    trace = ConvergenceTrace(
        objective=list(state.objective_trace),
        nmi=nmi_trace,
        converged=converged,
        iterations=state.iteration,
    )
    return state, trace
