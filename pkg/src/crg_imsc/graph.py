"""Per-view kNN similarity graphs and normalized Laplacians."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

KERNELS = ("heat_selftuning", "cosine")


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class GraphSet:
    similarity: list
    degree: list
    laplacian: list


def _knn_union(dist, neighbors):
    """Boolean matrix marking pairs where either point is among the other's neighbours."""
    n = dist.shape[0]
    d = dist.copy()
    np.fill_diagonal(d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")[:, :neighbors]
    keep = np.zeros((n, n), dtype=bool)
    keep[np.repeat(np.arange(n), neighbors), order.ravel()] = True
    return keep | keep.T, order


def build_similarity(view: np.ndarray, neighbors: int = 5, kernel: str = "heat_selftuning") -> np.ndarray:
    """Symmetric kNN similarity over the columns of a ``d x n_v`` view.

    ``heat_selftuning`` weights a pair by ``exp(-||xi - xj||^2 / (s_i s_j))``
    where ``s_i`` is the distance from ``x_i`` to its ``ceil(neighbors/2)``-th
    nearest neighbour. ``cosine`` uses ``max(0, cos(xi, xj))``. A pair is
    kept when either endpoint lists the other among its ``neighbors`` nearest
    points (Euclidean for the heat kernel, angular for cosine).
    """
    X = np.asarray(view, dtype=np.float64).T
    n = X.shape[0]
    if not 1 <= neighbors < n:
        raise GraphError(f"neighbors must lie in [1, {n - 1}], got {neighbors}")
    if kernel not in KERNELS:
        raise GraphError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")

    if kernel == "heat_selftuning":
        sq = cdist(X, X, "sqeuclidean")
        keep, order = _knn_union(sq, neighbors)
        ref = math.ceil(neighbors / 2) - 1
        sigma = np.sqrt(sq[np.arange(n), order[:, ref]])
        sigma = np.maximum(sigma, np.finfo(np.float64).tiny)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            W = np.exp(-sq / np.outer(sigma, sigma))
        W[sq == 0] = 1.0
    else:
        norms = np.linalg.norm(X, axis=1)
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise GraphError(f"sample {zero[0]} has zero norm; cosine similarity is undefined")
        Xn = X / norms[:, None]
        W = np.clip(Xn @ Xn.T, -1.0, 1.0)
        keep, _ = _knn_union(1.0 - W, neighbors)
        W = np.maximum(W, 0.0)

    S = np.where(keep, W, 0.0)
    S = (S + S.T) / 2
    np.fill_diagonal(S, 0.0)
    return S


def build_laplacian(S: np.ndarray):
    """Degree matrix and normalized Laplacian ``D^-1/2 (D - S) D^-1/2``.

    Degrees use the symmetrised row sums ``sum_j (S_ij + S_ji) / 2``.
    Returns ``(D, L)`` with ``D`` as a dense diagonal matrix.
    """
    S = np.asarray(S, dtype=np.float64)
    deg = (S.sum(axis=1) + S.sum(axis=0)) / 2
    isolated = np.flatnonzero(deg <= 0)
    if isolated.size:
        raise GraphError(f"isolated vertex {isolated[0]}: similarity row sums to zero")
    d_is = 1.0 / np.sqrt(deg)
    L = d_is[:, None] * (np.diag(deg) - S) * d_is[None, :]
    L = (L + L.T) / 2
    return np.diag(deg), L


def build_graphs(views, neighbors: int = 5, kernel: str = "heat_selftuning") -> GraphSet:
    sims, degs, laps = [], [], []
    for v, X in enumerate(views):
        try:
            S = build_similarity(X, neighbors, kernel)
            D, L = build_laplacian(S)
        except GraphError as e:
            raise GraphError(f"view {v}: {e}") from e
        sims.append(S)
        degs.append(D)
        laps.append(L)
    return GraphSet(similarity=sims, degree=degs, laplacian=laps)


def dump_graphs(graphs: GraphSet, directory) -> list[Path]:
    """Write ``S_<v>.csv`` and ``L_<v>.csv`` for inspection."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for v, (S, L) in enumerate(zip(graphs.similarity, graphs.laplacian)):
        for name, M in ((f"S_{v}.csv", S), (f"L_{v}.csv", L)):
            np.savetxt(directory / name, M, delimiter=",", fmt="%.17g")
            written.append(directory / name)
    return written
