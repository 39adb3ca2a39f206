"""Multi-view data with missing views: loading, validation, masking and synthesis.

Samples are indexed globally ``0..n-1``. Each view stores only the columns of
the samples it contains, in ascending global order, as a ``d_v x n_v`` array.
Presence is an ``n x V`` 0/1 matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """Raised when multi-view data violates a structural invariant."""


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MultiViewDataset:
    """Incomplete multi-view data.

    Parameters
    ----------
    views : list of ndarray
        ``views[v]`` has shape ``(d_v, n_v)``; column ``j`` is the ``j``-th
        present sample of view ``v`` in ascending global order.
    presence : ndarray of shape (n, V)
        ``presence[i, v] == 1`` iff sample ``i`` exists in view ``v``.
    labels : ndarray of shape (n,), optional
        Ground-truth class ids.
    """

    views: tuple
    presence: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        views = tuple(_frozen(x, np.float64) for x in self.views)
        presence = _frozen(self.presence, np.int8)
        labels = None if self.labels is None else _frozen(self.labels, np.int64)
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "presence", presence)
        object.__setattr__(self, "labels", labels)
        self._validate()

    def _validate(self):
        if self.presence.ndim != 2:
            raise DatasetError("presence mask must be a 2-D n x V matrix")
        n, V = self.presence.shape
        if len(self.views) != V:
            raise DatasetError(f"presence mask has {V} columns but {len(self.views)} views were given")
        if not np.isin(self.presence, (0, 1)).all():
            raise DatasetError("presence mask must be 0/1")
        empty = np.flatnonzero(self.presence.sum(axis=1) == 0)
        if empty.size:
            raise DatasetError(f"sample present in no view (first offending sample: {empty[0]})")
        for v, X in enumerate(self.views):
            if X.ndim != 2:
                raise DatasetError(f"view {v} must be a 2-D matrix")
            n_v = int(self.presence[:, v].sum())
            if X.shape[1] != n_v:
                raise DatasetError(
                    f"view {v} has {X.shape[1]} samples but the mask marks {n_v} as present"
                )
            if not np.isfinite(X).all():
                raise DatasetError(f"view {v} contains non-finite values")
        if self.labels is not None and self.labels.shape != (n,):
            raise DatasetError(f"expected {n} labels, got {self.labels.shape[0]}")

    @property
    def n(self) -> int:
        return self.presence.shape[0]

    @property
    def V(self) -> int:
        return self.presence.shape[1]

    @property
    def view_sizes(self) -> list[int]:
        return [int(c) for c in self.presence.sum(axis=0)]

    @property
    def is_complete(self) -> bool:
        return bool(self.presence.all())

    def indices(self, v: int) -> np.ndarray:
        """Global indices of the samples present in view ``v``."""
        _check_view_index(v, self.V)
        return np.flatnonzero(self.presence[:, v])

    def __eq__(self, other):
        if not isinstance(other, MultiViewDataset):
            return NotImplemented
        if (self.labels is None) != (other.labels is None):
            return False
        return (
            np.array_equal(self.presence, other.presence)
            and len(self.views) == len(other.views)
            and all(np.array_equal(a, b) for a, b in zip(self.views, other.views))
            and (self.labels is None or np.array_equal(self.labels, other.labels))
        )


def _check_view_index(v, V):
    if not 0 <= v < V:
        raise IndexError(f"view index {v} out of range for {V} views")


def mark_matrix(presence: np.ndarray, view_index: int) -> np.ndarray:
    """Column-selection matrix ``M`` (n x n_v) of the samples present in a view.

    Column ``j`` is the standard basis vector of the ``j``-th present sample, so
    ``U @ M`` picks the columns of ``U`` belonging to the view and
    ``M.T @ M`` is the identity.
    """
    presence = np.asarray(presence)
    _check_view_index(view_index, presence.shape[1])
    idx = np.flatnonzero(presence[:, view_index])
    M = np.zeros((presence.shape[0], idx.size), dtype=np.int64)
    M[idx, np.arange(idx.size)] = 1
    return M


def normalize_nonnegative(view: np.ndarray) -> np.ndarray:
    """Min-max scale every feature (row) into [0, 1]; constant rows map to 0."""
    X = np.asarray(view, dtype=np.float64)
    lo = X.min(axis=1, keepdims=True)
    span = X.max(axis=1, keepdims=True) - lo
    out = np.zeros_like(X)
    nz = span[:, 0] > 0
    out[nz] = (X[nz] - lo[nz]) / span[nz]
    return np.clip(out, 0.0, 1.0)


def normalize_dataset(dataset: MultiViewDataset) -> MultiViewDataset:
    return MultiViewDataset(
        views=[normalize_nonnegative(X) for X in dataset.views],
        presence=dataset.presence,
        labels=dataset.labels,
    )


def generate_mask(n: int, V: int, missing_rate: float, seed: int) -> np.ndarray:
    """Random presence mask with exactly ``round(missing_rate * n)`` incomplete samples.

    Each incomplete sample keeps a uniformly drawn nonempty proper subset of
    the views. Rounding is half-up.
    """
    if V < 2:
        raise ValueError("masking needs at least two views")
    if not 0.0 <= missing_rate < 1.0:
        raise ValueError(f"missing_rate must lie in [0, 1), got {missing_rate}")
    rng = np.random.default_rng(seed)
    mask = np.ones((n, V), dtype=np.int8)
    n_incomplete = int(math.floor(missing_rate * n + 0.5))
    if n_incomplete == 0:
        return mask
    rows = np.sort(rng.choice(n, size=n_incomplete, replace=False))
    # subsets encoded as bit patterns 1 .. 2^V - 2 (excludes empty and full)
    codes = rng.integers(1, 2**V - 1, size=n_incomplete)
    bits = (codes[:, None] >> np.arange(V)[None, :]) & 1
    mask[rows] = bits.astype(np.int8)
    return mask


def apply_mask(dataset: MultiViewDataset, presence: np.ndarray) -> MultiViewDataset:
    """Drop the view columns that ``presence`` marks as missing.

    ``presence`` must be a subset of the dataset's own presence.
    """
    presence = np.asarray(presence, dtype=np.int8)
    if presence.shape != dataset.presence.shape:
        raise DatasetError(f"mask shape {presence.shape} != dataset mask {dataset.presence.shape}")
    if np.any(presence > dataset.presence):
        raise DatasetError("mask marks a sample present that the dataset does not contain")
    views = []
    for v, X in enumerate(dataset.views):
        keep = presence[dataset.indices(v), v].astype(bool)
        views.append(X[:, keep])
    return MultiViewDataset(views=views, presence=presence, labels=dataset.labels)


def synthesize_gaussian_multiview(
    n_per_cluster: int,
    k: int,
    V: int,
    feature_dims,
    separation: float,
    seed: int,
) -> MultiViewDataset:
    """Complete multi-view data made of ``k`` Gaussian blobs per view.

    All views share the cluster identity of each sample. Blob centres sit
    ``separation`` apart (pairwise) whenever ``k <= d_v``, noise is unit
    isotropic, and every view is min-max normalised afterwards.
    """
    if separation <= 0:
        raise ValueError("separation must be positive")
    feature_dims = list(feature_dims)
    if len(feature_dims) != V or min(feature_dims) < 1:
        raise ValueError("feature_dims needs one positive dimension per view")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(k), n_per_cluster)
    n = labels.size
    views = []
    for d in feature_dims:
        centers = _blob_centers(k, d, separation, rng)
        X = centers[labels] + rng.standard_normal((n, d))
        views.append(normalize_nonnegative(X.T))
    return MultiViewDataset(views=views, presence=np.ones((n, V), dtype=np.int8), labels=labels)


def _blob_centers(k, d, separation, rng):
    if k <= d:
        # scaled simplex vertices, randomly rotated
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        return (separation / math.sqrt(2.0)) * Q[:k]
    centers = [rng.standard_normal(d) * separation]
    while len(centers) < k:
        c = rng.standard_normal(d) * separation * math.sqrt(k)
        if min(np.linalg.norm(c - o) for o in centers) >= separation:
            centers.append(c)
    return np.array(centers)


# ---------------------------------------------------------------- file I/O


def _read_csv(path: Path, what: str) -> np.ndarray:
    if not path.is_file():
        raise FileNotFoundError(f"{what} file not found: {path}")
    return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)


def load_dataset(manifest_path) -> MultiViewDataset:
    """Read a JSON manifest describing per-view CSV files.

    The manifest looks like::

        {"views": [{"csv": "view0.csv"}, ...],
         "labels_csv": "labels.csv",   # optional
         "mask_csv": "mask.csv"}       # optional, n x V of 0/1

    Paths are resolved relative to the manifest. View CSVs hold one row per
    present sample, in ascending global order. Without a mask every sample is
    taken to be present in every view.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    with open(manifest_path) as f:
        manifest = json.load(f)
    root = manifest_path.parent
    if not manifest.get("views"):
        raise DatasetError("manifest lists no views")

    views = [_read_csv(root / entry["csv"], f"view {v}").T for v, entry in enumerate(manifest["views"])]
    if manifest.get("mask_csv"):
        presence = _read_csv(root / manifest["mask_csv"], "mask")
        if not np.isin(presence, (0, 1)).all():
            raise DatasetError("mask file must contain only 0/1")
        presence = presence.astype(np.int8)
    else:
        sizes = {X.shape[1] for X in views}
        if len(sizes) != 1:
            raise DatasetError(f"views have different sample counts {sorted(sizes)} but no mask was given")
        presence = np.ones((sizes.pop(), len(views)), dtype=np.int8)
    labels = None
    if manifest.get("labels_csv"):
        raw = _read_csv(root / manifest["labels_csv"], "labels").ravel()
        if not np.all(raw == np.round(raw)):
            raise DatasetError("labels must be integers")
        labels = raw.astype(np.int64)
    return MultiViewDataset(views=views, presence=presence, labels=labels)


def save_dataset(dataset: MultiViewDataset, directory) -> Path:
    """Write ``dataset`` in manifest form; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"views": []}
    for v, X in enumerate(dataset.views):
        name = f"view{v}.csv"
        np.savetxt(directory / name, X.T, delimiter=",", fmt="%.17g")
        manifest["views"].append({"csv": name})
    np.savetxt(directory / "mask.csv", dataset.presence, delimiter=",", fmt="%d")
    manifest["mask_csv"] = "mask.csv"
    if dataset.labels is not None:
        np.savetxt(directory / "labels.csv", dataset.labels, fmt="%d")
        manifest["labels_csv"] = "labels.csv"
    path = directory / "manifest.json"
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2)
    return path
