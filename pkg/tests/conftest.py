import numpy as np
import pytest

from crg_imsc.dataset import MultiViewDataset
from crg_imsc.graph import GraphSet, build_laplacian


def random_instance(rng, n, V, k, d=4, complete=False):
    """Small random incomplete problem with nonnegative data and dense graphs.

    Every view keeps at least k + 1 samples; graphs come from random
    symmetric positive weights so every vertex has a positive degree.
    """
    while True:
        presence = np.ones((n, V), dtype=np.int8) if complete else (rng.random((n, V)) < 0.75).astype(np.int8)
        empty = presence.sum(axis=1) == 0
        presence[empty, rng.integers(0, V, size=empty.sum())] = 1
        if presence.sum(axis=0).min() > k:
            break
    views = [rng.random((d, int(c))) for c in presence.sum(axis=0)]
    ds = MultiViewDataset(views=views, presence=presence, labels=rng.integers(0, k, size=n))
    sims, degs, laps = [], [], []
    for c in presence.sum(axis=0):
        S = rng.random((c, c))
        S = (S + S.T) / 2
        np.fill_diagonal(S, 0.0)
        D, L = build_laplacian(S)
        sims.append(S)
        degs.append(D)
        laps.append(L)
    return ds, GraphSet(similarity=sims, degree=degs, laplacian=laps)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
