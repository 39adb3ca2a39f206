"""Clustering quality: NMI, matched accuracy, pairwise F-score and precision."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

METRICS = ("nmi", "accuracy", "f_score", "precision")
# field name -> key used in serialized reports
JSON_KEYS = {"nmi": "nmi", "accuracy": "acc", "f_score": "fscore", "precision": "precision"}


def _check(true_labels, pred_labels):
    t = np.asarray(true_labels).ravel()
    p = np.asarray(pred_labels).ravel()
    if t.shape != p.shape:
        raise ValueError(f"label vectors differ in length: {t.size} vs {p.size}")
    if t.size == 0:
        raise ValueError("empty labelings")
    return t, p


def contingency(true_labels, pred_labels) -> np.ndarray:
    """Counts table with rows = true classes, columns = predicted clusters."""
    t, p = _check(true_labels, pred_labels)
    _, ti = np.unique(t, return_inverse=True)
    _, pi = np.unique(p, return_inverse=True)
    table = np.zeros((ti.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(table, (ti, pi), 1)
    return table


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(true_labels, pred_labels) -> float:
    """Mutual information normalised by the geometric mean of the entropies.

    If exactly one labeling has a single cluster the score is 0; if both do it
    is 1.
    """
    C = contingency(true_labels, pred_labels)
    n = C.sum()
    h_true = _entropy(C.sum(axis=1), n)
    h_pred = _entropy(C.sum(axis=0), n)
    if h_true == 0.0 or h_pred == 0.0:
        return 1.0 if h_true == h_pred else 0.0
    outer = np.outer(C.sum(axis=1), C.sum(axis=0))
    nz = C > 0
    mi = float(np.sum(C[nz] / n * np.log(C[nz] * n / outer[nz])))
    return float(min(1.0, max(0.0, mi / np.sqrt(h_true * h_pred))))


def accuracy(true_labels, pred_labels) -> float:
    """Fraction of samples matched under the best one-to-one cluster/class map."""
    C = contingency(true_labels, pred_labels)
    size = max(C.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[: C.shape[0], : C.shape[1]] = C
    rows, cols = linear_sum_assignment(padded, maximize=True)
    return float(padded[rows, cols].sum() / C.sum())


def _pairs(x):
    x = np.asarray(x, dtype=np.int64)
    return int(np.sum(x * (x - 1) // 2))


def pairwise_fscore_precision(true_labels, pred_labels):
    """Pair-counting F-score and precision over all unordered sample pairs.

    Ratios with a zero denominator are taken as 0.
    """
    t, _ = _check(true_labels, pred_labels)
    if t.size < 2:
        raise ValueError("pairwise scores need at least two samples")
    C = contingency(true_labels, pred_labels)
    tp = _pairs(C)
    pred_pairs = _pairs(C.sum(axis=0))
    true_pairs = _pairs(C.sum(axis=1))
    precision = tp / pred_pairs if pred_pairs else 0.0
    recall = tp / true_pairs if true_pairs else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return float(f), float(precision)


@dataclass(frozen=True)
class EvalReport:
    nmi: float
    accuracy: float
    f_score: float
    precision: float
    n: int
    k_true: int
    k_pred: int
    nmi_std: float | None = None
    accuracy_std: float | None = None
    f_score_std: float | None = None
    precision_std: float | None = None
    repeats: int = 1

    def to_dict(self) -> dict:
        out = {}
        for m in METRICS:
            std = getattr(self, f"{m}_std")
            out[JSON_KEYS[m]] = {"mean": getattr(self, m), "std": 0.0 if std is None else std}
        out.update(n=self.n, k_true=self.k_true, k_pred=self.k_pred, repeats=self.repeats)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        kw = {m: d[JSON_KEYS[m]]["mean"] for m in METRICS}
        kw.update({f"{m}_std": d[JSON_KEYS[m]]["std"] for m in METRICS})
        return cls(n=d["n"], k_true=d["k_true"], k_pred=d["k_pred"], repeats=d["repeats"], **kw)


def evaluate(true_labels, pred_labels) -> EvalReport:
    C = contingency(true_labels, pred_labels)
    f, p = pairwise_fscore_precision(true_labels, pred_labels)
    return EvalReport(
        nmi=nmi(true_labels, pred_labels),
        accuracy=accuracy(true_labels, pred_labels),
        f_score=f,
        precision=p,
        n=int(C.sum()),
        k_true=C.shape[0],
        k_pred=C.shape[1],
    )


def aggregate(reports) -> EvalReport:
    """Mean and population standard deviation of each metric over repeats."""
    reports = list(reports)
    if not reports:
        raise ValueError("cannot aggregate an empty list of reports")
    kw = {}
    for m in METRICS:
        vals = np.array([getattr(r, m) for r in reports], dtype=np.float64)
        kw[m] = float(vals.mean())
        kw[f"{m}_std"] = float(vals.std())
    first = reports[0]
    return EvalReport(
        n=first.n,
        k_true=first.k_true,
        k_pred=max(r.k_pred for r in reports),
        repeats=len(reports),
        **kw,
    )

