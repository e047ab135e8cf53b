"""Classification metrics, stratified folds and cross-validation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

THRESHOLD = 0.5
METRICS = ("roc_auc", "precision", "recall", "average_precision")


def _check(scores, labels):
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D and equal length")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    y = y.astype(bool)
    if y.all() or not y.any():
        raise ValueError("single-class input: both labels must be present")
    return s, y


def roc_auc(scores, labels) -> float:
    """Pairwise concordance with ties counted one half, computed by a rank sweep."""
    s, y = _check(scores, labels)
    order = np.argsort(s, kind="stable")
    s, y = s[order], y[order]
    _, start, counts = np.unique(s, return_index=True, return_counts=True)
    pos_g = np.add.reduceat(y.astype(np.int64), start)
    neg_g = counts - pos_g
    neg_below = np.concatenate([[0], np.cumsum(neg_g)[:-1]])
    twice = int(np.sum(2 * pos_g * neg_below + pos_g * neg_g))
    P, N = int(y.sum()), int((~y).sum())
    return twice / (2 * P * N)


def average_precision(scores, labels) -> float:
    """Sum of precision times recall increment over distinct descending thresholds."""
    s, y = _check(scores, labels)
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(y)[last].astype(np.float64)
    fp = (last + 1) - tp
    P = float(y.sum())
    precision = tp / (tp + fp)
    recall = tp / P
    d_recall = np.diff(np.r_[0.0, recall])
    ap = 0.0
    for p, dr in zip(precision.tolist(), d_recall.tolist()):
        ap += p * dr
    return ap


def precision_recall(scores, labels, threshold: float = THRESHOLD):
    """Predict positive when score > threshold; precision is 0 with no predicted positives."""
    s, y = _check(scores, labels)
    pred = s > threshold
    tp = int(np.sum(pred & y))
    npred = int(pred.sum())
    return (tp / npred if npred else 0.0), tp / int(y.sum())


def evaluate(scores, labels) -> dict:
    p, r = precision_recall(scores, labels)
    return {"roc_auc": roc_auc(scores, labels), "precision": p, "recall": r,
            "average_precision": average_precision(scores, labels)}


@dataclass
class EvalReport:
    folds: list = field(default_factory=list)     # one metrics dict per fold

    @property
    def k(self) -> int:
        return len(self.folds)

    def values(self, metric: str) -> np.ndarray:
        return np.array([f[metric] for f in self.folds])

    def mean(self, metric: str) -> float:
        return float(np.mean(self.values(metric)))

    def stderr(self, metric: str) -> float:
        v = self.values(metric)
        return float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0

    @property
    def roc_auc(self) -> float:
        return self.mean("roc_auc")

    @property
    def precision(self) -> float:
        return self.mean("precision")

    @property
    def recall(self) -> float:
        return self.mean("recall")

    @property
    def average_precision(self) -> float:
        return self.mean("average_precision")

    def summary(self) -> dict:
        out = {}
        for m in METRICS:
            out[m] = self.mean(m)
            out[m + "_se"] = self.stderr(m)
        return out

    def to_dict(self) -> dict:
        return {"summary": self.summary(), "folds": self.folds}


class DegenerateFoldError(ValueError):
    pass


def stratified_kfold(labels, k: int, seed: int) -> np.ndarray:
    """Fold id per row; each class is shuffled and dealt round-robin across folds."""
    if k < 2:
        raise ValueError("k must be >= 2")
    y = np.asarray(labels)
    rng = np.random.default_rng(seed)
    fold = np.empty(len(y), dtype=np.int64)
    offset = 0
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        fold[idx] = (np.arange(len(idx)) + offset) % k
        offset += len(idx)
    return fold


def cross_validate(X, y, hp, k: int = 5, seed: int = 0, n_jobs: int = 1, return_scores: bool = False):
    """k-fold stratified CV; returns an :class:`EvalReport` (and out-of-fold scores)."""
    from .forest import fit_forest

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    fold = stratified_kfold(y, k, seed)
    report = EvalReport()
    oof = np.full(len(y), np.nan)
    for f in range(k):
        test = fold == f
        ytr, yte = y[~test], y[test]
        if len(np.unique(ytr)) < 2 or len(np.unique(yte)) < 2:
            raise DegenerateFoldError(f"fold {f} is missing a class")
        model = fit_forest(X[~test], ytr, hp, n_jobs=n_jobs)
        s = model.predict_proba(X[test])
        oof[test] = s
        report.folds.append(evaluate(s, yte))
    return (report, oof) if return_scores else report
