"""Randomized hyperparameter search and the feature-set isolation test."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace

import numpy as np

from .forest import Hyperparams
from .metrics import METRICS, DegenerateFoldError, EvalReport, cross_validate

log = logging.getLogger(__name__)

DEFAULT_SEARCH_SPACE = {
    "n_estimators": {"low": 50, "high": 300},
    "max_depth": {"low": 4, "high": 60},
    "min_samples_leaf": [1, 5, 20, 50],
    "max_features": ["sqrt", 0.5, 1.0],
}

FULL_MODEL = "Full Model"


def _draw(rng, spec):
    if isinstance(spec, dict):
        lo, hi = spec["low"], spec["high"]
        if isinstance(lo, int) and isinstance(hi, int):
            return int(rng.integers(lo, hi + 1))
        return float(rng.uniform(lo, hi))
    if isinstance(spec, (list, tuple)):
        if len(spec) == 0:
            raise ValueError("empty choice list in search space")
        v = spec[int(rng.integers(len(spec)))]
        return v.item() if isinstance(v, np.generic) else v
    return spec


def sample_hyperparams(space: dict, n: int, seed: int, base: Hyperparams | None = None) -> list:
    base = base or Hyperparams()
    unknown = set(space) - set(base.to_dict())
    if unknown:
        raise ValueError(f"unknown hyperparameters in search space: {sorted(unknown)}")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        draw = {name: _draw(rng, space[name]) for name in sorted(space)}
        out.append(replace(base, **draw))
    return out


@dataclass
class SearchResult:
    best: Hyperparams
    report: EvalReport
    ledger: list          # one dict per draw: hyperparams, mean AUC or skip reason


def random_search_cv(X, y, space: dict | None = None, n_fits: int = 10, k: int = 5, seed: int = 0,
                     base: Hyperparams | None = None, n_jobs: int = 1) -> SearchResult:
    """Score ``n_fits`` seeded draws by mean k-fold ROC-AUC; first best draw wins ties."""
    if n_fits < 1:
        raise ValueError("n_fits must be >= 1")
    if k < 2:
        raise ValueError("k must be >= 2")
    space = DEFAULT_SEARCH_SPACE if space is None else space
    best = best_report = None
    ledger = []
    for i, hp in enumerate(sample_hyperparams(space, n_fits, seed, base)):
        try:
            rep = cross_validate(X, y, hp, k=k, seed=seed, n_jobs=n_jobs)
        except DegenerateFoldError as exc:
            log.warning("search draw %d skipped: %s", i, exc)
            ledger.append({"draw": i, "hyperparams": hp.to_dict(), "skipped": str(exc)})
            continue
        ledger.append({"draw": i, "hyperparams": hp.to_dict(), **rep.summary()})
        log.info("search draw %d: roc_auc=%.4f", i, rep.roc_auc)
        if best is None or rep.roc_auc > best_report.roc_auc:
            best, best_report = hp, rep
    if best is None:
        raise DegenerateFoldError("every search draw hit a degenerate fold")
    return SearchResult(best, best_report, ledger)


@dataclass
class IsolationRow:
    name: str
    columns: list
    report: EvalReport

    def as_dict(self) -> dict:
        return {"feature_set": self.name, **self.report.summary()}


def check_partition(groups: dict, n_features: int) -> None:
    seen = [c for cols in groups.values() for c in cols]
    if sorted(seen) != list(range(n_features)):
        raise ValueError("feature groups must partition the feature columns exactly once")


def feature_set_isolation(X, y, groups: dict, hp: Hyperparams, k: int = 5, seed: int = 0,
                          n_jobs: int = 1) -> list:
    """One CV run per feature group, ascending by ROC-AUC, then the all-features row."""
    X = np.asarray(X, dtype=np.float64)
    check_partition(groups, X.shape[1])
    rows = []
    for name, cols in groups.items():
        cols = sorted(int(c) for c in cols)
        rows.append(IsolationRow(name, cols, cross_validate(X[:, cols], y, hp, k=k, seed=seed, n_jobs=n_jobs)))
    rows.sort(key=lambda r: r.report.roc_auc)
    full = IsolationRow(FULL_MODEL, list(range(X.shape[1])), cross_validate(X, y, hp, k=k, seed=seed, n_jobs=n_jobs))
    return rows + [full]


def write_isolation_table(rows, path) -> None:
    cols = ["feature_set"] + [c for m in METRICS for c in (m, m + "_se")]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow(r.as_dict())
