"""Random forest over :mod:`linkshare.model.tree`, MDI importance and model files.

Model file (``.npz``): a ``header`` entry holding JSON with the
hyperparameters, feature names, group mapping and per-tree seeds, plus one
flattened array per node field with all trees concatenated and ``offsets``
marking where each tree starts.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .._index import save_npz
from .tree import DecisionTree, fit_tree, predict_tree

FORMAT_VERSION = 1


@dataclass(frozen=True)
class Hyperparams:
    n_estimators: int = 300
    max_depth: int = 60
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: object = "sqrt"     # "sqrt", int count or float fraction in (0, 1]
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("n_estimators", "max_depth", "min_samples_split", "min_samples_leaf"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
        mf = self.max_features
        if isinstance(mf, str):
            if mf != "sqrt":
                raise ValueError(f"unknown max_features {mf!r}")
        elif isinstance(mf, (float, np.floating)) and not isinstance(mf, bool):
            if not 0.0 < mf <= 1.0:
                raise ValueError("max_features fraction must be in (0, 1]")
        elif isinstance(mf, (int, np.integer)) and not isinstance(mf, bool):
            if mf < 1:
                raise ValueError("max_features count must be >= 1")
        else:
            raise ValueError(f"bad max_features {mf!r}")

    def features_per_split(self, n_features: int) -> int:
        mf = self.max_features
        if mf == "sqrt":
            k = int(math.sqrt(n_features))
        elif isinstance(mf, (float, np.floating)):
            k = int(mf * n_features)
        else:
            k = int(mf)
        return max(1, min(n_features, k))

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(d["max_features"], np.generic):
            d["max_features"] = d["max_features"].item()
        return d


@dataclass
class ForestModel:
    trees: list
    hyperparams: Hyperparams
    n_features: int
    feature_names: list = field(default_factory=list)
    groups: dict = field(default_factory=dict)
    tree_seeds: list = field(default_factory=list)

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.ascontiguousarray(np.atleast_2d(X))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.zeros(len(X))
        for t in self.trees:
            predict_tree(X, t.feature, t.threshold, t.left, t.right, t.value, out)
        out /= len(self.trees)
        return float(out[0]) if single else out

    def predict(self, X) -> np.ndarray:
        return (np.asarray(self.predict_proba(X)) > 0.5).astype(np.int64)

    def save(self, path) -> None:
        header = {"format": FORMAT_VERSION, "hyperparams": self.hyperparams.to_dict(),
                  "n_features": self.n_features, "feature_names": list(self.feature_names),
                  "groups": {k: list(map(int, v)) for k, v in self.groups.items()},
                  "tree_seeds": [int(s) for s in self.tree_seeds]}
        sizes = [t.n_nodes for t in self.trees]
        arrays = {f: np.concatenate([getattr(t, f) for t in self.trees]) for f in DecisionTree.FIELDS}
        save_npz(path, compress=True, header=np.array(json.dumps(header)),
                 offsets=np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64), **arrays)

    @classmethod
    def load(cls, path) -> "ForestModel":
        with np.load(path) as z:
            header = json.loads(str(z["header"]))
            if header.get("format") != FORMAT_VERSION:
                raise ValueError(f"unsupported model format {header.get('format')!r}")
            off = z["offsets"]
            cols = {f: z[f] for f in DecisionTree.FIELDS}
        trees = [DecisionTree(**{f: cols[f][off[i]:off[i + 1]].copy() for f in DecisionTree.FIELDS})
                 for i in range(len(off) - 1)]
        return cls(trees, Hyperparams(**header["hyperparams"]), header["n_features"],
                   header["feature_names"], header["groups"], header["tree_seeds"])


def _check_training_data(X, y, allow_single_class):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("empty training data")
    if len(y) != len(X):
        raise ValueError("X and y lengths differ")
    if len(X) < 2:
        raise ValueError("need at least 2 training examples")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    if not allow_single_class and len(np.unique(y)) < 2:
        raise ValueError("single-class data: both labels must be present")
    return X, y.astype(np.float64)


def tree_seeds(seed: int, n_estimators: int) -> list:
    """Per-tree seeds; tree ``i`` always gets the same seed regardless of scheduling."""
    return [int(c.generate_state(1, dtype=np.uint64)[0])
            for c in np.random.SeedSequence(seed).spawn(n_estimators)]


def bootstrap_weights(n: int, tree_seed: int) -> np.ndarray:
    """Multiplicity of each row in a size-``n`` bootstrap resample."""
    rng = np.random.default_rng(tree_seed)
    return np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)


def presort(X) -> np.ndarray:
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)


def fit_forest(X, y, hp: Hyperparams | None = None, feature_names=None, groups=None,
               n_jobs: int = 1, allow_single_class: bool = False) -> ForestModel:
    """Train a forest; identical output for any ``n_jobs``.

    ``allow_single_class`` permits one-label data (every tree is then a single
    pure leaf); by default such data is rejected.
    """
    hp = hp or Hyperparams()
    X, yf = _check_training_data(X, y, allow_single_class)
    n, F = X.shape
    order = presort(X)
    k = hp.features_per_split(F)
    seeds = tree_seeds(hp.seed, hp.n_estimators)
    ones = np.ones(n)

    def grow(s):
        w = bootstrap_weights(n, s) if hp.bootstrap else ones
        return fit_tree(X, yf, w, order, hp.max_depth, hp.min_samples_split, hp.min_samples_leaf, k, s)

    if n_jobs == 1:
        trees = [grow(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=None if n_jobs < 1 else n_jobs) as ex:
            trees = list(ex.map(grow, seeds))
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(F)]
    if len(names) != F:
        raise ValueError("feature_names length does not match X")
    return ForestModel(trees, hp, F, names, dict(groups or {}), seeds)


def predict_proba(model: ForestModel, X):
    return model.predict_proba(X)


def tree_importance(tree: DecisionTree, n_features: int) -> np.ndarray:
    """Weighted impurity decrease per feature for one tree (not normalized)."""
    out = np.zeros(n_features)
    internal = np.flatnonzero(tree.feature >= 0)
    if len(internal) == 0:
        return out
    w, imp = tree.weight, tree.impurity
    l, r = tree.left[internal], tree.right[internal]
    dec = (w[internal] * imp[internal] - w[l] * imp[l] - w[r] * imp[r]) / w[0]
    np.add.at(out, tree.feature[internal], dec)
    return out


def mdi_importance(model: ForestModel) -> np.ndarray:
    """Mean decrease in impurity, averaged over trees and normalized to sum to 1."""
    total = np.zeros(model.n_features)
    for t in model.trees:
        total += tree_importance(t, model.n_features)
    total /= len(model.trees)
    s = total.sum()
    if s <= 0:
        raise ValueError("no splits: the forest has no internal nodes to attribute importance to")
    return total / s
