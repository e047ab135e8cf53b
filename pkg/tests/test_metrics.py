import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from linkshare.model import (DegenerateFoldError, Hyperparams, average_precision, cross_validate, evaluate,
                             precision_recall, roc_auc, stratified_kfold)

scored = st.lists(st.tuples(st.integers(0, 8).map(lambda v: v / 8), st.booleans()), min_size=2, max_size=60) \
    .filter(lambda r: 0 < sum(y for _, y in r) < len(r))


@settings(max_examples=200, deadline=None)
@given(scored)
def test_auc_and_ap_match_oracles(rows):
    s = [a for a, _ in rows]
    y = [int(b) for _, b in rows]
    assert roc_auc(s, y) == float(oracles.auc_pairs(s, y))
    assert average_precision(s, y) == pytest.approx(oracles.average_precision(s, y), abs=1e-12)


def test_worked_examples():
    assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert average_precision([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.8333333333)
    assert roc_auc([0.5, 0.5], [0, 1]) == 0.5


def test_precision_recall_threshold_is_strict():
    p, r = precision_recall([0.5, 0.9, 0.2, 0.7], [1, 1, 0, 0])
    assert (p, r) == (0.5, 0.5)
    assert precision_recall([0.1, 0.2], [0, 1]) == (0.0, 0.0)


def test_single_class_rejected():
    for fn in (roc_auc, average_precision, precision_recall):
        with pytest.raises(ValueError):
            fn([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        roc_auc([0.1, 0.2], [0, 2])


@given(st.lists(st.booleans(), min_size=10, max_size=200), st.integers(2, 5), st.integers(0, 100))
def test_stratified_folds_balance_classes(labels, k, seed):
    y = np.array(labels, dtype=int)
    fold = stratified_kfold(y, k, seed)
    assert fold.min() >= 0 and fold.max() < k
    for c in (0, 1):
        counts = np.bincount(fold[y == c], minlength=k)
        assert counts.max() - counts.min() <= 1
    assert np.array_equal(fold, stratified_kfold(y, k, seed))


def test_cross_validate_reports_and_degenerate_folds(rng):
    X = rng.normal(size=(300, 3))
    y = (X[:, 0] + 0.5 * rng.normal(size=300) > 0).astype(int)
    hp = Hyperparams(n_estimators=10, max_depth=4)
    rep, oof = cross_validate(X, y, hp, k=3, seed=1, return_scores=True)
    assert rep.k == 3 and rep.roc_auc > 0.8
    assert not np.isnan(oof).any()
    assert rep.summary()["roc_auc_se"] == pytest.approx(np.std(rep.values("roc_auc"), ddof=1) / np.sqrt(3))
    y_rare = np.zeros(300, dtype=int)
    y_rare[:2] = 1
    with pytest.raises(DegenerateFoldError):
        cross_validate(X, y_rare, hp, k=5)


def test_evaluate_keys():
    assert set(evaluate([0.2, 0.8], [0, 1])) == {"roc_auc", "precision", "recall", "average_precision"}
