"""Random forest classifier, metrics and model selection."""
from .forest import ForestModel, Hyperparams, fit_forest, mdi_importance, predict_proba
from .metrics import (DegenerateFoldError, EvalReport, average_precision, cross_validate, evaluate,
                      precision_recall, roc_auc, stratified_kfold)
from .selection import (DEFAULT_SEARCH_SPACE, FULL_MODEL, IsolationRow, SearchResult, feature_set_isolation,
                        random_search_cv, write_isolation_table)
from .tree import DecisionTree, gini

__all__ = [
    "DecisionTree", "ForestModel", "Hyperparams", "fit_forest", "predict_proba", "mdi_importance", "gini",
    "EvalReport", "DegenerateFoldError", "evaluate", "roc_auc", "average_precision", "precision_recall",
    "stratified_kfold", "cross_validate", "random_search_cv", "feature_set_isolation", "IsolationRow",
    "SearchResult", "DEFAULT_SEARCH_SPACE", "FULL_MODEL", "write_isolation_table",
]
