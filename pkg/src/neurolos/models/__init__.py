"""From-scratch classifiers for the LOS benchmark.

KNN, decision tree, random forest, second-order gradient boosting
(depthwise and oblivious growth) and a one-vs-rest linear SVM, all with a
shared fit/predict surface, deterministic seeded randomness and exact
save/load round trips.
"""
from .boosting import (BoostConfig, BoostModel, GradTree, ObliviousTree,
                       boost_fit, boost_predict, fit_gradient_tree,
                       fit_oblivious_tree, leaf_weight, softmax)
from .forest import ForestConfig, ForestModel, forest_fit, forest_predict
from .io import load_model, save_model
from .knn import KnnConfig, KnnModel, knn_predict
from .presets import model_kinds, tuned_config
from .svm import SvmConfig, SvmModel, svm_fit, svm_predict
from .tree import (ClassDistribution, TreeConfig, TreeModel, impurity,
                   tree_fit)

__all__ = [
    "BoostConfig", "BoostModel", "GradTree", "ObliviousTree", "boost_fit",
    "boost_predict", "fit_gradient_tree", "fit_oblivious_tree", "leaf_weight",
    "softmax", "ForestConfig", "ForestModel", "forest_fit", "forest_predict",
    "load_model", "save_model", "KnnConfig", "KnnModel", "knn_predict",
    "model_kinds", "tuned_config", "SvmConfig", "SvmModel", "svm_fit",
    "svm_predict", "ClassDistribution", "TreeConfig", "TreeModel", "impurity",
    "tree_fit",
]
