from .array import ClassifierArray, classifier_array, fit_model
from .cart import TreeModel, TreeParams, predict_tree, train_tree
from .forest import ForestModel, ForestParams, feature_importances, predict_forest, train_forest
from .serialize import ModelBundle, dumps, load_model, loads, save_model

__all__ = [
    "ClassifierArray",
    "ForestModel",
    "ForestParams",
    "ModelBundle",
    "TreeModel",
    "TreeParams",
    "classifier_array",
    "dumps",
    "feature_importances",
    "fit_model",
    "load_model",
    "loads",
    "predict_forest",
    "predict_tree",
    "save_model",
    "train_forest",
    "train_tree",
]
