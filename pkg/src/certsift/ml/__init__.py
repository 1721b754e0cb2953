"""Classifier training, prediction, evaluation, and persistence."""

from .classifiers import (
    DEFAULT_HYPERPARAMETERS,
    DEFAULT_SEED,
    KIND_BAGGING,
    KIND_FOREST,
    KIND_KNN,
    KIND_TREE,
    MODEL_KINDS,
    BaggedTreesModel,
    DecisionTreeModel,
    NearestNeighborModel,
    RandomForestModel,
    TrainedModel,
    predict,
    resolve_hyperparameters,
    train,
)
from .evaluate import Confusion, EvalReport, cross_validate, stratified_fold_indices
from .persist import FORMAT_VERSION, load_model, save_model
from .schema import Dataset, FeatureColumn, FeatureSchema, default_schema

__all__ = [
    "DEFAULT_HYPERPARAMETERS",
    "DEFAULT_SEED",
    "KIND_BAGGING",
    "KIND_FOREST",
    "KIND_KNN",
    "KIND_TREE",
    "MODEL_KINDS",
    "FORMAT_VERSION",
    "BaggedTreesModel",
    "Confusion",
    "Dataset",
    "DecisionTreeModel",
    "EvalReport",
    "FeatureColumn",
    "FeatureSchema",
    "NearestNeighborModel",
    "RandomForestModel",
    "TrainedModel",
    "cross_validate",
    "default_schema",
    "load_model",
    "predict",
    "resolve_hyperparameters",
    "save_model",
    "stratified_fold_indices",
    "train",
]
