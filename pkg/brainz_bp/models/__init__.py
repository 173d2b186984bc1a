from .base import (ModelKind, Standardizer, TrainedModel, load_model, model_from_dict, model_to_dict, predict,
                   save_model)
from .cart import TreeArrays, TreeConfig, grow_tree, train_cart
from .factory import ModelSettings, train_model
from .forest import ForestConfig, ForestModel, fit_forest, train_rf
from .linear import LinearParams, train_lr
from .svr import SvrConfig, SvrParams, solve_dual, train_svr

__all__ = [
    "ModelKind",
    "Standardizer",
    "TrainedModel",
    "TreeArrays",
    "TreeConfig",
    "ForestConfig",
    "ForestModel",
    "LinearParams",
    "SvrConfig",
    "SvrParams",
    "ModelSettings",
    "train_lr",
    "train_cart",
    "grow_tree",
    "train_rf",
    "fit_forest",
    "train_svr",
    "solve_dual",
    "train_model",
    "predict",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
]
