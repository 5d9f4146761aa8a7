"""Classifiers over externally computed sentence embeddings."""

from .embeddings import (EmbeddingFormatError, EmbeddingProviderError, EmbeddingTable,
                         fetch_embeddings, load_embeddings, save_embeddings)
from .grid import GridSearchResult, default_grids, grid_search, stratified_folds
from .logreg import LogRegModel, train_logreg
from .svm import KernelParams, SvmModel, kernel, load_svm, predict_svm, save_svm, train_svm

__all__ = [
    "EmbeddingFormatError", "EmbeddingProviderError", "EmbeddingTable", "fetch_embeddings",
    "load_embeddings", "save_embeddings", "GridSearchResult", "default_grids", "grid_search",
    "stratified_folds", "LogRegModel", "train_logreg", "KernelParams", "SvmModel", "kernel",
    "load_svm", "predict_svm", "save_svm", "train_svm",
]
