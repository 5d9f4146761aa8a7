"""Cross-validated grid search over SVM and logistic-regression settings."""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..corpus import Label
from ..evaluation import ConfusionMatrix, f1_or_zero
from .logreg import train_logreg
from .svm import KernelParams, train_svm

logger = logging.getLogger(__name__)

FAMILIES = ("svm", "logreg")


def default_grids(dim: int) -> dict[str, dict[str, list]]:
    return {
        "svm": {"degree": [2, 3], "gamma": [0.1, 1.0 / dim, 1.0], "coef0": [0.0, 1.0], "C": [0.1, 1.0, 10.0]},
        "logreg": {"l2": [1e-4, 1e-2, 1.0], "lr": [0.1], "epochs": [20]},
    }


@dataclass(frozen=True)
class ConfigResult:
    family: str
    params: tuple[tuple[str, float], ...]
    folds: tuple[ConfusionMatrix, ...]

    @property
    def mean_f1(self) -> float:
        return float(np.mean([f1_or_zero(cm) for cm in self.folds]))

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def to_json(self) -> dict:
        return {"family": self.family, "params": self.param_dict, "mean_f1": self.mean_f1,
                "folds": [[cm.tp, cm.tn, cm.fp, cm.fn] for cm in self.folds]}


@dataclass(frozen=True)
class GridSearchResult:
    best: ConfigResult
    results: tuple[ConfigResult, ...]
    skipped: tuple[tuple[str, tuple, str], ...]

    @property
    def family(self) -> str:
        return self.best.family

    @property
    def params(self) -> dict:
        return self.best.param_dict

    @property
    def mean_f1(self) -> float:
        return self.best.mean_f1

    def to_json(self) -> dict:
        return {
            "best": self.best.to_json(),
            "results": [r.to_json() for r in self.results],
            "skipped": [{"family": f, "params": dict(p), "reason": why} for f, p, why in self.skipped],
        }


def stratified_folds(targets: Sequence[int], k: int, seed: int) -> list[np.ndarray]:
    """Validation index sets; each class is shuffled and dealt round-robin."""
    targets = np.asarray(targets)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for cls in np.unique(targets):
        idx = np.flatnonzero(targets == cls)
        rng.shuffle(idx)
        for n, i in enumerate(idx):
            folds[(offset + n) % k].append(int(i))
        offset += len(idx)
    return [np.array(sorted(f), dtype=int) for f in folds]


def _expand(grid: Mapping[str, Sequence]) -> list[tuple[tuple[str, float], ...]]:
    keys = sorted(grid)
    return [tuple(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]


def _regularization_key(family: str, params: Mapping) -> float:
    """Smaller is stronger regularization."""
    if family == "svm":
        return float(params["C"])
    l2 = float(params.get("l2", 0.0))
    return math.inf if l2 == 0 else 1.0 / l2


def _fit_predict(family: str, params: Mapping, X_tr, y_tr, X_va, seed: int) -> list[Label]:
    if family == "svm":
        kp = KernelParams(int(params["degree"]), float(params["gamma"]), float(params["coef0"]))
        model = train_svm(X_tr, y_tr, C=float(params["C"]), params=kp)
        margins = model.decision_function(X_va)
        return [Label.REQUIREMENT if m > 0 else Label.NON_REQUIREMENT for m in margins]
    if family == "logreg":
        model = train_logreg(X_tr, y_tr, l2=float(params["l2"]), lr=float(params.get("lr", 0.1)),
                             epochs=int(params.get("epochs", 20)), seed=seed)
        return model.predict(X_va)
    raise ValueError(f"unknown model family {family!r}")


def grid_search(
    X,
    labels: Sequence[Label],
    grids: Mapping[str, Mapping[str, Sequence]] | None = None,
    k: int = 5,
    seed: int = 0,
    n_jobs: int = 1,
) -> GridSearchResult:
    """Pick the (family, params) with the best mean Requirement-class F1 under stratified k-fold CV.

    Ties go to the stronger-regularized configuration (smaller C, larger
    l2), then to the lexicographically smaller (family, params). A
    configuration whose folds would hold a single class is skipped and
    listed in the result. With ``n_jobs > 1`` configurations run in threads;
    results are still reduced in configuration order.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = list(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    grids = default_grids(X.shape[1]) if grids is None else grids
    configs = [(family, params) for family in sorted(grids) for params in _expand(grids[family])]
    if not configs:
        raise ValueError("empty parameter grid")
    for family, _ in configs:
        if family not in FAMILIES:
            raise ValueError(f"unknown model family {family!r}")

    targets = np.array([lab.target for lab in labels])
    folds = stratified_folds(targets, k, seed)
    splits = []
    fold_problem = None
    for n, va in enumerate(folds):
        tr = np.setdiff1d(np.arange(len(labels)), va)
        for name, part in (("training", tr), ("validation", va)):
            if len(np.unique(targets[part])) < 2:
                fold_problem = f"fold {n} {name} part has a single class"
        splits.append((tr, va))

    def run(config):
        family, params = config
        if fold_problem:
            return None
        matrices = []
        for tr, va in splits:
            pred = _fit_predict(family, dict(params), X[tr], [labels[i] for i in tr], X[va], seed)
            matrices.append(ConfusionMatrix.from_pairs(zip((labels[i] for i in va), pred)))
        return ConfigResult(family, params, tuple(matrices))

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(run, configs))
    else:
        outcomes = [run(c) for c in configs]

    results, skipped = [], []
    for config, outcome in zip(configs, outcomes):
        if outcome is None:
            logger.warning("skipping %s %s: %s", config[0], dict(config[1]), fold_problem)
            skipped.append((config[0], config[1], fold_problem))
        else:
            results.append(outcome)
    if not results:
        raise ValueError(f"every configuration was skipped: {fold_problem}")

    best = min(results, key=lambda r: (-r.mean_f1, _regularization_key(r.family, r.param_dict),
                                       r.family, r.params))
    return GridSearchResult(best, tuple(results), tuple(skipped))
