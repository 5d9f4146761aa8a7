"""Soft-margin SVM with a polynomial kernel, trained by sequential minimal optimization."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..corpus import Label

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KernelParams:
    degree: int = 2
    gamma: float = 1.0
    coef0: float = 1.0

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if self.coef0 < 0:
            raise ValueError("coef0 must be >= 0")


def kernel(x, y, params: KernelParams) -> float:
    """``(gamma * <x, y> + coef0) ** degree``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float((params.gamma * float(np.dot(x, y)) + params.coef0) ** params.degree)


def kernel_matrix(a: np.ndarray, b: np.ndarray, params: KernelParams) -> np.ndarray:
    return (params.gamma * (np.asarray(a, float) @ np.asarray(b, float).T) + params.coef0) ** params.degree


@dataclass
class SvmModel:
    support_vectors: np.ndarray        # (n_sv, dim)
    dual_coef: np.ndarray              # alpha_i * y_i
    bias: float
    kernel: KernelParams
    C: float
    converged: bool = True
    iterations: int = 0
    alpha: np.ndarray = field(default=None, repr=False)   # full alpha vector of the training run

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1] if self.support_vectors.ndim == 2 else 0

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if len(self.dual_coef) == 0:
            return np.full(len(X), float(self.bias))
        if X.shape[1] != self.dim:
            raise ValueError(f"vector dim {X.shape[1]} does not match model dim {self.dim}")
        return kernel_matrix(X, self.support_vectors, self.kernel) @ self.dual_coef + self.bias

    def to_json(self) -> dict:
        return {
            "kernel": {"degree": self.kernel.degree, "gamma": self.kernel.gamma, "coef0": self.kernel.coef0},
            "C": self.C,
            "bias": self.bias,
            "converged": self.converged,
            "dual_coef": self.dual_coef.tolist(),
            "support_vectors": self.support_vectors.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SvmModel":
        sv = np.asarray(data["support_vectors"], dtype=np.float64)
        coef = np.asarray(data["dual_coef"], dtype=np.float64)
        return cls(sv.reshape(len(coef), -1), coef, float(data["bias"]),
                   KernelParams(**data["kernel"]), float(data["C"]), bool(data.get("converged", True)))


def save_svm(model: SvmModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_json(), indent=1) + "\n", encoding="utf-8")


def load_svm(path) -> SvmModel:
    return SvmModel.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def dual_objective(alpha: np.ndarray, y: np.ndarray, K: np.ndarray) -> float:
    """``sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij``."""
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def _signed(labels) -> np.ndarray:
    out = []
    for label in labels:
        if isinstance(label, Label):
            out.append(1.0 if label is Label.REQUIREMENT else -1.0)
        else:
            out.append(1.0 if label > 0 else -1.0)
    return np.asarray(out)


def train_svm(
    X,
    labels,
    C: float = 1.0,
    params: KernelParams = KernelParams(),
    tol: float = 1e-3,
    max_passes: int = 10,
    max_iter: int = 100_000,
    trace: list | None = None,
) -> SvmModel:
    """Solve the soft-margin dual with SMO.

    Each sweep visits every example; an example that violates its KKT
    condition by more than `tol` is paired with the partner giving the
    largest violation, and the pair is optimized analytically. Training
    stops after `max_passes` consecutive sweeps without an update. The bias
    is kept at the midpoint of the feasible interval implied by the current
    gradients, which bounds every KKT residual by half the remaining gap.

    Labels are :class:`Label` values or signs; Requirement is +1. When
    `trace` is a list, the dual objective after every pair update is
    appended to it.
    """
    X = np.asarray(X, dtype=np.float64)
    y = _signed(labels)
    n = len(y)
    if X.ndim != 2 or len(X) != n:
        raise ValueError("X must be (n_samples, dim) and match labels")
    if not ((y > 0).any() and (y < 0).any()):
        raise ValueError("SVM training needs at least one example of each class")
    if not C > 0:
        raise ValueError("C must be > 0")

    K = kernel_matrix(X, X, params)
    alpha = np.zeros(n)
    s = np.zeros(n)            # s_k = sum_l alpha_l y_l K_kl
    eps = 1e-12 * C

    def bias_interval():
        # F_k = y_k - s_k; optimality needs max F over I_up <= b <= min F over I_low
        F = y - s
        up = ((y > 0) & (alpha < C - eps)) | ((y < 0) & (alpha > eps))
        low = ((y > 0) & (alpha > eps)) | ((y < 0) & (alpha < C - eps))
        m = F[up].max() if up.any() else -np.inf
        M = F[low].min() if low.any() else np.inf
        return F, up, low, m, M

    def midpoint(m, M):
        if np.isfinite(m) and np.isfinite(M):
            return 0.5 * (m + M)
        return m if np.isfinite(m) else M

    iterations = 0
    quiet_passes = 0
    converged = True
    while quiet_passes < max_passes:
        updated = 0
        for i in range(n):
            F, up, low, m, M = bias_interval()
            b = midpoint(m, M)
            if up[i] and F[i] > b + tol:
                cand = np.where(low)[0]
                j = int(cand[np.argmin(F[cand])])
            elif low[i] and F[i] < b - tol:
                cand = np.where(up)[0]
                j = int(cand[np.argmax(F[cand])])
            else:
                continue
            if _take_step(i, j, alpha, y, K, s, C, F):
                updated += 1
                iterations += 1
                if trace is not None:
                    trace.append(dual_objective(alpha, y, K))
            if iterations >= max_iter:
                break
        if iterations >= max_iter:
            converged = False
            logger.warning("SMO hit the iteration cap (%d) before converging", max_iter)
            break
        quiet_passes = quiet_passes + 1 if updated == 0 else 0

    _, _, _, m, M = bias_interval()
    b = float(midpoint(m, M))
    sv = alpha > eps
    return SvmModel(X[sv].copy(), (alpha * y)[sv], b, params, C, converged, iterations, alpha)


def _take_step(i, j, alpha, y, K, s, C, F) -> bool:
    """Optimize alpha_i, alpha_j jointly; returns whether anything moved."""
    if i == j:
        return False
    ai, aj = alpha[i], alpha[j]
    if y[i] != y[j]:
        lo, hi = max(0.0, aj - ai), min(C, C + aj - ai)
    else:
        lo, hi = max(0.0, ai + aj - C), min(C, ai + aj)
    if hi - lo < 1e-15:
        return False
    # E_i - E_j = F_j - F_i with E_k the prediction error on example k
    e_diff = F[j] - F[i]
    eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
    if eta > 1e-12:
        aj_new = min(hi, max(lo, aj + y[j] * e_diff / eta))
    else:
        # flat or degenerate direction: move to the better end point
        def gain(a):
            d = a - aj
            return y[j] * d * e_diff - 0.5 * eta * d * d
        aj_new = hi if gain(hi) > gain(lo) else lo
    if abs(aj_new - aj) < 1e-12 * (aj + aj_new + 1e-12):
        return False
    ai_new = ai + y[i] * y[j] * (aj - aj_new)
    ai_new = min(C, max(0.0, ai_new))
    di, dj = ai_new - ai, aj_new - aj
    alpha[i], alpha[j] = ai_new, aj_new
    s += di * y[i] * K[:, i] + dj * y[j] * K[:, j]
    return True


def predict_svm(model: SvmModel, vector) -> tuple[Label, float]:
    """Label and margin; a zero margin is NonRequirement."""
    vector = np.asarray(vector, dtype=np.float64)
    if len(model.dual_coef) and vector.shape[-1] != model.dim:
        raise ValueError(f"vector dim {vector.shape[-1]} does not match model dim {model.dim}")
    margin = float(model.decision_function(vector.reshape(1, -1))[0])
    return (Label.REQUIREMENT if margin > 0 else Label.NON_REQUIREMENT), margin
