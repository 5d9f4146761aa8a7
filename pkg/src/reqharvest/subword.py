"""Supervised subword classifier: mean-pooled word and n-gram embeddings under a softmax.

The input matrix has ``len(vocab) + bucket_count`` rows, which for default
settings is far more than a sentence corpus ever touches. Only rows seen in
training are stored; every other row keeps its initial value, which is a
pure function of ``(seed, row, column)``, so the model behaves exactly as if
the whole matrix had been materialized.
"""

from __future__ import annotations

import io
import json
import logging
import math
import struct
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import Label, LabeledDataset
from .evaluation import ConfusionMatrix, f1_or_zero
from .features import FeatureConfig, FeatureVector, featurize, tokenize

logger = logging.getLogger(__name__)

MAGIC = b"RQHV"
FORMAT_VERSION = 1


class EmptyVocabularyError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary(Mapping):
    """Words ordered by descending frequency, ties broken lexicographically."""

    words: tuple[str, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "_index", {w: i for i, w in enumerate(self.words)})

    def __getitem__(self, word: str) -> int:
        return self._index[word]

    def __contains__(self, word) -> bool:
        return word in self._index

    def __iter__(self):
        return iter(self.words)

    def __len__(self) -> int:
        return len(self.words)


def build_vocab(train: LabeledDataset, config: FeatureConfig, min_count: int = 1) -> Vocabulary:
    if len(train) == 0:
        raise ValueError("training set is empty")
    if any(u.label is None for u in train.units):
        raise ValueError("training units must all be labeled")
    freq = Counter(tok for text in train.texts for tok in tokenize(text, config.lowercase))
    kept = sorted(((w, c) for w, c in freq.items() if c >= min_count), key=lambda wc: (-wc[1], wc[0]))
    if not kept:
        raise EmptyVocabularyError(f"no token occurs at least {min_count} times")
    return Vocabulary(tuple(w for w, _ in kept), tuple(c for _, c in kept))


@dataclass(frozen=True)
class Hyperparams:
    dim: int = 100
    lr: float = 0.1
    epochs: int = 5
    features: FeatureConfig = field(default_factory=FeatureConfig)
    min_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "Hyperparams":
        data = dict(data)
        data["features"] = FeatureConfig(**data["features"])
        return cls(**data)


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def init_rows(seed: int, rows, dim: int) -> np.ndarray:
    """Initial embedding rows, uniform in ``[-1/dim, 1/dim]``.

    Each entry is a splitmix64 hash of ``(seed, row, column)``, so any row
    can be regenerated on demand.
    """
    rows = np.asarray(rows, dtype=np.uint64).reshape(-1, 1)
    cols = np.arange(dim, dtype=np.uint64).reshape(1, -1)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) * _GOLDEN + rows * np.uint64(dim) + cols + np.uint64(1)
        z = z * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    unit = (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
    return (2.0 * unit - 1.0) / dim


@dataclass
class SubwordModel:
    """Trained classifier state.

    Attributes
    ----------
    vocab : Vocabulary
    hyperparams : Hyperparams
    row_ids : ndarray of int64, sorted
        Input-matrix rows that are stored explicitly.
    rows : ndarray, shape (len(row_ids), dim)
        Stored rows; all other rows equal ``init_rows(seed, ...)``.
    output : ndarray, shape (2, dim)
        Softmax weights; row 0 is NonRequirement, row 1 Requirement.
    """

    vocab: Vocabulary
    hyperparams: Hyperparams
    row_ids: np.ndarray
    rows: np.ndarray
    output: np.ndarray

    @property
    def config(self) -> FeatureConfig:
        return self.hyperparams.features

    @property
    def dim(self) -> int:
        return self.hyperparams.dim

    @property
    def n_rows(self) -> int:
        return len(self.vocab) + self.config.bucket_count

    def featurize(self, text: str) -> FeatureVector:
        return featurize(text, self.vocab, self.config)

    def input_rows(self, indices) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        out = np.empty((len(indices), self.dim), dtype=np.float64)
        pos = np.searchsorted(self.row_ids, indices)
        pos = np.minimum(pos, max(len(self.row_ids) - 1, 0))
        found = (self.row_ids[pos] == indices) if len(self.row_ids) else np.zeros(len(indices), bool)
        out[found] = self.rows[pos[found]]
        if not found.all():
            out[~found] = init_rows(self.hyperparams.seed, indices[~found], self.dim)
        return out


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def _pooling(rows: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Unique rows and their mean-pooling weights (multiplicity / total)."""
    uniq, counts = np.unique(np.asarray(rows, dtype=np.int64), return_counts=True)
    return uniq, counts / float(len(rows))


def forward(model: SubwordModel, fv: FeatureVector) -> tuple[float, float]:
    """``(p_nonreq, p_req)``; an empty feature vector gives ``(0.5, 0.5)``."""
    rows = fv.rows(len(model.vocab))
    if not rows:
        return 0.5, 0.5
    uniq, weights = _pooling(rows)
    hidden = weights @ model.input_rows(uniq)
    p = _softmax(model.output.astype(np.float64) @ hidden)
    return float(p[0]), float(p[1])


@dataclass
class Gradients:
    row_ids: np.ndarray
    input: np.ndarray
    output: np.ndarray


def loss_and_gradient(model: SubwordModel, fv: FeatureVector, gold) -> tuple[float, Gradients]:
    """Negative log-likelihood of `gold` and its exact gradients.

    Only the rows present in `fv` get input gradients, each scaled by its
    share of the mean pool.
    """
    target = gold.target if isinstance(gold, Label) else int(gold)
    rows = fv.rows(len(model.vocab))
    if not rows:
        raise ValueError("empty feature vector")
    uniq, weights = _pooling(rows)
    hidden = weights @ model.input_rows(uniq)
    output = model.output.astype(np.float64)
    p = _softmax(output @ hidden)
    loss = -math.log(p[target])
    dz = p.copy()
    dz[target] -= 1.0
    grad_hidden = output.T @ dz
    return loss, Gradients(uniq, np.outer(weights, grad_hidden), np.outer(dz, hidden))


def _prepare(dataset: LabeledDataset, vocab: Vocabulary, config: FeatureConfig):
    vocab_size = len(vocab)
    examples = []
    for unit in dataset.units:
        rows = featurize(unit.text, vocab, config).rows(vocab_size)
        if rows:
            uniq, weights = _pooling(rows)
            examples.append((uniq, weights, unit.label.target))
    return examples


def train(
    train: LabeledDataset,
    hp: Hyperparams,
    on_epoch: Callable[[int, float], None] | None = None,
) -> SubwordModel:
    """Fit the classifier by SGD with a linearly decaying learning rate.

    `on_epoch` receives ``(epoch, mean training loss)`` after every pass.
    """
    vocab = build_vocab(train, hp.features, hp.min_count)
    examples = _prepare(train, vocab, hp.features)
    if not examples:
        raise TrainingError("no training example has any feature")

    row_ids = np.unique(np.concatenate([ex[0] for ex in examples]))
    local = [(np.searchsorted(row_ids, uniq), weights, target) for uniq, weights, target in examples]
    emb = init_rows(hp.seed, row_ids, hp.dim)
    out = np.zeros((2, hp.dim))

    rng = np.random.default_rng(hp.seed)
    total = hp.epochs * len(local)
    step = 0
    for epoch in range(hp.epochs):
        order = rng.permutation(len(local))
        loss_sum = 0.0
        for k in order:
            idx, weights, target = local[k]
            lr = hp.lr * (1.0 - step / total)
            step += 1
            hidden = weights @ emb[idx]
            p = _softmax(out @ hidden)
            loss = -math.log(max(p[target], 1e-300))
            if not math.isfinite(loss) or not np.isfinite(hidden).all():
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, step {step} (lr={lr:g}, |h|={np.abs(hidden).max():g})"
                )
            loss_sum += loss
            dz = p
            dz[target] -= 1.0
            grad_hidden = out.T @ dz
            out -= lr * np.outer(dz, hidden)
            emb[idx] -= lr * np.outer(weights, grad_hidden)
        mean_loss = loss_sum / len(local)
        logger.debug("epoch %d mean loss %.6f", epoch, mean_loss)
        if on_epoch is not None:
            on_epoch(epoch, mean_loss)

    if not (np.isfinite(emb).all() and np.isfinite(out).all()):
        raise TrainingError("training produced non-finite weights")
    return SubwordModel(vocab, hp, row_ids.astype(np.int64), emb.astype(np.float32), out.astype(np.float32))


def predict_proba(model: SubwordModel, text: str) -> tuple[float, float]:
    return forward(model, model.featurize(text))


def predict(model: SubwordModel, text: str) -> tuple[Label, float]:
    """Most probable label and its probability; an exact tie is NonRequirement."""
    p_non, p_req = predict_proba(model, text)
    if p_req > p_non:
        return Label.REQUIREMENT, p_req
    return Label.NON_REQUIREMENT, p_non


def evaluate_f1(model: SubwordModel, dataset: LabeledDataset) -> float:
    """Requirement-class F1 on `dataset`; an undefined F1 counts as 0."""
    cm = ConfusionMatrix.from_pairs(
        (u.label, predict(model, u.text)[0]) for u in dataset.units
    )
    return f1_or_zero(cm)


# -- autotune ---------------------------------------------------------------

@dataclass(frozen=True)
class Trial:
    hyperparams: Hyperparams
    f1: float


@dataclass(frozen=True)
class AutotuneResult:
    best: Hyperparams
    best_f1: float
    trials: tuple[Trial, ...]


def sample_hyperparams(rng: np.random.Generator, seed: int) -> Hyperparams:
    dim = int(rng.integers(10, 301))
    lr = float(math.exp(rng.uniform(math.log(0.01), math.log(1.0))))
    epochs = int(rng.integers(1, 51))
    minn = int(rng.integers(0, 7))
    maxn = int(rng.integers(minn, 7))
    word_ngrams = int(rng.integers(1, 4))
    bucket = 1 << int(rng.integers(16, 23))
    features = FeatureConfig(minn, maxn, bucket, word_ngrams)
    return Hyperparams(dim, lr, epochs, features, 1, seed)


def autotune(
    train_set: LabeledDataset,
    validation: LabeledDataset,
    trials: int | None = None,
    seconds: float | None = None,
    seed: int = 0,
    lowercase: bool = True,
) -> AutotuneResult:
    """Random search maximizing validation Requirement-class F1.

    The budget is a trial count, a wall-clock limit in seconds, or both
    (whichever runs out first). A trial that starts within the time limit
    always completes.
    """
    if trials is None and seconds is None:
        raise ValueError("autotune needs a trial or time budget")
    shared = set(train_set.by_document) & set(validation.by_document)
    if shared:
        raise ValueError(f"train and validation share documents: {sorted(shared)[:5]}")
    rng = np.random.default_rng(seed)
    deadline = None if seconds is None else time.monotonic() + seconds
    done: list[Trial] = []
    best: Trial | None = None
    while trials is None or len(done) < trials:
        if deadline is not None and time.monotonic() >= deadline:
            break
        hp = sample_hyperparams(rng, seed)
        if not lowercase:
            hp = replace(hp, features=replace(hp.features, lowercase=False))
        model = train(train_set, hp)
        trial = Trial(hp, evaluate_f1(model, validation))
        logger.info("trial %d: f1=%.4f %s", len(done), trial.f1, hp)
        done.append(trial)
        if best is None or trial.f1 > best.f1:
            best = trial
    if best is None:
        raise RuntimeError("autotune completed no trials within its budget")
    return AutotuneResult(best.hyperparams, best.f1, tuple(done))


# -- model files ----------------------------------------------------------

def _write_blob(fh, data: bytes) -> None:
    fh.write(struct.pack("<I", len(data)))
    fh.write(data)


def _read_blob(fh) -> bytes:
    (size,) = struct.unpack("<I", _read_exact(fh, 4))
    return _read_exact(fh, size)


def _read_exact(fh, size: int) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise ModelFormatError("truncated model file")
    return data


def dumps_model(model: SubwordModel) -> bytes:
    fh = io.BytesIO()
    fh.write(MAGIC)
    fh.write(struct.pack("<I", FORMAT_VERSION))
    header = {
        "hyperparams": model.hyperparams.to_dict(),
        "labels": [Label.NON_REQUIREMENT.value, Label.REQUIREMENT.value],
        "n_stored_rows": int(len(model.row_ids)),
    }
    _write_blob(fh, json.dumps(header, sort_keys=True).encode("utf-8"))
    vocab = [[w, c] for w, c in zip(model.vocab.words, model.vocab.counts)]
    _write_blob(fh, json.dumps(vocab, ensure_ascii=False).encode("utf-8"))
    fh.write(np.asarray(model.row_ids, dtype="<u4").tobytes())
    fh.write(np.asarray(model.rows, dtype="<f4").tobytes())
    fh.write(np.asarray(model.output, dtype="<f4").tobytes())
    return fh.getvalue()


def loads_model(data: bytes) -> SubwordModel:
    fh = io.BytesIO(data)
    if fh.read(4) != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    (version,) = struct.unpack("<I", _read_exact(fh, 4))
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    header = json.loads(_read_blob(fh))
    hp = Hyperparams.from_dict(header["hyperparams"])
    pairs = json.loads(_read_blob(fh))
    vocab = Vocabulary(tuple(w for w, _ in pairs), tuple(c for _, c in pairs))
    n, dim = header["n_stored_rows"], hp.dim
    row_ids = np.frombuffer(_read_exact(fh, 4 * n), dtype="<u4").astype(np.int64)
    rows = np.frombuffer(_read_exact(fh, 4 * n * dim), dtype="<f4").reshape(n, dim).astype(np.float32)
    output = np.frombuffer(_read_exact(fh, 8 * dim), dtype="<f4").reshape(2, dim).astype(np.float32)
    if fh.read(1):
        raise ModelFormatError("trailing bytes after model data")
    return SubwordModel(vocab, hp, row_ids, rows, output)


def save_model(model: SubwordModel, path) -> None:
    Path(path).write_bytes(dumps_model(model))


def load_model(path) -> SubwordModel:
    return loads_model(Path(path).read_bytes())
