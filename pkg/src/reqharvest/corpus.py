"""Labeled sentence data model, JSONL dataset files and document-disjoint splits."""

from __future__ import annotations

import enum
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class Label(str, enum.Enum):
    REQUIREMENT = "req"
    NON_REQUIREMENT = "nonreq"

    @property
    def target(self) -> int:
        """Class index used by the classifiers (Requirement is class 1)."""
        return 1 if self is Label.REQUIREMENT else 0

    @classmethod
    def from_target(cls, value: int) -> "Label":
        return cls.REQUIREMENT if value == 1 else cls.NON_REQUIREMENT


class Fold(str, enum.Enum):
    TRAIN = "train"
    TEST = "test"
    VALIDATION = "validation"


FOLDS = (Fold.TRAIN, Fold.TEST, Fold.VALIDATION)


class DatasetError(ValueError):
    """Malformed or invalid dataset content."""

    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        self.detail = message
        if line is not None:
            message = f"line {line}: {message}"
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


class InfeasibleSplitError(ValueError):
    """No document assignment satisfied the split tolerance."""

    def __init__(self, message: str, best_deviation: float):
        self.best_deviation = best_deviation
        super().__init__(f"{message} (best achievable deviation {best_deviation:.4f})")


@dataclass(frozen=True)
class SentenceUnit:
    id: str
    doc_id: str
    text: str
    label: Label | None = None


@dataclass(frozen=True)
class LabeledDataset:
    """An ordered collection of sentence units grouped by source document.

    Construction does not validate; use :func:`validate_dataset` for a
    report or :func:`load_dataset`, which rejects invalid files.
    """

    units: tuple[SentenceUnit, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))

    def __len__(self) -> int:
        return len(self.units)

    def __iter__(self):
        return iter(self.units)

    @property
    def by_document(self) -> dict[str, list[str]]:
        index: dict[str, list[str]] = {}
        for unit in self.units:
            index.setdefault(unit.doc_id, []).append(unit.id)
        return index

    @property
    def doc_ids(self) -> list[str]:
        return list(self.by_document)

    @property
    def counts(self) -> tuple[int, int]:
        """``(n_requirement, n_nonrequirement)`` over labeled units."""
        tally = Counter(u.label for u in self.units)
        return tally[Label.REQUIREMENT], tally[Label.NON_REQUIREMENT]

    @property
    def texts(self) -> list[str]:
        return [u.text for u in self.units]

    @property
    def labels(self) -> list[Label | None]:
        return [u.label for u in self.units]

    def subset(self, doc_ids: Iterable[str]) -> "LabeledDataset":
        keep = set(doc_ids)
        return LabeledDataset(tuple(u for u in self.units if u.doc_id in keep))


@dataclass(frozen=True)
class Finding:
    kind: str
    unit_id: str
    position: int
    detail: str = ""

    def __str__(self) -> str:
        text = f"unit {self.position} ({self.unit_id!r}): {self.kind}"
        return f"{text}: {self.detail}" if self.detail else text


@dataclass(frozen=True)
class SplitSpec:
    assignment: Mapping[str, Fold]
    ratios: tuple[float, float, float]
    seed: int
    tolerance: float = 0.05

    def fold_of(self, doc_id: str) -> Fold:
        return self.assignment[doc_id]

    def to_json(self) -> dict:
        return {
            "ratios": list(self.ratios),
            "tolerance": self.tolerance,
            "seed": self.seed,
            "assignment": {doc: fold.value for doc, fold in sorted(self.assignment.items())},
        }


def _has_alpha(text: str) -> bool:
    return any(ch.isalpha() for ch in text)


def validate_dataset(dataset: LabeledDataset, require_labels: bool = True) -> list[Finding]:
    """Return every invariant violation in `dataset`; an empty list means valid."""
    findings = []
    seen: dict[str, int] = {}
    for pos, unit in enumerate(dataset.units):
        if not unit.id:
            findings.append(Finding("empty id", unit.id, pos))
        elif unit.id in seen:
            findings.append(
                Finding("duplicate id", unit.id, pos, f"first seen at unit {seen[unit.id]}")
            )
        else:
            seen[unit.id] = pos
        if not unit.doc_id:
            findings.append(Finding("empty doc_id", unit.id, pos))
        if not unit.text.strip():
            findings.append(Finding("empty text", unit.id, pos))
        elif not _has_alpha(unit.text):
            findings.append(Finding("no alphabetic character", unit.id, pos))
        if unit.label is None:
            if require_labels:
                findings.append(Finding("missing label", unit.id, pos))
        elif not isinstance(unit.label, Label):
            findings.append(Finding("unknown label", unit.id, pos, repr(unit.label)))
    return findings


def _meta_path(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def _parse_record(line: str, lineno: int) -> SentenceUnit:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"malformed JSON ({exc.msg})", lineno) from None
    if not isinstance(record, dict):
        raise DatasetError("record is not a JSON object", lineno)
    for key in ("id", "doc_id", "text"):
        if not isinstance(record.get(key), str):
            raise DatasetError(f"missing or non-string {key!r}", lineno)
    extra = set(record) - {"id", "doc_id", "text", "label"}
    if extra:
        raise DatasetError(f"unexpected keys {sorted(extra)}", lineno)
    raw_label = record.get("label")
    label = None
    if raw_label is not None:
        try:
            label = Label(raw_label)
        except ValueError:
            raise DatasetError(f"unknown label {raw_label!r}", lineno) from None
    if not record["text"].strip():
        raise DatasetError("empty text", lineno)
    if not _has_alpha(record["text"]):
        raise DatasetError("text has no alphabetic character", lineno)
    if not record["doc_id"]:
        raise DatasetError("empty doc_id", lineno)
    return SentenceUnit(record["id"], record["doc_id"], record["text"], label)


def load_dataset(path) -> LabeledDataset:
    """Read a JSONL dataset file, rejecting malformed records with their line number."""
    path = Path(path)
    try:
        return _load(path)
    except DatasetError as exc:
        raise DatasetError(exc.detail, exc.line, path) from None


def _load(path: Path) -> LabeledDataset:
    units = []
    first_line: dict[str, int] = {}
    with open(path, encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            unit = _parse_record(line, lineno)
            if unit.id in first_line:
                raise DatasetError(
                    f"duplicate id {unit.id!r} (first at line {first_line[unit.id]})", lineno
                )
            first_line[unit.id] = lineno
            units.append(unit)
    dataset = LabeledDataset(tuple(units))
    meta = _meta_path(path)
    if meta.exists():
        counts = json.loads(meta.read_text(encoding="utf-8")).get("counts")
        if counts is not None and tuple(counts) != dataset.counts:
            raise DatasetError(f"sidecar counts {counts} disagree with records {dataset.counts}")
    return dataset


def unit_to_record(unit: SentenceUnit) -> dict:
    record = {"id": unit.id, "doc_id": unit.doc_id, "text": unit.text}
    if unit.label is not None:
        record["label"] = unit.label.value
    return record


def dumps_unit(unit: SentenceUnit) -> str:
    return json.dumps(unit_to_record(unit), ensure_ascii=False)


def save_dataset(dataset: LabeledDataset, path, provenance: Mapping | None = None) -> None:
    """Write `dataset` as JSONL plus a ``.meta.json`` sidecar with counts."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for unit in dataset.units:
            fh.write(dumps_unit(unit) + "\n")
    meta = {
        "n_units": len(dataset),
        "n_documents": len(dataset.by_document),
        "counts": list(dataset.counts),
    }
    if provenance:
        meta["provenance"] = dict(provenance)
    with open(_meta_path(path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


# -- splitting ---------------------------------------------------------------

@dataclass
class _FoldState:
    target: float
    size: int = 0
    n_req: int = 0
    docs: list = field(default_factory=list)


def _assign_greedy(docs, stats, ratios, n_total, n_req_total):
    n_non_total = n_total - n_req_total
    folds = [_FoldState(r) for r in ratios]
    for doc in docs:
        size, n_req = stats[doc]
        n_non = size - n_req
        best, best_score = 0, None
        for k, fold in enumerate(folds):
            if fold.target <= 0:
                continue
            # deficit of the classes this document actually contributes
            req_def = fold.target * n_req_total - fold.n_req
            non_def = fold.target * n_non_total - (fold.size - fold.n_req)
            score = (n_req * req_def + n_non * non_def) / size
            if best_score is None or score > best_score:
                best, best_score = k, score
        folds[best].size += size
        folds[best].n_req += n_req
        folds[best].docs.append(doc)
    return folds


def _deviation(folds, n_total, n_req_total, tolerance):
    """Worst constraint violation, normalized so that <= tolerance means feasible."""
    overall = n_req_total / n_total
    worst = 0.0
    for fold in folds:
        worst = max(worst, abs(fold.size / n_total - fold.target))
        if fold.target > 0 and fold.size == 0:
            worst = max(worst, fold.target, tolerance + 1e-12)
        if fold.size:
            worst = max(worst, abs(fold.n_req / fold.size - overall) / 2.0)
    return worst


def split_by_document(
    dataset: LabeledDataset,
    ratios: Sequence[float] = (0.7, 0.2, 0.1),
    tolerance: float = 0.05,
    seed: int = 0,
    max_attempts: int = 200,
) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset, SplitSpec]:
    """Partition `dataset` into train/test/validation folds by whole documents.

    Documents are shuffled by `seed` and each is assigned greedily to the
    fold with the largest remaining deficit for the classes it carries.
    An assignment is accepted when every fold's sentence fraction is within
    `tolerance` of its ratio and its requirement fraction within
    ``2 * tolerance`` of the overall one; otherwise the documents are
    reshuffled, up to `max_attempts` times.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative fractions summing to 1, got {ratios}")
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    unlabeled = [u.id for u in dataset.units if u.label is None]
    if unlabeled:
        raise DatasetError(f"cannot split unlabeled units: {unlabeled[:5]}")

    stats: dict[str, tuple[int, int]] = {}
    for unit in dataset.units:
        size, n_req = stats.get(unit.doc_id, (0, 0))
        stats[unit.doc_id] = (size + 1, n_req + (unit.label is Label.REQUIREMENT))
    needed = sum(1 for r in ratios if r > 0)
    if len(stats) < max(3, needed):
        raise InfeasibleSplitError(
            f"{len(stats)} documents cannot fill three document-disjoint folds", 1.0
        )

    n_total = len(dataset)
    n_req_total = dataset.counts[0]
    rng = random.Random(seed)
    docs = sorted(stats)
    best_dev, best_folds = None, None
    for _ in range(max_attempts):
        rng.shuffle(docs)
        folds = _assign_greedy(docs, stats, ratios, n_total, n_req_total)
        dev = _deviation(folds, n_total, n_req_total, tolerance)
        if best_dev is None or dev < best_dev:
            best_dev, best_folds = dev, folds
        if dev <= tolerance:
            break
    if best_dev > tolerance:
        raise InfeasibleSplitError("no document assignment satisfies the tolerance", best_dev)

    assignment = {doc: fold for fold, state in zip(FOLDS, best_folds) for doc in state.docs}
    spec = SplitSpec(dict(sorted(assignment.items())), ratios, seed, tolerance)
    parts = tuple(dataset.subset(state.docs) for state in best_folds)
    return parts[0], parts[1], parts[2], spec
