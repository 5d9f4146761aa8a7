"""Sentence embeddings supplied by an external model: files and an HTTP provider."""

from __future__ import annotations

import json
import logging
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class EmbeddingFormatError(ValueError):
    pass


class EmbeddingProviderError(RuntimeError):
    pass


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    vectors: Mapping[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, sentence_id) -> bool:
        return sentence_id in self.vectors

    def matrix(self, ids: Sequence[str]) -> np.ndarray:
        """Stack the vectors of `ids` in order; unknown ids raise KeyError."""
        missing = [i for i in ids if i not in self.vectors]
        if missing:
            raise KeyError(f"no embedding for {len(missing)} id(s): {', '.join(missing[:10])}")
        if not ids:
            return np.zeros((0, self.dim))
        return np.stack([self.vectors[i] for i in ids])


def load_embeddings(path) -> EmbeddingTable:
    """Read ``dim=<D>`` followed by ``<id> <v1> ... <vD>`` lines."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise EmbeddingFormatError(f"{path}: first line must be 'dim=<D>', got {header!r}")
        try:
            dim = int(header[4:])
        except ValueError:
            raise EmbeddingFormatError(f"{path}: bad dimension in header {header!r}") from None
        if dim < 1:
            raise EmbeddingFormatError(f"{path}: dimension must be positive")
        vectors: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            sid, values = parts[0], parts[1:]
            if len(values) != dim:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: id {sid!r} has {len(values)} values, header says dim={dim}"
                )
            try:
                vec = np.array([float(v) for v in values])
            except ValueError:
                raise EmbeddingFormatError(f"{path}:{lineno}: id {sid!r} has a non-numeric value") from None
            if not np.isfinite(vec).all():
                raise EmbeddingFormatError(f"{path}:{lineno}: id {sid!r} has a non-finite value")
            if sid in vectors:
                raise EmbeddingFormatError(f"{path}:{lineno}: duplicate id {sid!r}")
            vectors[sid] = vec
    return EmbeddingTable(dim, vectors)


def save_embeddings(table: EmbeddingTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"dim={table.dim}\n")
        for sid, vec in table.vectors.items():
            fh.write(sid + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def _post(endpoint: str, texts: list[str], timeout: float) -> dict:
    body = json.dumps({"texts": texts}).encode("utf-8")
    request = urllib.request.Request(
        endpoint, data=body, method="POST", headers={"Content-Type": "application/json"}
    )
    with urllib.request.urlopen(request, timeout=timeout) as response:
        return json.loads(response.read().decode("utf-8"))


def fetch_embeddings(
    endpoint: str,
    texts: Sequence[str],
    batch_size: int = 32,
    attempts: int = 3,
    backoff: float = 0.5,
    timeout: float = 60.0,
) -> list[np.ndarray]:
    """Embed `texts` through an HTTP provider, preserving order.

    Each batch is POSTed as ``{"texts": [...]}`` and must answer with
    ``{"vectors": [[...], ...], "dim": D}``. HTTP 5xx and connection failures
    are retried with exponential backoff; 4xx responses fail immediately.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    texts = list(texts)
    vectors: list[np.ndarray] = []
    dim = None
    for start in range(0, len(texts), batch_size):
        batch = texts[start:start + batch_size]
        payload = None
        for attempt in range(attempts):
            try:
                payload = _post(endpoint, batch, timeout)
                break
            except urllib.error.HTTPError as exc:
                if exc.code < 500:
                    raise EmbeddingProviderError(f"provider rejected batch at {start}: HTTP {exc.code}") from exc
                error = f"HTTP {exc.code}"
            except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
                error = str(exc)
            if attempt + 1 < attempts:
                delay = backoff * 2 ** attempt
                logger.warning("embedding batch at %d failed (%s); retrying in %.2fs", start, error, delay)
                time.sleep(delay)
        if payload is None:
            raise EmbeddingProviderError(f"provider failed after {attempts} attempts: {error}")
        batch_vectors = payload.get("vectors")
        if not isinstance(batch_vectors, list) or len(batch_vectors) != len(batch):
            raise EmbeddingProviderError(f"provider returned a malformed batch at {start}")
        for vec in batch_vectors:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim != 1 or not np.isfinite(arr).all():
                raise EmbeddingProviderError("provider returned a non-finite or non-flat vector")
            declared = payload.get("dim", len(arr))
            if dim is None:
                dim = len(arr)
            if len(arr) != dim or declared != dim:
                raise EmbeddingProviderError(
                    f"inconsistent embedding dimension: expected {dim}, got {len(arr)} (declared {declared})"
                )
            vectors.append(arr)
    return vectors
