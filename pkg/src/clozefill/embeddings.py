"""Static word vectors and the co-occurrence estimate used for context rejection.

Pointwise mutual information between two words is approximated by the cosine
similarity of their pretrained skip-gram vectors, which avoids the missing
entries an empirical co-occurrence count matrix would have.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Optional, Union

import numpy as np

from .errors import FormatError


@dataclass
class EmbeddingTable:
    """Word-vector lookup with case fallback.

    Vectors are stored unit-normalized, so a cosine is a plain dot product.
    Zero vectors are rejected at load and never enter the table.
    """

    dimension: int
    _unit_vectors: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self._unit_vectors)

    def __contains__(self, token: str) -> bool:
        return self.lookup(token) is not None

    def lookup(self, token: str) -> Optional[np.ndarray]:
        """Unit vector for token: exact-case first, then lowercase."""
        vec = self._unit_vectors.get(token)
        if vec is None:
            vec = self._unit_vectors.get(token.lower())
        return vec


def load_embeddings(source: Union[str, Path, IO[str], IO[bytes]]) -> EmbeddingTable:
    """Load a word-vector table from the standard text format.

    The stream may start with a "count dim" header line; every other line is
    a token followed by `dim` floats, whitespace separated. Duplicate tokens
    keep their first vector. Raises FormatError on non-numeric entries or
    inconsistent dimensions.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            return load_embeddings(handle)
    if isinstance(source, io.BufferedIOBase) or (hasattr(source, "mode") and "b" in getattr(source, "mode", "")):
        source = io.TextIOWrapper(source, encoding="utf-8")  # type: ignore[arg-type]

    vectors: dict[str, np.ndarray] = {}
    dimension: Optional[int] = None
    for lineno, line in enumerate(source, start=1):
        parts = line.split()
        if not parts:
            continue
        if lineno == 1 and len(parts) == 2:
            try:
                int(parts[0]), int(parts[1])
            except ValueError:
                pass
            else:
                dimension = int(parts[1])
                continue
        token, raw_values = parts[0], parts[1:]
        try:
            values = np.array([float(v) for v in raw_values], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"line {lineno}: non-numeric vector entry") from exc
        if dimension is None:
            if len(values) == 0:
                raise FormatError(f"line {lineno}: no vector values")
            dimension = len(values)
        if len(values) != dimension:
            raise FormatError(
                f"line {lineno}: expected {dimension} values, got {len(values)}"
            )
        norm = float(np.linalg.norm(values))
        if norm == 0.0:
            continue
        if token not in vectors:
            vectors[token] = values / norm
    if dimension is None:
        raise FormatError("empty embedding stream")
    return EmbeddingTable(dimension=dimension, _unit_vectors=vectors)


def pmi_estimate(table: EmbeddingTable, x: str, y: str) -> Optional[float]:
    """Cosine similarity of the stored vectors for x and y.

    Returns None when either token is absent after case fallback; absence is
    a value here, not an error.
    """
    vx = table.lookup(x)
    vy = table.lookup(y)
    if vx is None or vy is None:
        return None
    return float(np.dot(vx, vy))
