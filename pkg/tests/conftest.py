import json

import numpy as np
import pytest

from clozefill.embeddings import EmbeddingTable
from clozefill.provider import ReferenceBackend


def make_table(vectors: dict[str, list[float]]) -> EmbeddingTable:
    """Build an EmbeddingTable directly from raw (unnormalized) vectors."""
    unit = {}
    dim = None
    for token, values in vectors.items():
        arr = np.asarray(values, dtype=np.float64)
        dim = len(arr) if dim is None else dim
        assert len(arr) == dim
        unit[token] = arr / np.linalg.norm(arr)
    assert dim is not None
    return EmbeddingTable(dimension=dim, _unit_vectors=unit)


@pytest.fixture
def abc_backend() -> ReferenceBackend:
    """Three-token vocabulary with weights a:2, b:1, c:1."""
    return ReferenceBackend({"a": 2.0, "b": 1.0, "c": 1.0}, dimension=16, seed=7)


def write_fixture(path, vocabulary, dimension=32, seed=0):
    path.write_text(
        json.dumps({"dimension": dimension, "seed": seed, "vocabulary": vocabulary}),
        encoding="utf-8",
    )
    return path
