"""Masked-language-model providers.

Two implementations of one interface: a deterministic reference backend whose
behavior is fully enumerable (for oracle verification), and an HTTP client
for a model sidecar. Both count forward passes so the k+1 cost claim of the
anchor procedure is checkable.

Wire protocol served by the sidecar and consumed by RemoteProvider:
    GET  /meta   -> {"mask_token": str, "dimension": int, ...}
    POST /topk   {"tokens": [str], "mask_index": int, "k": int}
                 -> {"candidates": [{"token": str, "prob": float}]}
    POST /embed  {"tokens": [str]} -> {"vectors": [[float]]}
All token lists are whitespace-level tokens; subword handling is entirely
the server's concern.
"""
from __future__ import annotations

import hashlib
import json
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np
import requests

from .errors import BackendUnavailable, EmptySequence, MalformedQuery
from .model import ClozeQuery, as_tokens

REFERENCE_MASK_TOKEN = "[MASK]"


@dataclass(frozen=True)
class MaskedDistribution:
    """Top-k candidates for a masked slot, ordered by (probability desc, token asc)."""

    candidates: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        total = 0.0
        for token, prob in self.candidates:
            if not (0.0 < prob <= 1.0):
                raise ValueError(f"probability for {token!r} outside (0, 1]: {prob}")
            total += prob
        if total > 1.0 + 1e-6:
            raise ValueError(f"candidate probabilities sum to {total} > 1")
        keys = [(-prob, token) for token, prob in self.candidates]
        if any(a >= b for a, b in zip(keys, keys[1:])):
            raise ValueError("candidates must be strictly ordered by (prob desc, token asc)")

    def __len__(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class ContextualEmbeddingSequence:
    """One vector per input token, in input order."""

    dimension: int
    vectors: np.ndarray  # shape (n, dimension), read-only

    def __post_init__(self) -> None:
        if self.vectors.ndim != 2 or self.vectors.shape[1] != self.dimension:
            raise ValueError("vectors must have shape (n, dimension)")

    def __len__(self) -> int:
        return int(self.vectors.shape[0])


@dataclass(frozen=True)
class ProviderStats:
    forward_passes: int


class LanguageModelProvider(ABC):
    """Interface every backend implements; instances tolerate concurrent calls."""

    def __init__(self) -> None:
        self._stats_lock = threading.Lock()
        self._forward_passes = 0

    def _count_pass(self) -> None:
        with self._stats_lock:
            self._forward_passes += 1

    @property
    def stats(self) -> ProviderStats:
        with self._stats_lock:
            return ProviderStats(forward_passes=self._forward_passes)

    def reset_stats(self) -> None:
        with self._stats_lock:
            self._forward_passes = 0

    @abstractmethod
    def mask_token(self) -> str:
        """The reserved mask surface form this backend expects."""

    @abstractmethod
    def topk_mask(self, query: ClozeQuery, k: int) -> MaskedDistribution:
        """Top-k candidates for the masked slot of query. One forward pass."""

    @abstractmethod
    def embed_sequence(self, tokens: Sequence[str]) -> ContextualEmbeddingSequence:
        """Contextual embedding per token. One forward pass."""


def _validate_query(query: ClozeQuery, mask: str, k: int) -> None:
    if k < 1:
        raise ValueError("k must be >= 1")
    positions = [i for i, t in enumerate(query.tokens) if t == mask]
    if positions != [query.mask_index]:
        raise MalformedQuery(
            f"query must contain exactly one {mask!r} at mask_index; found at {positions}"
        )


class ReferenceBackend(LanguageModelProvider):
    """Deterministic stand-in for a masked language model.

    Mask predictions are the normalized unigram weights of a fixture
    vocabulary, independent of query content. Embeddings are seeded hash
    vectors of (token, position parity), unit length, so tests can construct
    known cosine structures and brute-force every formula.

    Fixture file: JSON {"dimension": int, "seed": int, "vocabulary": {token: weight}}.
    """

    def __init__(self, vocabulary: Mapping[str, float], dimension: int = 32, seed: int = 0) -> None:
        super().__init__()
        if not vocabulary:
            raise ValueError("vocabulary must be non-empty")
        for token, weight in vocabulary.items():
            if weight <= 0:
                raise ValueError(f"unigram weight for {token!r} must be positive")
        self._vocabulary = dict(vocabulary)
        self._dimension = dimension
        self._seed = seed
        self._vector_cache: dict[tuple[str, int], np.ndarray] = {}
        total = sum(self._vocabulary.values())
        ranked = sorted(
            ((token, weight / total) for token, weight in self._vocabulary.items()),
            key=lambda item: (-item[1], item[0]),
        )
        self._distribution = tuple(ranked)

    @classmethod
    def from_fixture(cls, path: Union[str, Path]) -> "ReferenceBackend":
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
        return cls(
            vocabulary=data["vocabulary"],
            dimension=int(data.get("dimension", 32)),
            seed=int(data.get("seed", 0)),
        )

    @property
    def vocabulary(self) -> dict[str, float]:
        return dict(self._vocabulary)

    @property
    def dimension(self) -> int:
        return self._dimension

    def mask_token(self) -> str:
        return REFERENCE_MASK_TOKEN

    def topk_mask(self, query: ClozeQuery, k: int) -> MaskedDistribution:
        _validate_query(query, REFERENCE_MASK_TOKEN, k)
        self._count_pass()
        return MaskedDistribution(candidates=self._distribution[: min(k, len(self._distribution))])

    def token_vector(self, token: str, position: int) -> np.ndarray:
        """Deterministic unit vector for (token, position parity)."""
        key = (token, position % 2)
        cached = self._vector_cache.get(key)
        if cached is not None:
            return cached
        digest = hashlib.sha256(f"{self._seed}|{key[0]}|{key[1]}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        vec = rng.standard_normal(self._dimension)
        vec /= np.linalg.norm(vec)
        vec.flags.writeable = False
        self._vector_cache[key] = vec
        return vec

    def embed_sequence(self, tokens: Sequence[str]) -> ContextualEmbeddingSequence:
        seq = as_tokens(tokens)
        if not seq:
            raise EmptySequence("cannot embed an empty sequence")
        self._count_pass()
        vectors = np.stack([self.token_vector(tok, i) for i, tok in enumerate(seq)])
        vectors.flags.writeable = False
        return ContextualEmbeddingSequence(dimension=self._dimension, vectors=vectors)


class RemoteProvider(LanguageModelProvider):
    """Client for a model sidecar speaking the JSON-over-HTTP protocol.

    The sidecar is deterministic, so both /topk and /embed are idempotent and
    retried up to `max_retries` times with exponential backoff before raising
    BackendUnavailable. 4xx responses are never retried: they describe a
    request the server will always refuse.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff: float = 0.25,
    ) -> None:
        super().__init__()
        self._base_url = base_url.rstrip("/")
        self._timeout = timeout
        self._max_retries = max_retries
        self._backoff = backoff
        self._session = requests.Session()
        meta = self._request("GET", "/meta")
        self._mask_token = str(meta["mask_token"])
        self._dimension = int(meta["dimension"])

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        url = self._base_url + path
        last_error: Exception | None = None
        for attempt in range(self._max_retries + 1):
            try:
                response = self._session.request(method, url, json=payload, timeout=self._timeout)
                if response.status_code in (400, 413, 422):
                    raise MalformedQuery(f"{path}: {response.status_code} {response.text}")
                response.raise_for_status()
                return response.json()
            except MalformedQuery:
                raise
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
                if attempt < self._max_retries:
                    time.sleep(self._backoff * (2**attempt))
        raise BackendUnavailable(f"{url} unreachable after {self._max_retries + 1} attempts") from last_error

    @property
    def dimension(self) -> int:
        return self._dimension

    def mask_token(self) -> str:
        return self._mask_token

    def topk_mask(self, query: ClozeQuery, k: int) -> MaskedDistribution:
        _validate_query(query, self._mask_token, k)
        body = {"tokens": list(query.tokens), "mask_index": query.mask_index, "k": k}
        data = self._request("POST", "/topk", body)
        candidates = tuple((str(c["token"]), float(c["prob"])) for c in data["candidates"])
        self._count_pass()
        return MaskedDistribution(candidates=candidates)

    def embed_sequence(self, tokens: Sequence[str]) -> ContextualEmbeddingSequence:
        seq = as_tokens(tokens)
        if not seq:
            raise EmptySequence("cannot embed an empty sequence")
        data = self._request("POST", "/embed", {"tokens": list(seq)})
        vectors = np.asarray(data["vectors"], dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(seq) or vectors.shape[1] != self._dimension:
            raise BackendUnavailable(
                f"/embed returned shape {vectors.shape}, expected ({len(seq)}, {self._dimension})"
            )
        vectors.flags.writeable = False
        self._count_pass()
        return ContextualEmbeddingSequence(dimension=self._dimension, vectors=vectors)
