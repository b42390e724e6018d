"""Independent brute-force oracles shared by unit and acceptance tests.

These deliberately avoid the engine's vectorized code paths: plain-python
loops, manual cosine, manual softmax, explicit tie handling.
"""
from __future__ import annotations

import math

from clozefill.model import ClozeQuery, is_punctuation
from clozefill.provider import ReferenceBackend


def manual_cos(a, b) -> float:
    dot = sum(float(x) * float(y) for x, y in zip(a, b))
    na = math.sqrt(sum(float(x) ** 2 for x in a))
    nb = math.sqrt(sum(float(y) ** 2 for y in b))
    return dot / (na * nb)


def exhaustive_anchor_oracle(backend: ReferenceBackend, query: ClozeQuery) -> tuple[int, list[float]]:
    """Redistribute the FULL vocabulary's probability mass onto context
    positions by double loop and return (argmax position, mass vector)."""
    vocabulary = backend.vocabulary
    total = sum(vocabulary.values())
    candidates = [(tok, w / total) for tok, w in vocabulary.items() if not is_punctuation(tok)]

    n = query.context_len
    mass = [0.0] * n
    for token, prob in candidates:
        seq = list(query.tokens)
        seq[query.mask_index] = token
        emb = backend.embed_sequence(tuple(seq))
        slot = emb.vectors[query.mask_index]
        raw = [manual_cos(emb.vectors[i], slot) for i in range(n)]
        peak = max(raw)
        exps = [math.exp(v - peak) for v in raw]
        denominator = sum(exps)
        for i in range(n):
            mass[i] += prob * (exps[i] / denominator)
    best = 0
    for i in range(1, n):
        if mass[i] > mass[best]:
            best = i
    return best, mass
