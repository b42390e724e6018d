"""Anchor token identification.

The language model's masked-slot probability mass is redistributed onto
context positions. For each proposal token v (a top-k prediction that is not
pure punctuation), the query with v filled in is embedded once; the cosine
between each context position's vector and the filled slot's vector is
softmax-normalized over context positions into a compatibility row. The
anchor is the context position maximizing

    sum over proposals v of  p(v) * compatibility(position, v)

which needs k+1 forward passes: one for the top-k prediction plus one
embedding pass per surviving proposal.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EmptyProposal
from .model import ClozeQuery, is_punctuation
from .provider import LanguageModelProvider, MaskedDistribution
from .templating import fill_object

DEFAULT_TOP_K = 16


@dataclass(frozen=True)
class ProposalSet:
    """Top-k candidates with punctuation removed; probabilities NOT renormalized."""

    candidates: tuple[tuple[str, float], ...]

    def __len__(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class CompatibilityRow:
    """Per-context-position affinity of one proposal token.

    normalized is a distribution over context positions (sums to 1).
    """

    candidate: str
    unnormalized: tuple[float, ...]
    normalized: tuple[float, ...]


@dataclass(frozen=True)
class AnchorResult:
    position: int
    score: float
    rows: tuple[CompatibilityRow, ...]
    proposal: ProposalSet


def filter_punctuation(distribution: MaskedDistribution) -> ProposalSet:
    kept = tuple((tok, p) for tok, p in distribution.candidates if not is_punctuation(tok))
    if not kept:
        raise EmptyProposal("every candidate was punctuation")
    return ProposalSet(candidates=kept)


def propose(provider: LanguageModelProvider, query: ClozeQuery, k: int) -> ProposalSet:
    """Top-k mask candidates with punctuation-only tokens dropped.

    The probability mass of dropped candidates is discarded, not reassigned;
    the downstream argmax is invariant to the missing normalization.
    """
    return filter_punctuation(provider.topk_mask(query, k))


def _cosine_rows(vectors: np.ndarray, against: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1) * np.linalg.norm(against)
    dots = vectors @ against
    out = np.zeros(len(vectors))
    nonzero = norms > 0
    out[nonzero] = dots[nonzero] / norms[nonzero]
    return out


def _softmax(values: np.ndarray) -> np.ndarray:
    shifted = np.exp(values - np.max(values))
    return shifted / np.sum(shifted)


def compatibility(provider: LanguageModelProvider, query: ClozeQuery, candidate: str) -> CompatibilityRow:
    """Compatibility of one candidate with every context position.

    Embeds the query with the candidate substituted into the masked slot and
    softmax-normalizes, over context positions only, the cosine between each
    context vector and the filled slot's vector.
    """
    filled = fill_object(query, candidate)
    embedded = provider.embed_sequence(filled)
    slot_vector = embedded.vectors[query.mask_index]
    context_vectors = embedded.vectors[: query.context_len]
    raw = _cosine_rows(context_vectors, slot_vector)
    return CompatibilityRow(
        candidate=candidate,
        unnormalized=tuple(float(v) for v in raw),
        normalized=tuple(float(v) for v in _softmax(raw)),
    )


def combine_rows(proposal: ProposalSet, rows: tuple[CompatibilityRow, ...]) -> np.ndarray:
    """Probability mass landing on each context position (the redistribution sum)."""
    if len(rows) != len(proposal.candidates):
        raise ValueError("one compatibility row per proposal candidate required")
    mass = np.zeros(len(rows[0].normalized))
    for (_, prob), row in zip(proposal.candidates, rows):
        mass += prob * np.asarray(row.normalized)
    return mass


def anchor(
    provider: LanguageModelProvider,
    query: ClozeQuery,
    k: int = DEFAULT_TOP_K,
    workers: int = 1,
) -> AnchorResult:
    """Pick the context position that accumulates the most redistributed mass.

    Ties break toward the lowest position index. Skipping embedding passes
    for punctuation-filtered candidates keeps the provider cost at most k+1
    forward passes, with equality when nothing is filtered.
    """
    proposal = propose(provider, query, k)
    candidates = [tok for tok, _ in proposal.candidates]
    if workers > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = tuple(pool.map(lambda c: compatibility(provider, query, c), candidates))
    else:
        rows = tuple(compatibility(provider, query, c) for c in candidates)
    mass = combine_rows(proposal, rows)
    position = int(np.argmax(mass))  # first occurrence wins ties
    return AnchorResult(position=position, score=float(mass[position]), rows=rows, proposal=proposal)
