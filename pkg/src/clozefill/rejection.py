"""Context rejection: score candidate pairs against the filled template and
partition them into accept/reject clusters.

A pair's score is the mean, over scorable filled-template tokens, of the best
cosine similarity that token achieves against any scorable context token.
The intuition: if every template word co-occurs strongly with some context
word, the context likely expresses the relation. A per-relation threshold
epsilon = mean - lambda * stddev (population statistics over the relation's
finite scores) splits pairs; scores strictly above epsilon are accepted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embeddings import EmbeddingTable
from .errors import EmptyScores
from .model import TokenSeq
from .templating import FilledTemplate

#: Score assigned when no template token is scorable; always rejected and
#: excluded from threshold estimation.
REJECT_SENTINEL = float("-inf")

#: Lambda values tried by grid search when tuning is requested.
LAMBDA_GRID = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)

DEFAULT_LAMBDA = 1.0


@dataclass(frozen=True)
class RejectionScore:
    pair_index: int
    value: float


@dataclass(frozen=True)
class RejectionThreshold:
    mean: float
    stddev: float
    lam: float

    def __post_init__(self) -> None:
        if self.lam < 0 or self.stddev < 0:
            raise ValueError("lambda and stddev must be non-negative")

    @property
    def epsilon(self) -> float:
        return self.mean - self.lam * self.stddev


@dataclass(frozen=True)
class Partition:
    accepted: tuple[int, ...]
    rejected: tuple[int, ...]


def score_pair(table: EmbeddingTable, context: TokenSeq, filled: FilledTemplate) -> float:
    """Score one (context, filled template) pair.

    The object slot is excluded from the template side.  Tokens without a
    vector (after case fallback) are skipped on both sides; if that leaves
    nothing scorable the sentinel is returned, which forces rejection.
    """
    if not context:
        raise ValueError("context must be non-empty")
    context_vectors = [v for v in (table.lookup(t) for t in context) if v is not None]
    if not context_vectors:
        return REJECT_SENTINEL
    context_matrix = np.stack(context_vectors)

    best_per_template_token: list[float] = []
    for index, token in enumerate(filled.tokens):
        if index == filled.object_index:
            continue
        vec = table.lookup(token)
        if vec is None:
            continue
        best_per_template_token.append(float(np.max(context_matrix @ vec)))
    if not best_per_template_token:
        return REJECT_SENTINEL
    return float(np.mean(best_per_template_token))


def fit_threshold(scores: Sequence[RejectionScore], lam: float) -> RejectionThreshold:
    """Population mean/stddev of the finite scores, combined with lambda.

    Sentinel scores carry no information about valid pairs and are excluded
    from the estimate (they are still rejected by partition).
    """
    finite = [s.value for s in scores if math.isfinite(s.value)]
    if not finite:
        raise EmptyScores("no finite scores to fit a threshold from")
    mean = float(np.mean(finite))
    stddev = float(np.std(finite))  # population normalizer, 1/N
    return RejectionThreshold(mean=mean, stddev=stddev, lam=lam)


def partition(scores: Sequence[RejectionScore], threshold: RejectionThreshold) -> Partition:
    """Split pairs on a strict comparison: accepted iff score > epsilon.

    Ties and sentinel scores are rejected. Downstream, every rejected pair
    yields the explicit no-answer extraction.
    """
    accepted: list[int] = []
    rejected: list[int] = []
    for s in scores:
        if math.isfinite(s.value) and s.value > threshold.epsilon:
            accepted.append(s.pair_index)
        else:
            rejected.append(s.pair_index)
    return Partition(accepted=tuple(accepted), rejected=tuple(rejected))
