"""Extraction scoring (exact match and token-overlap F1), per-relation
aggregation, error categorization, and relation-classification adaptation.

Scoring follows the SQuAD convention: answers are normalized by lowercasing,
stripping punctuation tokens and articles; F1 counts token multiplicity.
Headline numbers are macro averages: mean per relation, then the unweighted
mean of relation means.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .model import (
    NO_ANSWER,
    Answer,
    EntityContextPair,
    ExtractionResult,
    NoAnswer,
    Span,
    TokenSeq,
    as_tokens,
    is_punctuation,
)

logger = logging.getLogger(__name__)

_ARTICLES = frozenset({"a", "an", "the"})

# Error categories for non-exact predictions.
EXACT_MATCH = "exact_match"
NO_OVERLAP = "no_overlap"
LONGER = "longer_by"
SHORTER_OR_SHIFTED = "shorter_or_shifted"
SHOULD_REJECT = "should_reject"  # predicted an answer, gold is no-answer
SHOULD_ACCEPT = "should_accept"  # predicted no-answer, gold has one


def normalize(tokens: Iterable[str]) -> TokenSeq:
    """Lowercase and drop punctuation-only tokens and articles."""
    out = []
    for token in tokens:
        lowered = token.lower()
        if is_punctuation(token) or lowered in _ARTICLES:
            continue
        out.append(lowered)
    return tuple(out)


@dataclass(frozen=True)
class ScoredExample:
    em: int
    f1: float
    error_kind: str
    longer_by: int = 0

    def __post_init__(self) -> None:
        if self.em == 1 and (self.f1 != 1.0 or self.error_kind != EXACT_MATCH):
            raise ValueError("em = 1 requires f1 = 1 and an exact-match category")

    def bucket(self) -> str:
        """Histogram key; prediction-length overruns bucket at 1, 2, and 3+."""
        if self.error_kind != LONGER:
            return self.error_kind
        if self.longer_by >= 3:
            return "longer_by_3plus"
        return f"longer_by_{self.longer_by}"


def _f1(pred: TokenSeq, gold: TokenSeq) -> tuple[float, int]:
    """Multiset token F1 and the overlap count."""
    common = Counter(pred) & Counter(gold)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0, 0
    precision = overlap / len(pred)
    recall = overlap / len(gold)
    return 2 * precision * recall / (precision + recall), overlap


def score(prediction: ExtractionResult, gold: ExtractionResult) -> ScoredExample:
    """Score one prediction against its gold label."""
    pred_empty = isinstance(prediction, NoAnswer)
    gold_empty = isinstance(gold, NoAnswer)
    if pred_empty and gold_empty:
        return ScoredExample(em=1, f1=1.0, error_kind=EXACT_MATCH)
    if pred_empty:
        return ScoredExample(em=0, f1=0.0, error_kind=SHOULD_ACCEPT)
    if gold_empty:
        return ScoredExample(em=0, f1=0.0, error_kind=SHOULD_REJECT)

    assert isinstance(prediction, Answer) and isinstance(gold, Answer)
    pred_tokens = normalize(prediction.text)
    gold_tokens = normalize(gold.text)
    if pred_tokens == gold_tokens:
        return ScoredExample(em=1, f1=1.0, error_kind=EXACT_MATCH)
    if not pred_tokens or not gold_tokens:
        # one side normalized away entirely; nothing can overlap
        return ScoredExample(em=0, f1=0.0, error_kind=NO_OVERLAP)
    f1, overlap = _f1(pred_tokens, gold_tokens)
    if overlap == 0:
        return ScoredExample(em=0, f1=0.0, error_kind=NO_OVERLAP)
    extra = len(pred_tokens) - len(gold_tokens)
    if extra >= 1:
        return ScoredExample(em=0, f1=f1, error_kind=LONGER, longer_by=extra)
    return ScoredExample(em=0, f1=f1, error_kind=SHORTER_OR_SHIFTED)


@dataclass(frozen=True)
class RelationReport:
    relation_id: str
    count: int
    mean_em: float
    mean_f1: float
    error_histogram: Mapping[str, int]


@dataclass(frozen=True)
class AggregateReport:
    relations: tuple[RelationReport, ...]
    macro_em: float
    macro_f1: float


def aggregate(examples_by_relation: Mapping[str, Sequence[ScoredExample]]) -> AggregateReport:
    """Per-relation means plus their unweighted macro average.

    Relations with zero examples are skipped with a warning and do not enter
    the macro average.
    """
    reports: list[RelationReport] = []
    for relation_id, examples in examples_by_relation.items():
        if not examples:
            logger.warning("relation %s has no scored examples; skipped", relation_id)
            continue
        histogram: Counter[str] = Counter(ex.bucket() for ex in examples)
        reports.append(
            RelationReport(
                relation_id=relation_id,
                count=len(examples),
                mean_em=sum(ex.em for ex in examples) / len(examples),
                mean_f1=sum(ex.f1 for ex in examples) / len(examples),
                error_histogram=dict(histogram),
            )
        )
    if reports:
        macro_em = sum(r.mean_em for r in reports) / len(reports)
        macro_f1 = sum(r.mean_f1 for r in reports) / len(reports)
    else:
        macro_em = macro_f1 = 0.0
    return AggregateReport(relations=tuple(reports), macro_em=macro_em, macro_f1=macro_f1)


@dataclass(frozen=True)
class ClassificationRow:
    """One relation-classification example before slot-filling adaptation."""

    subject: TokenSeq
    relation: str
    object: Optional[TokenSeq]
    context: TokenSeq


@dataclass(frozen=True)
class AdaptationResult:
    pairs: tuple[EntityContextPair, ...]
    dropped: int


def _find_subsequence(haystack: TokenSeq, needle: TokenSeq) -> Optional[int]:
    if not needle or len(needle) > len(haystack):
        return None
    for start in range(len(haystack) - len(needle) + 1):
        if haystack[start : start + len(needle)] == needle:
            return start
    return None


def adapt_relation_classification(
    rows: Sequence[ClassificationRow],
    no_relation_label: str = "no_relation",
) -> AdaptationResult:
    """Convert relation-classification rows to slot-filling pairs.

    Positive rows keep their relation with the object's first occurrence in
    the context as the gold span. Rows labeled with the no-relation label are
    distributed, round-robin in input order, across relations whose positive
    set shares the same head entity, with a no-answer gold. Rows that cannot
    be placed (no head-entity match, or a positive whose object is absent
    from its context) are dropped and counted.
    """
    positives = [r for r in rows if r.relation != no_relation_label]
    relations_by_entity: dict[TokenSeq, list[str]] = {}
    for row in positives:
        seen = relations_by_entity.setdefault(row.subject, [])
        if row.relation not in seen:
            seen.append(row.relation)
    for candidates in relations_by_entity.values():
        candidates.sort()

    pairs: list[EntityContextPair] = []
    dropped = 0
    round_robin: dict[TokenSeq, int] = {}
    for row in rows:
        if row.relation == no_relation_label:
            candidates = relations_by_entity.get(row.subject)
            if not candidates:
                dropped += 1
                continue
            turn = round_robin.get(row.subject, 0)
            round_robin[row.subject] = turn + 1
            pairs.append(
                EntityContextPair(
                    relation_id=candidates[turn % len(candidates)],
                    entity=row.subject,
                    context=row.context,
                    gold=NO_ANSWER,
                )
            )
        else:
            target = as_tokens(row.object or ())
            start = _find_subsequence(row.context, target)
            if start is None:
                dropped += 1
                continue
            span = Span(start, start + len(target))
            pairs.append(
                EntityContextPair(
                    relation_id=row.relation,
                    entity=row.subject,
                    context=row.context,
                    gold=Answer(span=span, text=target),
                )
            )
    return AdaptationResult(pairs=tuple(pairs), dropped=dropped)
