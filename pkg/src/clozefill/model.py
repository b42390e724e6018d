"""Core domain types shared by every stage of the engine.

All types are immutable after construction and safe to share across
concurrent workers. Spans index whitespace-level tokens, never characters.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import OverlappingAnnotations

TokenSeq = tuple[str, ...]

# Placeholder surface forms used in template files. The mask token placed in
# a ClozeQuery is whatever the active provider reports, not a fixed string.
SUBJECT_PLACEHOLDER = "[SUB]"
OBJECT_PLACEHOLDER = "[OBJ]"


def as_tokens(tokens: Iterable[str]) -> TokenSeq:
    out = tuple(tokens)
    if not all(isinstance(t, str) for t in out):
        raise TypeError("tokens must be strings")
    return out


def is_punctuation(token: str) -> bool:
    """True iff the token is non-empty and every character is Unicode punctuation."""
    return bool(token) and all(unicodedata.category(ch).startswith("P") for ch in token)


@dataclass(frozen=True)
class Span:
    """Half-open token range [start, end) over some context."""

    start: int
    end: int
    label: Optional[str] = None

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def contains(self, position: int) -> bool:
        return self.start <= position < self.end


@dataclass(frozen=True)
class ClozeTemplate:
    """Relation pattern with one subject and one object placeholder."""

    tokens: TokenSeq
    subject_index: int
    object_index: int

    def __post_init__(self) -> None:
        n = len(self.tokens)
        if not (0 <= self.subject_index < n and 0 <= self.object_index < n):
            raise ValueError("placeholder index out of range")
        if self.subject_index == self.object_index:
            raise ValueError("subject and object placeholders must differ")


@dataclass(frozen=True)
class Relation:
    id: str
    template: ClozeTemplate

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("relation id must be non-empty")


@dataclass(frozen=True)
class Answer:
    """An extracted span of the context, with the addressed tokens echoed."""

    span: Span
    text: TokenSeq


@dataclass(frozen=True)
class NoAnswer:
    """The context does not express the relation."""


NO_ANSWER = NoAnswer()

ExtractionResult = Answer | NoAnswer


def answer_from_span(context: TokenSeq, span: Span) -> Answer:
    if span.end > len(context):
        raise ValueError("span exceeds context bounds")
    return Answer(span=span, text=context[span.start:span.end])


def _check_annotations(annotations: tuple[Span, ...], context_len: int) -> None:
    ordered = sorted(annotations, key=lambda s: s.start)
    for sp in ordered:
        if sp.end > context_len:
            raise ValueError(f"annotation [{sp.start}, {sp.end}) exceeds context length {context_len}")
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start < prev.end:
            raise OverlappingAnnotations(
                f"annotations [{prev.start},{prev.end}) and [{cur.start},{cur.end}) overlap"
            )


@dataclass(frozen=True)
class EntityContextPair:
    """One candidate (entity, context) for a relation.

    gold carries the expected extraction when the pair is labeled;
    entity_annotations carries precomputed NER or chunk spans over context.
    """

    relation_id: str
    entity: TokenSeq
    context: TokenSeq
    gold: Optional[ExtractionResult] = None
    entity_annotations: tuple[Span, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.entity:
            raise ValueError("entity must be non-empty")
        if not self.context:
            raise ValueError("context must be non-empty")
        _check_annotations(self.entity_annotations, len(self.context))


@dataclass(frozen=True)
class ClozeQuery:
    """Context concatenated with the subject-filled template; one masked slot."""

    tokens: TokenSeq
    context_len: int
    mask_index: int

    def __post_init__(self) -> None:
        if not (0 < self.context_len <= len(self.tokens)):
            raise ValueError("context_len out of range")
        if not (self.context_len <= self.mask_index < len(self.tokens)):
            raise ValueError("mask must lie in the template region")

    @property
    def context(self) -> TokenSeq:
        return self.tokens[: self.context_len]
