"""Template parsing, subject substitution, and cloze-query assembly.

Tokenization is whitespace splitting followed by peeling leading/trailing
punctuation characters into their own tokens, so "Curry." becomes
["Curry", "."]. The literal placeholders [SUB] and [OBJ] are protected
from peeling. All downstream indices assume this segmentation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import DuplicatePlaceholder, EmptyContext, MissingPlaceholder
from .model import (
    OBJECT_PLACEHOLDER,
    SUBJECT_PLACEHOLDER,
    ClozeQuery,
    ClozeTemplate,
    EntityContextPair,
    TokenSeq,
    as_tokens,
    is_punctuation,
)

_PROTECTED = (SUBJECT_PLACEHOLDER, OBJECT_PLACEHOLDER)


def _split_chunk(chunk: str) -> list[str]:
    if chunk in _PROTECTED:
        return [chunk]
    lead: list[str] = []
    trail: list[str] = []
    while chunk and is_punctuation(chunk[0]):
        lead.append(chunk[0])
        chunk = chunk[1:]
    while chunk and is_punctuation(chunk[-1]):
        trail.append(chunk[-1])
        chunk = chunk[:-1]
    trail.reverse()
    return lead + ([chunk] if chunk else []) + trail


def tokenize(text: str) -> TokenSeq:
    """Whitespace tokenization with punctuation peeling; placeholders kept intact."""
    for marker in _PROTECTED:
        text = text.replace(marker, f" {marker} ")
    out: list[str] = []
    for chunk in text.split():
        out.extend(_split_chunk(chunk))
    return tuple(out)


@dataclass(frozen=True)
class FilledTemplate:
    """Template with the subject replaced by entity tokens; object slot retained."""

    tokens: TokenSeq
    object_index: int

    def __post_init__(self) -> None:
        if not (0 <= self.object_index < len(self.tokens)):
            raise ValueError("object_index out of range")


def parse_template(raw: str) -> ClozeTemplate:
    """Parse a raw template string into a ClozeTemplate.

    Raises MissingPlaceholder / DuplicatePlaceholder when [SUB] or [OBJ]
    is absent or repeated.
    """
    tokens = tokenize(raw)
    sub_positions = [i for i, t in enumerate(tokens) if t == SUBJECT_PLACEHOLDER]
    obj_positions = [i for i, t in enumerate(tokens) if t == OBJECT_PLACEHOLDER]
    for name, positions in ((SUBJECT_PLACEHOLDER, sub_positions), (OBJECT_PLACEHOLDER, obj_positions)):
        if not positions:
            raise MissingPlaceholder(f"template {raw!r} lacks {name}")
        if len(positions) > 1:
            raise DuplicatePlaceholder(f"template {raw!r} repeats {name}")
    return ClozeTemplate(tokens=tokens, subject_index=sub_positions[0], object_index=obj_positions[0])


def substitute_subject(template: ClozeTemplate, entity: Iterable[str]) -> FilledTemplate:
    """Splice the entity tokens in place of the subject placeholder."""
    entity_tokens = as_tokens(entity)
    if not entity_tokens:
        raise ValueError("entity must be non-empty")
    s = template.subject_index
    tokens = template.tokens[:s] + entity_tokens + template.tokens[s + 1:]
    object_index = template.object_index
    if object_index > s:
        object_index += len(entity_tokens) - 1
    return FilledTemplate(tokens=tokens, object_index=object_index)


def build_query(pair: EntityContextPair, template: ClozeTemplate, mask_token: str) -> ClozeQuery:
    """Concatenate the context and the filled template, masking the object slot."""
    if not pair.context:
        raise EmptyContext("cannot build a query from an empty context")
    filled = substitute_subject(template, pair.entity)
    tail = list(filled.tokens)
    tail[filled.object_index] = mask_token
    return ClozeQuery(
        tokens=pair.context + tuple(tail),
        context_len=len(pair.context),
        mask_index=len(pair.context) + filled.object_index,
    )


def fill_object(query: ClozeQuery, candidate: str) -> TokenSeq:
    """Return the query tokens with the masked slot replaced by candidate."""
    tokens = list(query.tokens)
    tokens[query.mask_index] = candidate
    return tuple(tokens)
