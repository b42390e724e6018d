"""Widen a single-token anchor to a full annotated entity span.

Annotations come precomputed with the dataset (any NER or noun-chunk tagger's
output); the engine never runs a tagger itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .anchor import AnchorResult
from .errors import ConfigError, OverlappingAnnotations
from .model import Answer, Span, TokenSeq, answer_from_span

MODE_NEVER = "never"
MODE_ALWAYS = "always"
MODE_PER_RELATION = "per_relation"


@dataclass(frozen=True)
class ExpansionPolicy:
    mode: str
    per_relation: Mapping[str, bool] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.mode not in (MODE_NEVER, MODE_ALWAYS, MODE_PER_RELATION):
            raise ConfigError(f"unknown expansion mode {self.mode!r}")

    @classmethod
    def never(cls) -> "ExpansionPolicy":
        return cls(mode=MODE_NEVER)

    @classmethod
    def always(cls) -> "ExpansionPolicy":
        return cls(mode=MODE_ALWAYS)

    @classmethod
    def for_relations(cls, flags: Mapping[str, bool]) -> "ExpansionPolicy":
        return cls(mode=MODE_PER_RELATION, per_relation=dict(flags))

    def should_expand(self, relation_id: str) -> bool:
        if self.mode == MODE_NEVER:
            return False
        if self.mode == MODE_ALWAYS:
            return True
        if relation_id not in self.per_relation:
            raise ConfigError(f"expansion policy does not cover relation {relation_id!r}")
        return self.per_relation[relation_id]


def expand(
    anchor: AnchorResult,
    context: TokenSeq,
    annotations: Sequence[Span],
    policy: ExpansionPolicy,
    relation_id: str,
) -> Answer:
    """Return the covering annotated span when policy allows, else the anchor alone."""
    position = anchor.position
    if not (0 <= position < len(context)):
        raise ValueError(f"anchor position {position} outside context of length {len(context)}")
    if policy.should_expand(relation_id):
        covering = [sp for sp in annotations if sp.contains(position)]
        if len(covering) > 1:
            raise OverlappingAnnotations(f"multiple annotations cover position {position}")
        if covering:
            return answer_from_span(context, covering[0])
    return answer_from_span(context, Span(position, position + 1))
