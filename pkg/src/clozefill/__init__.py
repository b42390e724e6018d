"""Unsupervised slot filling over masked language models.

Candidate (entity, context) pairs are screened by a template-similarity
rejection step, then the model's masked-slot predictions are constrained to
context tokens by redistributing probability mass through contextual
embedding compatibility; the winning anchor token is optionally widened to
its annotated entity span.
"""
from .anchor import AnchorResult, CompatibilityRow, ProposalSet, anchor, compatibility, propose
from .embeddings import EmbeddingTable, load_embeddings, pmi_estimate
from .errors import ClozefillError
from .evaluation import (
    AdaptationResult,
    AggregateReport,
    ClassificationRow,
    RelationReport,
    ScoredExample,
    adapt_relation_classification,
    aggregate,
    normalize,
    score,
)
from .expansion import ExpansionPolicy, expand
from .model import (
    NO_ANSWER,
    Answer,
    ClozeQuery,
    ClozeTemplate,
    EntityContextPair,
    ExtractionResult,
    NoAnswer,
    Relation,
    Span,
)
from .pipeline import (
    ReferenceBackendConfig,
    RemoteBackendConfig,
    RunConfig,
    RunSummary,
    grid_search,
    load_dataset,
    load_templates,
    run,
)
from .provider import (
    ContextualEmbeddingSequence,
    LanguageModelProvider,
    MaskedDistribution,
    ProviderStats,
    ReferenceBackend,
    RemoteProvider,
)
from .rejection import (
    Partition,
    RejectionScore,
    RejectionThreshold,
    fit_threshold,
    partition,
    score_pair,
)
from .templating import FilledTemplate, build_query, fill_object, parse_template, substitute_subject, tokenize

__version__ = "0.1.0"

__all__ = [
    "AdaptationResult",
    "AggregateReport",
    "AnchorResult",
    "Answer",
    "ClassificationRow",
    "ClozeQuery",
    "ClozeTemplate",
    "ClozefillError",
    "CompatibilityRow",
    "ContextualEmbeddingSequence",
    "EmbeddingTable",
    "EntityContextPair",
    "ExpansionPolicy",
    "ExtractionResult",
    "FilledTemplate",
    "LanguageModelProvider",
    "MaskedDistribution",
    "NO_ANSWER",
    "NoAnswer",
    "Partition",
    "ProposalSet",
    "ProviderStats",
    "ReferenceBackend",
    "ReferenceBackendConfig",
    "Relation",
    "RelationReport",
    "RemoteBackendConfig",
    "RemoteProvider",
    "RejectionScore",
    "RejectionThreshold",
    "RunConfig",
    "RunSummary",
    "ScoredExample",
    "Span",
    "adapt_relation_classification",
    "aggregate",
    "anchor",
    "build_query",
    "compatibility",
    "expand",
    "fill_object",
    "fit_threshold",
    "grid_search",
    "load_dataset",
    "load_embeddings",
    "load_templates",
    "normalize",
    "parse_template",
    "partition",
    "pmi_estimate",
    "propose",
    "run",
    "score",
    "score_pair",
    "substitute_subject",
    "tokenize",
]
