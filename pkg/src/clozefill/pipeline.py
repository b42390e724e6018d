"""End-to-end orchestration: dataset I/O, reject -> anchor -> expand -> score,
and hyperparameter grid search.

File formats
------------
Templates: UTF-8 text, one relation per line, tab separated:
    <relation_id>\t<template containing [SUB] and [OBJ]>

Dataset: JSONL, one object per line:
    {"relation": str, "subject": [str], "context": [str],
     "gold": {"span": [start, end]} | null,        # null means no-answer;
     "annotations": [{"start": int, "end": int, "label": str}]}
The "gold" key may be absent entirely (unlabeled pair); "annotations" is
optional. Spans index whitespace-level tokens, end exclusive.

Extractions: JSONL, one object per input pair, input order preserved:
    {"relation": str, "subject": [str],
     "prediction": {"span": [s, e], "text": [str]} | null,
     "anchor": int | null, "rejected": bool, "score": float | null}
A null score marks the nothing-scorable sentinel.
"""
from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from . import evaluation
from .anchor import DEFAULT_TOP_K, AnchorResult, anchor, combine_rows
from .embeddings import EmbeddingTable, load_embeddings
from .errors import ConfigError, DatasetFormatError, NoDevData, OverlappingAnnotations
from .evaluation import AggregateReport, ScoredExample, aggregate
from .expansion import ExpansionPolicy, expand
from .model import (
    NO_ANSWER,
    Answer,
    ClozeQuery,
    EntityContextPair,
    ExtractionResult,
    NoAnswer,
    Relation,
    Span,
    answer_from_span,
)
from .provider import LanguageModelProvider, ReferenceBackend, RemoteProvider
from .rejection import (
    DEFAULT_LAMBDA,
    LAMBDA_GRID,
    Partition,
    RejectionScore,
    fit_threshold,
    partition,
    score_pair,
)
from .templating import build_query, parse_template, substitute_subject

logger = logging.getLogger(__name__)

TUNE = "tune"
EXPANSION_NEVER = "never"
EXPANSION_ALWAYS = "always"

EXTRACTIONS_FILENAME = "extractions.jsonl"
MANIFEST_FILENAME = "manifest.json"
DIAGNOSTICS_FILENAME = "diagnostics.jsonl"


@dataclass(frozen=True)
class ReferenceBackendConfig:
    fixture_path: Path


@dataclass(frozen=True)
class RemoteBackendConfig:
    base_url: str


BackendConfig = Union[ReferenceBackendConfig, RemoteBackendConfig]


@dataclass(frozen=True)
class RunConfig:
    templates_path: Path
    dataset_path: Path
    embeddings_path: Path
    backend: BackendConfig
    dev_dataset_path: Optional[Path] = None
    k: int = DEFAULT_TOP_K
    rejection_lambda: Union[float, str] = DEFAULT_LAMBDA  # a number or TUNE
    expansion: str = EXPANSION_NEVER  # never | always | tune
    rejection_enabled: bool = True
    workers: int = 1
    output_dir: Path = Path("out")
    dump_diagnostics: bool = False

    def tuning_requested(self) -> bool:
        return self.rejection_lambda == TUNE or self.expansion == TUNE

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.expansion not in (EXPANSION_NEVER, EXPANSION_ALWAYS, TUNE):
            raise ConfigError(f"expansion must be never/always/{TUNE}, got {self.expansion!r}")
        if isinstance(self.rejection_lambda, str):
            if self.rejection_lambda != TUNE:
                raise ConfigError(f"rejection lambda must be a number or {TUNE!r}")
        elif self.rejection_lambda < 0:
            raise ConfigError("rejection lambda must be non-negative")
        if self.rejection_lambda == TUNE and not self.rejection_enabled:
            raise ConfigError("cannot tune lambda with rejection disabled")
        if self.tuning_requested() and self.dev_dataset_path is None:
            raise ConfigError("tuning requires a development dataset")
        for label, path in (
            ("templates", self.templates_path),
            ("dataset", self.dataset_path),
            ("embeddings", self.embeddings_path),
        ):
            if not Path(path).is_file():
                raise ConfigError(f"{label} path {path} is not a readable file")
        if self.dev_dataset_path is not None and not Path(self.dev_dataset_path).is_file():
            raise ConfigError(f"dev dataset path {self.dev_dataset_path} is not a readable file")
        if isinstance(self.backend, ReferenceBackendConfig):
            if not Path(self.backend.fixture_path).is_file():
                raise ConfigError(f"backend fixture {self.backend.fixture_path} is not a readable file")


@dataclass(frozen=True)
class TunedSetting:
    lam: float
    expand: bool


@dataclass
class RunSummary:
    output_dir: Path
    extractions_path: Path
    manifest_path: Path
    manifest: dict
    report: Optional[AggregateReport]


def build_provider(backend: BackendConfig) -> LanguageModelProvider:
    if isinstance(backend, ReferenceBackendConfig):
        return ReferenceBackend.from_fixture(backend.fixture_path)
    return RemoteProvider(backend.base_url)


# -- templates ----------------------------------------------------------

def load_templates(path: Union[str, Path]) -> dict[str, Relation]:
    """Parse the templates file into an ordered {relation_id: Relation} map."""
    relations: dict[str, Relation] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if "\t" not in stripped:
                raise DatasetFormatError(f"{path}:{lineno}: expected <relation_id>\\t<template>")
            relation_id, raw_template = stripped.split("\t", 1)
            relation_id = relation_id.strip()
            if not relation_id:
                raise DatasetFormatError(f"{path}:{lineno}: empty relation id")
            if relation_id in relations:
                raise DatasetFormatError(f"{path}:{lineno}: duplicate relation id {relation_id!r}")
            relations[relation_id] = Relation(id=relation_id, template=parse_template(raw_template))
    if not relations:
        raise DatasetFormatError(f"{path}: no templates found")
    return relations


# -- dataset records ----------------------------------------------------

def pair_to_record(pair: EntityContextPair) -> dict:
    record: dict = {
        "relation": pair.relation_id,
        "subject": list(pair.entity),
        "context": list(pair.context),
    }
    if pair.gold is not None:
        record["gold"] = None if isinstance(pair.gold, NoAnswer) else {"span": [pair.gold.span.start, pair.gold.span.end]}
    if pair.entity_annotations:
        record["annotations"] = [
            {"start": sp.start, "end": sp.end, **({"label": sp.label} if sp.label is not None else {})}
            for sp in pair.entity_annotations
        ]
    return record


def record_to_pair(record: Mapping, known_relations: Optional[Mapping[str, Relation]] = None) -> EntityContextPair:
    relation_id = record["relation"]
    if known_relations is not None and relation_id not in known_relations:
        raise DatasetFormatError(f"unknown relation {relation_id!r}")
    context = tuple(record["context"])
    gold: Optional[ExtractionResult]
    if "gold" not in record:
        gold = None
    elif record["gold"] is None:
        gold = NO_ANSWER
    else:
        start, end = record["gold"]["span"]
        gold = answer_from_span(context, Span(int(start), int(end)))
    annotations = tuple(
        Span(int(a["start"]), int(a["end"]), a.get("label")) for a in record.get("annotations", [])
    )
    return EntityContextPair(
        relation_id=relation_id,
        entity=tuple(record["subject"]),
        context=context,
        gold=gold,
        entity_annotations=annotations,
    )


def load_dataset(path: Union[str, Path], relations: Optional[Mapping[str, Relation]] = None) -> list[EntityContextPair]:
    pairs: list[EntityContextPair] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                record = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"{path}:{lineno}: invalid JSON") from exc
            try:
                pairs.append(record_to_pair(record, relations))
            except OverlappingAnnotations as exc:
                raise DatasetFormatError(f"{path}:{lineno}: {exc}") from exc
            except DatasetFormatError as exc:
                raise DatasetFormatError(f"{path}:{lineno}: {exc}") from exc
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetFormatError(f"{path}:{lineno}: malformed record ({exc})") from exc
    return pairs


def extraction_to_record(
    pair: EntityContextPair,
    prediction: ExtractionResult,
    anchor_position: Optional[int],
    rejected: bool,
    score_value: float,
) -> dict:
    if isinstance(prediction, Answer):
        pred_field = {"span": [prediction.span.start, prediction.span.end], "text": list(prediction.text)}
    else:
        pred_field = None
    return {
        "relation": pair.relation_id,
        "subject": list(pair.entity),
        "prediction": pred_field,
        "anchor": anchor_position,
        "rejected": rejected,
        "score": score_value if math.isfinite(score_value) else None,
    }


def _write_jsonl(path: Path, records: Sequence[Mapping]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


# -- inference over one relation ----------------------------------------

def _score_relation(
    table: EmbeddingTable,
    relation: Relation,
    pairs: Sequence[EntityContextPair],
    indices: Sequence[int],
) -> list[RejectionScore]:
    scores = []
    for idx in indices:
        filled = substitute_subject(relation.template, pairs[idx].entity)
        scores.append(RejectionScore(pair_index=idx, value=score_pair(table, pairs[idx].context, filled)))
    return scores


def _partition_relation(
    scores: Sequence[RejectionScore],
    lam: float,
    rejection_enabled: bool,
) -> tuple[Partition, Optional[dict]]:
    if not rejection_enabled:
        return Partition(accepted=tuple(s.pair_index for s in scores), rejected=()), None
    threshold = fit_threshold(scores, lam)
    stats = {"mean": threshold.mean, "stddev": threshold.stddev, "epsilon": threshold.epsilon}
    return partition(scores, threshold), stats


def _anchor_accepted(
    provider: LanguageModelProvider,
    relation: Relation,
    pairs: Sequence[EntityContextPair],
    accepted: Sequence[int],
    k: int,
    workers: int,
) -> dict[int, tuple[ClozeQuery, AnchorResult]]:
    mask = provider.mask_token()

    def infer(idx: int) -> tuple[ClozeQuery, AnchorResult]:
        query = build_query(pairs[idx], relation.template, mask)
        return query, anchor(provider, query, k)

    results: dict[int, tuple[ClozeQuery, AnchorResult]] = {}
    if workers > 1 and len(accepted) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for idx, value in zip(accepted, pool.map(infer, accepted)):
                results[idx] = value
    else:
        for idx in accepted:
            results[idx] = infer(idx)
    return results


# -- grid search ---------------------------------------------------------

def grid_search(
    config: RunConfig,
    dev_pairs: Sequence[EntityContextPair],
    relations: Mapping[str, Relation],
    table: EmbeddingTable,
    provider: LanguageModelProvider,
) -> dict[str, TunedSetting]:
    """Per-relation (lambda, expansion) maximizing dev F1.

    The grid is evaluated exhaustively; ties break toward the smaller lambda,
    then no expansion. Anchor results are cached per pair, so widening the
    accepted set at a larger lambda only pays for the newly accepted pairs.
    """
    labeled = [p for p in dev_pairs if p.gold is not None]
    if not labeled:
        raise NoDevData("development dataset has no labeled pairs")

    if config.rejection_lambda == TUNE:
        lam_grid: Sequence[float] = LAMBDA_GRID
    else:
        lam_grid = (float(config.rejection_lambda),)
    if config.expansion == TUNE:
        expand_grid: Sequence[bool] = (False, True)
    else:
        expand_grid = (config.expansion == EXPANSION_ALWAYS,)

    default = TunedSetting(
        lam=DEFAULT_LAMBDA if config.rejection_lambda == TUNE else float(config.rejection_lambda),
        expand=False if config.expansion == TUNE else config.expansion == EXPANSION_ALWAYS,
    )

    by_relation: dict[str, list[int]] = {rid: [] for rid in relations}
    for idx, pair in enumerate(labeled):
        by_relation[pair.relation_id].append(idx)

    settings: dict[str, TunedSetting] = {}
    for rid, indices in by_relation.items():
        if not indices:
            settings[rid] = default
            continue
        relation = relations[rid]
        scores = _score_relation(table, relation, labeled, indices)
        anchor_cache: dict[int, tuple[ClozeQuery, AnchorResult]] = {}
        best: Optional[tuple[float, TunedSetting]] = None
        for lam in lam_grid:
            part, _ = _partition_relation(scores, lam, config.rejection_enabled)
            missing = [idx for idx in part.accepted if idx not in anchor_cache]
            anchor_cache.update(
                _anchor_accepted(provider, relation, labeled, missing, config.k, config.workers)
            )
            for expand_flag in expand_grid:
                policy = ExpansionPolicy.for_relations({rid: expand_flag})
                total_f1 = 0.0
                for idx in indices:
                    pair = labeled[idx]
                    if idx in set(part.accepted):
                        _, result = anchor_cache[idx]
                        prediction: ExtractionResult = expand(
                            result, pair.context, pair.entity_annotations, policy, rid
                        )
                    else:
                        prediction = NO_ANSWER
                    total_f1 += evaluation.score(prediction, pair.gold).f1
                mean_f1 = total_f1 / len(indices)
                if best is None or mean_f1 > best[0]:
                    best = (mean_f1, TunedSetting(lam=lam, expand=expand_flag))
        assert best is not None
        settings[rid] = best[1]
    return settings


# -- the run -------------------------------------------------------------

def run(config: RunConfig) -> RunSummary:
    """Execute the full pipeline and write extractions, reports, and manifest."""
    config.validate()
    started = time.perf_counter()
    timings: dict[str, float] = {}

    relations = load_templates(config.templates_path)
    table = load_embeddings(config.embeddings_path)
    pairs = load_dataset(config.dataset_path, relations)
    provider = build_provider(config.backend)
    provider.reset_stats()

    if config.tuning_requested():
        dev_pairs = load_dataset(config.dev_dataset_path, relations)
        tick = time.perf_counter()
        settings = grid_search(config, dev_pairs, relations, table, provider)
        timings["grid_search_s"] = time.perf_counter() - tick
    else:
        settings = {
            rid: TunedSetting(
                lam=float(config.rejection_lambda),
                expand=config.expansion == EXPANSION_ALWAYS,
            )
            for rid in relations
        }

    policy = ExpansionPolicy.for_relations({rid: s.expand for rid, s in settings.items()})
    by_relation: dict[str, list[int]] = {rid: [] for rid in relations}
    for idx, pair in enumerate(pairs):
        by_relation[pair.relation_id].append(idx)

    extractions: list[Optional[dict]] = [None] * len(pairs)
    scored: dict[str, list[ScoredExample]] = {}
    diagnostics: list[dict] = []
    relation_stats: dict[str, dict] = {}
    accepted_total = 0

    tick = time.perf_counter()
    for rid, indices in by_relation.items():
        if not indices:
            continue
        relation = relations[rid]
        setting = settings[rid]
        scores = _score_relation(table, relation, pairs, indices)
        part, threshold_stats = _partition_relation(scores, setting.lam, config.rejection_enabled)
        relation_stats[rid] = {
            "lambda": setting.lam,
            "expand": setting.expand,
            "threshold": threshold_stats,
            "pairs": len(indices),
            "accepted": len(part.accepted),
        }
        accepted_total += len(part.accepted)
        score_by_index = {s.pair_index: s.value for s in scores}
        inferred = _anchor_accepted(provider, relation, pairs, part.accepted, config.k, config.workers)

        for idx in indices:
            pair = pairs[idx]
            if idx in inferred:
                query, result = inferred[idx]
                prediction: ExtractionResult = expand(
                    result, pair.context, pair.entity_annotations, policy, rid
                )
                extractions[idx] = extraction_to_record(
                    pair, prediction, result.position, False, score_by_index[idx]
                )
                if config.dump_diagnostics:
                    diagnostics.append(
                        {
                            "relation": rid,
                            "index": idx,
                            "query": list(query.tokens),
                            "proposals": [[tok, p] for tok, p in result.proposal.candidates],
                            "mass": [float(v) for v in combine_rows(result.proposal, result.rows)],
                            "anchor": result.position,
                        }
                    )
            else:
                prediction = NO_ANSWER
                extractions[idx] = extraction_to_record(pair, NO_ANSWER, None, True, score_by_index[idx])
            if pair.gold is not None:
                scored.setdefault(rid, []).append(evaluation.score(prediction, pair.gold))
    timings["inference_s"] = time.perf_counter() - tick

    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    extractions_path = output_dir / EXTRACTIONS_FILENAME
    _write_jsonl(extractions_path, [r for r in extractions if r is not None])
    if config.dump_diagnostics:
        _write_jsonl(output_dir / DIAGNOSTICS_FILENAME, diagnostics)

    report: Optional[AggregateReport] = None
    if scored:
        report = aggregate(scored)
        _write_report(output_dir, report)

    timings["total_s"] = time.perf_counter() - started
    manifest = {
        "config": _config_snapshot(config),
        "mask_token": provider.mask_token(),
        # the cosine PMI estimate stands in for co-occurrence counts over
        # 5-gram windows; the window size is metadata about the pretrained
        # vectors, not a tunable of this engine
        "embedding_metadata": {"dimension": table.dimension, "pmi_qgram_window": 5},
        "relation_settings": relation_stats,
        "provider": {"forward_passes": provider.stats.forward_passes},
        "counts": {
            "pairs": len(pairs),
            "labeled": sum(len(v) for v in scored.values()),
            "accepted": accepted_total,
            "rejected": len(pairs) - accepted_total,
        },
        "timings": timings,
    }
    manifest_path = output_dir / MANIFEST_FILENAME
    manifest_path.write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return RunSummary(
        output_dir=output_dir,
        extractions_path=extractions_path,
        manifest_path=manifest_path,
        manifest=manifest,
        report=report,
    )


def _config_snapshot(config: RunConfig) -> dict:
    if isinstance(config.backend, ReferenceBackendConfig):
        backend = {"type": "reference", "fixture_path": str(config.backend.fixture_path)}
    else:
        backend = {"type": "remote", "base_url": config.backend.base_url}
    return {
        "templates_path": str(config.templates_path),
        "dataset_path": str(config.dataset_path),
        "dev_dataset_path": str(config.dev_dataset_path) if config.dev_dataset_path else None,
        "embeddings_path": str(config.embeddings_path),
        "backend": backend,
        "k": config.k,
        "rejection_lambda": config.rejection_lambda,
        "expansion": config.expansion,
        "rejection_enabled": config.rejection_enabled,
        "workers": config.workers,
        "output_dir": str(config.output_dir),
        "dump_diagnostics": config.dump_diagnostics,
    }


def _write_report(output_dir: Path, report: AggregateReport) -> None:
    payload = {
        "macro_em": report.macro_em,
        "macro_f1": report.macro_f1,
        "relations": [
            {
                "relation": r.relation_id,
                "count": r.count,
                "mean_em": r.mean_em,
                "mean_f1": r.mean_f1,
                "errors": dict(sorted(r.error_histogram.items())),
            }
            for r in report.relations
        ],
    }
    (output_dir / "report.json").write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )

    width = max([len("relation"), *(len(r.relation_id) for r in report.relations)])
    lines = [f"{'relation':<{width}}  {'n':>6}  {'EM':>7}  {'F1':>7}"]
    for r in report.relations:
        lines.append(f"{r.relation_id:<{width}}  {r.count:>6}  {r.mean_em:>7.4f}  {r.mean_f1:>7.4f}")
    lines.append(f"{'macro':<{width}}  {len(report.relations):>6}  {report.macro_em:>7.4f}  {report.macro_f1:>7.4f}")
    (output_dir / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    csv_lines = ["relation,count,mean_em,mean_f1"]
    for r in report.relations:
        csv_lines.append(f"{r.relation_id},{r.count},{r.mean_em},{r.mean_f1}")
    (output_dir / "report.csv").write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
