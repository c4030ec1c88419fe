"""
Batch scoring of QA records.

The harness scores supplied candidate answers; it never generates answers. The
evaluation setting (zs, sim, mmr) only decides whether the contexts of each
record are ranked, and the rankings are recorded in the report metadata.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np
from tqdm import tqdm

from biopars import __version__
from biopars.config import AGGREGATE_DECIMALS, EMBEDDING_METRICS, METRIC_VERSIONS, ScoreConfig
from biopars.errors import ConfigurationError, EmbeddingError, UndefinedScoreError
from biopars.harness.ranking import rank_mmr, rank_sim
from biopars.harness.records import EvalRecord
from biopars.metrics.bertscore import bertscore
from biopars.metrics.embeddings import EmbeddedText, EmbeddingStore, HashEmbedder
from biopars.metrics.idf import IdfTable, build_idf
from biopars.metrics.moverscore import MoverScoreResult, moverscore, wmd_variant
from biopars.metrics.rouge import rouge_l, rouge_n, rouge_s, rouge_su, rouge_w
from biopars.utils import resolve_thread_count

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoreRow:
    id: str
    metric: str
    score: float


@dataclass
class MetricReport:
    """Per-item scores sorted by id then metric, plus run metadata."""

    rows: list[ScoreRow]
    metrics: list[str]
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def setting(self) -> str:
        return self.metadata.get("setting", "zs")

    @property
    def system(self) -> str:
        return self.metadata.get("system", "candidate")

    def scores(self, metric: str) -> list[float]:
        return [row.score for row in self.rows if row.metric == metric]

    def aggregate(self, metric: str) -> float:
        """Mean per-item score, summed in row order."""
        values = self.scores(metric)
        return math.fsum(values) / len(values) if values else float("nan")

    def aggregate_cell(self, metric: str) -> str:
        return format_aggregate(self.aggregate(metric))


def format_aggregate(mean: float) -> str:
    """Table cell: mean x 100 with two decimals, e.g. 0.19442 -> "19.44"."""
    return f"{100 * mean:.{AGGREGATE_DECIMALS}f}"


@dataclass
class _Context:
    cfg: ScoreConfig
    store: Optional[EmbeddingStore]
    idf_ref: Optional[IdfTable]
    idf_cand: Optional[IdfTable]


def _rouge(fn: Callable) -> Callable[[EvalRecord, _Context], float]:
    def score(record: EvalRecord, ctx: _Context) -> float:
        return fn(record.candidate, record.reference, ctx.cfg)

    return score


def _usable_idf(idf: Optional[IdfTable], *texts: EmbeddedText) -> Optional[IdfTable]:
    """The table, or None (uniform weights) when it gives some text no weight at all."""
    if idf is None:
        return None
    for text in texts:
        if not np.any(idf.weights(text.tokens) > 0.0):
            logger.debug("every word of %r has idf 0, weighting it uniformly", " ".join(text.tokens))
            return None
    return idf


def _bertscore(record: EvalRecord, ctx: _Context) -> float:
    cand, ref = ctx.store.get(record.id, "candidate"), ctx.store.get(record.id, "reference")
    idf = _usable_idf(ctx.idf_ref, cand, ref) if ctx.cfg.bertscore_idf else None
    return bertscore(cand, ref, layer=ctx.cfg.bertscore_layer, idf=idf).f


def _mover_idf(ctx: _Context, cand: EmbeddedText, ref: EmbeddedText) -> tuple[Optional[IdfTable], Optional[IdfTable]]:
    if not ctx.cfg.moverscore_idf:
        return None, None
    return _usable_idf(ctx.idf_cand, cand), _usable_idf(ctx.idf_ref, ref)


def _moverscore(record: EvalRecord, ctx: _Context) -> float:
    cand, ref = ctx.store.get(record.id, "candidate"), ctx.store.get(record.id, "reference")
    idf_cand, idf_ref = _mover_idf(ctx, cand, ref)
    return moverscore(cand, ref, idf_cand, idf_ref, ctx.cfg.ngram, ctx.cfg.power).score


def _smd(record: EvalRecord, ctx: _Context) -> float:
    cand, ref = ctx.store.get(record.id, "candidate"), ctx.store.get(record.id, "reference")
    idf_cand, idf_ref = _mover_idf(ctx, cand, ref)
    distance = wmd_variant(cand, ref, "sentence", idf_cand, idf_ref, ctx.cfg.power)
    return MoverScoreResult.from_cost(distance).score


METRICS: dict[str, Callable[[EvalRecord, _Context], float]] = {
    "rouge-1": _rouge(lambda c, r, cfg: rouge_n(c, [r], 1, cfg.beta).f),
    "rouge-2": _rouge(lambda c, r, cfg: rouge_n(c, [r], 2, cfg.beta).f),
    "rouge-l": _rouge(lambda c, r, cfg: rouge_l(c, r, cfg.beta).f),
    "rouge-w": _rouge(lambda c, r, cfg: rouge_w(c, r, cfg.rouge_w_alpha, cfg.beta).f),
    "rouge-s": _rouge(lambda c, r, cfg: rouge_s(c, r, cfg.beta).f),
    "rouge-su": _rouge(lambda c, r, cfg: rouge_su(c, r, cfg.beta)),
    "bertscore": _bertscore,
    "moverscore": _moverscore,
    "smd": _smd,
}


def _embedding_store(records: list[EvalRecord], cfg: ScoreConfig, embeddings: Optional[EmbeddingStore]) -> Optional[EmbeddingStore]:
    if not EMBEDDING_METRICS.intersection(cfg.metrics):
        return None
    if cfg.hash_embed:
        embedder = HashEmbedder(cfg.embed_layers, cfg.embed_width, cfg.seed)
        return EmbeddingStore.from_embedder({r.id: (r.candidate, r.reference) for r in records}, embedder)
    missing = [r.id for r in records if embeddings is None or r.id not in embeddings]
    if missing:
        raise ConfigurationError(
            f"metrics {sorted(EMBEDDING_METRICS.intersection(cfg.metrics))} need embeddings; missing for {missing}",
            ids=missing,
        )
    return embeddings


def _text_vector(text: str, embedder: HashEmbedder, what: str) -> np.ndarray:
    embedded = embedder.embed(text)
    if not embedded.tokens:
        raise EmbeddingError(f"{what} has no tokens to embed")
    return embedded.layers.mean(axis=(0, 1))


def _context_vectors(record: EvalRecord, embedder: HashEmbedder) -> tuple[np.ndarray, np.ndarray]:
    """Supplied vectors win; otherwise the question and contexts are hash-embedded."""
    if record.question_vector is not None:
        question = np.array(record.question_vector, dtype=np.float64)
    else:
        question = _text_vector(record.question, embedder, f"question of item {record.id!r}")
    if record.context_vectors is not None:
        contexts = np.array(record.context_vectors, dtype=np.float64)
    else:
        contexts = np.stack(
            [_text_vector(c, embedder, f"context {i} of item {record.id!r}") for i, c in enumerate(record.contexts)]
        )
    return question, contexts


def rank_contexts(records: list[EvalRecord], cfg: ScoreConfig) -> dict[str, list[int]]:
    """Context order per record for the sim and mmr settings; records without contexts are skipped."""
    if cfg.setting == "zs":
        return {}
    embedder = HashEmbedder(cfg.embed_layers, cfg.embed_width, cfg.seed)
    rankings = {}
    for record in records:
        if not record.contexts and not record.context_vectors:
            continue
        query, contexts = _context_vectors(record, embedder)
        if cfg.setting == "sim":
            rankings[record.id] = rank_sim(query, contexts)
        else:
            rankings[record.id] = rank_mmr(query, contexts, cfg.mmr_lambda, cfg.mmr_k)
    return rankings


def _score_record(record: EvalRecord, ctx: _Context) -> list[ScoreRow]:
    rows = []
    for metric in ctx.cfg.metrics:
        try:
            rows.append(ScoreRow(record.id, metric, float(METRICS[metric](record, ctx))))
        except UndefinedScoreError as e:
            raise UndefinedScoreError(f"item {record.id!r}, metric {metric}: {e}")
    return rows


def run_eval(
    records: list[EvalRecord],
    cfg: ScoreConfig,
    embeddings: Optional[EmbeddingStore] = None,
    progress: bool = False,
) -> MetricReport:
    """
    Score every record with every requested metric.

    Args:
        records: Records to score
        cfg: Metrics, setting and metric options
        embeddings: Sidecar store, needed for embedding metrics unless cfg.hash_embed
        progress: Show a tqdm progress bar

    Returns:
        The report; rows are sorted by id, then by the requested metric order

    Raises:
        ConfigurationError: An embedding metric was requested and some items have no embeddings
    """
    store = _embedding_store(records, cfg, embeddings)
    idf_ref = build_idf([r.reference for r in records]) if records else None
    idf_cand = build_idf([r.candidate for r in records]) if records else None
    ctx = _Context(cfg, store, idf_ref, idf_cand)

    workers = resolve_thread_count()
    logger.info(
        "Scoring %d records with %s (setting %s, %d workers)", len(records), ", ".join(cfg.metrics), cfg.setting, workers
    )
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(
            tqdm(pool.map(lambda r: _score_record(r, ctx), records), total=len(records), desc="Scoring", disable=not progress)
        )

    order = {m: i for i, m in enumerate(cfg.metrics)}
    rows = sorted((row for item in results for row in item), key=lambda row: (row.id, order[row.metric]))
    metadata = {
        "biopars_version": __version__,
        "config_hash": cfg.config_hash(),
        "metric_versions": {m: METRIC_VERSIONS[m] for m in cfg.metrics},
        "rankings": rank_contexts(records, cfg),
        "seed": cfg.seed,
        "setting": cfg.setting,
        "system": cfg.system,
    }
    return MetricReport(rows, list(cfg.metrics), metadata)
