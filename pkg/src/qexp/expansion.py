"""Expanded query models: centroid-similarity, multiplicative, and classifier
reweighted expansion, interpolated with the original query."""

import logging
import math
from dataclasses import dataclass

from qexp.classifier.inference import ReferenceSet, encode_reference_set, p_good
from qexp.classifier.network import SiameseModel
from qexp.collection import InvertedIndex, Topic
from qexp.embeddings import EmbeddingTable, cosine
from qexp.labeling import scored_candidate_pool
from qexp.retrieval import QueryModel

log = logging.getLogger(__name__)

DEFAULT_M = 10
DEFAULT_ALPHA = 1.0
DEFAULT_BETA = 0.5
DEFAULT_POOL_SIZE = 1000


@dataclass
class ExpansionConfig:
    m: int = DEFAULT_M
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    pool_size: int = DEFAULT_POOL_SIZE

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")


def interpolate(topic: Topic, expansion_weights: dict[str, float],
                beta: float) -> QueryModel:
    """beta * normalized original counts + (1 - beta) * expansion distribution.

    Exact zero weights are dropped so degenerate beta values reduce cleanly
    to one side.
    """
    counts: dict[str, float] = {}
    for t in topic.title_terms:
        counts[t] = counts.get(t, 0.0) + 1.0
    total = sum(counts.values())
    weights: dict[str, float] = {}
    for t in sorted(counts):
        w = beta * (counts[t] / total)
        if w != 0.0:
            weights[t] = w
    for t in sorted(expansion_weights):
        w = (1.0 - beta) * expansion_weights[t]
        if w != 0.0:
            weights[t] = weights.get(t, 0.0) + w
    return QueryModel(topic.query_id, weights)


def qlm_model(topic: Topic) -> QueryModel:
    """The unexpanded query: normalized title term counts."""
    return interpolate(topic, {}, beta=1.0)


def awe_selection(topic: Topic, table: EmbeddingTable, idx: InvertedIndex,
                  cfg: ExpansionConfig, stopwords=frozenset()) -> list[tuple[str, float]]:
    """Top-m pool terms by cosine to the query centroid.

    Non-positive cosines cannot serve as expansion weights and are dropped
    with a warning.
    """
    pool = scored_candidate_pool(topic, table, idx, cfg.pool_size, stopwords)
    selected = pool[:cfg.m]
    kept = [(t, sim) for t, sim in selected if sim > 0.0]
    if len(kept) < len(selected):
        log.warning("query %s: dropped %d expansion terms with non-positive cosine",
                    topic.query_id, len(selected) - len(kept))
    return kept


def _normalize(weighted: list[tuple[str, float]]) -> dict[str, float]:
    total = 0.0
    for _, w in weighted:
        total += w
    return {t: w / total for t, w in weighted}


def awe_expand(topic: Topic, table: EmbeddingTable, idx: InvertedIndex,
               cfg: ExpansionConfig, stopwords=frozenset()) -> QueryModel:
    """Expansion terms weighted by their cosine to the query embedding centroid."""
    selection = awe_selection(topic, table, idx, cfg, stopwords)
    if not selection:
        log.warning("query %s: empty expansion selection, original query kept",
                    topic.query_id)
        return interpolate(topic, {}, cfg.beta)
    return interpolate(topic, _normalize(selection), cfg.beta)


def eqe1_expand(topic: Topic, table: EmbeddingTable, idx: InvertedIndex,
                cfg: ExpansionConfig, stopwords=frozenset()) -> QueryModel:
    """Expansion terms scored by their multiplicative similarity to query terms.

    score(x) = prod over query terms w of softmax-normalized exp(cos(x, w)),
    the normalization running over the candidate pool for each query term.
    """
    pool = scored_candidate_pool(topic, table, idx, cfg.pool_size, stopwords)
    if not pool:
        raise ValueError(f"query {topic.query_id}: empty candidate pool")
    pool_terms = [t for t, _ in pool]
    query_terms = [t for t in topic.title_terms if t in table]
    scores = {t: 1.0 for t in pool_terms}
    for w in query_terms:
        wv = table.vector(w)
        sims = [math.exp(cosine(table.vector(t), wv)) for t in pool_terms]
        denom = sum(sims)
        for t, s in zip(pool_terms, sims):
            scores[t] *= s / denom
    ranked = sorted(scores.items(), key=lambda e: (-e[1], e[0]))
    selection = ranked[:cfg.m]
    return interpolate(topic, _normalize(selection), cfg.beta)


def dec_expand(topic: Topic, table: EmbeddingTable, idx: InvertedIndex,
               model: SiameseModel, refset: ReferenceSet, cfg: ExpansionConfig,
               stopwords=frozenset(), ref_reps=None,
               symmetric: bool = False) -> QueryModel:
    """Reweight the centroid-based selection by predicted term goodness.

    Each of the same top-m terms the centroid method selects gets weight
    (1 + alpha * P(good | query, term)) * cosine; the selection itself never
    changes, only the weights.
    """
    selection = awe_selection(topic, table, idx, cfg, stopwords)
    if not selection:
        log.warning("query %s: empty expansion selection, original query kept",
                    topic.query_id)
        return interpolate(topic, {}, cfg.beta)
    if ref_reps is None:
        ref_reps = encode_reference_set(model, refset, table)
    reweighted = []
    for term, sim in selection:
        prob = p_good(topic.title_terms, term, model, refset, table,
                      ref_reps=ref_reps, symmetric=symmetric)
        reweighted.append((term, (1.0 + cfg.alpha * prob) * sim))
    return interpolate(topic, _normalize(reweighted), cfg.beta)


def export_weights_tsv(models, path):
    """query_id, term, weight rows for inspection."""
    with open(path, "w") as f:
        f.write("query_id\tterm\tweight\n")
        for qm in models:
            for term in sorted(qm.weights, key=lambda t: (-qm.weights[t], t)):
                f.write(f"{qm.query_id}\t{term}\t{qm.weights[term]!r}\n")
