"""Mini-batch training of the siamese classifier with a hand-rolled Adam."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from qexp.classifier.network import SiameseModel
from qexp.classifier.pairs import generate_pairs
from qexp.embeddings import EmbeddingTable
from qexp.labeling import LabeledDataset

log = logging.getLogger(__name__)

DEFAULT_HIDDEN = 200
DEFAULT_REP = 400
DEFAULT_PAIR_BUDGET = 50_000


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    epochs: int = 20
    seed: int = 0
    pair_budget: int = DEFAULT_PAIR_BUDGET

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.pair_budget < 2:
            raise ValueError(f"pair_budget must be >= 2, got {self.pair_budget}")


class Adam:
    """Adaptive-moment gradient descent over a named parameter dict."""

    def __init__(self, params: dict, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict):
        self.t += 1
        for name in params:
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / (1.0 - self.beta1 ** self.t)
            v_hat = self.v[name] / (1.0 - self.beta2 ** self.t)
            params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def example_sequence(table: EmbeddingTable, query_terms, candidate: str) -> np.ndarray:
    """Embedding sequence for one input: in-vocabulary query terms, then the candidate.

    Out-of-vocabulary query terms are dropped; the candidate must be in
    vocabulary and at least one query term must survive.
    """
    if candidate not in table:
        raise KeyError(f"candidate term {candidate!r} not in embedding vocabulary")
    rows = [table.vector(t) for t in query_terms if t in table]
    if not rows:
        raise ValueError(f"no query term of {list(query_terms)!r} is in vocabulary")
    rows.append(table.vector(candidate))
    return np.array(rows, dtype=np.float64)


def encodable_examples(dataset: LabeledDataset, table: EmbeddingTable):
    """Examples the network can consume, with their precomputed sequences."""
    kept = []
    seqs = []
    dropped = 0
    for ex in dataset.examples:
        if ex.candidate_term not in table:
            dropped += 1
            continue
        if not any(t in table for t in ex.query_terms):
            dropped += 1
            continue
        kept.append(ex)
        seqs.append(example_sequence(table, ex.query_terms, ex.candidate_term))
    if dropped:
        log.warning("training data: %d of %d examples dropped (out of vocabulary)",
                    dropped, len(dataset))
    return kept, seqs


def train(dataset: LabeledDataset, table: EmbeddingTable, cfg: TrainConfig,
          model: SiameseModel | None = None,
          hidden: int = DEFAULT_HIDDEN, rep: int = DEFAULT_REP,
          pooling: str = "last"):
    """Train on balanced same/different pairs; returns (model, loss history).

    All randomness (init, pair sampling, batch order) flows from cfg.seed,
    so identical inputs reproduce bit-identical parameters. Loss history
    rows are (epoch, batch, loss).
    """
    rng = np.random.default_rng(cfg.seed)
    if model is None:
        model = SiameseModel(table.dim, hidden, rep, rng, pooling)
    examples, seqs = encodable_examples(dataset, table)
    if len(examples) < 2:
        raise ValueError("training needs at least 2 encodable labeled examples")
    seq_of = {id(ex): seq for ex, seq in zip(examples, seqs)}

    adam = Adam(model.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps_adam)
    history = []
    for epoch in range(cfg.epochs):
        pairs = generate_pairs(examples, balance=True, rng=rng, budget=cfg.pair_budget)
        for batch_no, start in enumerate(range(0, len(pairs), cfg.batch_size)):
            batch = pairs[start:start + cfg.batch_size]
            loss, grads = model.pair_loss_and_grads(
                [seq_of[id(p.left)] for p in batch],
                [seq_of[id(p.right)] for p in batch],
                [p.same_class for p in batch])
            if not math.isfinite(loss):
                raise ArithmeticError(
                    f"non-finite loss {loss} at epoch {epoch} batch {batch_no}")
            adam.step(model.params, grads)
            history.append((epoch, batch_no, loss))
    return model, history


def pair_accuracy(model: SiameseModel, table: EmbeddingTable, pairs) -> float:
    """Fraction of pairs whose same/different call (threshold 0.5) is right."""
    if not pairs:
        raise ValueError("no pairs to score")
    correct = 0
    for pair in pairs:
        rep_l = model.encode(example_sequence(
            table, pair.left.query_terms, pair.left.candidate_term))
        rep_r = model.encode(example_sequence(
            table, pair.right.query_terms, pair.right.candidate_term))
        predicted_same = model.compare(rep_l, rep_r) >= 0.5
        correct += predicted_same == pair.same_class
    return correct / len(pairs)
