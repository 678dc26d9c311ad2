"""Rank metrics (AP, MAP, P@10), robustness index, and the paired t-test."""

import math
from dataclasses import dataclass, field

from qexp.collection import Qrels
from qexp.retrieval import RankedList

EVAL_DEPTH = 1000


def average_precision(ranked: RankedList, qrels: Qrels, depth: int = EVAL_DEPTH) -> float:
    """AP = (1/R) * sum over relevant retrieved ranks i of (hits at i / i).

    R counts all judged-relevant documents for the query, retrieved or not.
    """
    r_total = qrels.num_relevant(ranked.query_id)
    if r_total == 0:
        raise ValueError(f"query {ranked.query_id}: no relevant documents, AP undefined")
    hits = 0
    ap_sum = 0.0
    for i, (doc_id, _) in enumerate(ranked.entries[:depth], start=1):
        if qrels.is_relevant(ranked.query_id, doc_id):
            hits += 1
            ap_sum += hits / i
    return ap_sum / r_total


def precision_at(ranked: RankedList, qrels: Qrels, cutoff: int = 10) -> float:
    """Relevant count in the top cutoff, divided by cutoff even if fewer retrieved."""
    hits = sum(
        1 for doc_id, _ in ranked.entries[:cutoff]
        if qrels.is_relevant(ranked.query_id, doc_id)
    )
    return hits / cutoff


def robustness_index(baseline_aps: dict, treatment_aps: dict) -> float:
    """(N+ - N-) / |Q| over per-query AP differences; exact ties count in neither."""
    if set(baseline_aps) != set(treatment_aps):
        raise ValueError("robustness index needs identical query sets")
    if not baseline_aps:
        raise ValueError("robustness index of an empty query set is undefined")
    n_up = sum(1 for q in baseline_aps if treatment_aps[q] > baseline_aps[q])
    n_down = sum(1 for q in baseline_aps if treatment_aps[q] < baseline_aps[q])
    return (n_up - n_down) / len(baseline_aps)


def paired_t_test(baseline_aps: dict, treatment_aps: dict) -> tuple[float, float]:
    """Two-tailed paired t-test over per-query scores.

    Returns (t, p) with t = mean(d) / (s_d / sqrt(n)) for d = treatment - baseline
    and p from the Student-t distribution with n-1 degrees of freedom.
    """
    if set(baseline_aps) != set(treatment_aps):
        raise ValueError("paired t-test needs identical query sets")
    qids = sorted(baseline_aps)
    if len(qids) < 2:
        raise ValueError("paired t-test needs at least 2 queries")
    diffs = [treatment_aps[q] - baseline_aps[q] for q in qids]
    n = len(diffs)
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            raise ValueError("all differences are zero, t undefined")
        raise ValueError("zero variance with nonzero mean difference, t undefined")
    t = mean / math.sqrt(var / n)
    p = student_t_two_tailed_p(t, n - 1)
    return t, p


def student_t_two_tailed_p(t: float, dof: int) -> float:
    """P(|T| >= |t|) = I_x(dof/2, 1/2) with x = dof / (dof + t^2)."""
    if dof < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {dof}")
    x = dof / (dof + t * t)
    return regularized_incomplete_beta(dof / 2.0, 0.5, x)


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) by Lentz's continued fraction, absolute error below 1e-12."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    # The continued fraction converges fastest for x below the split point.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def _beta_cf(a, b, x, max_iter=300, eps=1e-16):
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


@dataclass
class EvalResult:
    """Aggregated retrieval effectiveness for one method over a query set."""

    per_query_ap: dict[str, float]
    per_query_p10: dict[str, float]
    depth: int = EVAL_DEPTH

    @property
    def map(self) -> float:
        return sum(self.per_query_ap.values()) / len(self.per_query_ap)

    @property
    def p10(self) -> float:
        return sum(self.per_query_p10.values()) / len(self.per_query_p10)

    @property
    def num_queries(self) -> int:
        return len(self.per_query_ap)


def evaluate_rankings(rankings, qrels: Qrels, depth: int = EVAL_DEPTH) -> EvalResult:
    """Per-query AP and P@10 for a batch of ranked lists."""
    ap = {}
    p10 = {}
    for ranked in rankings:
        ap[ranked.query_id] = average_precision(ranked, qrels, depth)
        p10[ranked.query_id] = precision_at(ranked, qrels, 10)
    if not ap:
        raise ValueError("no rankings to evaluate")
    return EvalResult(ap, p10, depth)


@dataclass
class Comparison:
    """Treatment vs baseline: robustness index and paired-t significance."""

    baseline: EvalResult
    treatment: EvalResult
    ri: float = field(init=False)
    t_statistic: float = field(init=False)
    p_value: float = field(init=False)

    def __post_init__(self):
        self.ri = robustness_index(self.baseline.per_query_ap, self.treatment.per_query_ap)
        try:
            self.t_statistic, self.p_value = paired_t_test(
                self.baseline.per_query_ap, self.treatment.per_query_ap)
        except ValueError:
            # Degenerate difference vector: report no significance evidence.
            self.t_statistic = math.nan
            self.p_value = math.nan

    @property
    def significant(self) -> bool:
        return self.p_value == self.p_value and self.p_value < 0.05
