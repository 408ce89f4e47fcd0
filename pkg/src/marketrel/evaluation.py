"""Scoring predicted relations against realised resolutions."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .market_data import MarketRecord
from .transduction.schemas import MarketRelation

CONFIDENCE_THRESHOLD = 0.5

EVALUATION_COLUMNS = (
    "cluster_id", "category", "question_i", "question_j", "is_same_outcome",
    "confidence_score", "rationale", "ground_truth_same", "is_correct", "eligible",
)


class IntegrityError(RuntimeError):
    """A relation refers to a market that is not in the dataset."""


@dataclass(frozen=True)
class EvaluatedRelation:
    relation: MarketRelation
    cluster_id: int
    category: str
    ground_truth_same: bool
    is_correct: bool
    eligible: bool

    def to_row(self) -> dict[str, str]:
        r = self.relation
        return {
            "cluster_id": str(self.cluster_id),
            "category": self.category,
            "question_i": r.question_i,
            "question_j": r.question_j,
            "is_same_outcome": str(r.is_same_outcome).lower(),
            "confidence_score": repr(r.confidence_score),
            "rationale": r.rationale,
            "ground_truth_same": str(self.ground_truth_same).lower(),
            "is_correct": str(self.is_correct).lower(),
            "eligible": str(self.eligible).lower(),
        }


def evaluate_relations(
    relations: Mapping[int, Iterable[MarketRelation]],
    markets: Mapping[str, MarketRecord],
    labels: Mapping[int, str],
    threshold: float = CONFIDENCE_THRESHOLD,
) -> list[EvaluatedRelation]:
    """Attach ground truth, correctness and eligibility to every relation.

    ``relations`` maps cluster id to that cluster's relations. Eligibility is
    ``confidence_score >= threshold``.
    """
    out = []
    for cluster_id in sorted(relations):
        for rel in relations[cluster_id]:
            try:
                a = markets[rel.question_i.strip()]
                b = markets[rel.question_j.strip()]
            except KeyError as exc:
                raise IntegrityError(f"relation references unknown market {exc.args[0]!r}") from None
            truth = a.outcome == b.outcome
            out.append(
                EvaluatedRelation(
                    relation=rel,
                    cluster_id=cluster_id,
                    category=labels.get(cluster_id, "other"),
                    ground_truth_same=truth,
                    is_correct=rel.is_same_outcome == truth,
                    eligible=rel.confidence_score >= threshold,
                )
            )
    return out


@dataclass(frozen=True)
class CategoryAccuracy:
    accuracy: float
    pair_count: int
    correct_count: int
    cluster_count: int


@dataclass(frozen=True)
class AccuracyReport:
    cluster_accuracy: float | None
    overall_accuracy: float | None
    eligible_pair_count: int
    correct_pair_count: int
    per_cluster: dict[int, float]
    per_category: dict[str, CategoryAccuracy]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_cluster"] = {str(k): v for k, v in sorted(self.per_cluster.items())}
        d["cluster_accuracy_pct"] = as_percent(self.cluster_accuracy)
        d["overall_accuracy_pct"] = as_percent(self.overall_accuracy)
        return d


def as_percent(x: float | None) -> float | None:
    """Fraction to percentage points, one decimal."""
    return None if x is None else round(100.0 * x, 1)


def accuracy_report(evaluated: Sequence[EvaluatedRelation]) -> AccuracyReport:
    """Cluster-average and pooled accuracy over eligible relations.

    The cluster average weights every cluster with at least one eligible
    pair equally; the pooled figure weights every eligible pair equally.
    Both are computed exactly and rounded once to float.
    """
    by_cluster: dict[int, list[bool]] = {}
    by_category: dict[str, list[bool]] = {}
    clusters_in_category: dict[str, set[int]] = {}
    for ev in evaluated:
        if not ev.eligible:
            continue
        by_cluster.setdefault(ev.cluster_id, []).append(ev.is_correct)
        by_category.setdefault(ev.category, []).append(ev.is_correct)
        clusters_in_category.setdefault(ev.category, set()).add(ev.cluster_id)

    per_cluster = {cid: Fraction(sum(v), len(v)) for cid, v in by_cluster.items()}
    eligible = sum(len(v) for v in by_cluster.values())
    correct = sum(sum(v) for v in by_cluster.values())
    cluster_acc = overall = None
    if eligible:
        cluster_acc = float(sum(per_cluster.values(), Fraction(0)) / len(per_cluster))
        overall = float(Fraction(correct, eligible))
    per_category = {
        cat: CategoryAccuracy(
            float(Fraction(sum(v), len(v))), len(v), sum(v), len(clusters_in_category[cat])
        )
        for cat, v in sorted(by_category.items())
    }
    return AccuracyReport(
        cluster_accuracy=cluster_acc,
        overall_accuracy=overall,
        eligible_pair_count=eligible,
        correct_pair_count=correct,
        per_cluster={cid: float(f) for cid, f in sorted(per_cluster.items())},
        per_category=per_category,
    )


@dataclass(frozen=True)
class TrialStats:
    """Descriptive statistics in the Mean/Std./Min/25%/Median/75%/Max shape.

    ``std`` is the sample (n-1) deviation; with a single value it is
    reported as 0.0 and ``degenerate`` is set.
    """

    n: int
    mean: float
    std: float
    min: float
    q25: float
    median: float
    q75: float
    max: float
    degenerate: bool = field(default=False)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrialStats":
        return cls(**d)


def trial_stats(values: Iterable[float]) -> TrialStats:
    """Summarise values; quantiles interpolate linearly between order statistics."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("trial_stats needs at least one value")
    q25, median, q75 = np.quantile(arr, [0.25, 0.5, 0.75], method="linear")
    n = int(arr.size)
    return TrialStats(
        n=n,
        mean=float(arr.mean()),
        std=float(arr.std(ddof=1)) if n > 1 else 0.0,
        min=float(arr.min()),
        q25=float(q25),
        median=float(median),
        q75=float(q75),
        max=float(arr.max()),
        degenerate=n < 2,
    )


def write_evaluation(evaluated: Iterable[EvaluatedRelation], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=EVALUATION_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for ev in evaluated:
            writer.writerow(ev.to_row())


def read_evaluation(path: str | Path) -> list[EvaluatedRelation]:
    def flag(text: str) -> bool:
        return text == "true"

    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rel = MarketRelation(
                question_i=row["question_i"],
                question_j=row["question_j"],
                is_same_outcome=flag(row["is_same_outcome"]),
                confidence_score=float(row["confidence_score"]),
                rationale=row["rationale"],
            )
            out.append(
                EvaluatedRelation(
                    relation=rel,
                    cluster_id=int(row["cluster_id"]),
                    category=row["category"],
                    ground_truth_same=flag(row["ground_truth_same"]),
                    is_correct=flag(row["is_correct"]),
                    eligible=flag(row["eligible"]),
                )
            )
    return out

