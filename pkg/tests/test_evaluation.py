from __future__ import annotations

import math
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marketrel.evaluation import (
    EvaluatedRelation,
    IntegrityError,
    TrialStats,
    accuracy_report,
    as_percent,
    evaluate_relations,
    read_evaluation,
    trial_stats,
    write_evaluation,
)
from marketrel.transduction import MarketRelation

from .conftest import market

MARKETS = {
    m.question: m
    for m in [market("A?", "YES"), market("B?", "YES"), market("C?", "NO"), market("D?", "NO")]
}


def relation(i: str, j: str, same: bool, conf: float = 0.9) -> MarketRelation:
    return MarketRelation(question_i=i, question_j=j, is_same_outcome=same, confidence_score=conf, rationale="r")


def scored(cluster_id: int, correct: bool, eligible: bool = True, category: str = "politics") -> EvaluatedRelation:
    return EvaluatedRelation(relation("A?", "B?", correct), cluster_id, category, True, correct, eligible)


class TestEvaluate:
    def test_ground_truth_and_correctness(self):
        evs = evaluate_relations(
            {0: [relation("A?", "B?", True), relation("A?", "C?", True), relation("C?", "D?", True, 0.3)]},
            MARKETS, {0: "economy"},
        )
        assert [e.ground_truth_same for e in evs] == [True, False, True]
        assert [e.is_correct for e in evs] == [True, False, True]
        assert [e.eligible for e in evs] == [True, True, False]
        assert {e.category for e in evs} == {"economy"}

    @pytest.mark.parametrize("conf, eligible", [(0.49, False), (0.5, True), (1.0, True), (0.0, False)])
    def test_threshold_boundary(self, conf, eligible):
        [ev] = evaluate_relations({0: [relation("A?", "B?", True, conf)]}, MARKETS, {})
        assert ev.eligible is eligible

    def test_custom_threshold(self):
        [ev] = evaluate_relations({0: [relation("A?", "B?", True, 0.3)]}, MARKETS, {}, threshold=0.25)
        assert ev.eligible

    def test_unknown_market_is_integrity_error(self):
        with pytest.raises(IntegrityError, match="Z"):
            evaluate_relations({0: [relation("A?", "Z?", True)]}, MARKETS, {})

    def test_csv_round_trip(self, tmp_path):
        evs = evaluate_relations(
            {0: [relation("A?", "B?", True, 0.123456789)], 2: [relation("C?", "D?", False, 0.6)]},
            MARKETS, {0: "crypto", 2: "sports"},
        )
        write_evaluation(evs, tmp_path / "e.csv")
        assert read_evaluation(tmp_path / "e.csv") == evs


class TestAccuracy:
    def test_cluster_average_vs_pooled(self):
        # cluster 0: 2/2 correct; cluster 1: 1/2 correct
        evs = [scored(0, True), scored(0, True), scored(1, True), scored(1, False)]
        rep = accuracy_report(evs)
        assert rep.cluster_accuracy == 0.75
        assert rep.overall_accuracy == pytest.approx(3 / 4)
        evs = [scored(0, True), scored(1, True), scored(1, False)]
        rep = accuracy_report(evs)
        assert rep.cluster_accuracy == 0.75
        assert rep.overall_accuracy == 2 / 3
        assert rep.eligible_pair_count == 3 and rep.correct_pair_count == 2

    def test_all_correct(self):
        rep = accuracy_report([scored(i, True) for i in range(5)])
        assert rep.cluster_accuracy == rep.overall_accuracy == 1.0
        assert rep.to_dict()["overall_accuracy_pct"] == 100.0

    def test_nothing_eligible(self):
        rep = accuracy_report([scored(0, True, eligible=False)])
        assert rep.cluster_accuracy is None and rep.overall_accuracy is None
        assert rep.eligible_pair_count == 0 and rep.per_cluster == {}

    def test_ineligible_cluster_excluded_from_average(self):
        rep = accuracy_report([scored(0, True), scored(1, False, eligible=False)])
        assert rep.cluster_accuracy == 1.0 and list(rep.per_cluster) == [0]

    def test_per_category(self):
        evs = [scored(0, True, category="crypto"), scored(0, False, category="crypto"),
               scored(1, True, category="sports")]
        rep = accuracy_report(evs)
        assert rep.per_category["crypto"].accuracy == 0.5
        assert rep.per_category["crypto"].pair_count == 2
        assert rep.per_category["crypto"].cluster_count == 1
        assert rep.per_category["sports"].correct_count == 1

    @pytest.mark.parametrize("x, pct", [(0.6945, 69.5), (2 / 3, 66.7), (0.0, 0.0), (None, None)])
    def test_percent(self, x, pct):
        assert as_percent(x) == pct


_cluster_results = st.lists(st.lists(st.booleans(), min_size=1, max_size=8), min_size=1, max_size=8)


def _evs(clusters: list[list[bool]]) -> list[EvaluatedRelation]:
    return [scored(cid, c) for cid, results in enumerate(clusters) for c in results]


class TestAccuracyProperties:
    @given(_cluster_results)
    def test_pooled_is_count_ratio(self, clusters):
        flat = [c for results in clusters for c in results]
        assert accuracy_report(_evs(clusters)).overall_accuracy == pytest.approx(sum(flat) / len(flat), abs=1e-12)

    @given(_cluster_results)
    def test_cluster_average_is_mean_of_means(self, clusters):
        expected = statistics.fmean(sum(r) / len(r) for r in clusters)
        assert accuracy_report(_evs(clusters)).cluster_accuracy == pytest.approx(expected, abs=1e-12)

    @given(_cluster_results)
    def test_negation_complements(self, clusters):
        flipped = [[not c for c in results] for results in clusters]
        a, b = accuracy_report(_evs(clusters)), accuracy_report(_evs(flipped))
        assert a.overall_accuracy + b.overall_accuracy == pytest.approx(1.0, abs=1e-12)
        assert a.cluster_accuracy + b.cluster_accuracy == pytest.approx(1.0, abs=1e-12)

    @given(_cluster_results, st.data())
    def test_duplicating_cluster_keeps_cluster_average_iff_uniform(self, clusters, data):
        # replacing a cluster by a copy of itself under a new id leaves the
        # average unchanged only when that cluster already sits at the mean
        idx = data.draw(st.integers(0, len(clusters) - 1))
        base = accuracy_report(_evs(clusters)).cluster_accuracy
        dup = accuracy_report(_evs(clusters + [clusters[idx]])).cluster_accuracy
        own = sum(clusters[idx]) / len(clusters[idx])
        assert math.isclose(dup, (base * len(clusters) + own) / (len(clusters) + 1), abs_tol=1e-12)

    @given(_cluster_results)
    def test_per_category_counts_sum(self, clusters):
        evs = [EvaluatedRelation(e.relation, e.cluster_id, ["crypto", "sports"][e.cluster_id % 2],
                                 e.ground_truth_same, e.is_correct, e.eligible) for e in _evs(clusters)]
        rep = accuracy_report(evs)
        assert sum(c.pair_count for c in rep.per_category.values()) == rep.eligible_pair_count
        assert sum(c.correct_count for c in rep.per_category.values()) == rep.correct_pair_count


def oracle_quantile(values: list[float], p: float) -> float:
    xs = sorted(values)
    h = (len(xs) - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (h - lo) * (xs[hi] - xs[lo])


class TestTrialStats:
    def test_one_to_four(self):
        s = trial_stats([4, 1, 3, 2])
        assert (s.q25, s.median, s.q75) == (1.75, 2.5, 3.25)
        assert (s.min, s.max, s.mean) == (1.0, 4.0, 2.5)
        # hand: sample variance = (2.25 + 0.25 + 0.25 + 2.25) / 3 = 5/3
        assert s.std == pytest.approx(math.sqrt(5 / 3), abs=1e-12)

    def test_single_value_degenerate(self):
        s = trial_stats([50.0])
        assert s.degenerate and s.std == 0.0
        assert s.mean == s.min == s.q25 == s.median == s.q75 == s.max == 50.0

    def test_two_values(self):
        s = trial_stats([40.0, 60.0])
        assert s.mean == 50.0 and s.median == 50.0 and not s.degenerate
        assert s.std == pytest.approx(14.142135623730951, abs=1e-9)
        assert (s.q25, s.q75) == (45.0, 55.0)

    def test_empty(self):
        with pytest.raises(ValueError):
            trial_stats([])

    def test_dict_round_trip(self):
        s = trial_stats([1.0, 5.0, 2.0])
        assert TrialStats.from_dict(s.to_dict()) == s

    @settings(max_examples=80)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40))
    def test_against_oracle(self, values):
        s = trial_stats(values)
        tol = 1e-9 * max(1.0, max(abs(v) for v in values))
        for got, p in ((s.q25, 0.25), (s.median, 0.5), (s.q75, 0.75)):
            assert got == pytest.approx(oracle_quantile(values, p), abs=tol)
        assert s.min <= s.q25 <= s.median <= s.q75 <= s.max
        if len(values) > 1:
            assert s.std == pytest.approx(statistics.stdev(values), rel=1e-9, abs=tol)
