"""Synthetic resolved-market cohorts and a gateway with planted accuracy.

Useful for demos and offline end-to-end runs: markets come in topical
families sharing a latent event, so same/different relations have a known
ground truth, and every market gets a daily YES-price path that drifts to
its resolution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from decimal import Decimal
from itertools import combinations
from typing import Mapping

import numpy as np

from .market_data import MONTHS, MarketRecord, Outcome, PriceSeries, PriceTick
from .transduction.gateway import DISCOVER_TEMPLATE, LABEL_TEMPLATE, ChatRequest, fingerprint
from .transduction.schemas import CATEGORIES

# (category, subject, affirmative action, opposing action)
TOPICS = [
    ("politics", "Trump", "increase tariffs on Canada", "remove tariffs on Canada"),
    ("politics", "Trump", "impose tariffs on EU alcohol", "pause tariffs on EU alcohol"),
    ("geopolitics", "Russia", "agree to a ceasefire with Ukraine", "launch a new offensive in Ukraine"),
    ("geopolitics", "Israel", "announce a ceasefire in Gaza", "expand ground operations in Gaza"),
    ("economy", "the Fed", "cut interest rates", "hold interest rates steady"),
    ("economy", "US inflation", "come in above 3 percent", "come in below 2.5 percent"),
    ("crypto", "Bitcoin", "close above 100k", "close below 80k"),
    ("crypto", "Ethereum", "reach a new all time high", "drop under 1500"),
    ("tech", "OpenAI", "release GPT 5", "delay its next flagship model"),
    ("tech", "Apple", "announce a foldable iPhone", "cancel its foldable iPhone"),
    ("sports", "the Celtics", "win the NBA finals", "lose in the first round"),
    ("sports", "Real Madrid", "win La Liga", "finish outside the top two"),
    ("earnings", "Nvidia", "beat quarterly earnings estimates", "miss quarterly earnings estimates"),
    ("finance", "the S&P 500", "close the month higher", "close the month lower"),
    ("elections", "the Liberal party", "win the Canadian election", "lose its parliamentary majority"),
    ("culture", "Taylor Swift", "announce a new album", "cancel her remaining tour dates"),
]

DEADLINES = ("before {m}", "by end of {m}", "in {m}", "by {m} 15", "by {m} 30")


@dataclass
class SyntheticCohort:
    markets: list[MarketRecord]
    prices: dict[str, PriceSeries]
    categories: dict[str, str]  # question -> true topic category


def make_cohort(
    month: str = "April",
    year: int = 2025,
    n_markets: int = 60,
    seed: int = 0,
) -> SyntheticCohort:
    """Build ``n_markets`` resolved markets whose questions name ``month``.

    Every market lasts at least eight days and resolves inside the month.
    Questions in one topic family share a latent outcome; the opposing
    action resolves the other way.
    """
    if month not in MONTHS:
        raise ValueError(f"unknown month {month!r}")
    if n_markets > len(TOPICS) * 2 * len(DEADLINES):
        raise ValueError("too many markets for the topic vocabulary")
    rng = np.random.default_rng(seed)
    month_start = datetime(year, MONTHS.index(month) + 1, 1, tzinfo=timezone.utc)
    latent = {i: bool(rng.integers(2)) for i in range(len(TOPICS))}

    slots = [(t, neg, d) for t in range(len(TOPICS)) for neg in (False, True) for d in range(len(DEADLINES))]
    picks = rng.permutation(len(slots))[:n_markets]
    markets, prices, categories = [], {}, {}
    for idx in sorted(int(p) for p in picks):
        t, neg, d = slots[idx]
        category, subject, pos_action, neg_action = TOPICS[t]
        action = neg_action if neg else pos_action
        question = f"Will {subject} {action} {DEADLINES[d].format(m=month)}?"
        outcome = Outcome.YES if latent[t] != neg else Outcome.NO

        resolved = month_start + timedelta(days=2 + 5 * d + float(rng.uniform(0, 4)))
        resolved = resolved.replace(microsecond=0)
        start = resolved - timedelta(days=float(rng.uniform(8, 80)))
        start = start.replace(microsecond=0)
        end = resolved + timedelta(days=float(rng.uniform(0, 3)))
        end = end.replace(microsecond=0)
        volume = Decimal(str(round(float(rng.lognormal(11.5, 1.6)), 2)))
        markets.append(MarketRecord(question, "single market", start, end, resolved, outcome, volume))
        prices[question] = price_path(question, start, resolved, outcome, rng)
        categories[question] = category
    return SyntheticCohort(markets, prices, categories)


def price_path(
    question: str, start: datetime, resolved: datetime, outcome: Outcome, rng: np.random.Generator
) -> PriceSeries:
    """Daily noisy YES prices drifting toward the outcome, ending decisive."""
    target = 1.0 if outcome is Outcome.YES else 0.0
    days = max(1, int((resolved - start).total_seconds() // 86400))
    p0 = float(rng.uniform(0.3, 0.7))
    ticks = []
    for k in range(days + 1):
        when = start + timedelta(days=k, hours=12)
        if when >= resolved:
            break
        w = (k / days) ** 2
        p = (1 - w) * p0 + w * (0.5 * p0 + 0.5 * target) + float(rng.normal(0, 0.04))
        ticks.append(PriceTick(when, round(min(0.97, max(0.03, p)), 4)))
    ticks.append(PriceTick(resolved + timedelta(hours=6), 0.995 if target else 0.005))
    return PriceSeries(question, tuple(ticks))


class PlantedGateway:
    """Offline gateway that knows the answers and is right with probability ``accuracy``.

    For discovery it proposes every within-cluster pair (up to
    ``max_pairs``), states the true relation with probability ``accuracy``
    and the opposite otherwise, with a confidence drawn uniformly from
    ``confidence_range``. Labels come from ``categories`` by majority vote.
    Randomness is keyed on the request fingerprint and seed only.
    """

    def __init__(
        self,
        outcomes: Mapping[str, Outcome | str],
        accuracy: float = 0.7,
        categories: Mapping[str, str] | None = None,
        confidence_range: tuple[float, float] = (0.5, 1.0),
        max_pairs: int | None = None,
    ):
        self.outcomes = {q: Outcome(o) for q, o in outcomes.items()}
        self.accuracy = accuracy
        self.categories = dict(categories or {})
        self.confidence_range = confidence_range
        self.max_pairs = max_pairs

    def _rng(self, request: ChatRequest) -> np.random.Generator:
        key = fingerprint(request.template_id, request.questions)
        return np.random.default_rng([int(key[:16], 16), request.seed])

    def complete(self, request: ChatRequest) -> str:
        questions = sorted(request.questions)
        if request.template_id == LABEL_TEMPLATE:
            votes = [self.categories.get(q, "other") for q in questions]
            best = max(CATEGORIES, key=lambda c: (votes.count(c), -CATEGORIES.index(c)))
            return json.dumps({"category": best})
        if request.template_id != DISCOVER_TEMPLATE:
            return "{}"
        rng = self._rng(request)
        pairs = list(combinations(questions, 2))
        if self.max_pairs is not None and len(pairs) > self.max_pairs:
            keep = sorted(rng.choice(len(pairs), self.max_pairs, replace=False))
            pairs = [pairs[i] for i in keep]
        lo, hi = self.confidence_range
        relations = []
        for a, b in pairs:
            truth = self.outcomes[a] == self.outcomes[b]
            said = truth if rng.random() < self.accuracy else not truth
            relations.append(
                {
                    "question_i": a,
                    "question_j": b,
                    "is_same_outcome": said,
                    "confidence_score": round(float(rng.uniform(lo, hi)), 3),
                    "rationale": "Both questions concern the same underlying event.",
                }
            )
        return json.dumps({"relations": relations})
