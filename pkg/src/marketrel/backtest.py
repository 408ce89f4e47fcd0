"""Leader-follower backtest over predicted market pairs.

For each eligible pair the earlier-resolving market is the leader. After
it resolves, one unit of the follower leg implied by the leader outcome and
the predicted relation is bought at the first tick strictly after the
leader's resolution; the position pays 1 if that leg wins and 0 otherwise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .evaluation import EvaluatedRelation, TrialStats, trial_stats
from .market_data import (
    SECONDS_PER_DAY,
    MarketRecord,
    Outcome,
    PriceSeries,
    format_timestamp,
)

ENTRY_CUTOFF = 0.1
FINAL_PRICE_CUTOFF = 0.1

TRADE_COLUMNS = (
    "question_i", "question_j", "leader_question", "follower_question", "side",
    "entry_time", "entry_yes_price", "entry_price", "pnl", "skip_reason",
    "resolution_gap_days", "data_gap",
)


class Side(str, Enum):
    BUY_YES = "BUY_YES"
    BUY_NO = "BUY_NO"


class SkipReason(str, Enum):
    NONE = "NONE"
    NO_TICK_AFTER_RESOLUTION = "NO_TICK_AFTER_RESOLUTION"
    ENTRY_TOO_EXTREME = "ENTRY_TOO_EXTREME"
    FINAL_PRICE_AMBIGUOUS = "FINAL_PRICE_AMBIGUOUS"
    LEADER_TIE = "LEADER_TIE"


@dataclass(frozen=True)
class TradeDecision:
    leader_question: str
    follower_question: str
    side: Side
    entry_time: datetime
    entry_yes_price: float
    entry_price: float  # price of the selected leg


@dataclass(frozen=True)
class TradeRecord:
    question_i: str
    question_j: str
    leader_question: str | None
    follower_question: str | None
    decision: TradeDecision | None
    pnl: float | None
    skip_reason: SkipReason
    resolution_gap_days: float
    data_gap: bool = False

    @property
    def executed(self) -> bool:
        return self.skip_reason is SkipReason.NONE

    def to_row(self) -> dict[str, str]:
        d = self.decision
        return {
            "question_i": self.question_i,
            "question_j": self.question_j,
            "leader_question": self.leader_question or "",
            "follower_question": self.follower_question or "",
            "side": d.side.value if d else "",
            "entry_time": format_timestamp(d.entry_time) if d else "",
            "entry_yes_price": repr(d.entry_yes_price) if d else "",
            "entry_price": repr(d.entry_price) if d else "",
            "pnl": "" if self.pnl is None else repr(self.pnl),
            "skip_reason": self.skip_reason.value,
            "resolution_gap_days": repr(self.resolution_gap_days),
            "data_gap": str(self.data_gap).lower(),
        }


@dataclass(frozen=True)
class BacktestReport:
    trade_count: int
    skipped_count: int
    total_invested: float
    total_gain: float
    roi: float | None
    delay_stats: TrialStats | None
    skip_counts: dict[str, int]
    trades: tuple[TradeRecord, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "trade_count": self.trade_count,
            "skipped_count": self.skipped_count,
            "total_invested": self.total_invested,
            "total_gain": self.total_gain,
            "roi": self.roi,
            "roi_pct": None if self.roi is None else round(100.0 * self.roi, 1),
            "delay_stats": self.delay_stats.to_dict() if self.delay_stats else None,
            "skip_counts": dict(sorted(self.skip_counts.items())),
        }


def select_leader(
    a: MarketRecord, b: MarketRecord
) -> tuple[MarketRecord, MarketRecord] | None:
    """``(leader, follower)`` by strictly earlier resolution, ``None`` on a tie."""
    if a.resolved_on_timestamp < b.resolved_on_timestamp:
        return a, b
    if b.resolved_on_timestamp < a.resolved_on_timestamp:
        return b, a
    return None


def decide_side(leader_outcome: Outcome, is_same_outcome: bool) -> Side:
    """Buy YES iff the follower is predicted to resolve YES."""
    return Side.BUY_YES if (leader_outcome is Outcome.YES) == is_same_outcome else Side.BUY_NO


def resolution_gap_days(leader: MarketRecord, follower: MarketRecord) -> float:
    return (follower.resolved_on_timestamp - leader.resolved_on_timestamp).total_seconds() / SECONDS_PER_DAY


def execute_trade(
    relation: EvaluatedRelation,
    records: Mapping[str, MarketRecord],
    series: Mapping[str, PriceSeries],
    entry_cutoff: float = ENTRY_CUTOFF,
    final_price_cutoff: float = FINAL_PRICE_CUTOFF,
) -> TradeRecord:
    """Run the entry rule and both filters for one predicted pair.

    The entry tick must fall strictly after the leader resolves and strictly
    before the follower resolves. Leg correctness is judged against the
    follower's recorded outcome; its last tick only gates data quality.
    """
    rel = relation.relation
    qi, qj = rel.question_i.strip(), rel.question_j.strip()
    roles = select_leader(records[qi], records[qj])
    if roles is None:
        return TradeRecord(qi, qj, None, None, None, None, SkipReason.LEADER_TIE, 0.0)
    leader, follower = roles
    gap = resolution_gap_days(leader, follower)

    def skip(reason: SkipReason, decision: TradeDecision | None = None, data_gap: bool = False) -> TradeRecord:
        return TradeRecord(qi, qj, leader.question, follower.question, decision, None, reason, gap, data_gap)

    prices = series.get(follower.question)
    if prices is None or not prices.ticks:
        return skip(SkipReason.NO_TICK_AFTER_RESOLUTION, data_gap=True)
    tick = prices.first_after(leader.resolved_on_timestamp)
    if tick is None or tick.timestamp >= follower.resolved_on_timestamp:
        return skip(SkipReason.NO_TICK_AFTER_RESOLUTION)

    side = decide_side(leader.outcome, rel.is_same_outcome)
    entry_price = tick.yes_price if side is Side.BUY_YES else 1.0 - tick.yes_price
    decision = TradeDecision(leader.question, follower.question, side, tick.timestamp, tick.yes_price, entry_price)
    # tested on the YES price so both legs see the same band despite 1 - p rounding
    if tick.yes_price < entry_cutoff or tick.yes_price > 1.0 - entry_cutoff:
        return skip(SkipReason.ENTRY_TOO_EXTREME, decision)
    final = prices.last.yes_price
    if not (final <= final_price_cutoff or final >= 1.0 - final_price_cutoff):
        return skip(SkipReason.FINAL_PRICE_AMBIGUOUS, decision)

    won = (side is Side.BUY_YES) == (follower.outcome is Outcome.YES)
    pnl = 1.0 - entry_price if won else -entry_price
    return TradeRecord(qi, qj, leader.question, follower.question, decision, pnl, SkipReason.NONE, gap)


def run_backtest(
    evaluated: Iterable[EvaluatedRelation],
    records: Mapping[str, MarketRecord],
    series: Mapping[str, PriceSeries],
    entry_cutoff: float = ENTRY_CUTOFF,
    final_price_cutoff: float = FINAL_PRICE_CUTOFF,
) -> BacktestReport:
    """Trade every eligible relation and aggregate ROI and delay statistics."""
    trades = [
        execute_trade(ev, records, series, entry_cutoff, final_price_cutoff)
        for ev in evaluated
        if ev.eligible
    ]
    return summarize_trades(trades)


def summarize_trades(trades: Sequence[TradeRecord]) -> BacktestReport:
    executed = [t for t in trades if t.executed]
    invested = math.fsum(t.decision.entry_price for t in executed)
    gain = math.fsum(t.pnl for t in executed)
    gaps = sorted(t.resolution_gap_days for t in trades if t.skip_reason is not SkipReason.LEADER_TIE)
    skips: dict[str, int] = {}
    for t in trades:
        if not t.executed:
            skips[t.skip_reason.value] = skips.get(t.skip_reason.value, 0) + 1
    return BacktestReport(
        trade_count=len(executed),
        skipped_count=len(trades) - len(executed),
        total_invested=invested,
        total_gain=gain,
        roi=gain / invested if invested > 0 else None,
        delay_stats=trial_stats(gaps) if gaps else None,
        skip_counts=skips,
        trades=tuple(trades),
    )


def write_trades(trades: Iterable[TradeRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRADE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for t in trades:
            writer.writerow(t.to_row())


def read_trade_rows(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def plot_data(trade: TradeRecord, records: Mapping[str, MarketRecord], series: Mapping[str, PriceSeries]) -> dict:
    """Leader and follower price paths plus the entry marker for one trade."""
    d = trade.decision
    if d is None:
        raise ValueError("trade has no entry decision")

    def path(question: str) -> list[list]:
        s = series.get(question)
        return [[format_timestamp(t.timestamp), t.yes_price] for t in s.ticks] if s else []

    return {
        "leader_question": d.leader_question,
        "follower_question": d.follower_question,
        "leader_series": path(d.leader_question),
        "follower_series": path(d.follower_question),
        "leader_resolution_time": format_timestamp(records[d.leader_question].resolved_on_timestamp),
        "entry_time": format_timestamp(d.entry_time),
        "entry_price": d.entry_price,
        "side": d.side.value,
        "pnl": trade.pnl,
    }
