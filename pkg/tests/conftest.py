from __future__ import annotations

import time
from datetime import datetime, timedelta, timezone
from decimal import Decimal

import pytest

from marketrel.market_data import MarketRecord, Outcome, PriceSeries, PriceTick

T0 = datetime(2025, 4, 1, tzinfo=timezone.utc)

ACCEPTANCE_LINES: list[str] = []
_SESSION_START = time.perf_counter()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
    elapsed = time.perf_counter() - _SESSION_START
    verdict = "PASS" if elapsed < 60 else "FAIL"
    terminalreporter.write_line(f"[AC-08b] {verdict}: full offline suite wall time {elapsed:.1f} s (< 60 s)")


def at(days: float) -> datetime:
    return T0 + timedelta(days=days)


def market(
    question: str,
    outcome: str = "YES",
    start: float = -30.0,
    end: float = 30.0,
    resolved: float = 10.0,
    volume: str = "1000",
) -> MarketRecord:
    return MarketRecord(
        question=question,
        event_market_name="single market",
        market_start_time=at(start),
        market_end_time=at(end),
        resolved_on_timestamp=at(resolved),
        outcome=Outcome(outcome),
        volume_usd=Decimal(volume),
    )


def series(question: str, points: list[tuple[float, float]]) -> PriceSeries:
    return PriceSeries(question, tuple(PriceTick(at(d), p) for d, p in points))


@pytest.fixture
def make_market():
    return market


@pytest.fixture
def make_series():
    return series
