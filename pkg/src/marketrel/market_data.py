"""Resolved-market datasets: loading, validation, filtering and cohorting.

Markets arrive as delimited file exports (one row per resolved binary
market) and price histories as ``question, timestamp, yes_price`` ticks.
All timestamps must be timezone-aware ISO-8601; they are normalised to UTC.
"""

from __future__ import annotations

import csv
import io
import json
import re
import statistics
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import IO, Iterable

MARKET_COLUMNS = (
    "event_market_name",
    "question",
    "market_start_time",
    "market_end_time",
    "resolved_on_timestamp",
    "outcome",
    "volume_usd",
)
PRICE_COLUMNS = ("question", "timestamp", "yes_price")

MIN_DURATION = timedelta(days=7)
SECONDS_PER_DAY = 86400.0

MONTHS = (
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
)


class Outcome(str, Enum):
    YES = "YES"
    NO = "NO"


class DataError(ValueError):
    """Fatal problem with an input file (missing column, duplicate key...)."""


# --------------------------------------------------------------------------- #
# timestamps


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 timestamp carrying an explicit UTC offset.

    Naive timestamps are rejected; aware ones are converted to UTC.
    """
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None or dt.utcoffset() is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


# --------------------------------------------------------------------------- #
# domain types


@dataclass(frozen=True)
class MarketRecord:
    question: str
    event_market_name: str
    market_start_time: datetime
    market_end_time: datetime
    resolved_on_timestamp: datetime
    outcome: Outcome
    volume_usd: Decimal

    def __post_init__(self) -> None:
        if not self.question.strip():
            raise ValueError("question is empty")
        for name in ("market_start_time", "market_end_time", "resolved_on_timestamp"):
            ts = getattr(self, name)
            if ts.tzinfo is None:
                raise ValueError(f"{name} is a naive timestamp")
        if not self.market_start_time < self.market_end_time:
            raise ValueError("market_start_time must precede market_end_time")
        if self.resolved_on_timestamp < self.market_start_time:
            raise ValueError("resolved_on_timestamp precedes market_start_time")
        if not isinstance(self.outcome, Outcome):
            raise ValueError(f"outcome must be YES or NO, got {self.outcome!r}")
        if not self.volume_usd.is_finite() or self.volume_usd < 0:
            raise ValueError(f"volume_usd must be a non-negative amount, got {self.volume_usd}")

    @property
    def duration(self) -> timedelta:
        return self.market_end_time - self.market_start_time

    @property
    def duration_days(self) -> float:
        return self.duration.total_seconds() / SECONDS_PER_DAY

    def to_row(self) -> dict[str, str]:
        return {
            "event_market_name": self.event_market_name,
            "question": self.question,
            "market_start_time": format_timestamp(self.market_start_time),
            "market_end_time": format_timestamp(self.market_end_time),
            "resolved_on_timestamp": format_timestamp(self.resolved_on_timestamp),
            "outcome": self.outcome.value,
            "volume_usd": str(self.volume_usd),
        }


@dataclass(frozen=True)
class PriceTick:
    timestamp: datetime
    yes_price: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.yes_price <= 1.0:
            raise ValueError(f"yes_price {self.yes_price} outside [0, 1]")

    @property
    def no_price(self) -> float:
        return 1.0 - self.yes_price


@dataclass(frozen=True)
class PriceSeries:
    question: str
    ticks: tuple[PriceTick, ...]

    def __post_init__(self) -> None:
        for prev, cur in zip(self.ticks, self.ticks[1:]):
            if not prev.timestamp < cur.timestamp:
                raise ValueError(
                    f"ticks for {self.question!r} not strictly increasing at "
                    f"{format_timestamp(cur.timestamp)}"
                )

    def first_after(self, when: datetime) -> PriceTick | None:
        """First tick with timestamp strictly greater than ``when``."""
        for tick in self.ticks:
            if tick.timestamp > when:
                return tick
        return None

    @property
    def last(self) -> PriceTick | None:
        return self.ticks[-1] if self.ticks else None


@dataclass(frozen=True)
class CohortSpec:
    month: str
    year: int

    def __post_init__(self) -> None:
        if self.month not in MONTHS:
            raise ValueError(f"unknown month {self.month!r}")
        if not 1 <= self.year <= 9999:
            raise ValueError(f"invalid year {self.year}")

    @classmethod
    def parse(cls, text: str) -> "CohortSpec":
        """Parse ``YYYY-MM``."""
        m = re.fullmatch(r"(\d{4})-(\d{2})", text.strip())
        if not m or not 1 <= int(m.group(2)) <= 12:
            raise ValueError(f"cohort must look like YYYY-MM, got {text!r}")
        return cls(MONTHS[int(m.group(2)) - 1], int(m.group(1)))

    @property
    def key(self) -> str:
        return f"{self.year:04d}-{MONTHS.index(self.month) + 1:02d}"


@dataclass(frozen=True)
class SummaryStats:
    count: int
    volume_mean: Decimal | None
    volume_std: Decimal | None
    duration_mean_days: float | None
    duration_std_days: float | None


@dataclass
class LoadReport:
    accepted: int = 0
    rejected: list[dict] = field(default_factory=list)

    def reject(self, line: int, reason: str) -> None:
        self.rejected.append({"row": line, "reason": reason})

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------- #
# loading


def _open_text(source: str | Path | IO[str]) -> tuple[IO[str], bool]:
    if isinstance(source, (str, Path)):
        return open(source, newline="", encoding="utf-8"), True
    return source, False


def _sniff_reader(handle: IO[str]) -> csv.DictReader:
    # delimiter is whichever splits the header into the most fields
    text = handle.read()
    header = text.split("\n", 1)[0]
    delimiter = max(",\t;|", key=header.count)
    return csv.DictReader(io.StringIO(text), delimiter=delimiter)


def _parse_market_row(row: dict[str, str]) -> MarketRecord:
    outcome_text = (row["outcome"] or "").strip().upper()
    try:
        outcome = Outcome(outcome_text)
    except ValueError:
        raise ValueError(f"outcome {row['outcome']!r} is not YES or NO") from None
    try:
        volume = Decimal((row["volume_usd"] or "").strip())
    except InvalidOperation:
        raise ValueError(f"unparsable volume_usd {row['volume_usd']!r}") from None
    stamps = {}
    for name in ("market_start_time", "market_end_time", "resolved_on_timestamp"):
        try:
            stamps[name] = parse_timestamp(row[name] or "")
        except ValueError as exc:
            raise ValueError(f"{name}: {exc}") from None
    return MarketRecord(
        question=(row["question"] or "").strip(),
        event_market_name=(row["event_market_name"] or "").strip() or "single market",
        outcome=outcome,
        volume_usd=volume,
        **stamps,
    )


def load_markets(
    source: str | Path | IO[str], report: LoadReport | None = None
) -> list[MarketRecord]:
    """Read a markets export into validated records, in file order.

    Rows that fail validation are skipped and recorded in ``report`` keyed
    by their 1-based line number in the file (the header is line 1).
    A missing column or a repeated question raises :class:`DataError`.
    """
    report = report if report is not None else LoadReport()
    handle, owned = _open_text(source)
    try:
        reader = _sniff_reader(handle)
        missing = [c for c in MARKET_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"markets file is missing columns: {', '.join(missing)}")
        records: list[MarketRecord] = []
        seen: dict[str, int] = {}
        for line, row in enumerate(reader, start=2):
            try:
                rec = _parse_market_row(row)
            except (ValueError, TypeError) as exc:
                report.reject(line, str(exc))
                continue
            if rec.question in seen:
                raise DataError(
                    f"duplicate question on lines {seen[rec.question]} and {line}: {rec.question!r}"
                )
            seen[rec.question] = line
            records.append(rec)
    finally:
        if owned:
            handle.close()
    report.accepted = len(records)
    return records


def write_markets(markets: Iterable[MarketRecord], dest: str | Path | IO[str]) -> None:
    handle, owned = (open(dest, "w", newline="", encoding="utf-8"), True) if isinstance(
        dest, (str, Path)
    ) else (dest, False)
    try:
        writer = csv.DictWriter(handle, fieldnames=MARKET_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for rec in markets:
            writer.writerow(rec.to_row())
    finally:
        if owned:
            handle.close()


def _read_price_rows(handle: IO[str], rows: dict[str, list[PriceTick]]) -> None:
    reader = _sniff_reader(handle)
    missing = [c for c in PRICE_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise DataError(f"price file is missing columns: {', '.join(missing)}")
    for line, row in enumerate(reader, start=2):
        try:
            tick = PriceTick(parse_timestamp(row["timestamp"]), float(row["yes_price"]))
        except (ValueError, TypeError) as exc:
            raise DataError(f"price row {line}: {exc}") from None
        rows.setdefault(row["question"].strip(), []).append(tick)


def load_price_series(source: str | Path | IO[str]) -> dict[str, PriceSeries]:
    """Load price ticks keyed by question.

    ``source`` is a long-format file or a directory of such files (one per
    market is the usual layout). Ticks are sorted by time; repeated
    timestamps for a question are an error.
    """
    rows: dict[str, list[PriceTick]] = {}
    if isinstance(source, (str, Path)) and Path(source).is_dir():
        for path in sorted(Path(source).glob("*.csv")):
            with open(path, newline="", encoding="utf-8") as fh:
                _read_price_rows(fh, rows)
    else:
        handle, owned = _open_text(source)
        try:
            _read_price_rows(handle, rows)
        finally:
            if owned:
                handle.close()
    out = {}
    for question, ticks in rows.items():
        ticks.sort(key=lambda t: t.timestamp)
        try:
            out[question] = PriceSeries(question, tuple(ticks))
        except ValueError as exc:
            raise DataError(str(exc)) from None
    return out


def write_price_series(series: Iterable[PriceSeries], dest: str | Path) -> None:
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PRICE_COLUMNS)
        for s in series:
            for tick in s.ticks:
                writer.writerow([s.question, format_timestamp(tick.timestamp), repr(tick.yes_price)])


# --------------------------------------------------------------------------- #
# filters and cohorts


def filter_binary_and_duration(markets: Iterable[MarketRecord]) -> list[MarketRecord]:
    """Keep markets open for at least seven days (boundary inclusive).

    Binary-ness needs no check here: the outcome enum already enforces it.
    """
    return [m for m in markets if m.duration >= MIN_DURATION]


_MONTH_PATTERNS = {
    name: re.compile(rf"\b{name}\b", re.IGNORECASE) for name in MONTHS
}


def months_referenced(question: str) -> list[str]:
    return [name for name in MONTHS if _MONTH_PATTERNS[name].search(question)]


def slice_by_month(markets: Iterable[MarketRecord], cohort: CohortSpec) -> list[MarketRecord]:
    """Markets whose question names the cohort's month as a whole word."""
    pattern = _MONTH_PATTERNS[cohort.month]
    return [m for m in markets if pattern.search(m.question)]


def summarize(markets: Iterable[MarketRecord]) -> SummaryStats:
    """Count, volume and duration moments; std uses the n-1 convention."""
    markets = list(markets)
    n = len(markets)
    if n == 0:
        return SummaryStats(0, None, None, None, None)
    volumes = [m.volume_usd for m in markets]
    durations = [m.duration_days for m in markets]
    return SummaryStats(
        count=n,
        volume_mean=statistics.mean(volumes),
        volume_std=statistics.stdev(volumes) if n > 1 else None,
        duration_mean_days=statistics.fmean(durations),
        duration_std_days=statistics.stdev(durations) if n > 1 else None,
    )
