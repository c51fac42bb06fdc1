"""Daily tallies, mention shares, share changes and seat/poll comparisons.

All arithmetic is done in full float precision; rounding happens only when
a report is rendered.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import yaml

from .lexicon import EntityKind
from .store import MentionRow

GROUPS = {"parties": EntityKind.PARTY, "leaders": EntityKind.LEADER}
SHARE_SUM_TOLERANCE = 0.05


class MetricsError(ValueError):
    pass


class ConsistencyError(MetricsError):
    pass


class AlignmentError(MetricsError):
    pass


def group_kind(group: str) -> EntityKind:
    try:
        return GROUPS[group]
    except KeyError:
        raise MetricsError(f"unknown group {group!r}; expected one of {sorted(GROUPS)}") from None


def date_span(first: date, last: date) -> list[date]:
    if first > last:
        raise MetricsError(f"inverted window {first} > {last}")
    return [first + timedelta(days=i) for i in range((last - first).days + 1)]


@dataclass(frozen=True)
class DailyTally:
    date: date
    counts: Mapping[str, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class ShareRow:
    date: date
    shares: Mapping[str, float | None]

    @property
    def defined(self) -> bool:
        return any(v is not None for v in self.shares.values())

    def total(self) -> float | None:
        if not self.defined:
            return None
        return sum(v for v in self.shares.values() if v is not None)


@dataclass
class ShareTable:
    group: str
    entity_ids: tuple[str, ...]
    rows: list[ShareRow]
    labels: dict[str, str] = field(default_factory=dict)

    def row(self, day: date) -> ShareRow:
        for row in self.rows:
            if row.date == day:
                return row
        raise MetricsError(f"{self.group}: no share row for {day}")

    def label(self, entity_id: str) -> str:
        return self.labels.get(entity_id, entity_id)


@dataclass(frozen=True)
class ChangeRow:
    entity_id: str
    first_share: float | None
    last_share: float | None
    relative_change: float | None


@dataclass(frozen=True)
class SeatRecord:
    party_id: str
    seats_april: int
    seats_november: int

    def __post_init__(self) -> None:
        if self.seats_april < 0 or self.seats_november < 0:
            raise MetricsError(f"{self.party_id}: seat counts must be non-negative")


@dataclass(frozen=True)
class PollRange:
    party_id: str
    low: int
    high: int

    def __post_init__(self) -> None:
        if self.low > self.high:
            raise MetricsError(f"{self.party_id}: poll range {self.low}-{self.high} is inverted")


@dataclass(frozen=True)
class PollComparison:
    party_id: str
    november_seats: int
    poll_low: int
    poll_high: int
    within_range: bool
    miss_distance: int


def tally_daily(
    rows: Iterable[MentionRow],
    entity_ids: Sequence[str],
    first: date,
    last: date,
) -> list[DailyTally]:
    """Sum mention counts per entity and bucket date.

    Every day of ``[first, last]`` gets a tally, and every entity in
    ``entity_ids`` appears in each one. Rows for other entities are ignored,
    which is how a group is selected.
    """
    days = date_span(first, last)
    sums = {day: dict.fromkeys(entity_ids, 0) for day in days}
    versions: set[str] = set()
    for row in rows:
        versions.add(row.mention.lexicon_version)
        if len(versions) > 1:
            raise ConsistencyError(f"mentions from several lexicon versions: {sorted(versions)}")
        counts = sums.get(row.bucket_date)
        if counts is None or row.mention.entity_id not in counts:
            continue
        counts[row.mention.entity_id] += row.mention.count
    return [DailyTally(day, sums[day]) for day in days]


def compute_shares(
    tallies: Sequence[DailyTally],
    group: str = "parties",
    labels: Mapping[str, str] | None = None,
) -> ShareTable:
    """Percentage of each entity within its day's total.

    A day with no mentions at all gets ``None`` for every entity.
    """
    dates = [t.date for t in tallies]
    if dates != sorted(dates):
        raise MetricsError("tallies must be in ascending date order")
    entity_ids: tuple[str, ...] = tuple(tallies[0].counts) if tallies else ()
    rows = []
    for tally in tallies:
        total = tally.total
        rows.append(ShareRow(
            tally.date,
            {e: (tally.counts.get(e, 0) / total * 100.0 if total else None) for e in entity_ids},
        ))
    return ShareTable(group, entity_ids, rows, dict(labels or {}))


@dataclass(frozen=True)
class RowCheck:
    date: date
    total: float | None
    ok: bool


def validate_share_table(table: ShareTable, tolerance: float = SHARE_SUM_TOLERANCE) -> list[RowCheck]:
    """Re-sum each row; rows with any value must total 100 within tolerance."""
    checks = []
    for row in table.rows:
        total = row.total()
        checks.append(RowCheck(row.date, total, total is None or abs(total - 100.0) <= tolerance))
    return checks


def relative_change(table: ShareTable, first_date: date, last_date: date) -> list[ChangeRow]:
    """Percent change of each entity's share between two days.

    The change is undefined (``None``) when the first share is zero or the
    first or last day had no mentions.
    """
    first = table.row(first_date)
    last = table.row(last_date)
    out = []
    for entity_id in table.entity_ids:
        a = first.shares.get(entity_id)
        b = last.shares.get(entity_id)
        change = (b - a) / a * 100.0 if a and b is not None else None
        out.append(ChangeRow(entity_id, a, b, change))
    return out


def seat_delta(records: Iterable[SeatRecord]) -> list[tuple[str, int]]:
    return [(r.party_id, r.seats_november - r.seats_april) for r in records]


def poll_comparison(polls: Iterable[PollRange], records: Iterable[SeatRecord]) -> list[PollComparison]:
    seats = {r.party_id: r for r in records}
    out = []
    for poll in polls:
        record = seats.get(poll.party_id)
        if record is None:
            raise AlignmentError(f"poll party {poll.party_id!r} has no seat record")
        actual = record.seats_november
        if actual < poll.low:
            miss = poll.low - actual
        elif actual > poll.high:
            miss = actual - poll.high
        else:
            miss = 0
        out.append(PollComparison(poll.party_id, actual, poll.low, poll.high, miss == 0, miss))
    unmatched = set(seats) - {p.party_id for p in out}
    if unmatched:
        raise AlignmentError(f"seat records without a poll: {sorted(unmatched)}")
    return out


# -- fixture files -------------------------------------------------------------


@dataclass
class ElectionFixture:
    """Seat results of two elections and the poll taken before the second."""

    seats: list[SeatRecord]
    polls: list[PollRange]
    labels: dict[str, str] = field(default_factory=dict)
    first_election: str = "first election"
    second_election: str = "second election"
    poll_source: str = "poll"


def load_election_fixture(path: str | Path) -> ElectionFixture:
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise MetricsError(f"{path}: malformed election fixture: {exc}") from exc
    if not isinstance(doc, Mapping) or not isinstance(doc.get("parties"), list):
        raise MetricsError(f"{path}: election fixture needs a 'parties' list")
    seats, polls, labels = [], [], {}
    for entry in doc["parties"]:
        try:
            party_id = str(entry["id"])
            seats.append(SeatRecord(party_id, int(entry["seats_april"]), int(entry["seats_november"])))
            low, high = entry["poll"]
            polls.append(PollRange(party_id, int(low), int(high)))
        except (KeyError, TypeError, ValueError) as exc:
            raise MetricsError(f"{path}: bad party entry {entry!r}: {exc}") from exc
        labels[party_id] = str(entry.get("display_name", party_id))
    return ElectionFixture(
        seats=seats,
        polls=polls,
        labels=labels,
        first_election=str(doc.get("first_election", "first election")),
        second_election=str(doc.get("second_election", "second election")),
        poll_source=str(doc.get("poll_source", "poll")),
    )


_PERCENT_RE = re.compile(r"^\s*(-?\d+(?:[.,]\d+)?)\s*%?\s*$")


def parse_share(value: object) -> float | None:
    """Accept 27.61, "27.61", "27,61 %" or null."""
    if value is None:
        return None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        if value.strip() in ("", "—", "-"):
            return None
        match = _PERCENT_RE.match(value)
        if match:
            return float(match.group(1).replace(",", "."))
    raise MetricsError(f"not a share value: {value!r}")


def share_tables_from_json(doc: Mapping) -> dict[str, ShareTable]:
    """Build share tables from the ``share_tables`` object of a structured report."""
    tables_doc = doc.get("share_tables") if isinstance(doc, Mapping) else None
    if not isinstance(tables_doc, Mapping) or not tables_doc:
        raise MetricsError("shares document needs a non-empty 'share_tables' object")
    tables = {}
    for group, body in tables_doc.items():
        group_kind(group)
        try:
            entities = body["entities"]
            ids = tuple(str(e["id"]) for e in entities)
            labels = {str(e["id"]): str(e.get("display_name", e["id"])) for e in entities}
            rows = []
            for row in body["rows"]:
                shares = row["shares"]
                missing = set(ids) - set(shares)
                if missing:
                    raise MetricsError(f"{group} {row['date']}: missing shares for {sorted(missing)}")
                rows.append(ShareRow(date.fromisoformat(str(row["date"])), {e: parse_share(shares[e]) for e in ids}))
        except (KeyError, TypeError) as exc:
            raise MetricsError(f"{group}: malformed share table: {exc!r}") from exc
        rows.sort(key=lambda r: r.date)
        tables[group] = ShareTable(group, ids, rows, labels)
    return tables


def load_share_tables(path: str | Path) -> dict[str, ShareTable]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MetricsError(f"{path}: not a JSON document: {exc}") from exc
    return share_tables_from_json(doc)
