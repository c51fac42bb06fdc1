"""Assembling and rendering visibility reports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Mapping, Sequence

from .lexicon import Lexicon
from .metrics import (
    ChangeRow,
    DailyTally,
    ElectionFixture,
    MetricsError,
    PollComparison,
    RowCheck,
    ShareTable,
    compute_shares,
    group_kind,
    poll_comparison,
    relative_change,
    seat_delta,
    tally_daily,
    validate_share_table,
)
from .store import Store

FORMATS = ("markdown", "csv", "structured")
UNDEFINED = "—"


@dataclass
class GroupResult:
    group: str
    shares: ShareTable
    changes: list[ChangeRow]
    checks: list[RowCheck]
    tallies: list[DailyTally] | None = None

    @property
    def total(self) -> int | None:
        return sum(t.total for t in self.tallies) if self.tallies is not None else None


@dataclass
class Report:
    first: date
    last: date
    groups: list[GroupResult]
    election: ElectionFixture | None = None
    origin: str = ""
    warnings: list[str] = field(default_factory=list)

    @property
    def seat_deltas(self) -> list[tuple[str, int]]:
        return seat_delta(self.election.seats) if self.election else []

    @property
    def polls(self) -> list[PollComparison]:
        return poll_comparison(self.election.polls, self.election.seats) if self.election else []

    def group(self, name: str) -> GroupResult:
        for result in self.groups:
            if result.group == name:
                return result
        raise KeyError(name)


def _group_result(group: str, table: ShareTable, first: date, last: date, tallies=None) -> GroupResult:
    return GroupResult(
        group=group,
        shares=table,
        changes=relative_change(table, first, last),
        checks=validate_share_table(table),
        tallies=tallies,
    )


def report_from_store(
    store: Store,
    lexicon: Lexicon,
    lexicon_version: str,
    first: date,
    last: date,
    groups: Sequence[str] = ("parties", "leaders"),
    election: ElectionFixture | None = None,
    count_reappearances: bool = False,
) -> Report:
    results, warnings = [], []
    for group in groups:
        kind = group_kind(group)
        rows = store.query_range(
            first, last, kind, lexicon_version=lexicon_version, count_reappearances=count_reappearances
        )
        entities = lexicon.by_kind(kind)
        tallies = tally_daily(rows, [e.id for e in entities], first, last)
        table = compute_shares(tallies, group, {e.id: e.display_name for e in entities})
        result = _group_result(group, table, first, last, tallies)
        if not result.total:
            warnings.append(f"no {group} mentions between {first} and {last} (lexicon {lexicon_version})")
        results.append(result)
    origin = f"stored mentions, lexicon {lexicon.label or 'unlabelled'} ({lexicon_version})"
    return Report(first, last, results, election, origin, warnings)


def report_from_shares(
    tables: Mapping[str, ShareTable],
    first: date,
    last: date,
    groups: Sequence[str] = ("parties", "leaders"),
    election: ElectionFixture | None = None,
    origin: str = "supplied share tables",
) -> Report:
    results, warnings = [], []
    for group in groups:
        if group not in tables:
            raise MetricsError(f"shares document has no {group!r} table")
        result = _group_result(group, tables[group], first, last)
        for check in result.checks:
            if not check.ok:
                warnings.append(f"{group} {check.date}: shares sum to {check.total:.2f}, not 100")
        results.append(result)
    return Report(first, last, results, election, origin, warnings)


# -- rendering -------------------------------------------------------------------


def fmt_number(value: float | None, decimal: str = "dot", signed: bool = False, suffix: str = "") -> str:
    if value is None:
        return UNDEFINED
    text = f"{value:+.2f}" if signed else f"{value:.2f}"
    if float(text) == 0:
        # no "-0.00"
        text = "+0.00" if signed else "0.00"
    if decimal == "comma":
        text = text.replace(".", ",")
    return text + suffix


def _md_table(header: Sequence[str], rows: Iterable[Sequence[str]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return lines


def render_markdown(report: Report, decimal: str = "dot") -> str:
    out = [
        "# Media visibility report",
        "",
        f"- Window: {report.first.isoformat()} to {report.last.isoformat()}",
        f"- Source: {report.origin}",
    ]
    totals = [(g.group, g.total) for g in report.groups if g.total is not None]
    if totals:
        parts = [f"{name} {total}" for name, total in totals]
        parts.append(f"combined {sum(t for _, t in totals)}")
        out.append("- Mentions: " + ", ".join(parts))
    for warning in report.warnings:
        out.append(f"- Warning: {warning}")

    for g in report.groups:
        table = g.shares
        out += ["", f"## Mention share (%): {g.group}", ""]
        header = ["Date"] + [table.label(e) for e in table.entity_ids]
        rows = [
            [row.date.isoformat()] + [fmt_number(row.shares[e], decimal) for e in table.entity_ids]
            for row in table.rows
        ]
        out += _md_table(header, rows)

    for g in report.groups:
        table = g.shares
        out += ["", f"## Share change {report.first.isoformat()} to {report.last.isoformat()}: {g.group}", ""]
        rows = [
            [table.label(c.entity_id), fmt_number(c.first_share, decimal), fmt_number(c.last_share, decimal),
             fmt_number(c.relative_change, decimal, signed=True, suffix="%")]
            for c in g.changes
        ]
        out += _md_table(["Entity", "First share", "Last share", "Relative change"], rows)

    election = report.election
    if election is not None:
        seats = {s.party_id: s for s in election.seats}
        out += ["", f"## Seats: {election.first_election} to {election.second_election}", ""]
        rows = [
            [election.labels.get(pid, pid), str(seats[pid].seats_april), str(seats[pid].seats_november), f"{delta:+d}"]
            for pid, delta in report.seat_deltas
        ]
        out += _md_table(["Party", election.first_election, election.second_election, "Change"], rows)
        out += ["", f"## Poll vs result: {election.poll_source}", ""]
        rows = [
            [election.labels.get(p.party_id, p.party_id), f"{p.poll_low}-{p.poll_high}", str(p.november_seats),
             "yes" if p.within_range else "no", str(p.miss_distance)]
            for p in report.polls
        ]
        out += _md_table(["Party", "Poll range", "Seats", "Within range", "Miss"], rows)
    return "\n".join(out) + "\n"


CSV_COLUMNS = [
    "section", "group", "date", "entity_id", "label", "count", "share",
    "first_share", "last_share", "relative_change",
    "seats_first", "seats_second", "seat_change", "poll_low", "poll_high", "within_range", "miss_distance",
]


def render_csv(report: Report, decimal: str = "dot") -> str:
    """One long-format table; ``section`` says which columns are populated.

    With comma decimals the delimiter becomes ";".
    """
    buf = io.StringIO()
    writer = csv.DictWriter(
        buf, fieldnames=CSV_COLUMNS, delimiter=";" if decimal == "comma" else ",", lineterminator="\n"
    )
    writer.writeheader()

    def num(value: float | None, signed: bool = False) -> str:
        return "" if value is None else fmt_number(value, decimal, signed=signed)

    for g in report.groups:
        table = g.shares
        counts = {t.date: t.counts for t in g.tallies} if g.tallies is not None else {}
        for row in table.rows:
            for e in table.entity_ids:
                day_counts = counts.get(row.date)
                writer.writerow({
                    "section": "share", "group": g.group, "date": row.date.isoformat(), "entity_id": e,
                    "label": table.label(e), "count": "" if day_counts is None else day_counts[e],
                    "share": num(row.shares[e]),
                })
    for g in report.groups:
        for c in g.changes:
            writer.writerow({
                "section": "change", "group": g.group, "entity_id": c.entity_id,
                "label": g.shares.label(c.entity_id), "first_share": num(c.first_share),
                "last_share": num(c.last_share), "relative_change": num(c.relative_change, signed=True),
            })
    if report.election is not None:
        labels = report.election.labels
        seats = {s.party_id: s for s in report.election.seats}
        for pid, delta in report.seat_deltas:
            writer.writerow({
                "section": "seats", "entity_id": pid, "label": labels.get(pid, pid),
                "seats_first": seats[pid].seats_april, "seats_second": seats[pid].seats_november,
                "seat_change": f"{delta:+d}",
            })
        for p in report.polls:
            writer.writerow({
                "section": "poll", "entity_id": p.party_id, "label": labels.get(p.party_id, p.party_id),
                "seats_second": p.november_seats, "poll_low": p.poll_low, "poll_high": p.poll_high,
                "within_range": "yes" if p.within_range else "no", "miss_distance": p.miss_distance,
            })
    return buf.getvalue()


def report_to_json(report: Report) -> dict:
    """Plain-data form of a report; ``share_tables`` is readable by --from-shares."""
    doc: dict = {
        "window": {"first": report.first.isoformat(), "last": report.last.isoformat()},
        "origin": report.origin,
        "warnings": list(report.warnings),
        "share_tables": {},
        "changes": {},
    }
    totals = {}
    for g in report.groups:
        table = g.shares
        doc["share_tables"][g.group] = {
            "entities": [{"id": e, "display_name": table.label(e)} for e in table.entity_ids],
            "rows": [
                {"date": row.date.isoformat(), "shares": {e: row.shares[e] for e in table.entity_ids}}
                for row in table.rows
            ],
        }
        if g.tallies is not None:
            doc["share_tables"][g.group]["counts"] = [
                {"date": t.date.isoformat(), "counts": dict(t.counts)} for t in g.tallies
            ]
            totals[g.group] = g.total
        doc["changes"][g.group] = [
            {"entity_id": c.entity_id, "first_share": c.first_share, "last_share": c.last_share,
             "relative_change": c.relative_change}
            for c in g.changes
        ]
    if totals:
        totals["combined"] = sum(totals.values())
        doc["totals"] = totals
    if report.election is not None:
        seats = {s.party_id: s for s in report.election.seats}
        doc["seats"] = [
            {"party_id": pid, "seats_april": seats[pid].seats_april,
             "seats_november": seats[pid].seats_november, "delta": delta}
            for pid, delta in report.seat_deltas
        ]
        doc["polls"] = [
            {"party_id": p.party_id, "november_seats": p.november_seats, "poll_low": p.poll_low,
             "poll_high": p.poll_high, "within_range": p.within_range, "miss_distance": p.miss_distance}
            for p in report.polls
        ]
    return doc


def render(report: Report, fmt: str = "markdown", decimal: str = "dot") -> str:
    if fmt == "markdown":
        return render_markdown(report, decimal)
    if fmt == "csv":
        return render_csv(report, decimal)
    if fmt == "structured":
        return json.dumps(report_to_json(report), indent=2, ensure_ascii=False, sort_keys=False) + "\n"
    raise ValueError(f"unknown format {fmt!r}")
