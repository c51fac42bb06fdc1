"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line; the lines are printed in the pytest
terminal summary (see conftest.py) and also on stdout when this file is
run directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import json
import random
import time
from contextlib import contextmanager
from datetime import date
from pathlib import Path

import pytest

from mediapulse import DEFAULT_ELECTION, PUBLISHED_SHARES, data_path
from mediapulse.cli import main
from mediapulse.ingest import FeedFormatError, FeedSource, parse_feed
from mediapulse.ingest.extract import extract_text
from mediapulse.lexicon import compile_matcher, count_mentions, load_lexicon
from mediapulse.metrics import (
    PollRange,
    SeatRecord,
    load_election_fixture,
    load_share_tables,
    poll_comparison,
    seat_delta,
    validate_share_table,
)
from helpers import run_pipeline
from oracles import flat_pipeline, naive_count, naive_tokens
from published import LEADER_CHANGES, PARTY_CHANGES, POLLS, SEATS

RESULTS: dict[int, str] = {}


@contextmanager
def criterion(number: int, title: str):
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        RESULTS[number] = f"criterion {number} FAIL  {title}: {type(exc).__name__}: {str(exc)[:200]}"
        raise
    else:
        RESULTS[number] = f"criterion {number} PASS  {title} ({time.perf_counter() - start:.2f} s)"


# 1 ------------------------------------------------------------------------------------------


def test_criterion_1_change_tables_from_published_shares(tmp_path):
    with criterion(1, "relative changes replayed from published share tables within 0.5"):
        start = time.perf_counter()
        out = tmp_path / "changes.json"
        code = main(["report", "--from-shares", str(data_path(PUBLISHED_SHARES)),
                     "--format", "structured", "-o", str(out)])
        elapsed = time.perf_counter() - start
        assert code == 0
        doc = json.loads(out.read_text(encoding="utf-8"))
        got = {c["entity_id"]: c["relative_change"] for g in ("parties", "leaders") for c in doc["changes"][g]}
        expected = {**PARTY_CHANGES, **LEADER_CHANGES}
        assert set(got) == set(expected)
        misses = {e: (round(got[e], 2), v) for e, v in expected.items() if abs(got[e] - v) > 0.5}
        assert not misses, misses
        assert round(got["cs"], 2) == 58.64
        assert round(got["sanchez"], 2) == -43.30
        assert elapsed < 1.0, f"{elapsed:.2f} s"


# 2 ------------------------------------------------------------------------------------------


def test_criterion_2_published_rows_sum_to_100():
    with criterion(2, "every published share row re-sums to 100.00 +/- 0.05"):
        start = time.perf_counter()
        tables = load_share_tables(data_path(PUBLISHED_SHARES))
        checks = [c for g in ("parties", "leaders") for c in validate_share_table(tables[g], 0.05)]
        assert len(checks) == 20
        bad = [(c.date, c.total) for c in checks if not c.ok]
        assert not bad, bad
        assert round(tables["parties"].row(date(2019, 11, 1)).total(), 2) == 100.00
        assert time.perf_counter() - start < 1.0


# 3 ------------------------------------------------------------------------------------------


def test_criterion_3_seat_and_poll_fixtures():
    with criterion(3, "seat deltas and poll miss distances, exact integers"):
        fixture = load_election_fixture(data_path(DEFAULT_ELECTION))
        deltas = dict(seat_delta(fixture.seats))
        assert deltas["vox"] == 28 and deltas["cs"] == -47
        polls = {p.party_id: p for p in poll_comparison(fixture.polls, fixture.seats)}
        assert polls["vox"].within_range is False and polls["vox"].miss_distance == 31
        assert (polls["vox"].poll_low, polls["vox"].poll_high, polls["vox"].november_seats) == (14, 21, 52)
        # the same answers from the hand transcription, independent of the fixture file
        records = [SeatRecord(p, a, n) for p, (a, n) in SEATS.items()]
        assert dict(seat_delta(records))["vox"] == 28
        transcribed = poll_comparison([PollRange(p, lo, hi) for p, (lo, hi) in POLLS.items()], records)
        assert {p.party_id: p.miss_distance for p in transcribed} == {
            p: m.miss_distance for p, m in polls.items()
        }


# 4 ------------------------------------------------------------------------------------------

WORDS = ["pablo", "Iglesias", "casado", "génova", "los", "morados", "el", "gobierno", "presidente",
         "del", "vox", "Sánchez", "pedro", "rojo", "partido", "popular"]


def random_lexicon(rng: random.Random) -> dict[str, list[str]]:
    """Ten entities whose multi-word aliases share prefixes, suffixes and nested words."""
    taken: set[tuple[str, ...]] = set()
    aliases: dict[str, list[str]] = {}
    pool: list[list[str]] = []
    for i in range(10):
        surfaces: list[str] = []
        while len(surfaces) < rng.randint(1, 3):
            if pool and rng.random() < 0.5:
                base = list(rng.choice(pool))  # extend or trim another alias to force overlaps
                words = base + [rng.choice(WORDS)] if rng.random() < 0.6 else base[1:] or base
            else:
                words = [rng.choice(WORDS) for _ in range(rng.randint(1, 4))]
            key = tuple(naive_tokens(" ".join(words)))
            if key in taken:
                continue
            taken.add(key)
            pool.append(words)
            surfaces.append(" ".join(w.upper() if rng.random() < 0.2 else w for w in words))
        aliases[f"e{i}"] = surfaces
    return aliases


def random_text(rng: random.Random, aliases: dict[str, list[str]]) -> str:
    parts = []
    for _ in range(rng.randint(0, 60)):
        r = rng.random()
        if r < 0.3:
            parts.append(rng.choice(rng.choice(list(aliases.values()))))
        elif r < 0.9:
            parts.append(rng.choice(WORDS + ["y", "dijo", "que", "42"]))
        else:
            parts.append(rng.choice(["GOBIERNO", "Los Morados", "VÓX", "pablo-iglesias", "génova…"]))
        parts.append(rng.choice([" ", " ", ", ", ".\n", "; ", "  "]))
    return "".join(parts)


def lexicon_yaml(aliases: dict[str, list[str]]) -> str:
    lines = ["entities:"]
    for entity, surfaces in aliases.items():
        quoted = ", ".join(json.dumps(s, ensure_ascii=False) for s in surfaces)
        lines.append(f"  - {{id: {entity}, kind: party, aliases: [{quoted}]}}")
    return "\n".join(lines) + "\n"


def test_criterion_4_matcher_equals_naive_oracle():
    with criterion(4, "count_mentions == naive longest-first oracle on >= 1000 random texts"):
        start = time.perf_counter()
        rng = random.Random(20191110)
        texts = 0
        overlapping = 0
        for _ in range(12):
            aliases = random_lexicon(rng)
            assert len(aliases) == 10
            keys = [tuple(naive_tokens(s)) for ss in aliases.values() for s in ss]
            overlapping += any(len(a) > 1 and a != b and a[: len(b)] == b for a in keys for b in keys)
            matcher = compile_matcher(load_lexicon(lexicon_yaml(aliases)))
            for _ in range(100):
                text = random_text(rng, aliases)
                assert count_mentions(text, matcher) == naive_count(text, aliases), text
                texts += 1
        assert texts >= 1000
        assert overlapping >= 6  # most lexicons carry nested multi-word aliases
        assert time.perf_counter() - start < 30.0


# 5 ------------------------------------------------------------------------------------------


def test_criterion_5_end_to_end_determinism(tmp_path, corpus_dir, corpus_expected, reference_aliases):
    with criterion(5, "offline crawl -> scan -> report twice is byte-identical and matches the flat oracle"):
        assert len(list(corpus_dir.glob("*/feed.xml"))) == 13
        pages = list(corpus_dir.glob("*/*.html"))
        assert len(pages) >= 40
        days = {a["bucket_date"] for a in corpus_expected.values()}
        assert len(days) == 10

        reports = []
        for run in ("a", "b"):
            md = run_pipeline(tmp_path / run, corpus_dir)
            assert main(["report", "--store", str(tmp_path / run), "--format", "structured",
                         "-o", str(tmp_path / f"{run}.json")]) == 0
            reports.append((md, (tmp_path / f"{run}.json").read_bytes()))
        assert reports[0][0].encode() == reports[1][0].encode()
        assert reports[0][1] == reports[1][1]

        doc = json.loads(reports[0][1])
        tallies = {
            (row["date"], entity): count
            for group in ("parties", "leaders")
            for row in doc["share_tables"][group]["counts"]
            for entity, count in row["counts"].items()
        }
        flat = flat_pipeline(corpus_dir, reference_aliases, extract_text)
        flat_tallies = {(d.isoformat(), e): c for d, counts in flat.items() for e, c in counts.items()
                        if date(2019, 11, 1) <= d <= date(2019, 11, 10)}
        assert tallies == flat_tallies

        generator = {}
        for article in corpus_expected.values():
            for entity, count in article["counts"].items():
                key = (article["bucket_date"], entity)
                generator[key] = generator.get(key, 0) + count
        assert {k: v for k, v in tallies.items() if v} == generator


# 6 ------------------------------------------------------------------------------------------

FEED_SUITE = {
    "rss2_missing_link.xml": (2, 1),
    "atom_two_entries.xml": (2, 0),
    "rdf_rss1.xml": (2, 0),
    "rss_bom_cdata.xml": (1, 0),
    "rss_no_channel.xml": (0, 0),
    "malformed_unclosed.xml": FeedFormatError,
    "malformed_ampersand.xml": FeedFormatError,
    "empty.xml": FeedFormatError,
    "not_a_feed.html": FeedFormatError,
    "sitemap.xml": FeedFormatError,
}


def test_criterion_6_ingest_robustness(fixtures_dir):
    with criterion(6, "feed fixture suite gives documented counts/errors; no residual tags on 50 pages"):
        source = FeedSource("fixture", "Fixture", "https://news.example.es/feeds/main.xml")
        assert sorted(p.name for p in (fixtures_dir / "feeds").iterdir()) == sorted(FEED_SUITE)
        for name, expected in FEED_SUITE.items():
            body = (fixtures_dir / "feeds" / name).read_bytes()
            if isinstance(expected, tuple):
                feed = parse_feed(body, source)
                assert (len(feed), feed.dropped) == expected, name
            else:
                with pytest.raises(expected):
                    parse_feed(body, source)

        pages = sorted((fixtures_dir / "html").glob("*.html")) + sorted((fixtures_dir / "corpus").glob("*/*.html"))
        assert len(pages) == 50
        import re

        residual = [p.name for p in pages if re.search(r"<[A-Za-z/!]", extract_text(p.read_bytes()))]
        assert not residual, residual


# 7 ------------------------------------------------------------------------------------------


def test_criterion_7_headline_totals_not_reproducible():
    RESULTS[7] = (
        "criterion 7 NOT REPRODUCIBLE  headline totals depend on live November 2019 pages; "
        "covered by criteria 1-3 (published tables) and 4-6 (oracle suites)"
    )
    pytest.skip("headline mention and URL totals need the original live web content")


if __name__ == "__main__":
    import sys

    raise SystemExit(pytest.main([str(Path(__file__)), "-q", *sys.argv[1:]]))
