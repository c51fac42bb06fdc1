"""crawl -> scan -> report, as library calls."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime

from .config import RunConfig
from .ingest import (
    ArticleDocument,
    FeedFormatError,
    FeedItem,
    FeedSource,
    Fetcher,
    FetchError,
    HttpFetcher,
    OfflineFetcher,
    RecordingFetcher,
    extract_text,
    load_roster,
    parse_feed,
)
from .ingest.fetch import content_hash
from .lexicon import CompiledMatcher, Lexicon, compile_matcher, count_mentions, load_lexicon_file
from .metrics import load_election_fixture, load_share_tables
from .report import Report, report_from_shares, report_from_store
from .store import ArticleRecord, MentionRecord, Store, UpsertResult

logger = logging.getLogger(__name__)


@dataclass
class SourceOutcome:
    source_id: str
    feed_ok: bool = False
    items: int = 0
    dropped: int = 0
    documents: list[ArticleDocument] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)


@dataclass
class CrawlSummary:
    feeds: int = 0
    feeds_ok: int = 0
    items: int = 0
    items_dropped: int = 0
    articles: int = 0
    inserted: int = 0
    unchanged: int = 0
    changed: int = 0
    errors: int = 0
    source_errors: dict[str, list[str]] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "feeds": self.feeds,
            "feeds_ok": self.feeds_ok,
            "items": self.items,
            "items_dropped": self.items_dropped,
            "articles": self.articles,
            "inserted": self.inserted,
            "unchanged": self.unchanged,
            "changed": self.changed,
            "errors": self.errors,
            "source_errors": {k: list(v) for k, v in self.source_errors.items()},
        }


@dataclass
class ScanSummary:
    articles: int = 0
    records: int = 0
    lexicon_version: str = ""

    def as_dict(self) -> dict:
        return {"articles": self.articles, "records": self.records, "lexicon_version": self.lexicon_version}


def make_fetcher(config: RunConfig) -> Fetcher:
    fetcher: Fetcher
    if config.offline_fixture_dir is not None:
        fetcher = OfflineFetcher(config.offline_fixture_dir)
    else:
        fetcher = HttpFetcher(config.fetch)
    if config.save_fixtures is not None:
        fetcher = RecordingFetcher(fetcher, config.save_fixtures)
    return fetcher


def summary_document(item: FeedItem, fetched_at: datetime) -> ArticleDocument:
    """Article built from the feed's title and summary only, no page fetch."""
    body = "\n".join(part for part in (item.title, item.summary) if part)
    text = extract_text(body)
    return ArticleDocument(
        url=item.link,
        source_id=item.source_id,
        fetched_at=fetched_at,
        raw_html=body.encode("utf-8"),
        extracted_text=text,
        content_hash=content_hash(text),
        title=item.title,
        published_at=item.published_at,
    )


def crawl_source(fetcher: Fetcher, source: FeedSource, summaries_only: bool = False) -> SourceOutcome:
    outcome = SourceOutcome(source.source_id)
    try:
        feed = parse_feed(fetcher.fetch_feed(source), source)
    except (FetchError, FeedFormatError, OSError) as exc:
        logger.warning("%s: feed failed: %s", source.source_id, exc)
        outcome.errors.append(str(exc))
        return outcome
    outcome.feed_ok = True
    outcome.items = len(feed)
    outcome.dropped = feed.dropped
    seen: set[str] = set()
    for item in feed:
        if item.link in seen:
            continue
        seen.add(item.link)
        if summaries_only:
            outcome.documents.append(summary_document(item, fetcher.feed_fetched_at(source)))
            continue
        try:
            outcome.documents.append(fetcher.fetch_article(item))
        except (FetchError, OSError) as exc:
            logger.warning("%s: article failed: %s", source.source_id, exc)
            outcome.errors.append(str(exc))
    return outcome


def crawl(config: RunConfig, store: Store, fetcher: Fetcher | None = None) -> CrawlSummary:
    """Poll every roster feed once and store the linked articles.

    Sources may be fetched concurrently (``config.jobs``), but results are
    written in roster order so the store contents do not depend on timing.
    """
    sources = load_roster(config.roster_path)
    fetcher = fetcher or make_fetcher(config)
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(lambda s: crawl_source(fetcher, s, config.summaries_only), sources))
    else:
        outcomes = [crawl_source(fetcher, s, config.summaries_only) for s in sources]

    summary = CrawlSummary(feeds=len(sources))
    for outcome in outcomes:
        summary.feeds_ok += outcome.feed_ok
        summary.items += outcome.items
        summary.items_dropped += outcome.dropped
        summary.errors += len(outcome.errors)
        if outcome.errors:
            summary.source_errors[outcome.source_id] = outcome.errors
        for doc in outcome.documents:
            summary.articles += 1
            result = store.upsert_article(ArticleRecord.from_document(doc, store.bucket))
            if result is UpsertResult.INSERTED:
                summary.inserted += 1
            elif result is UpsertResult.DUPLICATE_UNCHANGED:
                summary.unchanged += 1
            else:
                summary.changed += 1
    return summary


def scan(store: Store, lexicon: Lexicon, matcher: CompiledMatcher) -> ScanSummary:
    """Count mentions in every stored article under one lexicon version."""
    version = matcher.version
    records = []
    articles = store.articles()
    for article in articles:
        counts = count_mentions(article.text, matcher)
        records += [
            MentionRecord(article.url, entity_id, count, version, lexicon[entity_id].kind)
            for entity_id, count in counts.items()
            if count
        ]
    written = store.append_mentions(records)
    return ScanSummary(articles=len(articles), records=written, lexicon_version=version)


def load_matcher(config: RunConfig) -> tuple[Lexicon, CompiledMatcher]:
    lexicon = load_lexicon_file(config.lexicon_path)
    return lexicon, compile_matcher(lexicon, config.normalization)


def build_report(config: RunConfig, store: Store | None = None) -> Report:
    first, last = config.window
    election = load_election_fixture(config.election_path) if config.election_path else None
    if config.from_shares is not None:
        tables = load_share_tables(config.from_shares)
        return report_from_shares(
            tables, first, last, config.groups, election, origin=f"share tables {config.from_shares.name}"
        )
    if store is None:
        raise ValueError("a store is required unless share tables are supplied")
    lexicon, matcher = load_matcher(config)
    return report_from_store(
        store, lexicon, matcher.version, first, last, config.groups, election, config.count_reappearances
    )
