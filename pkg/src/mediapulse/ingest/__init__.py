"""Feed and article acquisition: parsing, fetching, text extraction."""

from .extract import extract_text
from .feeds import FeedFormatError, FeedItem, FeedSource, ParsedFeed, RosterError, load_roster, parse_feed
from .fetch import (
    ArticleDocument,
    BodyTooLarge,
    ContentTypeError,
    Fetcher,
    FetchError,
    FetchPolicy,
    FetchTimeout,
    HttpFetcher,
    HTTPStatusError,
    fetch_article,
    fetch_feed,
)
from .offline import FixtureError, OfflineFetcher, RecordingFetcher, fixture_name

__all__ = [
    "ArticleDocument",
    "BodyTooLarge",
    "ContentTypeError",
    "FeedFormatError",
    "FeedItem",
    "FeedSource",
    "FetchError",
    "FetchPolicy",
    "FetchTimeout",
    "Fetcher",
    "FixtureError",
    "HTTPStatusError",
    "HttpFetcher",
    "OfflineFetcher",
    "ParsedFeed",
    "RecordingFetcher",
    "RosterError",
    "extract_text",
    "fetch_article",
    "fetch_feed",
    "fixture_name",
    "load_roster",
    "parse_feed",
]
