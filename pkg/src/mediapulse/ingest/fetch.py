"""HTTP fetching with per-host politeness, retries and size caps."""

from __future__ import annotations

import hashlib
import logging
import re
import threading
import time
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Iterator, Protocol
from urllib.parse import urlsplit

import requests
from urllib3.exceptions import ReadTimeoutError

from .extract import extract_text
from .feeds import FeedItem, FeedSource

logger = logging.getLogger(__name__)

HTML_TYPES = frozenset({"text/html", "application/xhtml+xml"})
_CHARSET_RE = re.compile(r"charset\s*=\s*[\"']?([^\s;\"']+)", re.I)


class FetchError(Exception):
    """A request that failed for good. Carries the URL and attempts made."""

    retryable = True

    def __init__(self, url: str, message: str, attempts: int = 1):
        self.url = url
        self.attempts = attempts
        self.message = message
        super().__init__(f"{url}: {message} (after {attempts} attempt{'s' if attempts != 1 else ''})")

    def with_attempts(self, attempts: int) -> FetchError:
        self.attempts = attempts
        self.args = (f"{self.url}: {self.message} (after {attempts} attempt{'s' if attempts != 1 else ''})",)
        return self


class FetchTimeout(FetchError):
    pass


class HTTPStatusError(FetchError):
    def __init__(self, url: str, status: int, attempts: int = 1):
        self.status = status
        super().__init__(url, f"HTTP {status}", attempts)


class BodyTooLarge(FetchError):
    retryable = False


class ContentTypeError(FetchError):
    retryable = False

    def __init__(self, url: str, content_type: str, attempts: int = 1):
        self.content_type = content_type
        super().__init__(url, f"unsupported content type {content_type!r}", attempts)


@dataclass(frozen=True)
class FetchPolicy:
    timeout: float = 15.0
    max_retries: int = 2
    retry_backoff: tuple[float, ...] = (1.0, 4.0)
    per_host_delay: float = 2.0
    max_body_bytes: int = 5_000_000
    user_agent: str = "mediapulse/0.1 (media visibility research crawler)"
    max_redirects: int = 5

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_body_bytes <= 0:
            raise ValueError("max_body_bytes must be positive")
        if self.max_retries < 0 or self.per_host_delay < 0:
            raise ValueError("max_retries and per_host_delay must be non-negative")

    def backoff(self, attempt: int) -> float:
        """Delay after failed attempt number ``attempt`` (1-based)."""
        if not self.retry_backoff:
            return 0.0
        return self.retry_backoff[min(attempt - 1, len(self.retry_backoff) - 1)]


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ArticleDocument:
    url: str
    source_id: str
    fetched_at: datetime
    raw_html: bytes
    extracted_text: str
    content_hash: str
    title: str = ""
    published_at: datetime | None = None
    content_type: str | None = None

    @classmethod
    def build(
        cls,
        item: FeedItem,
        url: str,
        body: bytes,
        fetched_at: datetime,
        content_type: str | None = None,
    ) -> ArticleDocument:
        text = extract_text(body, charset_of(content_type))
        return cls(
            url=url,
            source_id=item.source_id,
            fetched_at=fetched_at,
            raw_html=body,
            extracted_text=text,
            content_hash=content_hash(text),
            title=item.title,
            published_at=item.published_at,
            content_type=content_type,
        )


class Fetcher(Protocol):
    def fetch_feed(self, source: FeedSource) -> bytes: ...

    def fetch_article(self, item: FeedItem) -> ArticleDocument: ...

    def feed_fetched_at(self, source: FeedSource) -> datetime: ...


def media_type(header: str | None) -> str:
    return (header or "").split(";", 1)[0].strip().lower()


def charset_of(header: str | None) -> str | None:
    match = _CHARSET_RE.search(header or "")
    return match.group(1) if match else None


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


class HostThrottle:
    """Serializes requests per host and spaces them by ``delay`` seconds.

    The gap is measured from the end of one request to the start of the
    next, so the server never sees two requests closer than ``delay``.
    """

    def __init__(
        self,
        delay: float,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.delay = delay
        self._clock = clock
        self._sleep = sleep
        self._guard = threading.Lock()
        self._locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._ready: dict[str, float] = {}

    @contextmanager
    def slot(self, host: str) -> Iterator[None]:
        with self._guard:
            lock = self._locks[host]
        with lock:
            wait = self._ready.get(host, float("-inf")) - self._clock()
            if wait > 0:
                self._sleep(wait)
            try:
                yield
            finally:
                self._ready[host] = self._clock() + self.delay


@dataclass
class _Response:
    url: str
    content_type: str | None
    body: bytes


class HttpFetcher:
    """Live fetcher. One instance per crawl so politeness spans all requests."""

    def __init__(
        self,
        policy: FetchPolicy = FetchPolicy(),
        session: requests.Session | None = None,
        now: Callable[[], datetime] = utcnow,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.policy = policy
        self.session = session or requests.Session()
        self.session.headers["User-Agent"] = policy.user_agent
        self.session.max_redirects = policy.max_redirects
        self._now = now
        self._sleep = sleep
        self.throttle = HostThrottle(policy.per_host_delay, sleep=sleep)
        self._feed_times: dict[str, datetime] = {}

    def _get_once(self, url: str, html_only: bool) -> _Response:
        policy = self.policy
        try:
            resp = self.session.get(url, timeout=policy.timeout, stream=True, allow_redirects=True)
        except requests.Timeout as exc:
            raise FetchTimeout(url, f"timed out: {exc}") from exc
        except requests.TooManyRedirects as exc:
            raise FetchError(url, f"more than {policy.max_redirects} redirects") from exc
        except requests.RequestException as exc:
            raise FetchError(url, f"request failed: {exc}") from exc
        with resp:
            if not 200 <= resp.status_code < 300:
                raise HTTPStatusError(url, resp.status_code)
            ctype = resp.headers.get("Content-Type")
            if html_only and ctype and media_type(ctype) not in HTML_TYPES:
                raise ContentTypeError(url, media_type(ctype))
            declared = resp.headers.get("Content-Length")
            if declared and declared.isdigit() and int(declared) > policy.max_body_bytes:
                raise BodyTooLarge(url, f"body of {declared} bytes exceeds {policy.max_body_bytes}")
            chunks: list[bytes] = []
            size = 0
            try:
                for chunk in resp.iter_content(65536):
                    size += len(chunk)
                    if size > policy.max_body_bytes:
                        raise BodyTooLarge(url, f"body exceeds {policy.max_body_bytes} bytes")
                    chunks.append(chunk)
            except requests.ConnectionError as exc:
                if exc.args and isinstance(exc.args[0], ReadTimeoutError):
                    raise FetchTimeout(url, "timed out reading body") from exc
                raise FetchError(url, f"connection broken: {exc}") from exc
            except requests.Timeout as exc:
                raise FetchTimeout(url, "timed out reading body") from exc
            return _Response(resp.url, ctype, b"".join(chunks))

    def get(self, url: str, html_only: bool = False) -> _Response:
        host = urlsplit(url).netloc.lower()
        attempts = self.policy.max_retries + 1
        for attempt in range(1, attempts + 1):
            try:
                with self.throttle.slot(host):
                    return self._get_once(url, html_only)
            except FetchError as exc:
                if not exc.retryable or attempt == attempts:
                    raise exc.with_attempts(attempt)
                logger.info("attempt %d/%d for %s failed: %s", attempt, attempts, url, exc.message)
                self._sleep(self.policy.backoff(attempt))
        raise AssertionError("unreachable")

    def fetch_feed(self, source: FeedSource) -> bytes:
        body = self.get(source.feed_url).body
        self._feed_times[source.source_id] = self._now()
        return body

    def feed_fetched_at(self, source: FeedSource) -> datetime:
        return self._feed_times.get(source.source_id) or self._now()

    def fetch_article(self, item: FeedItem) -> ArticleDocument:
        resp = self.get(item.link, html_only=True)
        return ArticleDocument.build(item, resp.url, resp.body, self._now(), resp.content_type)


def fetch_feed(source: FeedSource, policy: FetchPolicy = FetchPolicy()) -> bytes:
    """One-shot feed fetch. Use an HttpFetcher for politeness across calls."""
    return HttpFetcher(policy).fetch_feed(source)


def fetch_article(item: FeedItem, policy: FetchPolicy = FetchPolicy()) -> ArticleDocument:
    return HttpFetcher(policy).fetch_article(item)
