"""Offline fixture directories standing in for the network.

Layout, one directory per source::

    <root>/<source_id>/manifest.json
    <root>/<source_id>/feed.xml
    <root>/<source_id>/<sha256(url)[:16]>.html

``manifest.json`` maps every URL of that source to its stored response::

    {
      "feed": {"url": "...", "file": "feed.xml"},
      "entries": {
        "https://example.org/a": {
          "file": "3f2a....html",
          "content_type": "text/html; charset=utf-8",
          "fetched_at": "2019-11-01T09:30:00+00:00"
        },
        "https://example.org/old": {"redirect_to": "https://example.org/a"},
        "https://example.org/gone": {"status": 404}
      }
    }

A feed entry may also carry ``status`` to simulate a failing source.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime
from pathlib import Path
from typing import Callable, Mapping

from .feeds import FeedItem, FeedSource
from .fetch import (
    HTML_TYPES,
    ArticleDocument,
    ContentTypeError,
    Fetcher,
    FetchError,
    HTTPStatusError,
    media_type,
    utcnow,
)

MANIFEST = "manifest.json"
MAX_REDIRECTS = 5


class FixtureError(ValueError):
    pass


def fixture_name(url: str, suffix: str = ".html") -> str:
    return hashlib.sha256(url.encode("utf-8")).hexdigest()[:16] + suffix


def _read_manifest(path: Path) -> dict:
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FixtureError(f"{path}: unreadable manifest: {exc}") from exc
    if not isinstance(manifest, Mapping):
        raise FixtureError(f"{path}: manifest must be a JSON object")
    return manifest


class OfflineFetcher:
    """Serves feeds and articles from a fixture directory."""

    def __init__(self, root: str | Path, now: Callable[[], datetime] = utcnow):
        self.root = Path(root)
        if not self.root.is_dir():
            raise FixtureError(f"{self.root}: offline fixture directory not found")
        self._now = now
        self._feeds: dict[str, tuple[Path, dict]] = {}
        self._entries: dict[str, tuple[Path, dict]] = {}
        for manifest_path in sorted(self.root.glob(f"*/{MANIFEST}")):
            manifest = _read_manifest(manifest_path)
            base = manifest_path.parent
            feed = manifest.get("feed")
            if isinstance(feed, Mapping):
                self._feeds[base.name] = (base, dict(feed))
            for url, entry in (manifest.get("entries") or {}).items():
                self._entries[url] = (base, dict(entry))

    def fetch_feed(self, source: FeedSource) -> bytes:
        found = self._feeds.get(source.source_id)
        if found is None:
            raise HTTPStatusError(source.feed_url, 404)
        base, entry = found
        status = int(entry.get("status", 200))
        if not 200 <= status < 300:
            raise HTTPStatusError(source.feed_url, status)
        return (base / entry["file"]).read_bytes()

    def feed_fetched_at(self, source: FeedSource) -> datetime:
        found = self._feeds.get(source.source_id)
        stamp = found[1].get("fetched_at") if found else None
        return datetime.fromisoformat(stamp) if stamp else self._now()

    def _resolve(self, url: str) -> tuple[str, Path, dict]:
        for _ in range(MAX_REDIRECTS + 1):
            found = self._entries.get(url)
            if found is None:
                raise HTTPStatusError(url, 404)
            base, entry = found
            if "redirect_to" not in entry:
                return url, base, entry
            url = entry["redirect_to"]
        raise FetchError(url, f"more than {MAX_REDIRECTS} redirects")

    def fetch_article(self, item: FeedItem) -> ArticleDocument:
        final_url, base, entry = self._resolve(item.link)
        status = int(entry.get("status", 200))
        if not 200 <= status < 300:
            raise HTTPStatusError(final_url, status)
        ctype = entry.get("content_type")
        if ctype and media_type(ctype) not in HTML_TYPES:
            raise ContentTypeError(final_url, media_type(ctype))
        body = (base / entry["file"]).read_bytes()
        stamp = entry.get("fetched_at")
        fetched_at = datetime.fromisoformat(stamp) if stamp else self._now()
        return ArticleDocument.build(item, final_url, body, fetched_at, ctype)


class RecordingFetcher:
    """Wraps a live fetcher and writes every response into a fixture directory."""

    def __init__(self, inner: Fetcher, root: str | Path):
        self.inner = inner
        self.root = Path(root)

    def _update(self, source_id: str, mutate: Callable[[dict], None]) -> None:
        base = self.root / source_id
        base.mkdir(parents=True, exist_ok=True)
        path = base / MANIFEST
        manifest = _read_manifest(path) if path.exists() else {"entries": {}}
        mutate(manifest)
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")

    def fetch_feed(self, source: FeedSource) -> bytes:
        body = self.inner.fetch_feed(source)
        (self.root / source.source_id).mkdir(parents=True, exist_ok=True)
        (self.root / source.source_id / "feed.xml").write_bytes(body)
        stamp = self.inner.feed_fetched_at(source).isoformat()
        self._update(
            source.source_id,
            lambda m: m.__setitem__("feed", {"url": source.feed_url, "file": "feed.xml", "fetched_at": stamp}),
        )
        return body

    def feed_fetched_at(self, source: FeedSource) -> datetime:
        return self.inner.feed_fetched_at(source)

    def fetch_article(self, item: FeedItem) -> ArticleDocument:
        doc = self.inner.fetch_article(item)
        name = fixture_name(doc.url)
        (self.root / item.source_id).mkdir(parents=True, exist_ok=True)
        (self.root / item.source_id / name).write_bytes(doc.raw_html)

        def mutate(manifest: dict) -> None:
            entries = manifest.setdefault("entries", {})
            entries[doc.url] = {
                "file": name,
                "content_type": doc.content_type or "text/html",
                "fetched_at": doc.fetched_at.isoformat(),
            }
            if doc.url != item.link:
                entries[item.link] = {"redirect_to": doc.url}

        self._update(item.source_id, mutate)
        return doc
