"""Append-only article and mention store.

A store is a directory::

    articles.ndrec   one JSON object per line: article, content_change, sighting
    mentions.ndrec   one JSON object per line: mention
    store.lock       advisory writer lock
    meta             format version and bucket policy

Lines are written whole and fsync'd; a torn last line left by a crash is
ignored by readers and trimmed by the next writer. The in-memory index is
rebuilt from the files on open.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import threading
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

from filelock import FileLock, Timeout

from .ingest.fetch import ArticleDocument
from .lexicon import EntityKind

logger = logging.getLogger(__name__)

FORMAT_NAME = "mediapulse-store"
FORMAT_VERSION = 1
ARTICLES = "articles.ndrec"
MENTIONS = "mentions.ndrec"
LOCK = "store.lock"
META = "meta"


class StoreError(Exception):
    pass


class StoreLockedError(StoreError):
    pass


class StoreCorruptError(StoreError):
    pass


class BucketMismatchError(StoreError):
    pass


class ReferentialError(StoreError):
    def __init__(self, url: str):
        self.url = url
        super().__init__(f"mention refers to unknown article {url!r}")


class UpsertResult(str, enum.Enum):
    INSERTED = "inserted"
    DUPLICATE_UNCHANGED = "duplicate_unchanged"
    DUPLICATE_CONTENT_CHANGED = "duplicate_content_changed"


class BucketMode(str, enum.Enum):
    BY_FETCH_DATE = "by_fetch_date"
    BY_PUBLISHED_DATE_FALLBACK_FETCH = "by_published_date_fallback_fetch"


@dataclass(frozen=True)
class BucketPolicy:
    mode: BucketMode = BucketMode.BY_FETCH_DATE
    timezone: str = "Europe/Madrid"

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", BucketMode(self.mode))
        try:
            ZoneInfo(self.timezone)
        except (ZoneInfoNotFoundError, ValueError):
            raise ValueError(f"unknown time zone {self.timezone!r}") from None

    def bucket(self, fetched_at: datetime, published_at: datetime | None = None) -> date:
        stamp = fetched_at
        if self.mode is BucketMode.BY_PUBLISHED_DATE_FALLBACK_FETCH and published_at is not None:
            stamp = published_at
        if stamp.tzinfo is None:
            stamp = stamp.replace(tzinfo=timezone.utc)
        return stamp.astimezone(ZoneInfo(self.timezone)).date()

    def as_dict(self) -> dict[str, str]:
        return {"mode": self.mode.value, "timezone": self.timezone}


def _utc(stamp: datetime) -> datetime:
    if stamp.tzinfo is None:
        return stamp.replace(tzinfo=timezone.utc)
    return stamp.astimezone(timezone.utc)


@dataclass(frozen=True)
class ArticleRecord:
    url: str
    source_id: str
    fetched_at: datetime
    bucket_date: date
    content_hash: str
    title: str = ""
    published_at: datetime | None = None
    text: str = ""

    @classmethod
    def from_document(cls, doc: ArticleDocument, policy: BucketPolicy) -> ArticleRecord:
        return cls(
            url=doc.url,
            source_id=doc.source_id,
            fetched_at=_utc(doc.fetched_at),
            bucket_date=policy.bucket(doc.fetched_at, doc.published_at),
            content_hash=doc.content_hash,
            title=doc.title,
            published_at=_utc(doc.published_at) if doc.published_at else None,
            text=doc.extracted_text,
        )

    def to_json(self) -> dict:
        return {
            "type": "article",
            "url": self.url,
            "source_id": self.source_id,
            "fetched_at": _utc(self.fetched_at).isoformat(),
            "published_at": _utc(self.published_at).isoformat() if self.published_at else None,
            "bucket_date": self.bucket_date.isoformat(),
            "content_hash": self.content_hash,
            "title": self.title,
            "text": self.text,
        }

    @classmethod
    def from_json(cls, obj: dict) -> ArticleRecord:
        published = obj.get("published_at")
        return cls(
            url=obj["url"],
            source_id=obj["source_id"],
            fetched_at=datetime.fromisoformat(obj["fetched_at"]),
            bucket_date=date.fromisoformat(obj["bucket_date"]),
            content_hash=obj["content_hash"],
            title=obj.get("title", ""),
            published_at=datetime.fromisoformat(published) if published else None,
            text=obj.get("text", ""),
        )


@dataclass(frozen=True)
class MentionRecord:
    url: str
    entity_id: str
    count: int
    lexicon_version: str
    kind: EntityKind | None = None

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.url, self.entity_id, self.lexicon_version)

    def to_json(self) -> dict:
        return {
            "type": "mention",
            "url": self.url,
            "entity_id": self.entity_id,
            "kind": self.kind.value if self.kind else None,
            "count": self.count,
            "lexicon_version": self.lexicon_version,
        }

    @classmethod
    def from_json(cls, obj: dict) -> MentionRecord:
        kind = obj.get("kind")
        return cls(
            url=obj["url"],
            entity_id=obj["entity_id"],
            count=int(obj["count"]),
            lexicon_version=obj["lexicon_version"],
            kind=EntityKind(kind) if kind else None,
        )


@dataclass(frozen=True)
class MentionRow:
    """One mention joined with its article, placed on a bucket date."""

    bucket_date: date
    article: ArticleRecord
    mention: MentionRecord


def _encode(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n"


def _read_lines(path: Path) -> Iterator[tuple[int, dict]]:
    if not path.exists():
        return
    data = path.read_bytes()
    complete, _, tail = data.rpartition(b"\n")
    if tail:
        logger.warning("%s: ignoring torn final line (%d bytes)", path, len(tail))
    if not complete:
        return
    for lineno, raw in enumerate(complete.split(b"\n"), start=1):
        if not raw.strip():
            continue
        try:
            yield lineno, json.loads(raw)
        except json.JSONDecodeError as exc:
            raise StoreCorruptError(f"{path}:{lineno}: undecodable record: {exc}") from exc


def _trim_torn_tail(path: Path) -> None:
    if not path.exists():
        return
    with open(path, "rb+") as fh:
        data = fh.read()
        if data and not data.endswith(b"\n"):
            fh.truncate(data.rfind(b"\n") + 1)


class Store:
    """Append-only store of articles and mentions.

    Open with ``writable=True`` (the default) to take the directory's writer
    lock; read-only handles never lock and never modify files.
    """

    def __init__(
        self,
        path: str | Path,
        bucket: BucketPolicy | None = None,
        *,
        writable: bool = True,
        fsync: bool = True,
    ):
        self.path = Path(path)
        self.writable = writable
        self.fsync = fsync
        self._lock: FileLock | None = None
        self._mutex = threading.Lock()
        if writable:
            self.path.mkdir(parents=True, exist_ok=True)
            self._lock = FileLock(str(self.path / LOCK))
            try:
                self._lock.acquire(timeout=0)
            except Timeout:
                raise StoreLockedError(f"{self.path}: another writer holds the store lock") from None
        elif not self.path.is_dir():
            raise StoreError(f"{self.path}: store directory does not exist")
        try:
            self.bucket = self._init_meta(bucket)
            if writable:
                _trim_torn_tail(self.path / ARTICLES)
                _trim_torn_tail(self.path / MENTIONS)
            self._load()
        except BaseException:
            self.close()
            raise

    def __enter__(self) -> Store:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if self._lock is not None:
            self._lock.release()
            self._lock = None

    def _init_meta(self, bucket: BucketPolicy | None) -> BucketPolicy:
        meta_path = self.path / META
        if meta_path.exists():
            try:
                meta = json.loads(meta_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise StoreCorruptError(f"{meta_path}: unreadable meta: {exc}") from exc
            if meta.get("format") != FORMAT_NAME or meta.get("version") != FORMAT_VERSION:
                raise StoreError(
                    f"{self.path}: unsupported store format {meta.get('format')!r} v{meta.get('version')!r}"
                )
            stored = BucketPolicy(**meta["bucket"])
            if bucket is not None and bucket != stored:
                raise BucketMismatchError(
                    f"{self.path}: store was created with bucket policy {stored.as_dict()}, "
                    f"not {bucket.as_dict()}"
                )
            return stored
        bucket = bucket or BucketPolicy()
        if self.writable:
            meta = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "bucket": bucket.as_dict()}
            meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return bucket

    def _load(self) -> None:
        self._articles: dict[str, ArticleRecord] = {}
        self._hashes: dict[str, set[str]] = {}
        self._sightings: dict[str, set[date]] = {}
        self._mentions: dict[tuple[str, str, str], MentionRecord] = {}
        for lineno, obj in _read_lines(self.path / ARTICLES):
            kind = obj.get("type")
            url = obj.get("url")
            if kind == "article":
                record = ArticleRecord.from_json(obj)
                self._articles.setdefault(url, record)
                self._hashes.setdefault(url, set()).add(record.content_hash)
                self._sightings.setdefault(url, set()).add(record.bucket_date)
            elif kind == "content_change":
                self._hashes.setdefault(url, set()).add(obj["content_hash"])
            elif kind == "sighting":
                self._sightings.setdefault(url, set()).add(date.fromisoformat(obj["bucket_date"]))
            else:
                raise StoreCorruptError(f"{ARTICLES}:{lineno}: unknown record type {kind!r}")
        for lineno, obj in _read_lines(self.path / MENTIONS):
            if obj.get("type") != "mention":
                raise StoreCorruptError(f"{MENTIONS}:{lineno}: unknown record type {obj.get('type')!r}")
            record = MentionRecord.from_json(obj)
            self._mentions.setdefault(record.key, record)

    def _append(self, filename: str, objs: Iterable[dict]) -> None:
        if not self.writable:
            raise StoreError("store opened read-only")
        payload = "".join(_encode(o) for o in objs).encode("utf-8")
        if not payload:
            return
        with open(self.path / filename, "ab") as fh:
            fh.write(payload)
            fh.flush()
            if self.fsync:
                os.fsync(fh.fileno())

    # -- writes --------------------------------------------------------------

    def upsert_article(self, record: ArticleRecord) -> UpsertResult:
        """Insert an article unless its URL is known.

        A known URL with a new content hash keeps the first version and logs
        the change; a new bucket date for a known URL is kept as a sighting.
        """
        with self._mutex:
            existing = self._articles.get(record.url)
            if existing is None:
                self._append(ARTICLES, [record.to_json()])
                self._articles[record.url] = record
                self._hashes[record.url] = {record.content_hash}
                self._sightings[record.url] = {record.bucket_date}
                return UpsertResult.INSERTED

            pending: list[dict] = []
            changed = record.content_hash != existing.content_hash
            if changed and record.content_hash not in self._hashes[record.url]:
                logger.info("content changed for %s; keeping first version", record.url)
                pending.append({
                    "type": "content_change",
                    "url": record.url,
                    "content_hash": record.content_hash,
                    "fetched_at": _utc(record.fetched_at).isoformat(),
                })
            if record.bucket_date not in self._sightings[record.url]:
                pending.append({"type": "sighting", "url": record.url, "bucket_date": record.bucket_date.isoformat()})
            self._append(ARTICLES, pending)
            for obj in pending:
                if obj["type"] == "content_change":
                    self._hashes[record.url].add(record.content_hash)
                else:
                    self._sightings[record.url].add(record.bucket_date)
            return UpsertResult.DUPLICATE_CONTENT_CHANGED if changed else UpsertResult.DUPLICATE_UNCHANGED

    def append_mentions(self, records: Iterable[MentionRecord]) -> int:
        """Append new mention facts; zero counts and known keys are skipped."""
        with self._mutex:
            fresh: dict[tuple[str, str, str], MentionRecord] = {}
            for record in records:
                if record.count < 0:
                    raise ValueError(f"negative count for {record.key}")
                if record.count == 0:
                    continue
                if record.url not in self._articles:
                    raise ReferentialError(record.url)
                if record.key in self._mentions or record.key in fresh:
                    continue
                fresh[record.key] = record
            self._append(MENTIONS, (r.to_json() for r in fresh.values()))
            self._mentions.update(fresh)
            return len(fresh)

    # -- reads ---------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._articles)

    def __contains__(self, url: object) -> bool:
        return url in self._articles

    def article(self, url: str) -> ArticleRecord:
        return self._articles[url]

    def articles(self) -> list[ArticleRecord]:
        """All articles in insertion order."""
        return list(self._articles.values())

    def mentions(self, lexicon_version: str | None = None) -> list[MentionRecord]:
        return [
            m for m in self._mentions.values()
            if lexicon_version is None or m.lexicon_version == lexicon_version
        ]

    def sightings(self, url: str) -> list[date]:
        return sorted(self._sightings.get(url, ()))

    def query_range(
        self,
        from_date: date,
        to_date: date,
        kind: EntityKind | str | None = None,
        *,
        lexicon_version: str | None = None,
        count_reappearances: bool = False,
    ) -> list[MentionRow]:
        """Mentions whose bucket date lies in ``[from_date, to_date]``.

        Rows are ordered by (bucket_date, url, entity_id). With
        ``count_reappearances`` an article contributes once for every day it
        was seen in a feed instead of once overall.
        """
        if from_date > to_date:
            raise ValueError(f"inverted date range {from_date} > {to_date}")
        kind = EntityKind(kind) if kind is not None else None
        rows: list[MentionRow] = []
        for mention in self._mentions.values():
            if lexicon_version is not None and mention.lexicon_version != lexicon_version:
                continue
            if kind is not None and mention.kind is not kind:
                continue
            article = self._articles[mention.url]
            days = self._sightings[mention.url] if count_reappearances else (article.bucket_date,)
            for day in days:
                if from_date <= day <= to_date:
                    rows.append(MentionRow(day, article, mention))
        rows.sort(key=lambda r: (r.bucket_date, r.mention.url, r.mention.entity_id, r.mention.lexicon_version))
        return rows
