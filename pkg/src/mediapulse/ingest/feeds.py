"""RSS 2.0 / RSS 1.0 / Atom parsing and the source roster."""

from __future__ import annotations

import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timezone
from email.utils import parsedate_to_datetime
from pathlib import Path
from typing import Iterator, Mapping
from urllib.parse import urljoin, urlsplit

import yaml

logger = logging.getLogger(__name__)

ATOM_NS = "http://www.w3.org/2005/Atom"


class FeedFormatError(ValueError):
    """Body is not XML, or its root is neither RSS nor Atom."""

    def __init__(self, message: str, root: str | None = None):
        self.root = root
        super().__init__(message)


class RosterError(ValueError):
    pass


def is_absolute_url(url: str) -> bool:
    parts = urlsplit(url)
    return parts.scheme in ("http", "https") and bool(parts.netloc)


@dataclass(frozen=True)
class FeedSource:
    source_id: str
    name: str
    feed_url: str

    def __post_init__(self) -> None:
        if not self.source_id:
            raise RosterError("source_id must be non-empty")
        if not is_absolute_url(self.feed_url):
            raise RosterError(f"{self.source_id}: feed_url {self.feed_url!r} is not an absolute http(s) URL")


@dataclass(frozen=True)
class FeedItem:
    link: str
    title: str
    source_id: str
    summary: str | None = None
    published_at: datetime | None = None


@dataclass
class ParsedFeed:
    """Items in document order plus the number of link-less items dropped."""

    items: list[FeedItem] = field(default_factory=list)
    dropped: int = 0

    def __iter__(self) -> Iterator[FeedItem]:
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, index: int) -> FeedItem:
        return self.items[index]


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1] if isinstance(tag, str) else ""


def _child(elem: ET.Element, *names: str) -> ET.Element | None:
    # first child matching any name, in priority order; Element truthiness is unusable here
    for name in names:
        for child in elem:
            if _local(child.tag) == name:
                return child
    return None


def _text(elem: ET.Element | None) -> str:
    if elem is None:
        return ""
    return "".join(elem.itertext()).strip()


def _parse_date(value: str) -> datetime | None:
    value = value.strip()
    if not value:
        return None
    try:
        parsed = parsedate_to_datetime(value)
    except (TypeError, ValueError):
        try:
            parsed = datetime.fromisoformat(value.replace("Z", "+00:00"))
        except ValueError:
            return None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


def _rss_item(elem: ET.Element) -> tuple[str, str, str | None, datetime | None]:
    link = _text(_child(elem, "link"))
    summary = _text(_child(elem, "description")) or None
    date_elem = _child(elem, "pubDate", "date")
    return link, _text(_child(elem, "title")), summary, _parse_date(_text(date_elem))


def _atom_entry(elem: ET.Element) -> tuple[str, str, str | None, datetime | None]:
    link = ""
    for child in elem:
        if _local(child.tag) == "link" and child.get("rel", "alternate") == "alternate":
            link = (child.get("href") or "").strip()
            if link:
                break
    summary = _text(_child(elem, "summary")) or _text(_child(elem, "content")) or None
    date_elem = _child(elem, "published", "updated")
    return link, _text(_child(elem, "title")), summary, _parse_date(_text(date_elem))


def parse_feed(body: bytes, source: FeedSource) -> ParsedFeed:
    """Parse an RSS or Atom document into feed items.

    Relative links are resolved against ``source.feed_url``. Items without
    a usable link are dropped and counted in ``ParsedFeed.dropped``.
    """
    payload = body.lstrip(b"\xef\xbb\xbf \t\r\n")
    if not payload:
        raise FeedFormatError(f"{source.source_id}: empty feed body")
    try:
        root = ET.fromstring(payload)
    except ET.ParseError as exc:
        raise FeedFormatError(f"{source.source_id}: feed is not well-formed XML: {exc}") from exc

    root_name = _local(root.tag)
    if root_name == "rss":
        channel = _child(root, "channel")
        elems = [e for e in channel if _local(e.tag) == "item"] if channel is not None else []
        extract = _rss_item
    elif root_name == "RDF":
        elems = [e for e in root.iter() if _local(e.tag) == "item"]
        extract = _rss_item
    elif root_name == "feed" and root.tag.startswith("{" + ATOM_NS):
        elems = [e for e in root if _local(e.tag) == "entry"]
        extract = _atom_entry
    else:
        raise FeedFormatError(
            f"{source.source_id}: unsupported feed root element <{root_name}>", root=root_name
        )

    result = ParsedFeed()
    for elem in elems:
        link, title, summary, published = extract(elem)
        resolved = urljoin(source.feed_url, link) if link else ""
        if not resolved or not is_absolute_url(resolved):
            result.dropped += 1
            continue
        result.items.append(
            FeedItem(
                link=resolved,
                title=title,
                source_id=source.source_id,
                summary=summary,
                published_at=published,
            )
        )
    if result.dropped:
        logger.warning("%s: dropped %d feed item(s) without a link", source.source_id, result.dropped)
    return result


def load_roster(path: str | Path) -> list[FeedSource]:
    """Read a YAML roster: ``sources: [{source_id, name, feed_url}, ...]``."""
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise RosterError(f"{path}: malformed roster: {exc}") from exc
    entries = doc.get("sources") if isinstance(doc, Mapping) else None
    if not isinstance(entries, list) or not entries:
        raise RosterError(f"{path}: roster needs a non-empty 'sources' list")
    sources: list[FeedSource] = []
    seen: set[str] = set()
    for entry in entries:
        if not isinstance(entry, Mapping):
            raise RosterError(f"{path}: roster entry must be a mapping, got {entry!r}")
        try:
            source = FeedSource(str(entry["source_id"]), str(entry["name"]), str(entry["feed_url"]))
        except KeyError as exc:
            raise RosterError(f"{path}: roster entry missing {exc.args[0]!r}") from None
        if source.source_id in seen:
            raise RosterError(f"{path}: duplicate source_id {source.source_id!r}")
        seen.add(source.source_id)
        sources.append(source)
    return sources
