"""Builders shared by the CLI and acceptance tests."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from mediapulse.cli import main


def write_mini_fixture(root: Path, pages: dict[str, str], source_id: str = "mini",
                       fetched_at: str = "2019-11-01T10:00:00+00:00") -> Path:
    """One-source offline fixture plus a roster naming that source; returns the roster path."""
    base = root / "fixtures" / source_id
    base.mkdir(parents=True)
    feed_url = f"https://{source_id}.example.es/feed.xml"
    items, entries = [], {}
    for i, (path, body) in enumerate(pages.items()):
        url = f"https://{source_id}.example.es{path}"
        name = hashlib.sha256(url.encode()).hexdigest()[:16] + ".html"
        (base / name).write_text(body, encoding="utf-8")
        items.append(f"<item><title>item {i}</title><link>{url}</link></item>")
        entries[url] = {"file": name, "content_type": "text/html; charset=utf-8", "fetched_at": fetched_at}
    (base / "feed.xml").write_text(f"<rss><channel>{''.join(items)}</channel></rss>", encoding="utf-8")
    (base / "manifest.json").write_text(
        json.dumps({"feed": {"url": feed_url, "file": "feed.xml"}, "entries": entries}), encoding="utf-8"
    )
    roster = root / "roster.yaml"
    roster.write_text(f"sources:\n  - {{source_id: {source_id}, name: Mini, feed_url: '{feed_url}'}}\n")
    return roster


def run_pipeline(store: Path, corpus: Path, *report_args: str) -> str:
    """crawl (offline) -> scan -> report into a file; returns the report text."""
    assert main(["crawl", "--store", str(store), "--offline", str(corpus)]) == 0
    assert main(["scan", "--store", str(store)]) == 0
    out = store.parent / f"{store.name}-report.out"
    assert main(["report", "--store", str(store), "-o", str(out), *report_args]) == 0
    return out.read_text(encoding="utf-8")
