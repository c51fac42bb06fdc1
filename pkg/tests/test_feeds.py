from __future__ import annotations

from datetime import datetime, timezone

import pytest

from mediapulse.ingest import FeedFormatError, FeedSource, RosterError, load_roster, parse_feed

SOURCE = FeedSource("fixture", "Fixture", "https://news.example.es/feeds/main.xml")


def parse(fixtures_dir, name):
    return parse_feed((fixtures_dir / "feeds" / name).read_bytes(), SOURCE)


def test_rss2_drops_linkless_item_and_resolves_relative(fixtures_dir, caplog):
    feed = parse(fixtures_dir, "rss2_missing_link.xml")
    assert len(feed) == 2 and feed.dropped == 1
    first, third = feed
    assert first.link == "https://news.example.es/a/1.html"
    assert first.title == "First" and first.summary == "Uno"
    assert first.published_at == datetime(2019, 11, 1, 8, 15, tzinfo=timezone.utc)
    assert third.link == "https://news.example.es/a/3.html"
    assert third.published_at is None
    assert all(item.source_id == "fixture" for item in feed)
    assert "dropped 1" in caplog.text


def test_atom_picks_alternate_link(fixtures_dir):
    feed = parse(fixtures_dir, "atom_two_entries.xml")
    assert [i.link for i in feed] == [
        "https://news.example.es/b/1.html",
        "https://news.example.es/feeds/b/2.html",
    ]
    assert feed[0].title == "Primera & única"
    assert feed[0].published_at == datetime(2019, 11, 2, 8, 0, tzinfo=timezone.utc)
    assert feed[1].summary == "<p>Contenido</p>"
    assert feed.dropped == 0


def test_rdf_items(fixtures_dir):
    feed = parse(fixtures_dir, "rdf_rss1.xml")
    assert [i.title for i in feed] == ["Uno", "Dos"]
    assert feed[0].published_at == datetime(2019, 11, 3, 8, 0, tzinfo=timezone.utc)


def test_bom_whitespace_and_cdata(fixtures_dir):
    feed = parse(fixtures_dir, "rss_bom_cdata.xml")
    assert len(feed) == 1
    assert feed[0].link == "https://news.example.es/d/1.html"
    assert feed[0].title == "Con <b>CDATA</b>"
    assert feed[0].summary == "<p>Vox sube</p>"


def test_rss_without_channel_is_empty(fixtures_dir):
    feed = parse(fixtures_dir, "rss_no_channel.xml")
    assert len(feed) == 0 and feed.dropped == 0


@pytest.mark.parametrize(
    "name, root",
    [
        ("malformed_unclosed.xml", None),
        ("malformed_ampersand.xml", None),
        ("empty.xml", None),
        ("not_a_feed.html", "html"),
        ("sitemap.xml", "urlset"),
    ],
)
def test_rejected_documents(fixtures_dir, name, root):
    with pytest.raises(FeedFormatError) as err:
        parse(fixtures_dir, name)
    assert err.value.root == root


def test_feed_source_rejects_relative_url():
    with pytest.raises(RosterError):
        FeedSource("x", "X", "/feed.xml")
    with pytest.raises(RosterError):
        FeedSource("", "X", "https://x.es/feed")


def test_reference_roster_loads():
    from mediapulse import DEFAULT_ROSTER, data_path

    sources = load_roster(data_path(DEFAULT_ROSTER))
    assert len(sources) == 13
    assert len({s.source_id for s in sources}) == 13


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("sources: []\n", "non-empty"),
        ("sources:\n  - {source_id: a, name: A}\n", "feed_url"),
        ("sources:\n  - {source_id: a, name: A, feed_url: 'ftp://x'}\n", "absolute"),
        ("sources: [\n", "malformed"),
        (
            "sources:\n  - {source_id: a, name: A, feed_url: 'https://a.es/f'}\n"
            "  - {source_id: a, name: B, feed_url: 'https://b.es/f'}\n",
            "duplicate",
        ),
    ],
)
def test_bad_rosters(tmp_path, text, fragment):
    path = tmp_path / "roster.yaml"
    path.write_text(text)
    with pytest.raises(RosterError, match=fragment):
        load_roster(path)
