#!/usr/bin/env python3
"""Regenerate the offline fixture corpus under tests/fixtures/.

Writes:
  tests/fixtures/corpus/<source_id>/{manifest.json, feed.xml, *.html}
  tests/fixtures/corpus_expected.json   per-article counts, known by construction

Every article is composed from neutral filler plus a chosen list of alias
mentions, so its true per-entity counts are known before any HTML exists.
The visible text is checked against a naive scanner written here (not the
package's matcher) and resampled if filler happened to form an alias.

Deterministic: the same seed always yields byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import shutil
import unicodedata
from datetime import datetime, timedelta, timezone
from pathlib import Path
from urllib.parse import urlsplit

import yaml

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "mediapulse" / "data"
OUT = ROOT / "tests" / "fixtures"
SEED = 20191110
N_ARTICLES = 40
MADRID = timezone(timedelta(hours=1))  # CET; no DST change inside 1-10 Nov

# (surface as written in HTML, surface as visible text, entity)
MENTIONS = {
    "psoe": ["PSOE", "psoe", "Partido Socialista", "los socialistas", "Ferraz", "el Gobierno",
             "el presidente", "el presidente del Gobierno"],
    "pp": ["PP", "Partido Popular", "los populares", "Génova", "GÉNOVA", "Genova", "G&eacute;nova"],
    "cs": ["Ciudadanos", "Cs", "los naranjas", "la formaci&oacute;n naranja"],
    "up": ["Unidas Podemos", "Podemos", "los morados"],
    "vox": ["Vox", "VOX"],
    "sanchez": ["Pedro Sánchez", "Sánchez", "Sanchez", "S&aacute;nchez"],
    "casado": ["Pablo Casado", "Casado"],
    "rivera": ["Albert Rivera", "Rivera", "Albert Ribera"],
    "iglesias": ["Pablo Iglesias", "Iglesias", "<b>Pablo</b> Iglesias"],
    "abascal": ["Santiago Abascal", "Abascal"],
}

# Day-by-day weights so the corpus shows a trend (Vox and Abascal rise).
def weights(day: int) -> dict[str, float]:
    return {
        "psoe": 6 - day * 0.3, "pp": 5.0, "cs": 3 + day * 0.2, "up": 2.5, "vox": 1.5 + day * 0.5,
        "sanchez": 6 - day * 0.35, "casado": 3.0, "rivera": 3.0, "iglesias": 2.5, "abascal": 0.8 + day * 0.5,
    }


FILLER = (
    "la campaña electoral entra en su recta final con debates encuestas y mítines en toda "
    "España mientras los votantes comparan propuestas sobre empleo pensiones vivienda educación "
    "sanidad impuestos Cataluña Europa y economía durante una jornada intensa de actos públicos "
    "en plazas pabellones y estudios de radio donde cada candidato insiste en su mensaje ante "
    "simpatizantes y periodistas que siguen la agenda desde primera hora de la mañana"
).split()

NAV = ["Portada", "España", "Internacional", "Economía", "Opinión", "Deportes", "Cultura"]

SCRIPT_NOISE = (
    '<script>var etiquetas = ["Vox", "PSOE", "Podemos", "Pablo Casado"]; '
    'if (etiquetas.length < 10 && window.x) { document.write("</div>"); }</script>'
)
LD_JSON = '<script type="application/ld+json">{"about": ["Santiago Abascal", "Ciudadanos"]}</script>'
STYLE = "<style>.psoe{color:red}.vox::after{content:'Vox'}</style>"


def visible(surface: str) -> str:
    text = re.sub(r"<[^>]+>", "", surface)
    return text.replace("&eacute;", "é").replace("&aacute;", "á").replace("&oacute;", "ó")


# -- independent naive scanner ---------------------------------------------------

def norm_tokens(text: str) -> list[str]:
    text = unicodedata.normalize("NFD", text.casefold())
    text = "".join(c for c in text if not unicodedata.combining(c))
    return re.findall(r"\w+", text)


def load_aliases() -> list[tuple[list[str], str]]:
    doc = yaml.safe_load((DATA / "lexicon_es2019.yaml").read_text(encoding="utf-8"))
    out = []
    for block in doc["entities"]:
        for alias in block["aliases"]:
            surface = alias["surface"] if isinstance(alias, dict) else alias
            out.append((norm_tokens(surface), block["id"]))
    out.sort(key=lambda a: -len(a[0]))
    return out


def naive_count(text: str, aliases) -> dict[str, int]:
    tokens = norm_tokens(text)
    counts: dict[str, int] = {}
    i = 0
    while i < len(tokens):
        for pattern, entity in aliases:
            if tokens[i:i + len(pattern)] == pattern:
                counts[entity] = counts.get(entity, 0) + 1
                i += len(pattern)
                break
        else:
            i += 1
    return counts


# -- composition -----------------------------------------------------------------

def sentence(rng: random.Random, mention: str | None) -> tuple[str, str]:
    """Return (html, visible text) of one sentence."""
    before = rng.sample(FILLER, rng.randint(3, 7))
    after = rng.sample(FILLER, rng.randint(2, 6))
    html_words, text_words = list(before), list(before)
    if mention is not None:
        wrapped = mention
        roll = rng.random()
        if roll < 0.2 and "<" not in mention:
            wrapped = f"<b>{mention}</b>"
        elif roll < 0.3 and "<" not in mention:
            wrapped = f'<a href="/tema/{rng.randint(1, 99)}">{mention}</a>'
        html_words.append(wrapped)
        text_words.append(visible(mention))
    html_words += after
    text_words += after
    html = " ".join(html_words)
    text = " ".join(text_words)
    return html[0].upper() + html[1:] + ".", text[0].upper() + text[1:] + "."


def compose_article(rng: random.Random, day: int, aliases, title: str) -> tuple[str, dict[str, int], str]:
    while True:
        w = weights(day)
        n = rng.randint(0, 11)
        entities = rng.choices(list(w), weights=list(w.values()), k=n)
        mentions = [rng.choice(MENTIONS[e]) for e in entities]
        expected: dict[str, int] = {}
        for e in entities:
            expected[e] = expected.get(e, 0) + 1
        slots = mentions + [None] * rng.randint(2, 5)
        rng.shuffle(slots)
        paragraphs_html, visible_parts = [], [title]
        para: list[str] = []
        for slot in slots:
            h, t = sentence(rng, slot)
            para.append(h)
            visible_parts.append(t)
            if len(para) >= 3 or rng.random() < 0.3:
                paragraphs_html.append("<p>" + " ".join(para) + "</p>")
                para = []
        if para:
            paragraphs_html.append("<p>" + " ".join(para) + "</p>")
        # self-check: filler must not form aliases, sentence joins must not merge mentions
        if naive_count("\n".join(visible_parts), aliases) == expected:
            return "\n".join(paragraphs_html), expected, "\n".join(visible_parts)


def page(source_name: str, title: str, body: str, stamp: str, rng: random.Random) -> str:
    nav = "".join(f'<li><a href="/{n.lower()}">{n}</a></li>' for n in NAV)
    extras = []
    if rng.random() < 0.5:
        extras.append("<!-- etiquetas: Ciudadanos, Vox, PSOE -->")
    if rng.random() < 0.5:
        extras.append("<template><p>Santiago Abascal y Pedro Sánchez</p></template>")
    if rng.random() < 0.5:
        extras.append('<img src="/img/mitin.jpg" alt="Pablo Iglesias en un mitin">')
    if rng.random() < 0.3:
        extras.append("<noscript><p>Activa JavaScript para ver a Vox</p></noscript>")
    return (
        "<!DOCTYPE html>\n<html lang=\"es\"><head><meta charset=\"utf-8\">"
        f"<title>{title} | {source_name}</title>{STYLE}{SCRIPT_NOISE}</head>\n<body>\n"
        f"<nav><ul>{nav}</ul></nav>\n"
        f"<header><h1>{title}</h1><p class=\"firma\">Redacción &middot; {stamp}</p></header>\n"
        f"<article>\n{body}\n{''.join(extras)}\n</article>\n"
        f"<footer><p>&copy; {source_name} 2019. Todos los derechos reservados.</p></footer>\n"
        f"{LD_JSON}\n</body></html>\n"
    )


def fixture_name(url: str) -> str:
    return hashlib.sha256(url.encode("utf-8")).hexdigest()[:16] + ".html"


def rss(source: dict, items: list[dict]) -> str:
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<rss version="2.0" xmlns:dc="http://purl.org/dc/elements/1.1/"><channel>',
        f"<title>{source['name']}</title><link>{source['feed_url']}</link>",
    ]
    for item in items:
        parts.append("<item>")
        parts.append(f"<title>{item['title']}</title>")
        if item.get("link") is not None:
            parts.append(f"<link>{item['link']}</link>")
        parts.append(f"<description><![CDATA[<p>{item['summary']}</p>]]></description>")
        parts.append(f"<pubDate>{item['pubdate']}</pubDate>")
        parts.append("</item>")
    parts.append("</channel></rss>")
    return "\n".join(parts) + "\n"


def atom(source: dict, items: list[dict]) -> str:
    parts = [
        '<?xml version="1.0" encoding="utf-8"?>',
        '<feed xmlns="http://www.w3.org/2005/Atom">',
        f"<title>{source['name']}</title>",
        f'<link rel="self" href="{source["feed_url"]}"/>',
        f"<id>{source['feed_url']}</id><updated>2019-11-10T23:00:00Z</updated>",
    ]
    for item in items:
        parts.append("<entry>")
        parts.append(f"<title>{item['title']}</title>")
        parts.append(f'<link rel="enclosure" href="{item["link"]}.jpg"/>')
        parts.append(f'<link rel="alternate" type="text/html" href="{item["link"]}"/>')
        parts.append(f"<id>{item['link']}</id>")
        parts.append(f"<published>{item['iso']}</published>")
        parts.append(f"<summary>{item['summary']}</summary>")
        parts.append("</entry>")
    parts.append("</feed>")
    return "\n".join(parts) + "\n"


def main() -> None:
    rng = random.Random(SEED)
    aliases = load_aliases()
    roster = yaml.safe_load((DATA / "roster_es2019.yaml").read_text(encoding="utf-8"))["sources"]
    corpus = OUT / "corpus"
    if corpus.exists():
        shutil.rmtree(corpus)
    expected: dict[str, dict] = {}
    per_source: dict[str, list[dict]] = {s["source_id"]: [] for s in roster}
    manifests: dict[str, dict] = {
        s["source_id"]: {"feed": {"url": s["feed_url"], "file": "feed.xml"}, "entries": {}} for s in roster
    }

    for k in range(N_ARTICLES):
        src_index = k % len(roster)
        source = roster[src_index]
        sid = source["source_id"]
        host = urlsplit(source["feed_url"]).netloc
        day = k % 10 + 1
        if k == 0:
            # 00:30 Madrid on 1 Nov is still 31 Oct in UTC
            local = datetime(2019, 11, 1, 0, 30, tzinfo=MADRID)
        else:
            local = datetime(2019, 11, day, 8 + (k * 7) % 14, (k * 13) % 60, tzinfo=MADRID)
        fetched = local.astimezone(timezone.utc)
        title = f"Crónica de campaña número {k + 1}"
        url = f"https://{host}/2019/11/{day:02d}/cronica-{k + 1}.html"
        body, counts, _ = compose_article(rng, day, aliases, title)
        html = page(source["name"], title, body, local.strftime("%d/%m/%Y %H:%M"), rng)
        name = fixture_name(url)
        base = corpus / sid
        base.mkdir(parents=True, exist_ok=True)
        (base / name).write_text(html, encoding="utf-8")
        manifests[sid]["entries"][url] = {
            "file": name,
            "content_type": "text/html; charset=utf-8",
            "fetched_at": fetched.isoformat(),
        }
        link = url
        if src_index == 1:
            link = urlsplit(url).path  # relative link, resolved against the feed URL
        elif src_index == 2 and k == 2:
            link = f"https://{host}/r/{k + 1}"
            manifests[sid]["entries"][link] = {"redirect_to": url}
        published = local - timedelta(hours=1)
        per_source[sid].append({
            "title": title,
            "link": link,
            "summary": "Resumen de la jornada de campaña",
            "pubdate": published.strftime("%a, %d %b %Y %H:%M:%S %z"),
            "iso": published.isoformat(),
        })
        expected[url] = {
            "source_id": sid,
            "bucket_date": local.date().isoformat(),
            "counts": {e: c for e, c in sorted(counts.items())},
        }

    for index, source in enumerate(roster):
        sid = source["source_id"]
        items = per_source[sid]
        if index == 5:
            items = items + [{"title": "Sin enlace", "link": None, "summary": "x", "pubdate": "", "iso": ""}]
        if index == 6:
            items = items + [items[0]]
        feed = atom(source, items) if index % 4 == 3 else rss(source, items)
        (corpus / sid / "feed.xml").write_text(feed, encoding="utf-8")
        (corpus / sid / "manifest.json").write_text(
            json.dumps(manifests[sid], indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8"
        )

    (OUT / "corpus_expected.json").write_text(
        json.dumps({"seed": SEED, "articles": expected}, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    total = sum(sum(a["counts"].values()) for a in expected.values())
    print(f"wrote {len(expected)} articles, {total} mentions, {len(roster)} feeds to {corpus}")


if __name__ == "__main__":
    main()
