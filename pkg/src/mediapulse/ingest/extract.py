"""Lenient visible-text extraction from article HTML."""

from __future__ import annotations

import codecs
import re
from html.parser import HTMLParser

# contents never shown to a reader
_HIDDEN = frozenset({"script", "style", "template", "noscript", "title"})

_BLOCK = frozenset({
    "address", "article", "aside", "blockquote", "body", "br", "caption", "dd", "details",
    "div", "dl", "dt", "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3",
    "h4", "h5", "h6", "header", "hr", "html", "li", "main", "nav", "ol", "p", "pre", "section",
    "summary", "table", "tbody", "td", "tfoot", "th", "thead", "tr", "ul",
})

_META_CHARSET_RE = re.compile(rb"""<meta[^>]+charset\s*=\s*["']?\s*([A-Za-z0-9_.:-]+)""", re.I)
_SPACES_RE = re.compile(r"[^\S\n]+")


class _TextCollector(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self.hidden_depth = 0

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag in _HIDDEN:
            self.hidden_depth += 1
        elif tag in _BLOCK:
            self.parts.append("\n")

    def handle_startendtag(self, tag: str, attrs) -> None:
        if tag in _BLOCK:
            self.parts.append("\n")

    def handle_endtag(self, tag: str) -> None:
        if tag in _HIDDEN:
            self.hidden_depth = max(0, self.hidden_depth - 1)
        elif tag in _BLOCK:
            self.parts.append("\n")

    def handle_data(self, data: str) -> None:
        if not self.hidden_depth:
            self.parts.append(data)


def decode_html(html: bytes, declared_charset: str | None = None) -> str:
    """Decode using the declared charset, a <meta> charset, or UTF-8.

    Undecodable bytes become U+FFFD; this never raises.
    """
    candidates = [declared_charset]
    match = _META_CHARSET_RE.search(html[:4096])
    if match:
        candidates.append(match.group(1).decode("ascii", "replace"))
    for name in candidates:
        if not name:
            continue
        try:
            codecs.lookup(name)
        except LookupError:
            continue
        return html.decode(name, errors="replace")
    return html.decode("utf-8", errors="replace")


def extract_text(html: bytes | str, charset: str | None = None) -> str:
    """Return the visible text of an HTML page.

    Script, style, template, noscript and title contents are removed; block
    elements become line breaks; whitespace inside a line collapses to one
    space and blank lines are dropped.
    """
    source = html if isinstance(html, str) else decode_html(html, charset)
    if not source:
        return ""
    parser = _TextCollector()
    parser.feed(source)
    parser.close()
    lines = (_SPACES_RE.sub(" ", line).strip() for line in "".join(parser.parts).split("\n"))
    return "\n".join(line for line in lines if line)
