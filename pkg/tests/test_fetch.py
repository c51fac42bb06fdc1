from __future__ import annotations

import threading
import time
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from mediapulse.ingest import FeedItem, FeedSource
from mediapulse.ingest.fetch import (
    BodyTooLarge,
    ContentTypeError,
    FetchPolicy,
    FetchTimeout,
    HostThrottle,
    HttpFetcher,
    HTTPStatusError,
    charset_of,
    content_hash,
    fetch_article,
    fetch_feed,
)

FIXED_NOW = datetime(2019, 11, 5, 12, 0, tzinfo=timezone.utc)
PAGE = "<html><body><p>Vox y <b>PSOE</b></p></body></html>".encode()
FEED = b"<rss><channel><item><title>t</title><link>/ok</link></item></channel></rss>"


class StubHandler(BaseHTTPRequestHandler):
    log: list[tuple[float, str]]

    def log_message(self, *args):  # keep pytest output clean
        pass

    def _send(self, status, body=b"", ctype="text/html; charset=utf-8", headers=None):
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        for k, v in (headers or {}).items():
            self.send_header(k, v)
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        self.server.log.append((time.monotonic(), self.path, self.headers.get("User-Agent")))
        path = self.path
        if path.startswith("/ok"):
            self._send(200, PAGE)
        elif path == "/twice":
            self._send(200, "<p>Vox sube.</p><p>Vox baja.</p>".encode())
        elif path == "/feed":
            self._send(200, FEED, "application/rss+xml")
        elif path == "/missing":
            self._send(404, b"nope")
        elif path == "/flaky":
            hits = sum(1 for _, p, _ in self.server.log if p == "/flaky")
            self._send(200, PAGE) if hits >= 3 else self._send(503, b"busy")
        elif path == "/moved":
            self._send(301, b"", headers={"Location": "/ok/final"})
        elif path == "/loop":
            self._send(302, b"", headers={"Location": "/loop"})
        elif path == "/pdf":
            self._send(200, b"%PDF-1.4", "application/pdf")
        elif path == "/big":
            self._send(200, b"x" * 5000)
        elif path == "/big-chunked":
            self.send_response(200)
            self.send_header("Content-Type", "text/html")
            self.end_headers()
            for _ in range(10):
                self.wfile.write(b"y" * 1000)
        elif path == "/stall":
            time.sleep(1.5)
            self._send(200, PAGE)
        elif path == "/latin1":
            self._send(200, "<p>Génova</p>".encode("latin-1"), "text/html; charset=iso-8859-1")
        else:
            self._send(500, b"?")


@pytest.fixture
def server():
    srv = ThreadingHTTPServer(("127.0.0.1", 0), StubHandler)
    srv.daemon_threads = True
    srv.log = []
    thread = threading.Thread(target=srv.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True)
    thread.start()
    yield srv
    srv.shutdown()
    srv.server_close()


def base(server) -> str:
    return f"http://127.0.0.1:{server.server_address[1]}"


def fetcher(**kw) -> HttpFetcher:
    opts = dict(timeout=5.0, max_retries=2, retry_backoff=(0.0,), per_host_delay=0.0)
    opts.update(kw)
    return HttpFetcher(FetchPolicy(**opts), now=lambda: FIXED_NOW)


def item(server, path: str) -> FeedItem:
    return FeedItem(link=base(server) + path, title="T", source_id="stub")


def test_fetch_article_builds_document(server):
    doc = fetcher().fetch_article(item(server, "/ok"))
    assert doc.url == base(server) + "/ok"
    assert doc.extracted_text == "Vox y PSOE"
    assert doc.content_hash == content_hash("Vox y PSOE")
    assert doc.fetched_at == FIXED_NOW and doc.source_id == "stub" and doc.title == "T"
    assert doc.raw_html == PAGE


def test_user_agent_is_sent(server):
    fetcher(user_agent="probe/1").fetch_article(item(server, "/ok"))
    assert server.log[0][2] == "probe/1"


def test_404_after_all_attempts(server):
    with pytest.raises(HTTPStatusError) as err:
        fetcher(max_retries=2).fetch_article(item(server, "/missing"))
    assert err.value.status == 404
    assert err.value.attempts == 3
    assert [p for _, p, _ in server.log] == ["/missing"] * 3


def test_transient_failure_recovers(server):
    doc = fetcher(max_retries=2).fetch_article(item(server, "/flaky"))
    assert doc.extracted_text == "Vox y PSOE"
    assert len(server.log) == 3


def test_backoff_sleeps_between_attempts(server):
    slept: list[float] = []
    f = HttpFetcher(
        FetchPolicy(max_retries=2, retry_backoff=(1.0, 4.0), per_host_delay=0.0), sleep=slept.append
    )
    with pytest.raises(HTTPStatusError):
        f.fetch_article(item(server, "/missing"))
    assert slept == [1.0, 4.0]


def test_stalled_server_times_out(server):
    start = time.monotonic()
    with pytest.raises(FetchTimeout) as err:
        fetcher(timeout=0.3, max_retries=0).fetch_article(item(server, "/stall"))
    assert err.value.attempts == 1
    assert time.monotonic() - start < 1.4


def test_stall_is_retried_per_schedule(server):
    slept: list[float] = []
    f = HttpFetcher(FetchPolicy(timeout=0.3, max_retries=1, retry_backoff=(0.5,), per_host_delay=0.0),
                    sleep=slept.append)
    with pytest.raises(FetchTimeout) as err:
        f.fetch_article(item(server, "/stall"))
    assert err.value.attempts == 2 and slept == [0.5]
    assert [p for _, p, _ in server.log] == ["/stall", "/stall"]


def test_module_level_helpers(server):
    policy = FetchPolicy(per_host_delay=0.0)
    assert fetch_feed(FeedSource("stub", "Stub", base(server) + "/feed"), policy) == FEED
    doc = fetch_article(item(server, "/twice"), policy)
    assert doc.extracted_text.count("Vox") == 2


def test_redirect_records_final_url(server):
    doc = fetcher().fetch_article(item(server, "/moved"))
    assert doc.url == base(server) + "/ok/final"


def test_redirect_loop_fails(server):
    with pytest.raises(Exception) as err:
        fetcher(max_retries=0).fetch_article(item(server, "/loop"))
    assert "redirect" in str(err.value)


def test_pdf_rejected_without_retry(server):
    with pytest.raises(ContentTypeError) as err:
        fetcher(max_retries=2).fetch_article(item(server, "/pdf"))
    assert err.value.content_type == "application/pdf"
    assert len(server.log) == 1


def test_declared_body_cap(server):
    with pytest.raises(BodyTooLarge):
        fetcher(max_body_bytes=1000).fetch_article(item(server, "/big"))
    assert len(server.log) == 1


def test_streamed_body_cap(server):
    with pytest.raises(BodyTooLarge):
        fetcher(max_body_bytes=2500).fetch_article(item(server, "/big-chunked"))


def test_header_charset_used(server):
    doc = fetcher().fetch_article(item(server, "/latin1"))
    assert doc.extracted_text == "Génova"
    assert charset_of(doc.content_type) == "iso-8859-1"


def test_feed_fetch_records_time(server):
    f = fetcher()
    source = FeedSource("stub", "Stub", base(server) + "/feed")
    assert f.fetch_feed(source) == FEED
    assert f.feed_fetched_at(source) == FIXED_NOW


def test_politeness_gap_on_one_host(server):
    delay = 0.25
    f = fetcher(per_host_delay=delay)
    for i in range(4):
        f.fetch_article(item(server, f"/ok/{i}"))
    arrivals = [t for t, _, _ in server.log]
    gaps = [b - a for a, b in zip(arrivals, arrivals[1:])]
    assert len(gaps) == 3
    assert min(gaps) >= delay


def test_politeness_holds_under_threads(server):
    delay = 0.2
    f = fetcher(per_host_delay=delay)
    threads = [threading.Thread(target=f.fetch_article, args=(item(server, f"/ok/{i}"),)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    arrivals = sorted(t for t, _, _ in server.log)
    assert min(b - a for a, b in zip(arrivals, arrivals[1:])) >= delay


def test_throttle_with_fake_clock():
    now = [0.0]
    slept: list[float] = []

    def sleep(s):
        slept.append(s)
        now[0] += s

    throttle = HostThrottle(2.0, clock=lambda: now[0], sleep=sleep)
    with throttle.slot("a"):
        now[0] += 0.5
    with throttle.slot("b"):
        pass
    with throttle.slot("a"):
        pass
    assert slept == [2.0]  # "b" never waits; "a" waits out the rest of its gap
    assert now[0] == 2.5


def test_policy_validation():
    with pytest.raises(ValueError):
        FetchPolicy(timeout=0)
    with pytest.raises(ValueError):
        FetchPolicy(max_retries=-1)
    assert FetchPolicy(retry_backoff=(1.0, 4.0)).backoff(5) == 4.0
