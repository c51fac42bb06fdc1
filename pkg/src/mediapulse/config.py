"""Run configuration: YAML file, then environment, then command-line flags."""

from __future__ import annotations

import os
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Any, Mapping

import yaml

from . import DEFAULT_ELECTION, DEFAULT_LEXICON, DEFAULT_ROSTER, data_path
from .ingest.fetch import FetchPolicy
from .lexicon import NormalizationPolicy
from .report import FORMATS
from .store import BucketPolicy

STORE_ENV = "MEDIAPULSE_STORE"
DEFAULT_STORE = "mediapulse-store"
DEFAULT_WINDOW = (date(2019, 11, 1), date(2019, 11, 10))
GROUP_CHOICES = {"parties": ("parties",), "leaders": ("leaders",), "both": ("parties", "leaders")}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    roster_path: Path
    lexicon_path: Path
    store_path: Path
    election_path: Path | None
    window: tuple[date, date]
    normalization: NormalizationPolicy
    fetch: FetchPolicy
    bucket: BucketPolicy | None
    offline_fixture_dir: Path | None = None
    output_format: str = "markdown"
    decimal: str = "dot"
    groups: tuple[str, ...] = ("parties", "leaders")
    summaries_only: bool = False
    count_reappearances: bool = False
    jobs: int = 1
    save_fixtures: Path | None = None
    from_shares: Path | None = None
    output: Path | None = None

    @property
    def live(self) -> bool:
        return self.offline_fixture_dir is None


def parse_window(text: str) -> tuple[date, date]:
    first, sep, last = text.partition(":")
    if not sep:
        raise ConfigError(f"window {text!r} must look like FIRST:LAST (ISO dates)")
    try:
        window = (date.fromisoformat(first.strip()), date.fromisoformat(last.strip()))
    except ValueError as exc:
        raise ConfigError(f"window {text!r}: {exc}") from None
    if window[0] > window[1]:
        raise ConfigError(f"window {text!r} ends before it starts")
    return window


def _section(doc: Mapping, key: str) -> dict:
    value = doc.get(key) or {}
    if not isinstance(value, Mapping):
        raise ConfigError(f"config section {key!r} must be a mapping")
    return dict(value)


def _build(factory, section: str, values: dict):
    try:
        return factory(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config section {section!r}: {exc}") from None


def load_config_file(path: str | Path) -> dict:
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: malformed config: {exc}") from None
    if doc is None:
        return {}
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{path}: config must be a mapping")
    return dict(doc)


def build_config(
    overrides: Mapping[str, Any],
    config_path: str | Path | None = None,
    environ: Mapping[str, str] = os.environ,
) -> RunConfig:
    """Merge config file, environment and flag overrides (``None`` = unset)."""
    doc = load_config_file(config_path) if config_path else {}

    def pick(key: str, default=None):
        value = overrides.get(key)
        if value is not None:
            return value
        return doc.get(key, default)

    store = overrides.get("store") or environ.get(STORE_ENV) or doc.get("store") or DEFAULT_STORE

    window_value = pick("window")
    if window_value is None:
        window = DEFAULT_WINDOW
    elif isinstance(window_value, str):
        window = parse_window(window_value)
    elif isinstance(window_value, Mapping) and {"first", "last"} <= set(window_value):
        window = parse_window(f"{window_value['first']}:{window_value['last']}")
    else:
        raise ConfigError(f"window {window_value!r} must be 'FIRST:LAST' or {{first, last}}")

    fetch_values = _section(doc, "fetch")
    if "retry_backoff" in fetch_values:
        fetch_values["retry_backoff"] = tuple(fetch_values["retry_backoff"])
    if overrides.get("user_agent"):
        fetch_values["user_agent"] = overrides["user_agent"]
    if overrides.get("per_host_delay") is not None:
        fetch_values["per_host_delay"] = overrides["per_host_delay"]
    fetch = _build(FetchPolicy, "fetch", fetch_values)
    normalization = _build(NormalizationPolicy, "normalization", _section(doc, "normalization"))
    bucket_values = _section(doc, "bucket")
    bucket = _build(BucketPolicy, "bucket", bucket_values) if bucket_values else None

    fmt = pick("format", "markdown")
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}, got {fmt!r}")
    decimal = pick("decimal", "dot")
    if decimal not in ("dot", "comma"):
        raise ConfigError(f"decimal must be 'dot' or 'comma', got {decimal!r}")
    group = pick("group", "both")
    if group not in GROUP_CHOICES:
        raise ConfigError(f"group must be one of {sorted(GROUP_CHOICES)}, got {group!r}")
    jobs = int(pick("jobs", 1))
    if jobs < 1:
        raise ConfigError("jobs must be at least 1")

    def path_or_none(key: str) -> Path | None:
        value = pick(key)
        return Path(value) if value else None

    election = pick("election", str(data_path(DEFAULT_ELECTION)))
    return RunConfig(
        roster_path=Path(pick("roster", str(data_path(DEFAULT_ROSTER)))),
        lexicon_path=Path(pick("lexicon", str(data_path(DEFAULT_LEXICON)))),
        store_path=Path(store),
        election_path=Path(election) if election and election != "none" else None,
        window=window,
        normalization=normalization,
        fetch=fetch,
        bucket=bucket,
        offline_fixture_dir=path_or_none("offline"),
        output_format=fmt,
        decimal=decimal,
        groups=GROUP_CHOICES[group],
        summaries_only=bool(pick("summaries_only", False)),
        count_reappearances=bool(pick("count_reappearances", False)),
        jobs=jobs,
        save_fixtures=path_or_none("save_fixtures"),
        from_shares=path_or_none("from_shares"),
        output=path_or_none("output"),
    )
