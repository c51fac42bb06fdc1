from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest
import yaml

sys.path.insert(0, str(Path(__file__).parent))

from mediapulse import DEFAULT_LEXICON, data_path  # noqa: E402
from mediapulse.lexicon import compile_matcher, load_lexicon_file  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture(scope="session")
def corpus_expected() -> dict:
    return json.loads((FIXTURES / "corpus_expected.json").read_text(encoding="utf-8"))["articles"]


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon_file(data_path(DEFAULT_LEXICON))


@pytest.fixture(scope="session")
def matcher(lexicon):
    return compile_matcher(lexicon)


@pytest.fixture(scope="session")
def reference_aliases() -> dict[str, list[str]]:
    """entity id -> alias surfaces, read straight from the YAML."""
    doc = yaml.safe_load(data_path(DEFAULT_LEXICON).read_text(encoding="utf-8"))
    return {
        block["id"]: [a["surface"] if isinstance(a, dict) else a for a in block["aliases"]]
        for block in doc["entities"]
    }


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
