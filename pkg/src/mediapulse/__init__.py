"""Mention-share monitoring of political entities in online newspapers."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def data_path(name: str) -> Path:
    """Path of a bundled data file (reference lexicon, roster, election fixture)."""
    return Path(str(resources.files(__name__).joinpath("data", name)))


DEFAULT_LEXICON = "lexicon_es2019.yaml"
DEFAULT_ROSTER = "roster_es2019.yaml"
DEFAULT_ELECTION = "election_es2019.yaml"
PUBLISHED_SHARES = "published_shares_es2019.json"
