"""Political entities, their alias vocabularies, and mention counting.

Aliases are matched as whole-token sequences on normalized text. At each
token position the longest alias wins and consumes its tokens, so nested
aliases ("Pablo Iglesias" / "Iglesias") are never double counted.
"""

from __future__ import annotations

import enum
import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import yaml

__all__ = [
    "Alias",
    "AmbiguousAliasError",
    "CompiledMatcher",
    "Entity",
    "EntityKind",
    "Lexicon",
    "LexiconError",
    "LexiconParseError",
    "LexiconValidationError",
    "NormalizationPolicy",
    "compile_matcher",
    "count_mentions",
    "load_lexicon",
    "load_lexicon_file",
    "normalize_text",
    "tokenize",
]

_TOKEN_RE = re.compile(r"\w+")


class LexiconError(ValueError):
    """Base class for lexicon loading and compilation failures."""


class LexiconParseError(LexiconError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class LexiconValidationError(LexiconError):
    pass


class AmbiguousAliasError(LexiconError):
    def __init__(self, alias: str, first: str, second: str):
        self.alias = alias
        self.entities = (first, second)
        super().__init__(f"alias {alias!r} is assigned to both {first!r} and {second!r}")


class EntityKind(str, enum.Enum):
    PARTY = "party"
    LEADER = "leader"

    @property
    def opposite(self) -> EntityKind:
        return EntityKind.LEADER if self is EntityKind.PARTY else EntityKind.PARTY


@dataclass(frozen=True)
class NormalizationPolicy:
    case_fold: bool = True
    strip_diacritics: bool = True
    collapse_whitespace: bool = True

    def as_dict(self) -> dict[str, bool]:
        return {
            "case_fold": self.case_fold,
            "strip_diacritics": self.strip_diacritics,
            "collapse_whitespace": self.collapse_whitespace,
        }


DEFAULT_POLICY = NormalizationPolicy()


@dataclass(frozen=True)
class Entity:
    id: str
    kind: EntityKind
    display_name: str
    counterpart_id: str | None = None


@dataclass(frozen=True)
class Alias:
    surface: str
    match_mode: str = "token_sequence"
    notes: str | None = None


@dataclass(frozen=True)
class Lexicon:
    """Entities in declaration order plus their aliases."""

    entities: tuple[Entity, ...]
    alias_map: Mapping[str, tuple[Alias, ...]]
    label: str | None = None

    def __len__(self) -> int:
        return len(self.entities)

    def __getitem__(self, entity_id: str) -> Entity:
        for entity in self.entities:
            if entity.id == entity_id:
                return entity
        raise KeyError(entity_id)

    def ids(self, kind: EntityKind | str | None = None) -> list[str]:
        if kind is None:
            return [e.id for e in self.entities]
        kind = EntityKind(kind)
        return [e.id for e in self.entities if e.kind is kind]

    def by_kind(self, kind: EntityKind | str) -> list[Entity]:
        kind = EntityKind(kind)
        return [e for e in self.entities if e.kind is kind]


def normalize_text(raw: str, policy: NormalizationPolicy = DEFAULT_POLICY) -> str:
    """Apply case folding, diacritic stripping and whitespace collapsing.

    Diacritics are removed by canonical decomposition (NFD) and dropping
    combining marks, so compatibility characters such as "…" survive.
    """
    text = raw
    if policy.case_fold:
        text = text.casefold()
    if policy.strip_diacritics:
        decomposed = unicodedata.normalize("NFD", text)
        text = unicodedata.normalize(
            "NFC", "".join(ch for ch in decomposed if not unicodedata.combining(ch))
        )
    if policy.collapse_whitespace:
        text = " ".join(text.split())
    return text


def tokenize(normalized: str) -> list[str]:
    return _TOKEN_RE.findall(normalized)


# -- loading -----------------------------------------------------------------


def _parse_alias(raw: object, entity_id: str) -> Alias:
    if isinstance(raw, str):
        return Alias(surface=raw)
    if isinstance(raw, Mapping):
        surface = raw.get("surface")
        notes = raw.get("notes")
        if not isinstance(surface, str):
            raise LexiconValidationError(f"entity {entity_id!r}: alias mapping needs a string 'surface'")
        if notes is not None and not isinstance(notes, str):
            raise LexiconValidationError(f"entity {entity_id!r}: alias notes must be text")
        return Alias(surface=surface, notes=notes)
    # YAML turns bare `No`, `1`, dates, ... into non-strings; make the author quote them
    raise LexiconValidationError(f"entity {entity_id!r}: alias {raw!r} is not a string (quote it)")


def load_lexicon(config_text: str) -> Lexicon:
    """Parse a YAML lexicon document and validate it.

    Layout::

        label: es-2019
        entities:
          - id: vox
            kind: party
            display_name: Vox
            counterpart: abascal
            aliases: [Vox]

    Raises LexiconParseError for malformed YAML, AmbiguousAliasError when
    one normalized alias belongs to two entities, and LexiconValidationError
    for every other structural problem.
    """
    try:
        doc = yaml.safe_load(config_text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = mark.line + 1 if mark is not None else None
        column = mark.column + 1 if mark is not None else None
        raise LexiconParseError(f"malformed lexicon document: {exc.problem}", line, column) from exc
    except yaml.YAMLError as exc:
        raise LexiconParseError(f"malformed lexicon document: {exc}") from exc

    if not isinstance(doc, Mapping) or not isinstance(doc.get("entities"), list):
        raise LexiconValidationError("lexicon document must be a mapping with an 'entities' list")
    label = doc.get("label")
    if label is not None:
        label = str(label)

    entities: list[Entity] = []
    alias_map: dict[str, tuple[Alias, ...]] = {}
    declared_counterparts: dict[str, str | None] = {}
    for block in doc["entities"]:
        if not isinstance(block, Mapping):
            raise LexiconValidationError(f"entity block must be a mapping, got {block!r}")
        entity_id = block.get("id")
        if not isinstance(entity_id, str) or not entity_id.strip():
            raise LexiconValidationError(f"entity id must be a non-empty string, got {entity_id!r}")
        if entity_id in alias_map:
            raise LexiconValidationError(f"duplicate entity id {entity_id!r}")
        try:
            kind = EntityKind(block.get("kind"))
        except ValueError:
            raise LexiconValidationError(
                f"entity {entity_id!r}: kind must be 'party' or 'leader', got {block.get('kind')!r}"
            ) from None
        display_name = block.get("display_name", entity_id)
        counterpart = block.get("counterpart")
        if counterpart is not None and not isinstance(counterpart, str):
            raise LexiconValidationError(f"entity {entity_id!r}: counterpart must be an entity id")
        raw_aliases = block.get("aliases") or []
        if not isinstance(raw_aliases, list):
            raise LexiconValidationError(f"entity {entity_id!r}: aliases must be a list")
        aliases = tuple(_parse_alias(a, entity_id) for a in raw_aliases)
        if not aliases:
            raise LexiconValidationError(f"entity {entity_id!r} has no aliases")
        for alias in aliases:
            if not tokenize(normalize_text(alias.surface)):
                raise LexiconValidationError(
                    f"entity {entity_id!r}: alias {alias.surface!r} normalizes to nothing"
                )
        declared_counterparts[entity_id] = counterpart
        alias_map[entity_id] = aliases
        entities.append(Entity(entity_id, kind, str(display_name)))

    kinds = {e.id: e.kind for e in entities}
    links: dict[str, str] = {}
    for entity_id, other in declared_counterparts.items():
        if other is None:
            continue
        if other not in kinds:
            raise LexiconValidationError(f"entity {entity_id!r}: unknown counterpart {other!r}")
        if kinds[other] is not kinds[entity_id].opposite:
            raise LexiconValidationError(
                f"entity {entity_id!r}: counterpart {other!r} must be a {kinds[entity_id].opposite.value}"
            )
        for a, b in ((entity_id, other), (other, entity_id)):
            if links.get(a, b) != b:
                raise LexiconValidationError(f"conflicting counterparts for {a!r}: {links[a]!r} and {b!r}")
            links[a] = b

    lexicon = Lexicon(
        entities=tuple(
            Entity(e.id, e.kind, e.display_name, links.get(e.id)) for e in entities
        ),
        alias_map=alias_map,
        label=label,
    )
    # surfaces the ambiguity at load time rather than at first scan
    compile_matcher(lexicon, DEFAULT_POLICY)
    return lexicon


def load_lexicon_file(path: str | Path) -> Lexicon:
    return load_lexicon(Path(path).read_text(encoding="utf-8"))


# -- matching ----------------------------------------------------------------

_END = ""  # trie terminal key; tokens are never empty


@dataclass(frozen=True)
class CompiledMatcher:
    """Token trie over the normalized aliases of a lexicon.

    Immutable once built; share it freely between threads.
    """

    policy: NormalizationPolicy
    entity_ids: tuple[str, ...]
    kinds: Mapping[str, EntityKind]
    patterns: Mapping[tuple[str, ...], str]
    _trie: dict = field(repr=False, compare=False)

    @property
    def pattern_count(self) -> int:
        return len(self.patterns)

    @property
    def version(self) -> str:
        """Digest of everything that influences counts; stored with mentions."""
        payload = {
            "policy": self.policy.as_dict(),
            "entities": [[eid, self.kinds[eid].value] for eid in self.entity_ids],
            "patterns": sorted([" ".join(p), eid] for p, eid in self.patterns.items()),
        }
        blob = json.dumps(payload, sort_keys=True, ensure_ascii=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def compile_matcher(lexicon: Lexicon, policy: NormalizationPolicy = DEFAULT_POLICY) -> CompiledMatcher:
    patterns: dict[tuple[str, ...], str] = {}
    for entity in lexicon.entities:
        for alias in lexicon.alias_map[entity.id]:
            key = tuple(tokenize(normalize_text(alias.surface, policy)))
            if not key:
                raise LexiconValidationError(
                    f"entity {entity.id!r}: alias {alias.surface!r} normalizes to nothing"
                )
            owner = patterns.get(key)
            if owner is not None and owner != entity.id:
                raise AmbiguousAliasError(alias.surface, owner, entity.id)
            patterns[key] = entity.id

    trie: dict = {}
    for key, entity_id in patterns.items():
        node = trie
        for token in key:
            node = node.setdefault(token, {})
        node[_END] = entity_id

    return CompiledMatcher(
        policy=policy,
        entity_ids=tuple(e.id for e in lexicon.entities),
        kinds={e.id: e.kind for e in lexicon.entities},
        patterns=patterns,
        _trie=trie,
    )


def iter_matches(text: str, matcher: CompiledMatcher) -> Iterable[tuple[int, int, str]]:
    """Yield ``(token_start, token_end, entity_id)`` for each leftmost-longest match."""
    tokens = tokenize(normalize_text(text, matcher.policy))
    root = matcher._trie
    i, n = 0, len(tokens)
    while i < n:
        node = root.get(tokens[i])
        best_end, best_entity = -1, None
        j = i
        while node is not None:
            j += 1
            if _END in node:
                best_end, best_entity = j, node[_END]
            if j >= n:
                break
            node = node.get(tokens[j])
        if best_entity is not None:
            yield i, best_end, best_entity
            i = best_end
        else:
            i += 1


def count_mentions(text: str, matcher: CompiledMatcher) -> dict[str, int]:
    """Count alias occurrences per entity in raw text.

    The text is normalized here under the matcher's policy. Every entity of
    the lexicon is present in the result, zero included.
    """
    counts = dict.fromkeys(matcher.entity_ids, 0)
    for _, _, entity_id in iter_matches(text, matcher):
        counts[entity_id] += 1
    return counts
