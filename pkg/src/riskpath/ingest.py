"""Triple/metadata parsing, deterministic canonicalization, and aggregation.

The canonicalization pipeline is intentionally boring: lowercase, trim,
collapse internal whitespace, then alias-map lookup. The alias map is a user
supplied artifact (entity metadata aliases plus an optional extra alias
file); names it does not know pass through normalized and are reported as
unregistered. Everything here is a pure function of its full inputs, so
results are independent of parse order or parallelism upstream.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .errors import ConfigError, IngestError
from .graph import Entity, KnowledgeGraph, Layer, Phase, Relation

DEFAULT_MALFORMED_TOLERANCE = 0.1
UNREGISTERED_SEVERITY = 0.5

_WHITESPACE = re.compile(r"\s+")


@dataclass(frozen=True)
class RawTriple:
    """One (subject, predicate, object) statement from one document."""

    subject: str
    predicate: str
    object: str
    doc_id: str
    phases: frozenset[Phase] = frozenset()


@dataclass(frozen=True)
class EntityMeta:
    """Canonical entity name with its layer, severity, and known aliases."""

    name: str
    layer: Layer
    severity: float
    aliases: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.severity <= 1.0:
            raise ConfigError(f"entity meta {self.name!r}: severity "
                              f"{self.severity} not in [0, 1]")


@dataclass(frozen=True)
class CorpusStats:
    """Corpus-level provenance: distinct document count and per-edge doc sets."""

    doc_count: int
    edge_doc_index: dict[str, frozenset[str]]

    @classmethod
    def from_graph(cls, graph: KnowledgeGraph) -> "CorpusStats":
        return cls(
            doc_count=graph.doc_count,
            edge_doc_index={rid: rel.doc_ids for rid, rel in graph.relations.items()},
        )

    def to_dict(self) -> dict:
        return {
            "doc_count": self.doc_count,
            "edge_doc_index": {rid: sorted(docs)
                               for rid, docs in sorted(self.edge_doc_index.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusStats":
        return cls(
            doc_count=int(data["doc_count"]),
            edge_doc_index={rid: frozenset(docs)
                            for rid, docs in data["edge_doc_index"].items()},
        )


def normalize_name(text: str) -> str:
    """Lowercase, trim, and collapse internal whitespace."""
    return _WHITESPACE.sub(" ", text.strip().lower())


def _parse_phases(values, line: int) -> frozenset[Phase]:
    try:
        return frozenset(Phase.from_string(v) for v in values)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"bad phases: {exc}") from None


def _triple_from_json(line_no: int, text: str) -> RawTriple:
    record = json.loads(text)
    if not isinstance(record, dict):
        raise ValueError("record is not a JSON object")
    missing = [key for key in ("s", "p", "o", "doc") if key not in record]
    if missing:
        raise ValueError(f"missing field(s) {missing}")
    fields = {}
    for key in ("s", "p", "o", "doc"):
        value = record[key]
        if not isinstance(value, str) or not value.strip():
            raise ValueError(f"field {key!r} must be a non-empty string")
        fields[key] = value.strip()
    phases = frozenset()
    if "phases" in record and record["phases"] is not None:
        if not isinstance(record["phases"], list):
            raise ValueError("field 'phases' must be an array")
        phases = _parse_phases(record["phases"], line_no)
    return RawTriple(fields["s"], fields["p"], fields["o"], fields["doc"], phases)


def _triple_from_tsv(line_no: int, text: str) -> RawTriple:
    cols = text.split("\t")
    if len(cols) not in (4, 5):
        raise ValueError(f"expected 4 or 5 tab-separated columns, got {len(cols)}")
    stripped = [c.strip() for c in cols[:4]]
    for name, value in zip(("s", "p", "o", "doc"), stripped):
        if not value:
            raise ValueError(f"column {name!r} is empty")
    phases = frozenset()
    if len(cols) == 5 and cols[4].strip():
        phases = _parse_phases([p for p in cols[4].split(",") if p.strip()], line_no)
    return RawTriple(*stripped, phases)


def parse_triples(stream: TextIO, format: str = "jsonl",
                  malformed_tolerance: float = DEFAULT_MALFORMED_TOLERANCE,
                  ) -> tuple[list[RawTriple], list[dict]]:
    """Parse a triples stream, collecting malformed records into a report.

    Returns (valid triples in file order, error report rows with ``line`` and
    ``reason``). Blank lines are skipped. If the malformed fraction exceeds
    ``malformed_tolerance``, the whole parse fails with IngestError.
    """
    if format not in ("jsonl", "tsv"):
        raise ConfigError(f"unknown triples format {format!r}")
    parse_one = _triple_from_json if format == "jsonl" else _triple_from_tsv

    triples: list[RawTriple] = []
    errors: list[dict] = []
    total = 0
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        total += 1
        try:
            triples.append(parse_one(line_no, line))
        except (ValueError, json.JSONDecodeError) as exc:
            errors.append({"line": line_no, "reason": str(exc)})

    if total and len(errors) / total > malformed_tolerance:
        raise IngestError(
            f"{len(errors)} of {total} records malformed "
            f"({len(errors) / total:.1%} > {malformed_tolerance:.1%} tolerance); "
            f"first error at line {errors[0]['line']}: {errors[0]['reason']}")
    return triples, errors


def build_alias_map(meta: Iterable[EntityMeta],
                    extra_aliases: dict[str, str] | None = None) -> dict[str, str]:
    """Normalized surface form -> canonical name. Collisions are config errors."""
    alias_map: dict[str, str] = {}

    def put(surface: str, canonical: str, origin: str):
        key = normalize_name(surface)
        if not key:
            raise ConfigError(f"{origin}: empty alias for {canonical!r}")
        existing = alias_map.get(key)
        if existing is not None and existing != canonical:
            raise ConfigError(
                f"alias collision: {key!r} maps to both {existing!r} and "
                f"{canonical!r} ({origin})")
        alias_map[key] = canonical

    seen_names = set()
    for entry in meta:
        if entry.name in seen_names:
            raise ConfigError(f"duplicate entity meta name {entry.name!r}")
        seen_names.add(entry.name)
        put(entry.name, entry.name, "meta name")
        for alias in entry.aliases:
            put(alias, entry.name, f"alias of {entry.name!r}")
    for alias, canonical in (extra_aliases or {}).items():
        put(alias, canonical, "alias file")
    return alias_map


def canonicalize(triples: Iterable[RawTriple], meta: Iterable[EntityMeta],
                 extra_aliases: dict[str, str] | None = None,
                 ) -> tuple[list[RawTriple], list[str]]:
    """Replace subject/object surface forms with canonical names.

    Names with no alias-map entry pass through normalized and are reported
    back as unregistered (sorted, deduplicated). Idempotent by construction:
    canonical names map to themselves.
    """
    alias_map = build_alias_map(meta, extra_aliases)
    unregistered: set[str] = set()

    def resolve(name: str) -> str:
        key = normalize_name(name)
        canonical = alias_map.get(key)
        if canonical is None:
            unregistered.add(key)
            return key
        return canonical

    result = [
        RawTriple(resolve(t.subject), t.predicate.strip(), resolve(t.object),
                  t.doc_id, t.phases)
        for t in triples
    ]
    return result, sorted(unregistered)


def load_layer_lexicon(data: dict[str, str]) -> list[tuple[str, Layer]]:
    """Fallback keyword -> layer rules, kept in file order (first match wins)."""
    return [(normalize_name(keyword), Layer.from_string(layer))
            for keyword, layer in data.items()]


def relation_id(subject: str, predicate: str, object_: str) -> str:
    """Stable opaque id derived from the triple content."""
    digest = hashlib.sha1(
        "\x1f".join((subject, predicate, object_)).encode("utf-8")).hexdigest()
    return "r" + digest[:16]


@dataclass
class AggregateResult:
    entities: list[Entity]
    relations: list[Relation]
    stats: CorpusStats
    rejections: list[dict] = field(default_factory=list)


def aggregate(triples: Iterable[RawTriple], meta: Iterable[EntityMeta],
              lexicon: list[tuple[str, Layer]] | None = None,
              strict: bool = False) -> AggregateResult:
    """Fold canonical triples into build-ready entities/relations plus stats.

    One entity per distinct canonical name appearing in the triples; layer
    and severity come from metadata. Unregistered names fall back to the
    layer lexicon with a neutral severity of 0.5, else they are rejected and
    their triples dropped (a hard failure in strict mode). One relation per
    (s, p, o) with unioned doc ids and phases. The result is invariant under
    permutation of the input triples.
    """
    triples = list(triples)
    meta_by_name = {}
    for entry in meta:
        if entry.name in meta_by_name:
            raise ConfigError(f"duplicate entity meta name {entry.name!r}")
        meta_by_name[entry.name] = entry
    lexicon = lexicon or []

    names = sorted({name for t in triples for name in (t.subject, t.object)})
    entities: dict[str, Entity] = {}
    rejections: list[dict] = []
    for name in names:
        entry = meta_by_name.get(name)
        if entry is not None:
            entities[name] = Entity(
                id=name, canonical_name=name, layer=entry.layer,
                severity=entry.severity, aliases=frozenset(entry.aliases))
            continue
        layer = next((lay for keyword, lay in lexicon if keyword in name), None)
        if layer is None:
            rejections.append({
                "name": name,
                "reason": "unregistered entity with no layer-lexicon match",
            })
        else:
            entities[name] = Entity(
                id=name, canonical_name=name, layer=layer,
                severity=UNREGISTERED_SEVERITY, aliases=frozenset())
    if rejections and strict:
        raise IngestError(
            f"{len(rejections)} unresolvable entities in strict mode; "
            f"first: {rejections[0]['name']!r}")

    doc_ids = {t.doc_id for t in triples}
    grouped: dict[tuple[str, str, str], tuple[set[str], set[Phase]]] = {}
    dropped = 0
    for t in triples:
        if t.subject not in entities or t.object not in entities:
            dropped += 1
            continue
        docs, phases = grouped.setdefault((t.subject, t.predicate, t.object),
                                          (set(), set()))
        docs.add(t.doc_id)
        phases.update(t.phases)
    if dropped:
        rejections.append({
            "name": None,
            "reason": f"{dropped} triples dropped due to rejected endpoints",
        })

    relations = [
        Relation(id=relation_id(s, p, o), source=s, predicate=p, target=o,
                 doc_ids=frozenset(docs), phases=frozenset(phases))
        for (s, p, o), (docs, phases) in sorted(grouped.items())
    ]
    stats = CorpusStats(
        doc_count=len(doc_ids),
        edge_doc_index={rel.id: rel.doc_ids for rel in relations},
    )
    return AggregateResult(
        entities=list(entities.values()),
        relations=relations,
        stats=stats,
        rejections=rejections,
    )


# --- metadata / report file helpers ----------------------------------------

def parse_entity_meta(stream: TextIO) -> list[EntityMeta]:
    """Entity metadata JSONL: name, layer, severity, optional aliases."""
    entries = []
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if not isinstance(record, dict):
                raise ValueError("record is not a JSON object")
            name = record["name"]
            if not isinstance(name, str) or not name.strip():
                raise ValueError("field 'name' must be a non-empty string")
            aliases = record.get("aliases", [])
            if not isinstance(aliases, list):
                raise ValueError("field 'aliases' must be an array")
            entries.append(EntityMeta(
                name=name.strip(),
                layer=Layer.from_string(record["layer"]),
                severity=float(record["severity"]),
                aliases=tuple(aliases),
            ))
        except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
            raise IngestError(f"entity metadata line {line_no}: {exc}") from None
    return entries


def write_jsonl(path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
