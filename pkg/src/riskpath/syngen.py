"""Deterministic synthetic corpus generator with planted rare chains.

Produces per-document triple sets plus entity metadata in exactly the ingest
formats, and a ground-truth manifest used as a test oracle. The corpus has
three strata mirroring a real literature corpus:

* common chains: a handful of cross-layer two-hop pathways placed at the head
  of the popularity distribution, so they are co-attested by many documents
  (these anchor the frequency normalizer; being heavily documented, they are
  by construction not novel);
* background noise: a pool of edges with same-layer bias (cross-layer links
  are genuinely rarer), sampled into documents with a popularity skew;
* planted chains: rare cross-layer chains whose full edge sequence is
  co-attested by exactly the configured number of documents and appears in no
  other document. Their entities are preferentially shared with the common
  chains - the individual components are well studied, their connection is
  not - and carry a high severity.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .errors import GenerationError
from .graph import Layer
from .ingest import relation_id

PREDICATES = ("increases", "disrupts", "reduces", "strains",
              "triggers", "amplifies", "depletes", "elevates")

# planted chains must fit the traversal depth cap (5 edges -> 6 entities)
MAX_CHAIN_ENTITIES = 6

_LAYER_PREFIX = {Layer.PHYSICAL: "phy", Layer.SOCIAL: "soc", Layer.ECONOMIC: "eco"}


@dataclass(frozen=True)
class PlantedChain:
    """Layer sequence of a chain to plant, and how many docs co-attest it."""

    layers: tuple[Layer, ...]
    attestations: int = 1

    def __post_init__(self):
        if not isinstance(self.layers, tuple):
            object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.layers) < 2:
            raise GenerationError("planted chain needs at least 2 entities")
        if len(self.layers) > MAX_CHAIN_ENTITIES:
            raise GenerationError(
                f"planted chain has {len(self.layers)} entities; "
                f"maximum is {MAX_CHAIN_ENTITIES}")
        if self.attestations < 1:
            raise GenerationError("attestation count must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "PlantedChain":
        """Parse e.g. ``"P,S,E,S,E:1"`` (layer initials, attestation count)."""
        spec, _, count = text.partition(":")
        initials = {"p": Layer.PHYSICAL, "s": Layer.SOCIAL, "e": Layer.ECONOMIC}
        try:
            layers = tuple(initials[part.strip().lower()[0]]
                           for part in spec.split(",") if part.strip())
        except (KeyError, IndexError):
            raise GenerationError(f"cannot parse chain layers from {text!r}") from None
        return cls(layers=layers, attestations=int(count) if count else 1)


@dataclass(frozen=True)
class GenSpec:
    """Corpus shape: document count, entity pool, noise structure, chains."""

    n_docs: int
    seed: int = 0
    entities_per_layer: int = 150
    relations_per_doc: tuple[int, int] = (8, 15)
    planted_chains: tuple[PlantedChain, ...] = ()
    background_noise: float = 2.0      # unique noise edges per entity
    same_layer_bias: float = 0.9       # chance a noise edge stays in-layer
    popularity_skew: float = 1.3       # Zipf exponent for per-doc edge sampling
    common_chains: int = 12            # heavily-documented cross-layer 2-hop chains
    planted_severity: float = 0.9
    malformed_rate: float = 0.0        # garbage lines injected into triples file

    def __post_init__(self):
        if not isinstance(self.relations_per_doc, tuple):
            object.__setattr__(self, "relations_per_doc",
                               tuple(self.relations_per_doc))
        if not isinstance(self.planted_chains, tuple):
            object.__setattr__(self, "planted_chains",
                               tuple(self.planted_chains))
        lo, hi = self.relations_per_doc
        if not (1 <= lo <= hi <= 100):
            raise GenerationError(
                f"relations_per_doc {self.relations_per_doc} must lie in [1, 100]")
        if self.n_docs < 0:
            raise GenerationError("n_docs must be non-negative")
        if self.entities_per_layer < 1:
            raise GenerationError("entities_per_layer must be >= 1")
        if not 0.0 <= self.same_layer_bias <= 1.0:
            raise GenerationError("same_layer_bias must be in [0, 1]")
        if not 0.0 <= self.malformed_rate < 1.0:
            raise GenerationError("malformed_rate must be in [0, 1)")
        if self.common_chains < 0:
            raise GenerationError("common_chains must be non-negative")
        for chain in self.planted_chains:
            if len(chain.layers) - 1 > hi:
                raise GenerationError(
                    f"chain with {len(chain.layers) - 1} edges cannot fit in a "
                    f"document of at most {hi} relations")
        total_attestations = sum(c.attestations for c in self.planted_chains)
        if self.n_docs and total_attestations > self.n_docs:
            raise GenerationError(
                f"{total_attestations} attestation docs requested but only "
                f"{self.n_docs} docs in corpus")


@dataclass
class GenResult:
    triples: list[dict]
    entities: list[dict]
    manifest: dict
    malformed_lines: list[tuple[int, str]] = field(default_factory=list)


def _spec_echo(spec: GenSpec) -> dict:
    echo = asdict(spec)
    echo["relations_per_doc"] = list(spec.relations_per_doc)
    echo["planted_chains"] = [
        {"layers": [layer.value for layer in chain.layers],
         "attestations": chain.attestations}
        for chain in spec.planted_chains
    ]
    return echo


def generate(spec: GenSpec) -> GenResult:
    """Produce the corpus; deterministic for a fixed spec (seed included)."""
    rng = random.Random(spec.seed)
    names = {
        layer: [f"{_LAYER_PREFIX[layer]}-{i:04d}"
                for i in range(spec.entities_per_layer)]
        for layer in Layer
    }
    all_names = [name for layer in Layer for name in names[layer]]
    severity = {name: round(rng.random(), 6) for name in all_names}
    layer_of = {name: layer for layer in Layer for name in names[layer]}

    # planted chains: entities drawn from the shared pool, edges reserved
    planted_edges: set[tuple[str, str, str]] = set()
    chains = []
    for chain in spec.planted_chains:
        if len(chain.layers) > len(all_names):
            raise GenerationError("entity pool too small for planted chain")
        entities: list[str] = []
        for layer in chain.layers:
            candidates = [n for n in names[layer] if n not in entities]
            if not candidates:
                raise GenerationError(
                    f"layer {layer.value} pool exhausted while planting chain")
            entities.append(rng.choice(candidates))
        predicates = [rng.choice(PREDICATES) for _ in range(len(entities) - 1)]
        edges = list(zip(entities, predicates, entities[1:]))
        for edge in edges:
            if edge in planted_edges:
                raise GenerationError(
                    f"planted chains collide on edge {edge}")
            planted_edges.add(edge)
        for name in entities:
            severity[name] = spec.planted_severity
        chains.append({"entities": entities, "predicates": predicates,
                       "edges": edges, "attestations": chain.attestations})

    # common chains: popular cross-layer 2-hop pathways at the Zipf head.
    # Each routes through exactly one planted entity (round-robin, placed at
    # a target position so it accrues centrality): the planted chains'
    # components become well documented without adding edges among them.
    rotation: list[str] = []
    for chain in chains:
        for name in chain["entities"]:
            if name not in rotation:
                rotation.append(name)
    placements = {
        Layer.PHYSICAL: (((Layer.PHYSICAL, Layer.SOCIAL, Layer.PHYSICAL), 2),
                         ((Layer.PHYSICAL, Layer.ECONOMIC, Layer.PHYSICAL), 2)),
        Layer.SOCIAL: (((Layer.PHYSICAL, Layer.SOCIAL, Layer.ECONOMIC), 1),
                       ((Layer.PHYSICAL, Layer.ECONOMIC, Layer.SOCIAL), 2),
                       ((Layer.PHYSICAL, Layer.SOCIAL, Layer.PHYSICAL), 1)),
        Layer.ECONOMIC: (((Layer.PHYSICAL, Layer.SOCIAL, Layer.ECONOMIC), 2),
                         ((Layer.PHYSICAL, Layer.ECONOMIC, Layer.SOCIAL), 1),
                         ((Layer.PHYSICAL, Layer.ECONOMIC, Layer.PHYSICAL), 1)),
    }
    default_patterns = (
        (Layer.PHYSICAL, Layer.SOCIAL, Layer.ECONOMIC),
        (Layer.PHYSICAL, Layer.ECONOMIC, Layer.SOCIAL),
        (Layer.PHYSICAL, Layer.SOCIAL, Layer.PHYSICAL),
        (Layer.PHYSICAL, Layer.ECONOMIC, Layer.PHYSICAL),
    )
    pool: list[tuple[str, str, str]] = []
    pool_set: set[tuple[str, str, str]] = set()
    all_planted = set(rotation)
    for i in range(spec.common_chains):
        shared = rotation[i % len(rotation)] if rotation else None
        if shared is not None:
            pattern, share_at = rng.choice(placements[layer_of[shared]])
        else:
            pattern, share_at = default_patterns[i % len(default_patterns)], -1
        placed = False
        for _ in range(60):
            entities: list[str] = []
            for j, layer in enumerate(pattern):
                if j == share_at:
                    entities.append(shared)
                    continue
                candidates = [n for n in names[layer]
                              if n not in entities and n not in all_planted]
                if not candidates:
                    break
                entities.append(rng.choice(candidates))
            if len(entities) != len(pattern):
                continue
            edges = [(a, rng.choice(PREDICATES), b)
                     for a, b in zip(entities, entities[1:])]
            if any(e in planted_edges or e in pool_set for e in edges):
                continue
            pool.extend(edges)
            pool_set.update(edges)
            placed = True
            break
        if not placed:
            raise GenerationError(
                "could not place common chains; entity pool too small")

    # background noise with same-layer bias
    noise_target = round(spec.background_noise * len(all_names))
    lo, hi = spec.relations_per_doc
    if spec.n_docs and len(pool) + noise_target < hi:
        raise GenerationError(
            f"background pool of {len(pool) + noise_target} edges cannot fill "
            f"documents of up to {hi} relations; raise background_noise")
    attempts = 0
    max_attempts = 80 * max(noise_target, 1)
    other_layers = {layer: [l for l in Layer if l is not layer] for layer in Layer}
    noise_count = 0
    while noise_count < noise_target:
        attempts += 1
        if attempts > max_attempts:
            raise GenerationError(
                "could not assemble background pool; entity pool too small "
                "for requested noise density")
        source = rng.choice(all_names)
        src_layer = layer_of[source]
        if rng.random() < spec.same_layer_bias:
            target_layer = src_layer
        else:
            target_layer = rng.choice(other_layers[src_layer])
        target = rng.choice(names[target_layer])
        if target == source:
            continue
        edge = (source, rng.choice(PREDICATES), target)
        if edge in pool_set or edge in planted_edges:
            continue
        pool.append(edge)
        pool_set.add(edge)
        noise_count += 1

    # assign attestation documents (each doc attests at most one chain)
    doc_ids = [f"doc-{i + 1:05d}" for i in range(spec.n_docs)]
    total_attestations = sum(c["attestations"] for c in chains)
    attest_doc_indices = (rng.sample(range(spec.n_docs), total_attestations)
                          if total_attestations else [])
    chain_of_doc: dict[int, dict] = {}
    cursor = 0
    for chain in chains:
        allocated = attest_doc_indices[cursor:cursor + chain["attestations"]]
        cursor += chain["attestations"]
        chain["doc_ids"] = sorted(doc_ids[i] for i in allocated)
        for i in allocated:
            chain_of_doc[i] = chain

    # per-document fill: popularity-skewed sampling over the pool
    weights = [1.0 / (i + 1) ** spec.popularity_skew for i in range(len(pool))]
    cum_weights = []
    running = 0.0
    for w in weights:
        running += w
        cum_weights.append(running)

    triples: list[dict] = []
    emitted: set[tuple[str, str, str]] = set()
    referenced: set[str] = set()
    doc_sizes = []
    for doc_index in range(spec.n_docs):
        doc = doc_ids[doc_index]
        chain = chain_of_doc.get(doc_index)
        chain_edges = chain["edges"] if chain else []
        n_rel = rng.randint(max(lo, len(chain_edges)), hi)
        doc_edges = list(chain_edges)
        in_doc = set(doc_edges)
        guard = 0
        while len(doc_edges) < n_rel:
            guard += 1
            if guard > 200 * n_rel:
                raise GenerationError("document fill stalled; pool too small")
            edge = rng.choices(pool, cum_weights=cum_weights, k=1)[0]
            if edge in in_doc:
                continue
            doc_edges.append(edge)
            in_doc.add(edge)
        doc_sizes.append(len(doc_edges))
        for s, p, o in doc_edges:
            triples.append({"s": s, "p": p, "o": o, "doc": doc})
            emitted.add((s, p, o))
            referenced.add(s)
            referenced.add(o)

    entities_rows = [
        {"name": name, "layer": layer_of[name].value,
         "severity": severity[name], "aliases": []}
        for name in all_names
    ]

    manifest = {
        "seed": spec.seed,
        "spec_echo": _spec_echo(spec),
        "counts": {
            "docs": spec.n_docs,
            "triples": len(triples),
            "relations": len(emitted),
            "entities": len(referenced),
            "entities_by_layer": {
                layer.value: sum(1 for n in referenced if layer_of[n] is layer)
                for layer in Layer
            },
            "entities_generated": len(all_names),
        },
        "chains": [
            {
                "entities": chain["entities"],
                "predicates": chain["predicates"],
                "layers": [layer_of[n].value for n in chain["entities"]],
                "relation_ids": [relation_id(*edge) for edge in chain["edges"]],
                "doc_ids": chain["doc_ids"],
                "attestations": chain["attestations"],
            }
            for chain in chains
        ],
    }

    malformed: list[tuple[int, str]] = []
    if spec.malformed_rate > 0.0 and triples:
        n_bad = int(round(spec.malformed_rate * len(triples)))
        positions = sorted(rng.sample(range(len(triples) + 1), min(n_bad, len(triples))))
        for j, pos in enumerate(positions):
            malformed.append((pos, f'{{"s": "broken-{j}", "p": "missing fields"'))

    return GenResult(triples=triples, entities=entities_rows,
                     manifest=manifest, malformed_lines=malformed)


def write_corpus(result: GenResult, out_dir) -> dict[str, Path]:
    """Write triples.jsonl, entities.jsonl, manifest.json into a directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "triples": out / "triples.jsonl",
        "entities": out / "entities.jsonl",
        "manifest": out / "manifest.json",
    }
    inject = dict(result.malformed_lines)
    with open(paths["triples"], "w", encoding="utf-8") as fh:
        for i, row in enumerate(result.triples):
            if i in inject:
                fh.write(inject[i] + "\n")
            fh.write(json.dumps(row, sort_keys=True) + "\n")
        if len(result.triples) in inject:
            fh.write(inject[len(result.triples)] + "\n")
    with open(paths["entities"], "w", encoding="utf-8") as fh:
        for row in result.entities:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    with open(paths["manifest"], "w", encoding="utf-8") as fh:
        json.dump(result.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
