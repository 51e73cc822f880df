"""Constrained breadth-first discovery of cross-layer risk pathways.

Starting from every physical-layer entity, all simple directed pathways of
edge length 1..d_max are enumerated breadth-first; those crossing layers at
least twice are scored and the ones exceeding the novelty threshold are
ranked deterministically. ``enumerate_oracle`` is a deliberately naive
exhaustive re-implementation (recursive DFS over the public graph API, no
pruning, no parallelism) kept as the correctness reference: on any graph
small enough to enumerate, ``discover`` must produce the identical result.

Parallelism fans out across source nodes only; each worker owns its frontier
and candidate buffer and results are merged in source order, so output is
independent of worker count. Pruning (edge-max mode only) uses an admissible
upper bound on any extension's total and therefore never changes the
returned pathways; it can only reduce ``candidates_enumerated``, which is a
diagnostic counter.
"""

from __future__ import annotations

import heapq
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DiscoveryError
from .graph import KnowledgeGraph, Layer
from .ingest import CorpusStats
from .scoring import (
    FMAX_EDGE,
    FMAX_PATHWAY,
    FREQ_DOCS,
    FREQ_ENTITIES,
    CentralityScores,
    ScoreBreakdown,
    ScoringConfig,
    combine,
    cross_layer_connectivity,
    cross_layer_count,
    entity_doc_index,
    impact_potential,
    literature_frequency,
    novelty_score,
    pathway_frequency,
)


@dataclass(frozen=True)
class Pathway:
    """Alternating entity/relation sequence; relation i connects entity i -> i+1."""

    entity_ids: tuple[str, ...]
    relation_ids: tuple[str, ...]

    def __post_init__(self):
        if not isinstance(self.entity_ids, tuple):
            object.__setattr__(self, "entity_ids", tuple(self.entity_ids))
        if not isinstance(self.relation_ids, tuple):
            object.__setattr__(self, "relation_ids", tuple(self.relation_ids))
        if len(self.entity_ids) != len(self.relation_ids) + 1:
            raise DiscoveryError(
                f"pathway with {len(self.entity_ids)} entities must have "
                f"{len(self.entity_ids) - 1} relations, got {len(self.relation_ids)}")

    @property
    def num_entities(self) -> int:
        return len(self.entity_ids)

    @property
    def edge_length(self) -> int:
        return len(self.relation_ids)

    def validate(self, graph: KnowledgeGraph, d_max: int | None = None,
                 undirected: bool = False) -> None:
        """Check simplicity and alternation structure against the graph."""
        if len(set(self.entity_ids)) != len(self.entity_ids):
            raise DiscoveryError(f"pathway repeats an entity: {self.entity_ids}")
        if d_max is not None and self.edge_length > d_max:
            raise DiscoveryError(
                f"pathway edge length {self.edge_length} exceeds d_max {d_max}")
        for i, rid in enumerate(self.relation_ids):
            rel = graph.relation(rid)
            a, b = self.entity_ids[i], self.entity_ids[i + 1]
            ok = (rel.source == a and rel.target == b)
            if undirected:
                ok = ok or (rel.source == b and rel.target == a)
            if not ok:
                raise DiscoveryError(
                    f"relation {rid!r} does not connect {a!r} -> {b!r}")


@dataclass(frozen=True)
class TraversalState:
    """Partial-pathway summary consulted by the pruning bound."""

    num_entities: int
    transitions: int
    impact_sum: float


@dataclass
class DiscoveryResult:
    pathways: list[tuple[Pathway, ScoreBreakdown]]
    config_echo: ScoringConfig
    f_max_used: int
    candidates_enumerated: int
    sources_processed: int

    def to_json_dict(self, graph: KnowledgeGraph) -> dict:
        rows = []
        for pathway, breakdown in self.pathways:
            entities = [graph.entity(eid) for eid in pathway.entity_ids]
            rows.append({
                "entities": [e.canonical_name for e in entities],
                "predicates": [graph.relation(rid).predicate
                               for rid in pathway.relation_ids],
                "layers": [e.layer.value for e in entities],
                "f": breakdown.f,
                "lf": breakdown.lf,
                "clc": breakdown.clc,
                "ip": breakdown.ip,
                "score": breakdown.total,
            })
        cfg = self.config_echo
        return {
            "pathways": rows,
            "metadata": {
                "alpha": cfg.alpha,
                "beta": cfg.beta,
                "gamma": cfg.gamma,
                "theta": cfg.theta_novelty,
                "d_max": cfg.d_max,
                "top_k": cfg.top_k,
                "fmax_mode": cfg.fmax_mode,
                "f_max_used": self.f_max_used,
                "candidates_enumerated": self.candidates_enumerated,
            },
        }


def format_pathways(result_json: dict) -> str:
    """Human-readable rendering of a serialized discovery result.

    One line per pathway: the arrow-joined entity chain followed by score
    columns.
    """
    rows = result_json.get("pathways", [])
    if not rows:
        return "(no pathways above threshold)"
    lines = []
    for i, row in enumerate(rows, start=1):
        chain = " → ".join(row["entities"])
        lines.append(
            f"{i:>3}. {chain}\n"
            f"     score={row['score']:.4f}  lf={row['lf']:.4f}  "
            f"clc={row['clc']:.4f}  ip={row['ip']:.4f}  f={row['f']}")
    return "\n".join(lines)


def rank_top_k(scored: Iterable[tuple[Pathway, ScoreBreakdown]],
               config: ScoringConfig) -> list[tuple[Pathway, ScoreBreakdown]]:
    """Filter strictly above the threshold, sort deterministically, truncate.

    Order: total descending, then fewer entities first, then lexicographic
    entity-id sequence (relation ids as the final disambiguator between
    parallel-edge pathways over the same entities).
    """
    kept = [(p, b) for p, b in scored if b.total > config.theta_novelty]
    kept.sort(key=lambda pb: (-pb[1].total, pb[0].num_entities,
                              pb[0].entity_ids, pb[0].relation_ids))
    return kept[:config.top_k]


def edge_max_frequency(graph: KnowledgeGraph, corpus_stats: CorpusStats,
                       freq_mode: str = FREQ_DOCS,
                       entity_docs=None) -> int:
    """F_max for edge-max mode: the largest single-element doc frequency."""
    if freq_mode == FREQ_ENTITIES:
        if entity_docs is None:
            entity_docs = entity_doc_index(graph)
        return max((len(docs) for docs in entity_docs.values()), default=0)
    return max((len(docs) for docs in corpus_stats.edge_doc_index.values()), default=0)


def _extension_bound(num_entities: int, transitions: int, impact_sum: float,
                     config: ScoringConfig, max_impact: float) -> float:
    """Admissible upper bound on the total of any strict extension.

    LF can only reach 1; CLC's best case adds a layer transition on every
    remaining hop (monotone in the number of hops added); IP's best case
    appends entities at the graph-wide maximum of normalized centrality times
    severity, which is maximized either by one hop or by all remaining hops
    depending on whether that maximum exceeds the current mean.
    """
    k_max = config.d_max - (num_entities - 1)
    clc_bound = (transitions + k_max) / (num_entities - 1 + k_max)
    ip_one = (impact_sum + max_impact) / (num_entities + 1)
    ip_all = (impact_sum + k_max * max_impact) / (num_entities + k_max)
    return combine(1.0, clc_bound, max(ip_one, ip_all), config)


def upper_bound_prune(state: TraversalState, config: ScoringConfig,
                      max_impact: float) -> bool:
    """True when no extension of the partial pathway can beat the threshold.

    Only valid in edge-max mode, where F_max is fixed before traversal;
    calling it in pathway-max mode is an error. ``max_impact`` is the
    graph-wide maximum of normalized centrality times severity.
    """
    if config.fmax_mode != FMAX_EDGE:
        raise DiscoveryError("pruning bound requires edge-max fmax_mode")
    if state.num_entities - 1 >= config.d_max:
        return False  # no extensions exist; nothing to prune
    bound = _extension_bound(state.num_entities, state.transitions,
                             state.impact_sum, config, max_impact)
    return bound <= config.theta_novelty


class _GraphIndex:
    """Dense integer view of the graph for the traversal hot loop."""

    def __init__(self, graph: KnowledgeGraph, centrality: CentralityScores,
                 freq_mode: str, undirected: bool):
        self.entity_ids = list(graph.entities)
        index = {eid: i for i, eid in enumerate(self.entity_ids)}
        self.layer = [graph.entities[eid].layer.rank for eid in self.entity_ids]
        try:
            self.sevcent = [centrality.normalized[eid] * graph.entities[eid].severity
                            for eid in self.entity_ids]
        except KeyError as exc:
            raise DiscoveryError(f"centrality missing entity {exc}") from None
        self.relation_ids = list(graph.relations)
        rel_index = {rid: i for i, rid in enumerate(self.relation_ids)}
        self.adjacency: list[list[tuple[int, int]]] = []
        for eid in self.entity_ids:
            pairs = graph.out_neighbors(eid, undirected=undirected)
            self.adjacency.append([(index[other], rel_index[rid])
                                   for rid, other in pairs])
        self.sources = [index[eid] for eid in self.entity_ids
                        if graph.entities[eid].layer is Layer.PHYSICAL]
        self.entity_docs: list[frozenset[str]] | None = None
        if freq_mode == FREQ_ENTITIES:
            by_id = entity_doc_index(graph)
            self.entity_docs = [by_id[eid] for eid in self.entity_ids]


def _relation_doc_sets(index: _GraphIndex, corpus_stats: CorpusStats) -> list[frozenset[str]]:
    try:
        return [corpus_stats.edge_doc_index[rid] for rid in index.relation_ids]
    except KeyError as exc:
        raise DiscoveryError(f"corpus stats missing relation {exc}") from None


def _source_candidates(source: int, index: _GraphIndex, rel_docs, config: ScoringConfig,
                       f_max: int | None, prune: bool, max_impact: float,
                       ) -> tuple[list, int]:
    """Enumerate candidates from one source. Returns (records, candidate count).

    Records are (entity idx tuple, relation idx tuple, f, clc, ip); when
    ``f_max`` is known (edge-max) they are pre-filtered by the threshold,
    otherwise every candidate is kept for the second scoring pass. The prune
    bound is inlined here; it must stay in lockstep with
    :func:`_extension_bound`.
    """
    alpha, beta, gamma = config.alpha, config.beta, config.gamma
    theta = config.theta_novelty
    d_max = config.d_max
    adjacency = index.adjacency
    layer = index.layer
    sevcent = index.sevcent
    entity_docs = index.entity_docs
    by_entity = entity_docs is not None
    lf_known = f_max is not None

    records = []
    append_record = records.append
    count = 0
    start_docs = entity_docs[source] if by_entity else None
    queue = deque()
    push = queue.append
    pop = queue.popleft
    push(((source,), (), 0, 0.0 + sevcent[source], start_docs))
    while queue:
        path, rels, transitions, impact_sum, docs = pop()
        depth = len(rels)
        last = path[-1]
        last_layer = layer[last]
        deeper = depth + 1 < d_max
        for target, rid in adjacency[last]:
            if target in path:
                continue
            new_transitions = transitions + (layer[target] != last_layer)
            new_impact = impact_sum + sevcent[target]
            if by_entity:
                new_docs = docs & entity_docs[target] if docs else docs
            elif docs is None:
                new_docs = rel_docs[rid]
            elif docs:
                new_docs = docs & rel_docs[rid]
            else:
                new_docs = docs
            new_path = path + (target,)
            new_rels = rels + (rid,)
            n = depth + 2  # entities in the extended path
            if new_transitions >= 2:
                count += 1
                f = len(new_docs)
                clc = new_transitions / (n - 1)
                ip = new_impact / n
                if not lf_known:
                    append_record((new_path, new_rels, f, clc, ip))
                else:
                    # expression kept identical to literature_frequency/combine
                    lf = 1.0 if f_max == 0 else 1.0 - f / f_max
                    if alpha * lf + beta * clc + gamma * ip > theta:
                        append_record((new_path, new_rels, f, clc, ip))
            if deeper:
                if prune:
                    k_max = d_max - n + 1
                    clc_bound = (new_transitions + k_max) / (n - 1 + k_max)
                    ip_one = (new_impact + max_impact) / (n + 1)
                    ip_all = (new_impact + k_max * max_impact) / (n + k_max)
                    ip_bound = ip_one if ip_one > ip_all else ip_all
                    if alpha + beta * clc_bound + gamma * ip_bound <= theta:
                        continue
                push((new_path, new_rels, new_transitions,
                      new_impact, new_docs))
    return records, count


def discover(graph: KnowledgeGraph, corpus_stats: CorpusStats,
             centrality: CentralityScores, config: ScoringConfig,
             workers: int = 1, prune: bool | None = None,
             undirected: bool = False) -> DiscoveryResult:
    """Run the full constrained-BFS discovery and return ranked pathways.

    ``prune`` defaults to on in edge-max mode and is ignored in pathway-max
    mode (the bound is only admissible when F_max is fixed up front).
    ``workers`` sets the source-level thread fan-out; any value yields
    byte-identical results.
    """
    index = _GraphIndex(graph, centrality, config.freq_mode, undirected)
    rel_docs = _relation_doc_sets(index, corpus_stats)
    sources = index.sources

    pathway_mode = config.fmax_mode == FMAX_PATHWAY
    if pathway_mode:
        f_max: int | None = None
        prune = False
    else:
        f_max = edge_max_frequency(graph, corpus_stats, config.freq_mode)
        if prune is None:
            prune = True
    max_impact = max(index.sevcent, default=0.0)

    def run_chunk(chunk: Sequence[int]) -> tuple[list, int]:
        chunk_records = []
        chunk_count = 0
        for source in chunk:
            records, count = _source_candidates(
                source, index, rel_docs, config, f_max, bool(prune), max_impact)
            chunk_records.extend(records)
            chunk_count += count
        return chunk_records, chunk_count

    workers = max(1, int(workers))
    if workers == 1 or len(sources) <= 1:
        all_records, candidate_count = run_chunk(sources)
    else:
        chunk_size = max(1, -(-len(sources) // (workers * 4)))
        chunks = [sources[i:i + chunk_size]
                  for i in range(0, len(sources), chunk_size)]
        all_records = []
        candidate_count = 0
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for records, count in pool.map(run_chunk, chunks):
                all_records.extend(records)
                candidate_count += count

    if pathway_mode:
        f_max = max((rec[2] for rec in all_records), default=0)

    # Rank on integer tuples: entity/relation indexes are assigned in sorted
    # id order, so comparing index sequences is exactly the lexicographic
    # id-sequence order rank_top_k uses. Only the k winners are materialized.
    alpha, beta, gamma = config.alpha, config.beta, config.gamma
    theta = config.theta_novelty
    survivors = []
    append_survivor = survivors.append
    for path, rels, f, clc, ip in all_records:
        lf = 1.0 if f_max == 0 else 1.0 - f / f_max
        total = alpha * lf + beta * clc + gamma * ip
        if total > theta:
            append_survivor((-total, len(path), path, rels, f, lf, clc, ip))
    top = heapq.nsmallest(config.top_k, survivors)

    entity_ids = index.entity_ids
    relation_ids = index.relation_ids
    ranked = [
        (Pathway(tuple(entity_ids[i] for i in path),
                 tuple(relation_ids[i] for i in rels)),
         novelty_score(f, lf, clc, ip, config))
        for _, _, path, rels, f, lf, clc, ip in top
    ]
    return DiscoveryResult(
        pathways=ranked,
        config_echo=config,
        f_max_used=f_max,
        candidates_enumerated=candidate_count,
        sources_processed=len(sources),
    )


def enumerate_oracle(graph: KnowledgeGraph, corpus_stats: CorpusStats,
                     centrality: CentralityScores, config: ScoringConfig,
                     undirected: bool = False) -> DiscoveryResult:
    """Exhaustive DFS reference implementation over the public graph API.

    No pruning, no parallelism, no shared traversal machinery with
    ``discover``; scoring composes the public per-component operations. The
    caller is responsible for keeping the graph small enough to enumerate.
    """
    entity_docs = None
    if config.freq_mode == FREQ_ENTITIES:
        entity_docs = entity_doc_index(graph)

    candidates: list[tuple[Pathway, int, float, float]] = []
    sources = [eid for eid, entity in graph.entities.items()
               if entity.layer is Layer.PHYSICAL]

    def extend(entities: tuple[str, ...], relations: tuple[str, ...]) -> None:
        if len(relations) >= config.d_max:
            return
        for rid, neighbor in graph.out_neighbors(entities[-1], undirected=undirected):
            if neighbor in entities:
                continue
            pathway = Pathway(entities + (neighbor,), relations + (rid,))
            if cross_layer_count(pathway, graph) >= 2:
                f = pathway_frequency(pathway, corpus_stats,
                                      config.freq_mode, entity_docs)
                clc = cross_layer_connectivity(pathway, graph)
                ip = impact_potential(pathway, centrality, graph)
                candidates.append((pathway, f, clc, ip))
            extend(pathway.entity_ids, pathway.relation_ids)

    for source in sources:
        extend((source,), ())

    if config.fmax_mode == FMAX_PATHWAY:
        f_max = max((f for _, f, _, _ in candidates), default=0)
    else:
        f_max = edge_max_frequency(graph, corpus_stats, config.freq_mode, entity_docs)

    scored = [
        (pathway, novelty_score(f, literature_frequency(f, f_max), clc, ip, config))
        for pathway, f, clc, ip in candidates
    ]
    return DiscoveryResult(
        pathways=rank_top_k(scored, config),
        config_echo=config,
        f_max_used=f_max,
        candidates_enumerated=len(candidates),
        sources_processed=len(sources),
    )
