"""Checkpointed, resumable batch pipeline: ingest -> build -> pagerank ->
discover -> report.

Each stage records a manifest entry with a fingerprint of exactly the inputs
it reads (the relevant config fields plus content hashes of its input files)
and content hashes of the outputs it wrote. A rerun skips stages whose
fingerprints and outputs still match; anything else is re-executed, along
with every stage downstream of it (stages are deterministic, so cascading
re-runs reproduce identical bytes). Outputs
are written atomically (temp file + rename), so a crash at any point leaves
either the old state or the new state, never a torn file, and a resumed run
finishes with byte-identical final outputs.

Transient failures (I/O) are retried with exponential backoff up to a retry
limit; validation/config failures fail fast.

A lock file (``pipeline.lock``, holding pid and start time) enforces one
pipeline instance per working directory; stale locks from dead processes are
taken over.

Internal testing seam: the environment variable ``RISKPATH_TEST_CRASH`` set
to ``"<point>:<stage>"`` (point in {before_record, after_record}) hard-exits
the process at that point, for crash-resume equivalence tests.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

from .analysis import layer_distribution, temporal_distribution
from .discovery import discover, format_pathways
from .errors import ConfigError, PipelineError, RiskPathError, TransientStageError
from .graph import (
    Entity,
    Layer,
    Phase,
    Relation,
    build_graph,
    load_snapshot,
    save_snapshot,
)
from .ingest import (
    CorpusStats,
    aggregate,
    canonicalize,
    load_layer_lexicon,
    parse_entity_meta,
    parse_triples,
    write_jsonl,
)
from .scoring import CentralityScores, ScoringConfig, pagerank

logger = logging.getLogger(__name__)

STAGE_ORDER = ("ingest", "build", "pagerank", "discover", "report")

MANIFEST_NAME = "manifest.json"
LOCK_NAME = "pipeline.lock"
CONFIG_NAME = "config.json"

STAGE_OUTPUTS = {
    "ingest": ("entities.json", "relations.json", "corpus_stats.json",
               "rejections.jsonl", "parse_errors.jsonl"),
    "build": ("graph.rpkg",),
    "pagerank": ("pagerank.json",),
    "discover": ("pathways.json",),
    "report": ("report_temporal.json", "report_layers.json", "report_pathways.txt"),
}

_CRASH_ENV = "RISKPATH_TEST_CRASH"


@dataclass
class PipelineConfig:
    """Inputs, scoring parameters, and execution knobs for one pipeline run."""

    triples: str
    entities: str
    triples_format: str = "jsonl"
    aliases: str | None = None
    layer_lexicon: str | None = None
    strict: bool = False
    malformed_tolerance: float = 0.1
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    workers: int = 1
    prune: bool | None = None
    undirected: bool = False
    temporal_by: str = "target"
    retry_limit: int = 3
    retry_base_delay: float = 0.5

    def to_dict(self) -> dict:
        data = asdict(self)
        data["scoring"] = self.scoring.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        scoring = data.pop("scoring", {})
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown pipeline config field(s): {sorted(unknown)}")
        return cls(scoring=ScoringConfig.from_dict(scoring), **data)

    @classmethod
    def from_json_file(cls, path) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load pipeline config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: pipeline config must be a JSON object")
        if "triples" not in data or "entities" not in data:
            raise ConfigError(f"{path}: pipeline config needs 'triples' and 'entities'")
        return cls.from_dict(data)


@dataclass
class StageRecord:
    stage_name: str
    input_fingerprint: str = ""
    output_paths: list[str] = field(default_factory=list)
    output_fingerprints: list[str] = field(default_factory=list)
    status: str = "pending"  # pending | done | failed
    attempts: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PipelineSummary:
    workdir: str
    records: list[StageRecord]
    executed: list[str]
    skipped: list[str]

    @property
    def outputs(self) -> dict[str, list[str]]:
        return {rec.stage_name: list(rec.output_paths)
                for rec in self.records if rec.status == "done"}

    def to_dict(self) -> dict:
        return {
            "workdir": self.workdir,
            "executed": self.executed,
            "skipped": self.skipped,
            "stages": [rec.to_dict() for rec in self.records],
        }


# --- retry policy -----------------------------------------------------------

def classify_error(error: BaseException) -> str:
    """Minimal taxonomy: I/O problems are transient, everything else permanent."""
    if isinstance(error, TransientStageError):
        return "transient"
    if isinstance(error, RiskPathError):
        return "permanent"
    if isinstance(error, OSError):
        return "transient"
    return "permanent"


def retry_policy(error: BaseException, attempt: int, retry_limit: int = 3,
                 base_delay: float = 0.5) -> tuple[bool, float]:
    """(should retry, backoff delay) for a failure on the given attempt.

    Transient errors retry up to ``retry_limit`` times with exponential
    backoff; permanent errors fail fast.
    """
    if classify_error(error) != "transient" or attempt > retry_limit:
        return False, 0.0
    return True, base_delay * (2 ** (attempt - 1))


# --- fingerprints and atomic files -------------------------------------------

def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        while chunk := fh.read(1 << 16):
            digest.update(chunk)
    return digest.hexdigest()


def _fingerprint(stage: str, config_part: dict, file_hashes: dict[str, str]) -> str:
    payload = json.dumps({"stage": stage, "config": config_part,
                          "files": file_hashes}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _hash_inputs(paths: dict[str, str | None]) -> dict[str, str]:
    hashes = {}
    for name, path in paths.items():
        if path is None:
            hashes[name] = "absent"
            continue
        try:
            hashes[name] = _sha256_file(path)
        except OSError as exc:
            raise PipelineError(f"stage input {name} unreadable: {exc}") from None
    return hashes


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _atomic_write_json(path: Path, data) -> None:
    _atomic_write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def stage_input_fingerprint(stage: str, config: PipelineConfig, workdir: Path) -> str:
    scoring = config.scoring
    if stage == "ingest":
        part = {"triples_format": config.triples_format, "strict": config.strict,
                "malformed_tolerance": config.malformed_tolerance}
        files = _hash_inputs({
            "triples": config.triples, "entities": config.entities,
            "aliases": config.aliases, "layer_lexicon": config.layer_lexicon,
        })
    elif stage == "build":
        part = {}
        files = _hash_inputs({
            "entities": str(workdir / "entities.json"),
            "relations": str(workdir / "relations.json"),
            "corpus_stats": str(workdir / "corpus_stats.json"),
        })
    elif stage == "pagerank":
        part = {"damping": scoring.damping, "pr_tolerance": scoring.pr_tolerance,
                "pr_max_iters": scoring.pr_max_iters}
        files = _hash_inputs({"graph": str(workdir / "graph.rpkg")})
    elif stage == "discover":
        part = {"alpha": scoring.alpha, "beta": scoring.beta, "gamma": scoring.gamma,
                "theta_novelty": scoring.theta_novelty, "d_max": scoring.d_max,
                "top_k": scoring.top_k, "fmax_mode": scoring.fmax_mode,
                "freq_mode": scoring.freq_mode, "prune": config.prune,
                "undirected": config.undirected}
        files = _hash_inputs({
            "graph": str(workdir / "graph.rpkg"),
            "corpus_stats": str(workdir / "corpus_stats.json"),
            "pagerank": str(workdir / "pagerank.json"),
        })
    elif stage == "report":
        part = {"temporal_by": config.temporal_by}
        files = _hash_inputs({
            "graph": str(workdir / "graph.rpkg"),
            "pathways": str(workdir / "pathways.json"),
        })
    else:
        raise PipelineError(f"unknown stage {stage!r}")
    return _fingerprint(stage, part, files)


# --- stage bodies -------------------------------------------------------------

def _entity_to_dict(entity: Entity) -> dict:
    return {"id": entity.id, "name": entity.canonical_name,
            "layer": entity.layer.value, "severity": entity.severity,
            "aliases": sorted(entity.aliases)}


def _entity_from_dict(data: dict) -> Entity:
    return Entity(id=data["id"], canonical_name=data["name"],
                  layer=Layer.from_string(data["layer"]),
                  severity=data["severity"],
                  aliases=frozenset(data["aliases"]))


def _relation_to_dict(rel: Relation) -> dict:
    return {"id": rel.id, "source": rel.source, "predicate": rel.predicate,
            "target": rel.target, "doc_ids": sorted(rel.doc_ids),
            "phases": sorted(p.value for p in rel.phases)}


def _relation_from_dict(data: dict) -> Relation:
    return Relation(id=data["id"], source=data["source"],
                    predicate=data["predicate"], target=data["target"],
                    doc_ids=frozenset(data["doc_ids"]),
                    phases=frozenset(Phase.from_string(p) for p in data["phases"]))


def _load_json(path: Path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _stage_ingest(config: PipelineConfig, workdir: Path) -> None:
    with open(config.triples, "r", encoding="utf-8") as fh:
        triples, parse_errors = parse_triples(
            fh, config.triples_format, config.malformed_tolerance)
    with open(config.entities, "r", encoding="utf-8") as fh:
        meta = parse_entity_meta(fh)
    extra_aliases = None
    if config.aliases:
        extra_aliases = _load_json(Path(config.aliases))
        if not isinstance(extra_aliases, dict):
            raise ConfigError(f"{config.aliases}: alias file must be a JSON object")
    lexicon = None
    if config.layer_lexicon:
        lex_data = _load_json(Path(config.layer_lexicon))
        if not isinstance(lex_data, dict):
            raise ConfigError(f"{config.layer_lexicon}: lexicon must be a JSON object")
        lexicon = load_layer_lexicon(lex_data)

    canonical, unregistered = canonicalize(triples, meta, extra_aliases)
    if unregistered:
        logger.warning("%d unregistered entity names (first: %r)",
                       len(unregistered), unregistered[0])
    result = aggregate(canonical, meta, lexicon, strict=config.strict)

    _atomic_write_json(workdir / "entities.json",
                       [_entity_to_dict(e) for e in result.entities])
    _atomic_write_json(workdir / "relations.json",
                       [_relation_to_dict(r) for r in result.relations])
    _atomic_write_json(workdir / "corpus_stats.json", result.stats.to_dict())
    write_jsonl(workdir / "rejections.jsonl", result.rejections)
    write_jsonl(workdir / "parse_errors.jsonl", parse_errors)


def _stage_build(config: PipelineConfig, workdir: Path) -> None:
    entities = [_entity_from_dict(d) for d in _load_json(workdir / "entities.json")]
    relations = [_relation_from_dict(d) for d in _load_json(workdir / "relations.json")]
    stats = CorpusStats.from_dict(_load_json(workdir / "corpus_stats.json"))
    graph = build_graph(entities, relations, doc_count=stats.doc_count)
    tmp = workdir / "graph.rpkg.tmp"
    save_snapshot(graph, tmp)
    os.replace(tmp, workdir / "graph.rpkg")


def _stage_pagerank(config: PipelineConfig, workdir: Path) -> None:
    graph = load_snapshot(workdir / "graph.rpkg")
    centrality = pagerank(graph, config.scoring)
    _atomic_write_json(workdir / "pagerank.json", centrality.to_dict())


def _stage_discover(config: PipelineConfig, workdir: Path) -> None:
    graph = load_snapshot(workdir / "graph.rpkg")
    stats = CorpusStats.from_dict(_load_json(workdir / "corpus_stats.json"))
    centrality = CentralityScores.from_dict(_load_json(workdir / "pagerank.json"))
    result = discover(graph, stats, centrality, config.scoring,
                      workers=config.workers, prune=config.prune,
                      undirected=config.undirected)
    _atomic_write_json(workdir / "pathways.json", result.to_json_dict(graph))


def _stage_report(config: PipelineConfig, workdir: Path) -> None:
    graph = load_snapshot(workdir / "graph.rpkg")
    pathways = _load_json(workdir / "pathways.json")
    _atomic_write_json(workdir / "report_temporal.json",
                       temporal_distribution(graph, by=config.temporal_by).to_dict())
    _atomic_write_json(workdir / "report_layers.json",
                       layer_distribution(graph).to_dict())
    _atomic_write_text(workdir / "report_pathways.txt",
                       format_pathways(pathways) + "\n")


STAGES = {
    "ingest": _stage_ingest,
    "build": _stage_build,
    "pagerank": _stage_pagerank,
    "discover": _stage_discover,
    "report": _stage_report,
}


# --- manifest and lock --------------------------------------------------------

def _load_manifest(workdir: Path) -> dict[str, StageRecord]:
    path = workdir / MANIFEST_NAME
    if not path.exists():
        return {}
    try:
        rows = _load_json(path)
        records = {}
        for row in rows:
            records[row["stage_name"]] = StageRecord(**row)
        return records
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        logger.warning("manifest unreadable (%s); starting fresh", exc)
        return {}


def _save_manifest(workdir: Path, records: dict[str, StageRecord]) -> None:
    rows = [records[name].to_dict() for name in STAGE_ORDER if name in records]
    _atomic_write_json(workdir / MANIFEST_NAME, rows)


def _outputs_valid(workdir: Path, record: StageRecord) -> bool:
    if len(record.output_paths) != len(record.output_fingerprints):
        return False
    for rel_path, expected in zip(record.output_paths, record.output_fingerprints):
        path = workdir / rel_path
        if not path.exists() or _sha256_file(path) != expected:
            return False
    return True


class _Lock:
    def __init__(self, workdir: Path):
        self.path = workdir / LOCK_NAME
        self.acquired = False

    def acquire(self) -> None:
        payload = json.dumps({"pid": os.getpid(), "started_at": time.time()})
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            if self._holder_alive():
                raise PipelineError(
                    f"another pipeline holds {self.path}; "
                    f"remove the lock if that process is gone") from None
            logger.warning("taking over stale lock %s", self.path)
            self.path.write_text(payload, encoding="utf-8")
            self.acquired = True
            return
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        self.acquired = True

    def _holder_alive(self) -> bool:
        try:
            holder = json.loads(self.path.read_text(encoding="utf-8"))
            pid = int(holder["pid"])
        except (OSError, ValueError, KeyError, json.JSONDecodeError):
            return False
        try:
            os.kill(pid, 0)
        except ProcessLookupError:
            return False
        except PermissionError:
            return True
        return True

    def release(self) -> None:
        if self.acquired:
            try:
                self.path.unlink()
            except OSError:
                pass
            self.acquired = False


def _maybe_crash(point: str, stage: str) -> None:
    if os.environ.get(_CRASH_ENV) == f"{point}:{stage}":
        os._exit(70)


# --- orchestration --------------------------------------------------------------

def run(config: PipelineConfig, workdir) -> PipelineSummary:
    """Execute all stages in dependency order, skipping up-to-date ones."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    lock = _Lock(workdir)
    lock.acquire()
    try:
        _atomic_write_json(workdir / CONFIG_NAME, config.to_dict())
        records = _load_manifest(workdir)
        executed: list[str] = []
        skipped: list[str] = []
        upstream_ran = False

        for stage in STAGE_ORDER:
            fingerprint = stage_input_fingerprint(stage, config, workdir)
            record = records.get(stage)
            if (not upstream_ran and record is not None and record.status == "done"
                    and record.input_fingerprint == fingerprint
                    and _outputs_valid(workdir, record)):
                skipped.append(stage)
                continue
            upstream_ran = True
            if record is not None and record.status == "done":
                logger.warning("stage %s or an upstream stage changed; re-running",
                               stage)

            record = StageRecord(stage_name=stage, input_fingerprint=fingerprint)
            records[stage] = record
            attempt = 0
            while True:
                attempt += 1
                record.attempts = attempt
                try:
                    STAGES[stage](config, workdir)
                    break
                except Exception as exc:  # noqa: BLE001 - classified below
                    should_retry, delay = retry_policy(
                        exc, attempt, config.retry_limit, config.retry_base_delay)
                    if not should_retry:
                        record.status = "failed"
                        _save_manifest(workdir, records)
                        raise PipelineError(
                            f"stage {stage} failed after {attempt} attempt(s): "
                            f"{exc}") from exc
                    logger.warning("stage %s attempt %d failed: %s; retrying in %.2fs",
                                   stage, attempt, exc, delay)
                    time.sleep(delay)

            _maybe_crash("before_record", stage)
            record.output_paths = list(STAGE_OUTPUTS[stage])
            record.output_fingerprints = [
                _sha256_file(workdir / name) for name in record.output_paths]
            record.status = "done"
            _save_manifest(workdir, records)
            _maybe_crash("after_record", stage)
            executed.append(stage)

        return PipelineSummary(workdir=str(workdir), records=[
            records[name] for name in STAGE_ORDER if name in records
        ], executed=executed, skipped=skipped)
    finally:
        lock.release()


def resume(workdir) -> PipelineSummary:
    """Continue from the first stage that is not done, reusing valid outputs."""
    workdir = Path(workdir)
    if not (workdir / MANIFEST_NAME).exists():
        raise PipelineError(
            f"nothing to resume: {workdir / MANIFEST_NAME} does not exist")
    config_path = workdir / CONFIG_NAME
    if not config_path.exists():
        raise PipelineError(f"nothing to resume: {config_path} does not exist")
    config = PipelineConfig.from_dict(_load_json(config_path))
    return run(config, workdir)
