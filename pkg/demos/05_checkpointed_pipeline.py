#!/usr/bin/env python3
"""The checkpointed pipeline: run, memoized rerun, and partial re-run.

Each stage fingerprints exactly what it reads (input file hashes plus its
slice of the config), so a rerun skips everything that is up to date and a
threshold change re-runs only discovery and reporting.
"""

import tempfile
from pathlib import Path

from riskpath import GenSpec, Layer, PlantedChain, ScoringConfig, generate
from riskpath.pipeline import PipelineConfig, run
from riskpath.syngen import write_corpus

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    chain = PlantedChain((Layer.PHYSICAL, Layer.SOCIAL, Layer.ECONOMIC), 1)
    spec = GenSpec(n_docs=80, seed=3, entities_per_layer=30,
                   planted_chains=(chain,))
    paths = write_corpus(generate(spec), tmp / "corpus")

    config = PipelineConfig(
        triples=str(paths["triples"]),
        entities=str(paths["entities"]),
        scoring=ScoringConfig(theta_novelty=0.5),
    )
    workdir = tmp / "work"

    summary = run(config, workdir)
    print("fresh run:     executed =", summary.executed)

    summary = run(config, workdir)
    print("identical rerun: executed =", summary.executed or "nothing",
          "| skipped =", summary.skipped)

    config.scoring = ScoringConfig(theta_novelty=0.75)
    summary = run(config, workdir)
    print("theta changed: executed =", summary.executed,
          "| skipped =", summary.skipped)

    print("\nworkdir artifacts:")
    for path in sorted(workdir.iterdir()):
        print(f"  {path.name:<22} {path.stat().st_size:>8} bytes")
