#!/usr/bin/env python3
"""Temporal phase distribution and layer distribution reports.

Relations may carry acute (0-3 days) / subacute (3-14 days) / chronic (14+
days) phase tags; the temporal report shows what share of the phase-tagged
relations pointing into each layer manifests in each window. A relation may
carry several tags, so columns need not sum to 100%.
"""

import random

from riskpath import (
    Entity,
    Layer,
    Phase,
    Relation,
    build_graph,
    layer_distribution,
    temporal_distribution,
)

rng = random.Random(7)
layers = list(Layer)
entities = [Entity(f"e{i}", f"entity {i}", rng.choice(layers), rng.random())
            for i in range(40)]

# acute impacts skew physical, chronic impacts skew economic
phase_bias = {
    Layer.PHYSICAL: [Phase.ACUTE] * 3 + [Phase.SUBACUTE],
    Layer.SOCIAL: [Phase.SUBACUTE] * 2 + [Phase.ACUTE, Phase.CHRONIC],
    Layer.ECONOMIC: [Phase.CHRONIC] * 3 + [Phase.SUBACUTE],
}
relations = []
for i in range(150):
    source, target = rng.sample(entities, 2)
    tags = frozenset(rng.sample(phase_bias[target.layer],
                                rng.randint(1, 2)))
    relations.append(Relation(f"r{i}", source.id, "affects", target.id,
                              doc_ids=frozenset({f"d{i % 30}"}), phases=tags))

graph = build_graph(entities, relations)

print(temporal_distribution(graph).to_table())
print()
print(layer_distribution(graph).to_table())
