import random

import pytest

from riskpath import (
    CorpusStats,
    DiscoveryError,
    Layer,
    Pathway,
    ScoreBreakdown,
    ScoringConfig,
    TraversalState,
    build_graph,
    cross_layer_count,
    discover,
    enumerate_oracle,
    pagerank,
    rank_top_k,
    upper_bound_prune,
)
from riskpath.discovery import format_pathways
from oracle_pagerank import dense_pagerank
from riskpath.scoring import CentralityScores
from util import chain_graph, random_graph

DEFAULTS = ScoringConfig()


def results_equal(a, b, check_counter=True):
    if a.pathways != b.pathways:
        return False
    if a.f_max_used != b.f_max_used:
        return False
    if a.sources_processed != b.sources_processed:
        return False
    if check_counter and a.candidates_enumerated != b.candidates_enumerated:
        return False
    return True


class TestPathway:
    def test_structure_validation(self):
        with pytest.raises(DiscoveryError):
            Pathway(("a", "b"), ())

    def test_validate_against_graph(self):
        graph, _ = chain_graph([Layer.PHYSICAL, Layer.SOCIAL, Layer.ECONOMIC])
        Pathway(("e0", "e1", "e2"), ("r0", "r1")).validate(graph, d_max=5)
        with pytest.raises(DiscoveryError, match="does not connect"):
            Pathway(("e1", "e0"), ("r0",)).validate(graph)
        Pathway(("e1", "e0"), ("r0",)).validate(graph, undirected=True)
        with pytest.raises(DiscoveryError, match="repeats"):
            Pathway(("e0", "e0"), ("r0",)).validate(graph)
        with pytest.raises(DiscoveryError, match="exceeds"):
            Pathway(("e0", "e1", "e2"), ("r0", "r1")).validate(graph, d_max=1)


class TestDiscoverBasics:
    def test_no_physical_sources(self):
        graph, stats = chain_graph([Layer.SOCIAL, Layer.ECONOMIC, Layer.SOCIAL])
        cent = pagerank(graph, DEFAULTS)
        result = discover(graph, stats, cent, DEFAULTS)
        assert result.pathways == []
        assert result.sources_processed == 0
        assert result.candidates_enumerated == 0

    def test_single_cross_edge_is_not_a_candidate(self):
        graph, stats = chain_graph([Layer.PHYSICAL, Layer.SOCIAL])
        cent = pagerank(graph, DEFAULTS)
        result = discover(graph, stats, cent, DEFAULTS.override(theta_novelty=0.0))
        assert result.candidates_enumerated == 0
        assert result.pathways == []

    def test_three_node_chain_hand_evaluated(self, pse_chain):
        graph, stats = pse_chain
        config = DEFAULTS.override(theta_novelty=0.0)
        cent = pagerank(graph, config)
        result = discover(graph, stats, cent, config)
        assert result.candidates_enumerated == 1
        assert len(result.pathways) == 1
        pathway, breakdown = result.pathways[0]
        assert pathway == Pathway(("e0", "e1", "e2"), ("r0", "r1"))
        # one candidate attested by the single doc: f = F_max = 1 -> LF = 0
        assert breakdown.f == 1
        assert result.f_max_used == 1
        assert breakdown.lf == 0.0
        assert breakdown.clc == 1.0
        # IP recomputed from the independent dense centrality oracle
        oracle_pr = dense_pagerank(graph)
        peak = max(oracle_pr.values())
        severities = {"e0": 0.9, "e1": 0.7, "e2": 0.8}
        ip = sum(oracle_pr[e] / peak * severities[e] for e in ("e0", "e1", "e2")) / 3
        assert abs(breakdown.ip - ip) < 1e-8
        assert abs(breakdown.total - (0.3 + 0.2 * ip)) < 1e-8

    def test_empty_graph(self):
        graph = build_graph([], [])
        stats = CorpusStats.from_graph(graph)
        cent = CentralityScores({}, {}, 0, True)
        result = discover(graph, stats, cent, DEFAULTS)
        assert result.pathways == []
        oracle = enumerate_oracle(graph, stats, cent, DEFAULTS)
        assert results_equal(result, oracle)

    def test_returned_pathways_satisfy_constraints(self):
        rng = random.Random(5150)
        graph, stats = random_graph(rng, 60, 180)
        config = DEFAULTS.override(theta_novelty=0.3, top_k=50)
        cent = pagerank(graph, config)
        result = discover(graph, stats, cent, config)
        assert result.pathways, "fixture should produce pathways"
        for pathway, breakdown in result.pathways:
            assert graph.entity(pathway.entity_ids[0]).layer is Layer.PHYSICAL
            pathway.validate(graph, d_max=config.d_max)
            assert cross_layer_count(pathway, graph) >= 2
            assert 2 <= pathway.edge_length <= config.d_max
            assert breakdown.total > config.theta_novelty


class TestRankTopK:
    def mk(self, total, entity_ids, n_override=None):
        pw = Pathway(tuple(entity_ids), tuple(f"r{i}" for i in
                                              range(len(entity_ids) - 1)))
        bd = ScoreBreakdown(f=0, lf=total, clc=0.0, ip=0.0, total=total)
        return pw, bd

    def test_equal_totals_shorter_first(self):
        long = self.mk(0.9, ["a", "b", "c", "d"])
        short = self.mk(0.9, ["x", "y", "z"])
        config = DEFAULTS.override(theta_novelty=0.5)
        assert rank_top_k([long, short], config) == [short, long]

    def test_exactly_theta_excluded(self):
        at = self.mk(0.7, ["a", "b", "c"])
        above = self.mk(0.7000001, ["x", "y", "z"])
        assert rank_top_k([at, above], DEFAULTS) == [above]

    def test_lexicographic_tiebreak(self):
        one = self.mk(0.8, ["a", "m", "z"])
        two = self.mk(0.8, ["a", "b", "z"])
        assert rank_top_k([one, two], DEFAULTS) == [two, one]

    def test_truncates_to_top_k(self):
        items = [self.mk(0.9 - 0.01 * i, [f"s{i}", f"t{i}", f"u{i}"])
                 for i in range(20)]
        config = DEFAULTS.override(top_k=5, theta_novelty=0.0)
        assert rank_top_k(items, config) == items[:5]

    def test_permutation_invariant(self):
        rng = random.Random(0)
        items = [self.mk(rng.choice([0.8, 0.9]), [f"a{i}", f"b{i}", f"c{i}"])
                 for i in range(15)]
        base = rank_top_k(items, DEFAULTS)
        for seed in range(5):
            shuffled = items[:]
            random.Random(seed).shuffle(shuffled)
            assert rank_top_k(shuffled, DEFAULTS) == base


class TestPruning:
    def test_theta_zero_never_prunes(self):
        config = ScoringConfig(theta_novelty=0.0, fmax_mode="edge-max")
        for n in range(2, 6):
            for t in range(0, n):
                state = TraversalState(num_entities=n, transitions=t,
                                       impact_sum=0.0)
                assert not upper_bound_prune(state, config, max_impact=0.0)

    def test_theta_one_prunes_when_bound_strict(self):
        config = ScoringConfig(theta_novelty=1.0, fmax_mode="edge-max")
        state = TraversalState(num_entities=3, transitions=0, impact_sum=0.0)
        assert upper_bound_prune(state, config, max_impact=0.5)

    def test_pathway_max_mode_is_error(self):
        state = TraversalState(num_entities=2, transitions=1, impact_sum=0.5)
        with pytest.raises(DiscoveryError):
            upper_bound_prune(state, DEFAULTS, max_impact=1.0)

    def test_full_path_never_prunes(self):
        config = ScoringConfig(theta_novelty=1.0, fmax_mode="edge-max", d_max=2)
        state = TraversalState(num_entities=3, transitions=2, impact_sum=3.0)
        assert not upper_bound_prune(state, config, max_impact=1.0)

    def test_theta_one_empty_in_both_prune_settings(self):
        rng = random.Random(4242)
        graph, stats = random_graph(rng, 40, 100)
        config = ScoringConfig(theta_novelty=1.0, fmax_mode="edge-max")
        cent = pagerank(graph, config)
        oracle = enumerate_oracle(graph, stats, cent, config)
        assert oracle.pathways == []
        for prune in (True, False):
            got = discover(graph, stats, cent, config, prune=prune)
            assert got.pathways == oracle.pathways == []

    def test_prune_on_off_identical_results(self):
        for seed in range(12):
            rng = random.Random(9000 + seed)
            graph, stats = random_graph(rng, 50, 140)
            config = ScoringConfig(fmax_mode="edge-max",
                                   theta_novelty=rng.choice([0.5, 0.7, 0.8]),
                                   top_k=25)
            cent = pagerank(graph, config)
            on = discover(graph, stats, cent, config, prune=True)
            off = discover(graph, stats, cent, config, prune=False)
            assert on.pathways == off.pathways
            assert on.f_max_used == off.f_max_used
            # pruning may only ever skip candidates, never add
            assert on.candidates_enumerated <= off.candidates_enumerated


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", range(15))
    def test_random_graphs_all_modes(self, seed):
        rng = random.Random(4000 + seed)
        graph, stats = random_graph(rng, rng.randint(20, 70),
                                    rng.randint(40, 170))
        theta = rng.choice([0.0, 0.5, 0.7])
        d_max = rng.choice([3, 4, 5])
        for fmax_mode in ("pathway-max", "edge-max"):
            config = ScoringConfig(theta_novelty=theta, d_max=d_max,
                                   top_k=rng.choice([5, 10, 40]),
                                   fmax_mode=fmax_mode)
            cent = pagerank(graph, config)
            oracle = enumerate_oracle(graph, stats, cent, config)
            for workers in (1, 2, 8):
                for prune in (False, True):
                    got = discover(graph, stats, cent, config,
                                   workers=workers, prune=prune)
                    check_counter = not (prune and fmax_mode == "edge-max")
                    assert results_equal(got, oracle, check_counter), (
                        f"seed={seed} mode={fmax_mode} workers={workers} "
                        f"prune={prune}")

    def test_entity_freq_mode_matches_oracle(self):
        for seed in range(6):
            rng = random.Random(6200 + seed)
            graph, stats = random_graph(rng, 35, 90)
            config = ScoringConfig(theta_novelty=0.4, freq_mode="entities",
                                   top_k=30)
            cent = pagerank(graph, config)
            assert results_equal(discover(graph, stats, cent, config),
                                 enumerate_oracle(graph, stats, cent, config))

    def test_undirected_matches_oracle(self):
        for seed in range(6):
            rng = random.Random(7700 + seed)
            graph, stats = random_graph(rng, 25, 50)
            config = ScoringConfig(theta_novelty=0.5, d_max=3, top_k=20)
            cent = pagerank(graph, config)
            got = discover(graph, stats, cent, config, undirected=True)
            want = enumerate_oracle(graph, stats, cent, config, undirected=True)
            assert results_equal(got, want)
            for pathway, _ in got.pathways:
                pathway.validate(graph, d_max=config.d_max, undirected=True)

    def test_worker_counts_byte_identical_json(self):
        rng = random.Random(31337)
        graph, stats = random_graph(rng, 80, 240)
        config = ScoringConfig(theta_novelty=0.5, top_k=30)
        cent = pagerank(graph, config)
        import json
        payloads = set()
        for workers in (1, 2, 8):
            result = discover(graph, stats, cent, config, workers=workers)
            payloads.add(json.dumps(result.to_json_dict(graph), sort_keys=True))
        assert len(payloads) == 1


class TestMonotonicity:
    def test_raising_dmax_never_removes_candidates(self):
        rng = random.Random(808)
        graph, stats = random_graph(rng, 40, 110)
        cent = pagerank(graph, DEFAULTS)
        seen = {}
        for d_max in (2, 3, 4, 5):
            config = ScoringConfig(theta_novelty=0.0, d_max=d_max, top_k=10_000)
            result = discover(graph, stats, cent, config)
            seen[d_max] = {pw for pw, _ in result.pathways}
        # pathway-max F_max can shift with d_max, but the threshold is 0 so
        # the candidate sets themselves must be nested
        assert seen[2] <= seen[3] <= seen[4] <= seen[5]

    def test_lowering_theta_keeps_returned_pathways(self):
        rng = random.Random(909)
        graph, stats = random_graph(rng, 40, 110)
        cent = pagerank(graph, DEFAULTS)
        high = discover(graph, stats, cent,
                        ScoringConfig(theta_novelty=0.8, top_k=10_000))
        low = discover(graph, stats, cent,
                       ScoringConfig(theta_novelty=0.4, top_k=10_000))
        assert {pw for pw, _ in high.pathways} <= {pw for pw, _ in low.pathways}


class TestSerialization:
    def test_json_dict_shape(self, pse_chain):
        graph, stats = pse_chain
        config = DEFAULTS.override(theta_novelty=0.0)
        cent = pagerank(graph, config)
        payload = discover(graph, stats, cent, config).to_json_dict(graph)
        assert set(payload) == {"pathways", "metadata"}
        row = payload["pathways"][0]
        assert set(row) == {"entities", "predicates", "layers", "f", "lf",
                            "clc", "ip", "score"}
        assert row["entities"] == ["e0", "e1", "e2"]
        assert row["layers"] == ["physical", "social", "economic"]
        assert payload["metadata"] == {
            "alpha": 0.5, "beta": 0.3, "gamma": 0.2, "theta": 0.0,
            "d_max": 5, "top_k": 10, "fmax_mode": "pathway-max",
            "f_max_used": 1, "candidates_enumerated": 1,
        }

    def test_format_pathways(self, pse_chain):
        graph, stats = pse_chain
        config = DEFAULTS.override(theta_novelty=0.0)
        cent = pagerank(graph, config)
        payload = discover(graph, stats, cent, config).to_json_dict(graph)
        text = format_pathways(payload)
        assert "e0 → e1 → e2" in text
        assert "score=" in text
        assert format_pathways({"pathways": []}).startswith("(no pathways")
