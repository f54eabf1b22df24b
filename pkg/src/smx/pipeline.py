"""End-to-end wiring of the explanation pipeline.

Given preprocessed training data, a zone config, a model handle and an
engine config: fit zone summaries, build predicates, score them across
bags for every seed, assemble per-seed graphs and aggregate the final
predicate and zone rankings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import SpectralDataset, ZoneConfig
from .engine import BagResult, EngineConfig, run_bags
from .graphx import (
    ExplanationGraph,
    PredicateRanking,
    aggregate_seeds,
    build_graph,
    zone_ranking,
)
from .parallel import thread_count
from .predicates import PredicateSet, build_predicates
from .zonecore import ZoneModel, fit_zone_models


@dataclass
class ExplainResult:
    zone_models: list[ZoneModel]
    scores: np.ndarray
    predicate_set: PredicateSet
    bag_results: dict[int, list[BagResult]]  # seed -> bags
    graphs: list[ExplanationGraph]
    ranking: PredicateRanking
    zone_order: list[tuple[str, bool]]

    def ranked_zone_names(self) -> list[str]:
        return [name for name, ranked in self.zone_order if ranked]

    def predicate_labels(self) -> list[str]:
        """Predicate identity strings in ranking order (the raw output list)."""
        return [self.predicate_set.predicates[j].key for j in self.ranking.order]


def explain(
    train: SpectralDataset,
    zones: ZoneConfig,
    model,
    cfg: EngineConfig | None = None,
    workers: int | None = None,
) -> ExplainResult:
    """Run the full explanation pipeline on one training set."""
    cfg = cfg or EngineConfig()
    workers = thread_count(workers)
    zone_models, scores = fit_zone_models(train, zones)
    pset = build_predicates(scores, zone_models, cfg.quantiles)
    bag_results: dict[int, list[BagResult]] = {}
    graphs: list[ExplanationGraph] = []
    for seed in cfg.seeds:
        bags = run_bags(
            model, train.intensities, zone_models, pset, cfg, seed, workers=workers
        )
        bag_results[seed] = bags
        graphs.append(build_graph(bags, zone_models, pset, seed))
    ranking = aggregate_seeds(graphs, pset)
    zone_order = zone_ranking(ranking, pset, zones.names())
    return ExplainResult(
        zone_models=zone_models,
        scores=scores,
        predicate_set=pset,
        bag_results=bag_results,
        graphs=graphs,
        ranking=ranking,
        zone_order=zone_order,
    )


def derive_seeds(base_seed: int, count: int = 4) -> tuple[int, ...]:
    """Deterministic distinct engine seeds for reruns keyed by one integer."""
    return tuple(1000 * int(base_seed) + k + 1 for k in range(count))
