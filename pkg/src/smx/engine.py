"""Stochastic bag generation, median-replacement zone perturbation and
impact scoring: the core ranking loop.

Per bag, every predicate with enough support inside the bag has its
zone replaced by full-training-set column medians for the satisfying
samples; the change in model output, divided by the zone width, is the
predicate's normalized impact. Bags are pure functions of
(seed, bag_index, inputs), so any parallel schedule yields identical
results.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, ModelError
from .models import CONTINUOUS, PROBABILISTIC
from .parallel import run_ordered
from .predicates import PredicateSet
from .zonecore import ZoneModel

DEFAULT_QUANTILES = (0.2, 0.4, 0.6, 0.8)
DEFAULT_SEEDS = (1, 2, 3, 4)


@dataclass(frozen=True)
class EngineConfig:
    bags: int = 10
    bag_fraction: float = 0.8
    min_support_fraction: float = 0.2
    quantiles: tuple[float, ...] = DEFAULT_QUANTILES
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    replacement: str = "median"

    def __post_init__(self):
        if self.bags < 1:
            raise ConfigError("bag count must be >= 1")
        if not (0.0 < self.bag_fraction <= 1.0):
            raise ConfigError("bag_fraction must be in (0, 1]")
        if not (0.0 < self.min_support_fraction < 1.0):
            raise ConfigError("min_support_fraction must be in (0, 1)")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if any(s < 0 for s in self.seeds):
            raise ConfigError("seeds must be non-negative")
        if self.replacement != "median":
            raise ConfigError("only median replacement is supported")


@dataclass(frozen=True)
class BagEntry:
    predicate: int
    impact: float  # normalized by zone width
    raw_impact: float
    support: int


@dataclass
class BagResult:
    bag_index: int
    entries: list[BagEntry] = field(default_factory=list)
    terminal_class: int | None = None


def draw_bag(seed: int, bag_index: int, n: int, n_b: int) -> np.ndarray:
    """Uniform n_b-subset of range(n) via partial Fisher-Yates, keyed on
    (seed, bag_index); reproducible across runs and thread schedules."""
    if not (1 <= n_b <= n):
        raise ConfigError(f"bag size {n_b} outside [1, {n}]")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), int(bag_index))))
    idx = np.arange(n)
    for i in range(n_b):
        j = i + int(rng.integers(0, n - i))
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:n_b]


def perturb_zone(X: np.ndarray, zone_indices: np.ndarray, medians: np.ndarray) -> np.ndarray:
    """Replace the zone's columns with training medians; all else untouched."""
    X = np.asarray(X, dtype=float)
    zone_indices = np.asarray(zone_indices, dtype=int)
    if zone_indices.size and (zone_indices.min() < 0 or zone_indices.max() >= X.shape[1]):
        raise ConfigError("zone index out of range")
    out = X.copy()
    out[:, zone_indices] = medians[zone_indices]
    return out


def impact_continuous(y_orig: np.ndarray, y_pert: np.ndarray) -> float:
    """Mean absolute difference of continuous outputs."""
    return float(np.mean(np.abs(np.asarray(y_orig) - np.asarray(y_pert))))


def impact_probabilistic(p_orig: np.ndarray, p_pert: np.ndarray) -> float:
    """Mean over samples of the class-averaged absolute probability shift."""
    diff = np.abs(np.asarray(p_orig) - np.asarray(p_pert))
    return float(np.mean(diff.sum(axis=1) / diff.shape[1]))


def _model_outputs(model, X: np.ndarray) -> np.ndarray:
    if model.kind == CONTINUOUS:
        return model.predict(X)
    if model.kind == PROBABILISTIC:
        return model.predict_proba(X)
    raise ModelError(f"unknown model kind {model.kind!r}")


def _predicted_classes(kind: str, outputs: np.ndarray) -> np.ndarray:
    if kind == CONTINUOUS:
        return (outputs > 0.5).astype(int)
    return np.where(outputs[:, 1] > outputs[:, 0], 1, 0)


def bag_size(n: int, bag_fraction: float) -> int:
    return min(n, max(1, int(round(bag_fraction * n))))


def min_support(n: int, min_support_fraction: float) -> int:
    return int(math.ceil(min_support_fraction * n))


def run_bags(
    model,
    X_train: np.ndarray,
    zone_models: Sequence[ZoneModel],
    pset: PredicateSet,
    cfg: EngineConfig,
    seed: int,
    workers: int = 1,
) -> list[BagResult]:
    """Run all bags for one seed and return results in bag order.

    The terminal class of a bag is the majority predicted class (from
    the original, unperturbed predictions) among the samples satisfying
    the last-ranked predicate; ties go to class 0.
    """
    X = np.asarray(X_train, dtype=float)
    n = X.shape[0]
    if pset.indicator.shape[0] != n:
        raise ConfigError("predicate indicator rows must match the training matrix")
    n_b = bag_size(n, cfg.bag_fraction)
    n_min = min_support(n, cfg.min_support_fraction)
    medians = np.median(X, axis=0)
    outputs = _model_outputs(model, X)
    classes = _predicted_classes(model.kind, outputs)
    zone_idx = [zone_models[p.zone_index].indices for p in pset.predicates]
    zone_width = [zone_models[p.zone_index].width for p in pset.predicates]

    def one_bag(b: int) -> BagResult:
        subset = draw_bag(seed, b, n, n_b)
        scored = []
        for j in range(len(pset)):
            sat = pset.support(j, subset)
            if sat.size < n_min:
                continue
            perturbed = perturb_zone(X[sat], zone_idx[j], medians)
            pert_out = _model_outputs(model, perturbed)
            if model.kind == CONTINUOUS:
                raw = impact_continuous(outputs[sat], pert_out)
            else:
                raw = impact_probabilistic(outputs[sat], pert_out)
            scored.append(BagEntry(predicate=j, impact=raw / zone_width[j], raw_impact=raw, support=int(sat.size)))
        scored.sort(key=lambda e: (-e.impact, e.predicate))
        result = BagResult(bag_index=b, entries=scored)
        if scored:
            last = scored[-1]
            sat = pset.support(last.predicate, subset)
            ones = int(np.count_nonzero(classes[sat] == 1))
            result.terminal_class = 1 if ones > sat.size - ones else 0
        return result

    return run_ordered(one_bag, list(range(cfg.bags)), workers)


def trace_lines(seed: int, results: Sequence[BagResult], pset: PredicateSet) -> list[str]:
    """Bag-level audit trace, one JSON object per retained predicate."""
    lines = []
    for bag in results:
        for entry in bag.entries:
            pred = pset.predicates[entry.predicate]
            lines.append(
                json.dumps(
                    {
                        "seed": seed,
                        "bag": bag.bag_index,
                        "predicate": entry.predicate,
                        "label": pred.key,
                        "support": entry.support,
                        "impact_raw": entry.raw_impact,
                        "impact_norm": entry.impact,
                    },
                    sort_keys=True,
                )
            )
    return lines
