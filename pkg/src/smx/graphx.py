"""Per-seed explanation graphs, Local Reaching Centrality and the
derived predicate / zone rankings.

Nodes are the full predicate set plus two class terminals. Each bag's
ranked list becomes a directed path whose edge weights are the source
predicate's normalized impact scaled by its zone's explained variance;
same-direction edges accumulate across bags and bidirectional pairs
keep only the heavier direction.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataio import _fmt
from .engine import BagResult
from .errors import ConfigError
from .predicates import PredicateSet
from .zonecore import ZoneModel

logger = logging.getLogger(__name__)


@dataclass
class ExplanationGraph:
    """Directed weighted graph over node ids 0..node_count-1.

    The last two nodes are the class terminals (Class_0, Class_1); ids
    below ``n_predicates`` are predicates in predicate-set order.
    """

    seed: int
    n_predicates: int
    edges: dict[tuple[int, int], float]

    @property
    def node_count(self) -> int:
        return self.n_predicates + 2

    def terminal(self, cls: int) -> int:
        return self.n_predicates + int(cls)


def build_graph(
    bag_results: Sequence[BagResult],
    zone_models: Sequence[ZoneModel],
    pset: PredicateSet,
    seed: int,
) -> ExplanationGraph:
    """Assemble and resolve one seed's graph from its bag rankings."""
    n_pred = len(pset)
    ve = [zone_models[p.zone_index].variance_explained for p in pset.predicates]
    acc: dict[tuple[int, int], float] = {}
    for bag in bag_results:
        entries = bag.entries
        if not entries:
            continue
        for cur, nxt in zip(entries, entries[1:]):
            w = cur.impact * ve[cur.predicate]
            key = (cur.predicate, nxt.predicate)
            acc[key] = acc.get(key, 0.0) + w
        last = entries[-1]
        key = (last.predicate, n_pred + int(bag.terminal_class))
        acc[key] = acc.get(key, 0.0) + last.impact * ve[last.predicate]

    # zero-impact contributions carry no evidence; keeping them would
    # violate the positive-weight contract
    edges = {k: w for k, w in acc.items() if w > 0.0}
    _resolve_bidirectional(edges)
    _break_cycles(edges, seed)
    return ExplanationGraph(seed=seed, n_predicates=n_pred, edges=edges)


def _resolve_bidirectional(edges: dict[tuple[int, int], float]) -> None:
    for u, v in sorted(edges):
        if u >= v or (v, u) not in edges or (u, v) not in edges:
            continue
        fwd, rev = edges[(u, v)], edges[(v, u)]
        if fwd > rev:
            del edges[(v, u)]
        elif rev > fwd:
            del edges[(u, v)]
        else:
            # tie: keep the direction whose source comes first in predicate order
            del edges[(v, u)]


def _find_cycle(edges: dict[tuple[int, int], float]) -> list[tuple[int, int]] | None:
    adjacency: dict[int, list[int]] = {}
    for u, v in sorted(edges):
        adjacency.setdefault(u, []).append(v)
    WHITE, GRAY, BLACK = 0, 1, 2
    color: dict[int, int] = {}
    stack_edges: list[tuple[int, int]] = []

    def dfs(start: int) -> list[tuple[int, int]] | None:
        stack = [(start, iter(adjacency.get(start, ())))]
        color[start] = GRAY
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color.get(nxt, WHITE) == GRAY:
                    stack_edges.append((node, nxt))
                    i = next(i for i, e in enumerate(stack_edges) if e[0] == nxt)
                    return stack_edges[i:]
                if color.get(nxt, WHITE) == WHITE:
                    stack_edges.append((node, nxt))
                    color[nxt] = GRAY
                    stack.append((nxt, iter(adjacency.get(nxt, ()))))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()
                if stack_edges:
                    stack_edges.pop()
        return None

    for node in sorted(adjacency):
        if color.get(node, WHITE) == WHITE:
            found = dfs(node)
            if found:
                return found
    return None


def _break_cycles(edges: dict[tuple[int, int], float], seed: int) -> None:
    dropped = 0
    while True:
        cycle = _find_cycle(edges)
        if cycle is None:
            break
        victim = min(cycle, key=lambda e: (edges[e], e))
        logger.debug("seed %s: dropping edge %s (weight %g)", seed, victim, edges[victim])
        del edges[victim]
        dropped += 1
    if dropped:
        logger.warning(
            "seed %s: %d lightest edge(s) removed to break directed cycles that "
            "survived pair resolution",
            seed,
            dropped,
        )


def lrc_scores(node_count: int, edges: dict[tuple[int, int], float]) -> np.ndarray:
    """Local Reaching Centrality for every node of a resolved graph.

    For each reachable node the contribution is the total weight of the
    hop-count-shortest path (ties broken by maximum total weight)
    divided by its edge count; the sum is normalized by node_count - 1.
    """
    adjacency: dict[int, list[tuple[int, float]]] = {}
    for (u, v), w in edges.items():
        adjacency.setdefault(u, []).append((v, w))
    out = np.zeros(node_count)
    if node_count < 2:
        return out
    for source in range(node_count):
        dist = {source: 0}
        best = {source: 0.0}
        frontier = [source]
        total = 0.0
        while frontier:
            nxt: list[int] = []
            layer_best: dict[int, float] = {}
            for u in frontier:
                for v, w in adjacency.get(u, ()):
                    if v in dist:
                        continue
                    cand = best[u] + w
                    if v not in layer_best or cand > layer_best[v]:
                        layer_best[v] = cand
            depth = dist[frontier[0]] + 1
            for v, weight in layer_best.items():
                dist[v] = depth
                best[v] = weight
                total += weight / depth
                nxt.append(v)
            frontier = nxt
        out[source] = total / (node_count - 1)
    return out


def lrc(graph: ExplanationGraph, node: int) -> float:
    """Centrality of one node; terminals always score 0 (no outgoing edges)."""
    return float(lrc_scores(graph.node_count, graph.edges)[node])


@dataclass
class PredicateRanking:
    """Seed-averaged centralities, ordered descending with deterministic ties."""

    order: list[int]
    mean_lrc: np.ndarray
    per_seed: np.ndarray  # (n_seeds, n_predicates)
    seeds: list[int]


def aggregate_seeds(graphs: Sequence[ExplanationGraph], pset: PredicateSet) -> PredicateRanking:
    """Average per-seed LRC over all predicates; absent evidence counts as 0."""
    if not graphs:
        raise ConfigError("at least one per-seed graph is required")
    n_pred = len(pset)
    per_seed = np.zeros((len(graphs), n_pred))
    for s, graph in enumerate(graphs):
        if graph.n_predicates != n_pred:
            raise ConfigError("graphs disagree on the predicate count")
        per_seed[s] = lrc_scores(graph.node_count, graph.edges)[:n_pred]
    mean = per_seed.mean(axis=0)
    order = sorted(range(n_pred), key=lambda j: (-mean[j], j))
    return PredicateRanking(
        order=order, mean_lrc=mean, per_seed=per_seed, seeds=[g.seed for g in graphs]
    )


def zone_ranking(
    ranking: PredicateRanking, pset: PredicateSet, zone_names: Sequence[str]
) -> list[tuple[str, bool]]:
    """Zone order by first occurrence in the predicate ranking.

    Only predicates with positive mean centrality count as evidence;
    zones without any are appended last, in config order, flagged
    unranked (False).
    """
    seen: list[str] = []
    for j in ranking.order:
        if ranking.mean_lrc[j] <= 0.0:
            continue
        name = pset.predicates[j].zone_name
        if name not in seen:
            seen.append(name)
    ranked = [(name, True) for name in seen]
    ranked.extend((name, False) for name in zone_names if name not in seen)
    return ranked


def node_label(node: int, pset: PredicateSet) -> str:
    if node < len(pset):
        return pset.predicates[node].label
    return f"Class_{node - len(pset)}"


def to_dot(graph: ExplanationGraph, pset: PredicateSet) -> str:
    """DOT text with predicate labels at 2 decimals and weights at 4."""
    lines = ["digraph explanation {"]
    used = sorted({n for e in graph.edges for n in e})
    for node in used:
        lines.append(f'  n{node} [label="{node_label(node, pset)}"];')
    for (u, v), w in sorted(graph.edges.items()):
        lines.append(f'  n{u} -> n{v} [label="{w:.4f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json(graph: ExplanationGraph, pset: PredicateSet) -> str:
    """Lossless JSON twin of the DOT export."""
    payload = {
        "seed": graph.seed,
        "nodes": [
            {"id": i, "label": node_label(i, pset)} for i in range(graph.node_count)
        ],
        "edges": [
            {"source": u, "target": v, "weight": w}
            for (u, v), w in sorted(graph.edges.items())
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def ranking_csv(ranking: PredicateRanking, pset: PredicateSet) -> str:
    header = "rank,predicate,zone,direction,tau,lrc_mean," + ",".join(
        f"lrc_seed_{i + 1}" for i in range(len(ranking.seeds))
    )
    lines = [header]
    for rank, j in enumerate(ranking.order, start=1):
        pred = pset.predicates[j]
        per_seed = ",".join(_fmt(v) for v in ranking.per_seed[:, j])
        lines.append(
            f'{rank},"{pred.label}",{pred.zone_name},{pred.direction},'
            f"{_fmt(pred.tau)},{_fmt(ranking.mean_lrc[j])},{per_seed}"
        )
    return "\n".join(lines) + "\n"


def zone_ranking_csv(zones: list[tuple[str, bool]]) -> str:
    lines = ["rank,zone,status"]
    for rank, (name, ranked) in enumerate(zones, start=1):
        lines.append(f"{rank},{name},{'ranked' if ranked else 'unranked'}")
    return "\n".join(lines) + "\n"
