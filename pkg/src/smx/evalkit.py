"""Explanation-quality harness: top-k masking faithfulness, domain
alignment, simplicity, rank-biased overlap instability, a permutation
feature importance baseline and exact Wilcoxon signed-rank testing.

Curves map depths 1..k onto the unit interval for their AUC, so a
constant curve of value v has AUC v regardless of depth.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .engine import impact_continuous, impact_probabilistic
from .errors import ConfigError, PipelineError
from .models import CONTINUOUS


@dataclass
class EvalCurve:
    x: list[int]
    y: list[float]
    auc: float


def trapezoid_auc(y: Sequence[float]) -> float:
    """Trapezoidal integral of y over depths rescaled to [0, 1]."""
    y = [float(v) for v in y]
    if not y:
        raise ConfigError("cannot integrate an empty curve")
    if len(y) == 1:
        return y[0]
    total = sum((a + b) / 2.0 for a, b in zip(y, y[1:]))
    return total / (len(y) - 1)


def make_curve(y: Sequence[float]) -> EvalCurve:
    y = [float(v) for v in y]
    return EvalCurve(x=list(range(1, len(y) + 1)), y=y, auc=trapezoid_auc(y))


def faithfulness_curve(
    model,
    X_test: np.ndarray,
    zone_order: Sequence[str],
    zone_sets: Mapping[str, np.ndarray],
    k_max: int | None = None,
) -> EvalCurve:
    """Impact of cumulatively zero-masking the top-k ranked zones.

    Masking happens in the preprocessed space the model was trained on;
    the impact metric follows the model kind (mean absolute output
    difference, or mean absolute probability shift).
    """
    if not zone_order:
        raise ConfigError("zone ranking is empty")
    for name in zone_order:
        if name not in zone_sets:
            raise ConfigError(f"ranked zone '{name}' is not in the zone config")
    X = np.asarray(X_test, dtype=float)
    depth = len(zone_order) if k_max is None else min(int(k_max), len(zone_order))
    if model.kind == CONTINUOUS:
        base = model.predict(X)
        impact = impact_continuous
        query = model.predict
    else:
        base = model.predict_proba(X)
        impact = impact_probabilistic
        query = model.predict_proba
    masked = X.copy()
    ys = []
    for k in range(depth):
        masked[:, np.asarray(zone_sets[zone_order[k]], dtype=int)] = 0.0
        ys.append(impact(base, query(masked)))
    return make_curve(ys)


def agreement_curve(zone_order: Sequence[str], plausible: set[str]) -> EvalCurve:
    """Cumulative fraction of top-k zones that are expert-plausible."""
    if not zone_order:
        raise ConfigError("zone ranking is empty")
    hits = 0
    ys = []
    for k, name in enumerate(zone_order, start=1):
        hits += 1 if name in plausible else 0
        ys.append(hits / k)
    return make_curve(ys)


def simplicity_curve(importances: Sequence[float], top_n: int = 20) -> EvalCurve:
    """Cumulative share of total importance held by the k largest entries.

    Shorter importance vectors are padded with zeros so curves from
    different methods are comparable at the same depth.
    """
    v = np.asarray(importances, dtype=float)
    if v.size == 0:
        raise ConfigError("importances are empty")
    if np.any(v < 0):
        raise ConfigError("importances must be non-negative")
    total = float(v.sum())
    if total <= 0:
        raise ConfigError("importances sum to zero; nothing to normalize")
    shares = np.sort(v)[::-1] / total
    if shares.size < top_n:
        shares = np.concatenate([shares, np.zeros(top_n - shares.size)])
    ys = np.cumsum(shares[:top_n])
    return make_curve(ys)


def rbo(list_a: Sequence, list_b: Sequence, rho: float = 0.7, depth: int = 20) -> float:
    """Extrapolated rank-biased overlap truncated at ``depth``.

    1.0 for identical rankings, 0.0 for disjoint ones; 1 - rbo is the
    instability score used by the stability study.
    """
    if not (0.0 < rho < 1.0):
        raise ConfigError("rbo rho must be in (0, 1)")
    if depth < 1:
        raise ConfigError("rbo depth must be >= 1")
    a = list(list_a)
    b = list(list_b)
    if len(set(a)) != len(a) or len(set(b)) != len(b):
        raise ConfigError("rbo inputs must not contain duplicate items")
    if not a or not b:
        return 0.0
    k = min(depth, max(len(a), len(b)))
    seen_a: set = set()
    seen_b: set = set()
    overlap = 0
    weighted = 0.0
    x_k = 0
    for d in range(1, k + 1):
        if d <= len(a):
            item = a[d - 1]
            if item in seen_b:
                overlap += 1
            seen_a.add(item)
        if d <= len(b):
            item = b[d - 1]
            if item in seen_a:
                overlap += 1
            seen_b.add(item)
        weighted += (overlap / d) * rho**d
        x_k = overlap
    return (x_k / k) * rho**k + (1.0 - rho) / rho * weighted


def variable_zone_ranking(
    importances: Sequence[float],
    zone_sets: Mapping[str, np.ndarray],
    zone_names: Sequence[str],
) -> list[tuple[str, bool]]:
    """Collapse variable-level importances into a ranked zone list.

    Variables are visited in descending importance (ties by lower index)
    and each zone keeps its first occurrence; zones whose variables all
    score zero are appended last, in config order, flagged unranked.
    """
    v = np.asarray(importances, dtype=float)
    var_zone: dict[int, str] = {}
    for name in zone_names:
        for j in np.asarray(zone_sets[name], dtype=int):
            var_zone[int(j)] = name
    seen: list[str] = []
    for j in np.argsort(-v, kind="stable"):
        if v[j] <= 0.0:
            continue
        name = var_zone.get(int(j))
        if name is not None and name not in seen:
            seen.append(name)
    ranked = [(name, True) for name in seen]
    ranked.extend((name, False) for name in zone_names if name not in seen)
    return ranked


@dataclass
class StabilityResult:
    instabilities: list[float]  # one value per seed pair
    median: float


def stability_study(
    runner: Callable[[int], Sequence],
    seeds: Sequence[int],
    rho: float = 0.7,
    depth: int = 20,
) -> StabilityResult:
    """Rerun an explainer per seed and score all pairwise 1 - rbo values."""
    if len(seeds) < 2:
        raise ConfigError("stability study needs at least 2 seeds")
    rankings = [list(runner(int(s))) for s in seeds]
    values = []
    for i in range(len(rankings)):
        for j in range(i + 1, len(rankings)):
            values.append(1.0 - rbo(rankings[i], rankings[j], rho=rho, depth=depth))
    return StabilityResult(instabilities=values, median=float(np.median(values)))


def pfi(model, X_test: np.ndarray, repeats: int = 10, seed: int = 0) -> np.ndarray:
    """Permutation feature importance from prediction shift.

    Per variable, the impact between intact predictions and predictions
    with that column permuted, averaged over seeded repeats. Each
    (seed, repeat, variable) triple keys its own generator, so results
    are independent of evaluation order.
    """
    X = np.asarray(X_test, dtype=float)
    m, p = X.shape
    if model.kind == CONTINUOUS:
        base = model.predict(X)
        impact = impact_continuous
        query = model.predict
    else:
        base = model.predict_proba(X)
        impact = impact_probabilistic
        query = model.predict_proba
    out = np.zeros(p)
    work = X.copy()
    for j in range(p):
        acc = 0.0
        column = X[:, j].copy()
        for r in range(repeats):
            rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), r, j)))
            work[:, j] = column[rng.permutation(m)]
            acc += impact(base, query(work))
        work[:, j] = column
        out[j] = acc / repeats
    return out


@dataclass
class WilcoxonResult:
    statistic: float
    p_value: float
    p_exact: Fraction
    n: int


def wilcoxon_signed_rank(diffs: Sequence[float]) -> WilcoxonResult:
    """Exact two-sided Wilcoxon signed-rank test for small samples.

    Zero differences are dropped; |differences| get average ranks on
    ties. W = min(W+, W-) and the p-value is the exact two-sided tail
    over all 2^n equiprobable sign assignments of the observed rank
    multiset (doubling the one-sided tail, capped at 1).
    """
    d = np.asarray(diffs, dtype=float)
    if d.size == 0 or not np.all(np.isfinite(d)):
        raise ConfigError("differences must be a non-empty finite sequence")
    d = d[d != 0.0]
    if d.size == 0:
        raise PipelineError("degenerate sample: all differences are zero")
    n = int(d.size)
    if n < 4:
        raise ConfigError(f"need at least 4 nonzero differences, got {n}")
    if n > 25:
        raise ConfigError(f"exact test supports at most 25 differences, got {n}")
    ranks = rankdata(np.abs(d))
    # average ranks over integer tie runs are multiples of 1/2
    doubled = np.rint(ranks * 2).astype(np.int64)
    w_plus = int(doubled[d > 0].sum())
    w_minus = int(doubled[d < 0].sum())
    w_obs = min(w_plus, w_minus)

    # distribution of 2*W+ over sign assignments, by exact counting
    max_sum = int(doubled.sum())
    counts = [0] * (max_sum + 1)
    counts[0] = 1
    for r in doubled:
        r = int(r)
        for s in range(max_sum, r - 1, -1):
            if counts[s - r]:
                counts[s] += counts[s - r]
    tail = sum(counts[: w_obs + 1])
    p = Fraction(2 * tail, 2**n)
    if p > 1:
        p = Fraction(1)
    return WilcoxonResult(
        statistic=w_obs / 2.0, p_value=float(p), p_exact=p, n=n
    )
