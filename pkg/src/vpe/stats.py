"""Rank correlation and inter-annotator agreement statistics.

Implemented from the textbook definitions with no numerics dependencies:

    Spearman rho     Pearson correlation of average ranks (ties share the
                     mean of the rank positions they occupy).
    Cohen kappa      (po - pe) / (1 - pe), pe from the product of the two
                     raters' label marginals.
    Krippendorff     alpha = 1 - Do/De over the coincidence matrix, for
    alpha            nominal or interval value domains; tolerates missing
                     cells.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Hashable, Optional, Sequence

from .errors import VpeError


class StatsError(VpeError):
    """Input does not satisfy the statistic's requirements."""


def _average_ranks(xs: Sequence[float]) -> list[float]:
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    ranks = [0.0] * len(xs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def _pearson(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxx = sum((v - mx) ** 2 for v in x)
    syy = sum((v - my) ** 2 for v in y)
    if sxx == 0.0 or syy == 0.0:
        return None
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    return sxy / math.sqrt(sxx * syy)


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Spearman rank correlation; None when undefined (a constant input)."""
    if len(x) != len(y):
        raise StatsError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise StatsError("need at least two paired scores")
    for seq in (x, y):
        if any(not math.isfinite(v) for v in seq):
            raise StatsError("scores must be finite")
    return _pearson(_average_ranks(x), _average_ranks(y))


def cohen_kappa(a: Sequence[Hashable], b: Sequence[Hashable]) -> float:
    """Agreement between two raters over nominal labels.

    Degenerate convention: when both raters use a single identical label
    (pe = po = 1), kappa is 1.
    """
    if len(a) != len(b):
        raise StatsError(f"length mismatch: {len(a)} vs {len(b)}")
    n = len(a)
    if n == 0:
        raise StatsError("empty input")
    po = sum(1 for ai, bi in zip(a, b) if ai == bi) / n
    pa = Counter(a)
    pb = Counter(b)
    pe = sum((pa[label] / n) * (pb[label] / n) for label in pa)
    if pe == 1.0:
        return 1.0
    return (po - pe) / (1.0 - pe)


def _nominal_delta(c, k) -> float:
    return 0.0 if c == k else 1.0


def _interval_delta(c, k) -> float:
    return (float(c) - float(k)) ** 2


_DELTAS = {"nominal": _nominal_delta, "interval": _interval_delta}

MISSING = None


def krippendorff_alpha(
    data: Sequence[Sequence[Optional[Hashable]]], metric: str = "nominal"
) -> float:
    """Agreement among any number of raters with optional missing cells.

    ``data`` is raters x items; ``None`` marks a missing rating. Items rated
    by fewer than two raters are excluded. Perfect agreement returns exactly
    1.0 (De = 0 can only occur when every pairable value is identical).
    """
    if metric not in _DELTAS:
        raise StatsError(f"metric must be one of {sorted(_DELTAS)}, got {metric!r}")
    delta = _DELTAS[metric]
    if len(data) < 2:
        raise StatsError("need at least two raters")
    n_items = {len(row) for row in data}
    if len(n_items) > 1:
        raise StatsError("all rater rows must have the same length")

    units = []
    for item in range(n_items.pop() if n_items else 0):
        values = [row[item] for row in data if row[item] is not MISSING]
        if len(values) >= 2:
            units.append(values)
    if not units:
        raise StatsError("insufficient overlap: no item carries two or more ratings")

    coincidence: Counter = Counter()
    for values in units:
        m = len(values)
        for i, vi in enumerate(values):
            for j, vj in enumerate(values):
                if i != j:
                    coincidence[(vi, vj)] += 1.0 / (m - 1)
    n_total = sum(len(values) for values in units)

    marginals: Counter = Counter()
    for (c, _k), w in coincidence.items():
        marginals[c] += w

    d_observed = sum(w * delta(c, k) for (c, k), w in coincidence.items()) / n_total
    d_expected = sum(
        marginals[c] * marginals[k] * delta(c, k)
        for c in marginals
        for k in marginals
    ) / (n_total * (n_total - 1))

    if d_expected == 0.0:
        return 1.0
    return 1.0 - d_observed / d_expected
