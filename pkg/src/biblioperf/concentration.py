"""Inequality measures over populations of nonnegative scores.

The headline statistic is the sample Gini coefficient with the
small-sample correction factor n/(n-1), clamped to [0, 1].  All-zero
populations have no defined inequality and are reported as degenerate
(``None``) rather than erroring, so bulk reports never abort on an
empty unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INEQUALITY_CLASSES = ("low", "moderate", "high", "very_high")

LEVELS = ("national_sds", "university_sds", "uda")


def _checked(values) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    if a.ndim != 1:
        raise ValueError("values must be one-dimensional")
    if np.any(a < 0):
        raise ValueError("values must be nonnegative")
    return a


def gini_adjusted(values) -> float | None:
    """Small-sample-adjusted Gini coefficient, or None when all values are 0.

    Computed from the sorted-index identity
    ``G = 2*sum(k*x_(k)) / (n*sum(x)) - (n+1)/n``, then multiplied by
    n/(n-1) and clamped to [0, 1].
    """
    a = _checked(values)
    n = a.size
    if n < 2:
        raise ValueError("gini requires at least 2 values")
    total = float(a.sum())
    if total == 0:
        return None
    x = np.sort(a)
    ranks = np.arange(1, n + 1, dtype=float)
    g = 2.0 * float(np.dot(ranks, x)) / (n * total) - (n + 1) / n
    g *= n / (n - 1)
    return min(1.0, max(0.0, g))


def lorenz_curve(values) -> list[tuple[float, float]]:
    """Cumulative-share curve points (population fraction, score fraction).

    n+1 points from (0, 0) to (1, 1), values sorted ascending.
    """
    a = _checked(values)
    n = a.size
    if n < 1:
        raise ValueError("lorenz curve requires at least 1 value")
    total = float(a.sum())
    if total == 0:
        raise ValueError("lorenz curve undefined for zero total")
    shares = np.cumsum(np.sort(a)) / total
    points = [(0.0, 0.0)]
    points.extend(((k + 1) / n, float(shares[k])) for k in range(n))
    return points


def _tail_mass(sorted_asc: np.ndarray, person_count: float, from_top: bool) -> float:
    """Cumulative score held by a fractional number of people at one tail."""
    x = sorted_asc[::-1] if from_top else sorted_asc
    whole = int(math.floor(person_count))
    frac = person_count - whole
    mass = float(x[:whole].sum())
    if frac > 0 and whole < x.size:
        mass += frac * float(x[whole])
    return mass


def bottom_top_ratio(values, bottom: float = 0.4, top: float = 0.2) -> float | None:
    """Cumulative score of the poorest `bottom` fraction over the richest `top`.

    Fractional person counts are resolved linearly along the sorted
    distribution (equivalent to linear interpolation of the Lorenz
    curve).  Returns None when the top share holds nothing.
    """
    a = _checked(values)
    n = a.size
    if n < 5:
        raise ValueError("quantile-share ratio requires at least 5 values")
    if bottom < 0 or top <= 0 or bottom + top > 1:
        raise ValueError(f"invalid quantile fractions bottom={bottom}, top={top}")
    if float(a.sum()) == 0:
        return None
    x = np.sort(a)
    bottom_mass = _tail_mass(x, bottom * n, from_top=False)
    top_mass = _tail_mass(x, top * n, from_top=True)
    if top_mass <= 0:
        return None
    return bottom_mass / top_mass


def classify_inequality(gini: float) -> str:
    """Class label for a Gini value; boundaries are lower-inclusive."""
    if not (0 <= gini <= 1):
        raise ValueError(f"gini {gini} outside [0, 1]")
    if gini < 0.50:
        return "low"
    if gini < 0.60:
        return "moderate"
    if gini < 0.70:
        return "high"
    return "very_high"


def weighted_mean_gini(per_sds_gini: dict, staff: dict) -> float:
    """Staff-weighted mean of per-sector Gini coefficients."""
    if not per_sds_gini:
        raise ValueError("empty gini map")
    if set(per_sds_gini) != set(staff):
        raise ValueError("gini and staff maps must share the same keys")
    total = sum(staff.values())
    if total <= 0:
        raise ValueError("total staff must be positive")
    return sum(g * staff[k] for k, g in per_sds_gini.items()) / total


@dataclass
class ConcentrationSummary:
    """Inequality profile of one population of scores."""

    key: tuple[str, ...]
    uda_id: str
    n: int
    gini: float | None
    lorenz: list[tuple[float, float]] | None
    bottom40_top20_ratio: float | None
    inequality_class: str | None

    @property
    def label(self) -> str:
        return "|".join(self.key)


def summarize(key: tuple[str, ...], uda_id: str, values) -> ConcentrationSummary:
    """Full inequality profile; degenerate pieces come back as None."""
    a = _checked(values)
    n = a.size
    total = float(a.sum())
    gini = gini_adjusted(a) if n >= 2 else None
    ratio = bottom_top_ratio(a) if n >= 5 else None
    lorenz = lorenz_curve(a) if total > 0 else None
    cls = classify_inequality(gini) if gini is not None else None
    return ConcentrationSummary(key, uda_id, n, gini, lorenz, ratio, cls)


def concentration_report(table, level: str, indicator: str, min_staff: int = 5) -> list[ConcentrationSummary]:
    """One summary per population at the requested level.

    Levels:
      * ``national_sds``   -- all researchers of a sector, nationwide;
      * ``university_sds`` -- a university's researchers in one sector
        (populations below min_staff are omitted);
      * ``uda``            -- a university's researchers pooled over an
        area's sectors (min_staff applied to the pooled count).
    """
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    values = table.researcher_values(indicator)

    groups: dict[tuple[tuple[str, ...], str], list[float]] = {}
    for rid, (university_id, sds_id, uda_id) in table.membership.items():
        if level == "national_sds":
            key = (sds_id,)
        elif level == "university_sds":
            key = (university_id, sds_id)
        else:
            key = (university_id, uda_id)
        groups.setdefault((key, uda_id), []).append(values[rid])

    summaries = []
    for (key, uda), scores in sorted(groups.items()):
        if level != "national_sds" and len(scores) < min_staff:
            continue
        summaries.append(summarize(key, uda, scores))
    return summaries


@dataclass(frozen=True)
class UdaConcentrationStats:
    uda_id: str
    populations: int
    weighted_mean_gini: float | None
    min: float | None
    max: float | None
    median: float | None
    std: float | None


def uda_descriptive_stats(summaries: list[ConcentrationSummary]) -> list[UdaConcentrationStats]:
    """Per-area rollup of population Ginis, weighted by population size.

    Degenerate populations count toward the population total but are
    excluded from the statistics.
    """
    by_uda: dict[str, list[ConcentrationSummary]] = {}
    for s in summaries:
        by_uda.setdefault(s.uda_id, []).append(s)

    rows = []
    for uda_id, group in sorted(by_uda.items()):
        defined = [(s.gini, s.n) for s in group if s.gini is not None]
        if defined:
            ginis = np.array([g for g, _ in defined])
            weights = np.array([n for _, n in defined], dtype=float)
            wmean = float(np.dot(ginis, weights) / weights.sum())
            std = float(np.std(ginis, ddof=1)) if ginis.size >= 2 else None
            rows.append(
                UdaConcentrationStats(
                    uda_id,
                    len(group),
                    wmean,
                    float(ginis.min()),
                    float(ginis.max()),
                    float(np.median(ginis)),
                    std,
                )
            )
        else:
            rows.append(UdaConcentrationStats(uda_id, len(group), None, None, None, None, None))
    return rows
