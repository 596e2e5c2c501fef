"""Within- versus between-university variability and its inference.

Three analyses live here: coefficient-of-variation comparisons of
individual scores inside each university against university-level
scores across them; rank correlation between a university's average
performance and how concentrated that performance is; and a stratified
permutation test asking whether top-decile universities are less
concentrated than bottom-decile ones, combined across areas with the
Fisher statistic -2*sum(ln p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .concentration import ConcentrationSummary
from .scoring import ScoreTable, _indicator_attr


def coefficient_of_variation(values) -> float | None:
    """Sample standard deviation over mean, as a percentage.

    Uses the n-1 denominator.  Returns None (degenerate) when the mean
    is zero.
    """
    a = np.asarray(values, dtype=float)
    if a.size < 2:
        raise ValueError("coefficient of variation requires at least 2 values")
    mean = float(a.mean())
    if mean == 0:
        return None
    return 100.0 * float(a.std(ddof=1)) / mean


@dataclass
class VariabilityReport:
    uda_id: str
    cv_within: dict[str, float | None]  # university -> CV% of member scores
    cv_between: float | None            # CV% of university-level scores
    summary: tuple[float, float, float] | None  # (min, max, median) of defined CVs


def variability_report(table: ScoreTable, uda_id: str, indicator: str, min_staff: int = 5) -> VariabilityReport:
    """Per-university CV of individual scores vs CV across universities.

    Only universities with at least min_staff researchers in the
    area's sectors qualify; the between-value is the CV of those same
    universities' area-level scores.
    """
    attr = _indicator_attr(indicator)
    values = table.researcher_values(indicator)

    members: dict[str, list[float]] = {}
    for rid, (university_id, _, uda) in table.membership.items():
        if uda == uda_id:
            members.setdefault(university_id, []).append(values[rid])

    cv_within: dict[str, float | None] = {}
    for university_id, scores in sorted(members.items()):
        if len(scores) < min_staff:
            continue
        cv_within[university_id] = coefficient_of_variation(scores)

    between_scores = [
        getattr(table.uda_scores[(u, uda_id)], attr)
        for u in cv_within
        if (u, uda_id) in table.uda_scores
    ]
    cv_between = coefficient_of_variation(between_scores) if len(between_scores) >= 2 else None

    defined = sorted(v for v in cv_within.values() if v is not None)
    summary = None
    if defined:
        summary = (defined[0], defined[-1], float(np.median(defined)))
    return VariabilityReport(uda_id, cv_within, cv_between, summary)


def spearman(x, y) -> tuple[float | None, float | None]:
    """Rank correlation with average-rank ties; two-sided p via the t approximation.

    Returns (None, None) when either vector is constant.
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.size != ya.size:
        raise ValueError("x and y must have equal length")
    n = xa.size
    if n < 5:
        raise ValueError("spearman requires at least 5 points")
    rx = sps.rankdata(xa, method="average")
    ry = sps.rankdata(ya, method="average")
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = math.sqrt(float(np.dot(dx, dx)) * float(np.dot(dy, dy)))
    if denom == 0:
        return None, None
    rho = float(np.dot(dx, dy)) / denom
    if abs(rho) >= 1.0:
        return (1.0 if rho > 0 else -1.0), 0.0
    t = rho * math.sqrt((n - 2) / (1 - rho * rho))
    p = 2.0 * float(sps.t.sf(abs(t), df=n - 2))
    return rho, p


def decile_split(
    scores: dict[str, float], top_frac: float = 0.1, bottom_frac: float = 0.1
) -> tuple[set[str], set[str]]:
    """Top and bottom performance groups, sizes ceil(frac * n).

    Ranking is by score descending with ties broken by ascending id;
    errors when the two groups would overlap.
    """
    n = len(scores)
    if n < 2:
        raise ValueError("decile split requires at least 2 scored universities")
    k_top = math.ceil(top_frac * n)
    k_bottom = math.ceil(bottom_frac * n)
    if k_top + k_bottom > n:
        raise ValueError(
            f"groups of {k_top} and {k_bottom} overlap in a population of {n}"
        )
    order = sorted(scores, key=lambda u: (-scores[u], u))
    return set(order[:k_top]), set(order[n - k_bottom:])


@dataclass
class NpcResult:
    per_stratum_p: dict[str, float]
    combined_statistic: float
    combined_p: float
    permutations: int
    seed: int


def npc_test(per_uda_groups: dict, permutations: int = 10_000, seed: int = 0) -> NpcResult:
    """Stratified one-sided permutation test with Fisher combination.

    Each stratum tests mean(bottom Ginis) - mean(top Ginis) > 0 by
    relabeling values within the stratum, group sizes fixed.  The
    replicate randomness for stratum index s comes from the stream
    seeded with (seed, s); replicate b always uses row b of that
    stream, so replicates are synchronized across strata and results
    do not depend on evaluation order.  The observed labeling joins
    the permutation pool, which makes every p-value the add-one
    estimator (b+1)/(B+1) and bounds it away from zero.
    """
    if permutations < 100:
        raise ValueError("at least 100 permutations required")
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    if not per_uda_groups:
        raise ValueError("no strata supplied")

    strata = sorted(per_uda_groups)
    b_plus_1 = permutations + 1
    # log partial p-values for the observed row and every replicate row
    log_p = np.zeros((b_plus_1, len(strata)))
    per_stratum_p: dict[str, float] = {}

    for si, stratum in enumerate(strata):
        top, bottom = per_uda_groups[stratum]
        top = np.asarray(top, dtype=float)
        bottom = np.asarray(bottom, dtype=float)
        if top.size == 0 or bottom.size == 0:
            raise ValueError(f"stratum {stratum!r}: empty group")
        pooled = np.concatenate([top, bottom])
        g = top.size

        observed = float(bottom.mean() - top.mean())
        rng = np.random.default_rng((seed, si))
        order = np.argsort(rng.random((permutations, pooled.size)), axis=1)
        shuffled = pooled[order]
        stat = shuffled[:, g:].mean(axis=1) - shuffled[:, :g].mean(axis=1)

        all_stats = np.concatenate(([observed], stat))
        ranked = np.sort(all_stats)
        # count of pool members >= each value, self included
        count_ge = b_plus_1 - np.searchsorted(ranked, all_stats, side="left")
        p_rows = count_ge / b_plus_1
        per_stratum_p[stratum] = float(p_rows[0])
        log_p[:, si] = np.log(p_rows)

    t_rows = -2.0 * log_p.sum(axis=1)
    combined_statistic = float(t_rows[0])
    combined_p = float(np.count_nonzero(t_rows >= combined_statistic)) / b_plus_1
    return NpcResult(per_stratum_p, combined_statistic, combined_p, permutations, seed)


# ---------------------------------------------------------------------------
# Report assembly over score tables and concentration summaries
# ---------------------------------------------------------------------------

def _university_ginis_by_uda(summaries: list[ConcentrationSummary]) -> dict[str, dict[str, float]]:
    """uda -> {university -> gini}, degenerate populations dropped."""
    out: dict[str, dict[str, float]] = {}
    for s in summaries:
        if s.gini is None:
            continue
        university_id, uda_id = s.key
        out.setdefault(uda_id, {})[university_id] = s.gini
    return out


@dataclass(frozen=True)
class CorrelationRow:
    uda_id: str
    indicator: str
    n: int
    rho: float | None
    p_value: float | None


def correlation_report(
    table: ScoreTable, uda_summaries: dict[str, list[ConcentrationSummary]]
) -> list[CorrelationRow]:
    """Rank correlation of university performance against its concentration.

    One row per (area, indicator) plus a pooled ``__global__`` row per
    indicator; areas with fewer than 5 comparable universities are
    reported with degenerate correlations.
    """
    rows = []
    for indicator, summaries in sorted(uda_summaries.items()):
        attr = _indicator_attr(indicator)
        ginis = _university_ginis_by_uda(summaries)
        global_perf: list[float] = []
        global_gini: list[float] = []
        for uda_id in sorted(ginis):
            perf = []
            gini = []
            for university_id, g in sorted(ginis[uda_id].items()):
                score = table.uda_scores.get((university_id, uda_id))
                if score is None:
                    continue
                perf.append(getattr(score, attr))
                gini.append(g)
            global_perf.extend(perf)
            global_gini.extend(gini)
            if len(perf) >= 5:
                rho, p = spearman(perf, gini)
            else:
                rho, p = None, None
            rows.append(CorrelationRow(uda_id, indicator, len(perf), rho, p))
        if len(global_perf) >= 5:
            rho, p = spearman(global_perf, global_gini)
        else:
            rho, p = None, None
        rows.append(CorrelationRow("__global__", indicator, len(global_perf), rho, p))
    return rows


@dataclass(frozen=True)
class TopBottomRow:
    uda_id: str
    indicator: str
    group_size: int
    top_mean_gini: float
    bottom_mean_gini: float


def decile_groups(
    table: ScoreTable,
    uda_summaries: dict[str, list[ConcentrationSummary]],
    top_frac: float = 0.1,
    bottom_frac: float = 0.1,
) -> dict[str, dict[str, tuple[list[float], list[float]]]]:
    """indicator -> uda -> (top-group Ginis, bottom-group Ginis).

    Universities qualify when they carry both a defined Gini and an
    area-level score; areas where a split is impossible are skipped.
    """
    out: dict[str, dict[str, tuple[list[float], list[float]]]] = {}
    for indicator, summaries in sorted(uda_summaries.items()):
        attr = _indicator_attr(indicator)
        ginis = _university_ginis_by_uda(summaries)
        per_uda: dict[str, tuple[list[float], list[float]]] = {}
        for uda_id in sorted(ginis):
            scores = {
                u: getattr(table.uda_scores[(u, uda_id)], attr)
                for u in ginis[uda_id]
                if (u, uda_id) in table.uda_scores
            }
            if len(scores) < 2:
                continue
            top, bottom = decile_split(scores, top_frac, bottom_frac)
            per_uda[uda_id] = (
                [ginis[uda_id][u] for u in sorted(top)],
                [ginis[uda_id][u] for u in sorted(bottom)],
            )
        out[indicator] = per_uda
    return out


def top_bottom_report(
    table: ScoreTable,
    uda_summaries: dict[str, list[ConcentrationSummary]],
    top_frac: float = 0.1,
    bottom_frac: float = 0.1,
) -> list[TopBottomRow]:
    """Mean concentration of top- versus bottom-decile universities per area."""
    rows = []
    groups = decile_groups(table, uda_summaries, top_frac, bottom_frac)
    for indicator, per_uda in sorted(groups.items()):
        for uda_id, (top_ginis, bottom_ginis) in sorted(per_uda.items()):
            rows.append(
                TopBottomRow(
                    uda_id,
                    indicator,
                    len(top_ginis),
                    float(np.mean(top_ginis)),
                    float(np.mean(bottom_ginis)),
                )
            )
    return rows
